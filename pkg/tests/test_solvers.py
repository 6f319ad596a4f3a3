"""Solver behavior: closed-form steps, monotonicity, caches, determinism."""

import numpy as np
import pytest

from hofm.backend import impl
from hofm.model import predict_many
from hofm.solvers import (
    DivergenceError,
    TrainConfig,
    TrainState,
    adagrad_epoch,
    cd_epoch,
    fit,
    fit_linear_cd,
    objective,
)
from hofm.sparse import SampleMatrix, SparseVector


def random_problem(rng, n, d, density=0.3):
    X = rng.normal(size=(n, d)) * (rng.random((n, d)) < density)
    # keep at least one nonzero per row so no sample is trivially empty
    for i in range(n):
        if not X[i].any():
            X[i, rng.integers(d)] = rng.normal()
    y = rng.normal(size=n)
    return SampleMatrix.from_dense(X), y


# ---------------------------------------------------------------------------
# Closed-form steps
# ---------------------------------------------------------------------------

def test_cd_single_coordinate_exact_minimizer():
    # one sample, one feature, degree-1 kernel: first step lands on the optimum
    P = np.zeros((1, 1))
    y = np.array([1.0])
    y_hat = np.zeros(1)
    indptr = np.array([0, 1], dtype=np.int64)
    rows = np.array([0], dtype=np.int64)
    vals = np.array([1.0])
    avals = np.empty((1, 2))
    dvals = np.empty((1, 2))
    impl.rebuild_anova_caches(P[:, 0].copy(), 1, indptr, rows, vals, avals, dvals)
    impl.cd_epoch_anova(P, 0, 1, indptr, rows, vals, y, y_hat, avals, dvals,
                        0, 1.0, 0.0)
    assert P[0, 0] == pytest.approx(1.0)
    assert y_hat[0] == pytest.approx(1.0)


def test_fit_linear_cd_without_bias():
    X = SampleMatrix.from_dense([[1.0]])
    w, bias = fit_linear_cd(np.zeros(1), None, X, np.array([1.0]), beta=0.0)
    assert bias is None
    np.testing.assert_allclose(w, [1.0])


def test_fit_linear_cd_bias_is_mean():
    X = SampleMatrix.from_rows(
        [SparseVector(1, np.array([], int), np.array([]))] * 2)
    w, bias = fit_linear_cd(np.zeros(1), 0.0, X, np.array([1.0, 3.0]))
    assert bias == pytest.approx(2.0)
    np.testing.assert_allclose(w, [0.0])


def test_empty_feature_column_decays_to_zero():
    # feature 1 appears in no sample: one CD pass pulls it exactly to 0
    X = SampleMatrix.from_dense([[1.0, 0.0], [2.0, 0.0]])
    config = TrainConfig(degree=2, rank=2, beta=0.5, epochs=1, seed=3, tol=0.0)
    state = TrainState(X, np.array([1.0, -1.0]), config)
    assert np.all(state.model.factors[0][1] != 0.0)
    cd_epoch(state, degree=2)
    assert np.all(state.model.factors[0][1] == 0.0)
    # without regularization the coordinate is skipped instead
    config0 = TrainConfig(degree=2, rank=2, beta=0.0, epochs=1, seed=3, tol=0.0)
    state0 = TrainState(X, np.array([1.0, -1.0]), config0)
    before = state0.model.factors[0][1].copy()
    cd_epoch(state0, degree=2)
    np.testing.assert_array_equal(state0.model.factors[0][1], before)


def test_adagrad_single_step_arithmetic():
    # g = 2, G = 4 after accumulation, lr = 0.1 -> step of -0.1
    P = np.zeros((1, 1))
    G = np.zeros((1, 1))
    y = np.array([-2.0])
    indptr = np.array([0, 1], dtype=np.int64)
    cols = np.array([0], dtype=np.int64)
    vals = np.array([1.0])
    bad = impl.adagrad_epoch_anova(P, 1, indptr, cols, vals, y, np.zeros(1),
                                   G, np.array([0], dtype=np.int64), 0, 0.0,
                                   0.1, 1e-15)
    assert bad == -1
    assert G[0, 0] == pytest.approx(4.0)
    assert P[0, 0] == pytest.approx(-0.1, rel=1e-12)


def test_fit_degenerate_single_sample():
    X = SampleMatrix.from_dense([[1.0]])
    config = TrainConfig(degree=2, rank=2, beta=0.0, epochs=5, seed=0, tol=0.0)
    result = fit(X, np.array([1.0]), config)
    assert predict_many(result.model, X)[0] == pytest.approx(1.0, abs=1e-10)
    assert result.trace[-1].objective == pytest.approx(0.0, abs=1e-12)


def test_fit_zero_epochs_returns_initialization():
    X, y = random_problem(np.random.default_rng(1), 10, 4)
    config = TrainConfig(degree=2, rank=2, epochs=0, seed=9)
    r1 = fit(X, y, config)
    r2 = fit(X, y, config)
    assert len(r1.trace) == 1 and r1.epochs_run == 0
    assert r1.model.bias == 0.0
    np.testing.assert_array_equal(r1.model.w, np.zeros(4))
    np.testing.assert_array_equal(r1.model.factors[0], r2.model.factors[0])


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def test_objective_pinned_values():
    X = SampleMatrix.from_dense([[1.0]])
    from hofm.model import HofmModel
    zero = HofmModel(variant="separate", d=1, bias=0.0, degree=2,
                     w=np.zeros(1), factors=[np.zeros((1, 1))])
    assert objective(zero, X, np.array([2.0])) == pytest.approx(2.0)

    empty_row = SampleMatrix.from_rows(
        [SparseVector(2, np.array([], int), np.array([]))])
    loaded = HofmModel(variant="separate", d=2, bias=0.0, degree=2,
                       w=np.zeros(2), factors=[np.full((2, 2), 1.0)])
    assert objective(loaded, empty_row, np.array([0.0]),
                     beta=0.3) == pytest.approx(2 * 0.3)


def test_objective_perfect_fit_is_zero():
    X = SampleMatrix.from_dense([[2.0], [3.0]])
    from hofm.model import HofmModel
    model = HofmModel(variant="separate", d=1, bias=0.0, degree=2,
                      w=np.array([1.5]), factors=[np.zeros((1, 1))])
    y = predict_many(model, X)
    assert objective(model, X, y) == 0.0


# ---------------------------------------------------------------------------
# Monotonicity and caches
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("variant,m", [("separate", 2), ("separate", 3),
                                       ("shared_augmented", 3),
                                       ("all_subsets", None), ("fm2", 2)])
def test_cd_objective_never_increases(variant, m):
    rng = np.random.default_rng(42)
    X, y = random_problem(rng, 60, 12)
    config = TrainConfig(degree=m or 2, rank=3, beta=0.1, epochs=8,
                         seed=5, tol=0.0)
    result = fit(X, y, config, variant=variant)
    objs = [r.objective for r in result.trace]
    for before, after in zip(objs, objs[1:]):
        assert after <= before + 1e-12 * (1.0 + abs(before))


def test_cd_monotone_with_logistic_loss():
    rng = np.random.default_rng(43)
    X, _ = random_problem(rng, 50, 10)
    y = np.sign(rng.normal(size=50))
    y[y == 0] = 1.0
    config = TrainConfig(degree=3, rank=2, beta=0.01, epochs=6, seed=1, tol=0.0)
    result = fit(X, y, config, loss="logistic")
    objs = [r.objective for r in result.trace]
    for before, after in zip(objs, objs[1:]):
        assert after <= before + 1e-12 * (1.0 + abs(before))


@pytest.mark.parametrize("variant", ["separate", "shared_augmented",
                                     "all_subsets"])
@pytest.mark.parametrize("solver", ["cd", "adagrad"])
def test_prediction_cache_tracks_model(variant, solver):
    rng = np.random.default_rng(44)
    X, y = random_problem(rng, 40, 9)
    config = TrainConfig(degree=3, rank=2, beta=0.05, epochs=7, seed=2,
                         solver=solver, tol=0.0)
    state = TrainState(X, y, config, variant=variant)
    for _ in range(config.epochs):
        for block in state.blocks:
            if solver == "cd":
                if block.kind == "linear":
                    state._cd_linear_pass()
                else:
                    state._cd_degree_pass(block)
            else:
                state._adagrad_pass(block)
    fresh = predict_many(state.model, X)
    np.testing.assert_allclose(state.y_hat, fresh, rtol=1e-8, atol=1e-8)


def test_trace_is_recorded_with_time():
    X, y = random_problem(np.random.default_rng(45), 30, 6)
    config = TrainConfig(degree=2, rank=2, epochs=4, seed=0, tol=0.0)
    result = fit(X, y, config)
    assert [r.epoch for r in result.trace] == [0, 1, 2, 3, 4]
    secs = [r.seconds for r in result.trace]
    assert secs[0] == 0.0 and all(b >= a for a, b in zip(secs, secs[1:]))


def test_early_stop_flags_convergence():
    X = SampleMatrix.from_dense([[1.0], [2.0]])
    config = TrainConfig(degree=2, rank=1, beta=0.0, epochs=500, seed=0,
                         tol=1e-10)
    result = fit(X, np.array([0.5, 1.0]), config)
    assert result.converged
    assert result.epochs_run < 500


# ---------------------------------------------------------------------------
# AdaGrad behavior
# ---------------------------------------------------------------------------

def test_adagrad_zero_learning_rate_freezes_model():
    rng = np.random.default_rng(46)
    X, y = random_problem(rng, 25, 8)
    config = TrainConfig(degree=2, rank=2, epochs=2, seed=7, solver="adagrad",
                         learning_rate=0.0, tol=0.0)
    state = TrainState(X, y, config)
    before = [P.copy() for P in state.model.factors]
    adagrad_epoch(state, degree=2)
    for P, Q in zip(before, state.model.factors):
        np.testing.assert_array_equal(P, Q)


def test_adagrad_untouched_coordinates_keep_init():
    # with beta = 0, coordinates outside every sample's support never move
    rng = np.random.default_rng(47)
    dense = np.zeros((30, 6))
    dense[:, :4] = rng.normal(size=(30, 4))  # features 4, 5 never appear
    X = SampleMatrix.from_dense(dense)
    y = rng.normal(size=30)
    config = TrainConfig(degree=2, rank=3, beta=0.0, epochs=3, seed=11,
                         solver="adagrad", tol=0.0)
    state = TrainState(X, y, config)
    init_tail = state.model.factors[0][4:].copy()
    for _ in range(3):
        adagrad_epoch(state, degree=2)
    np.testing.assert_array_equal(state.model.factors[0][4:], init_tail)
    assert np.any(state.model.factors[0][:4] != 0.0)


def test_adagrad_objective_decreases_eventually():
    rng = np.random.default_rng(48)
    X, y = random_problem(rng, 80, 10)
    config = TrainConfig(degree=2, rank=3, beta=0.01, epochs=30, seed=3,
                         solver="adagrad", learning_rate=0.05, tol=0.0)
    result = fit(X, y, config)
    assert result.trace[-1].objective < result.trace[0].objective


def test_divergence_is_reported():
    rng = np.random.default_rng(49)
    X, y = random_problem(rng, 20, 5)
    config = TrainConfig(degree=3, rank=2, beta=0.0, epochs=10, seed=0,
                         solver="adagrad", learning_rate=1e150, tol=0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as err:
            fit(X, y, config)
    assert err.value.epoch >= 1


# ---------------------------------------------------------------------------
# Determinism and validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("solver", ["cd", "adagrad"])
def test_seeded_runs_are_bit_identical(solver):
    rng = np.random.default_rng(50)
    X, y = random_problem(rng, 40, 8)
    config = TrainConfig(degree=3, rank=2, beta=0.1, epochs=5, seed=21,
                         solver=solver, tol=0.0)
    m1 = fit(X, y, config).model
    m2 = fit(X, y, config).model
    assert m1.bias == m2.bias
    np.testing.assert_array_equal(m1.w, m2.w)
    for P, Q in zip(m1.factors, m2.factors):
        np.testing.assert_array_equal(P, Q)
    other = fit(X, y, TrainConfig(degree=3, rank=2, beta=0.1, epochs=5,
                                  seed=22, solver=solver, tol=0.0)).model
    assert not np.array_equal(m1.factors[0], other.factors[0])


def test_fit_input_validation():
    X, y = random_problem(np.random.default_rng(51), 10, 4)
    with pytest.raises(ValueError):
        fit(X, y[:-1], TrainConfig())
    with pytest.raises(ValueError):
        fit(X, y, TrainConfig(), loss="logistic")  # targets not in {-1, +1}
    with pytest.raises(ValueError):
        fit(X, y, TrainConfig(degree=1))
    with pytest.raises(ValueError):
        TrainConfig(solver="sgd")
    with pytest.raises(ValueError):
        TrainConfig(beta=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(epochs=-1)


def test_per_degree_ranks():
    X, y = random_problem(np.random.default_rng(52), 20, 6)
    config = TrainConfig(degree=3, rank=[2, 4], epochs=1, seed=0, tol=0.0)
    result = fit(X, y, config)
    assert result.model.ranks == [2, 4]
    with pytest.raises(ValueError):
        fit(X, y, TrainConfig(degree=3, rank=[2], epochs=1))
