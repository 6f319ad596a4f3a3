"""Training by cyclic coordinate descent and AdaGrad stochastic gradient.

The full objective is the mean loss plus an L2 penalty on the linear
weights and every factor matrix (bias unregularized):

    (1/n) sum_i loss(y_i, model(x_i)) + (beta/2)(|w|^2 + sum_t |P_t|^2)

Training alternates over parameter blocks once per outer epoch: first
the bias and linear weights, then each interaction degree in increasing
order.  Within a degree, coordinate descent sweeps columns outer and
features inner, keeping per-sample O(m) caches (kernel values and power
sums for the active column) plus a running prediction; the prediction
cache is rebuilt from scratch every 10 epochs to bound drift.  AdaGrad
visits samples in a fresh seeded permutation per block with the other
blocks' contributions held fixed, and applies the ridge pull lazily to
the coordinates in each sample's support.

Because the model output is affine in every single coordinate, the CD
step with the squared loss (mu = 1) is an exact coordinate minimizer
and the objective never increases; mu = 1/4 gives the same guarantee
for the logistic loss by majorization.

All randomness (initialization, sample orders) flows from one generator
seeded by ``TrainConfig.seed``, so identical configurations reproduce
bit-identical models.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .backend import impl
from .losses import get_loss
from .model import HofmModel, augment_matrix
from .sparse import SampleMatrix

__all__ = [
    "TrainConfig",
    "TrainState",
    "FitResult",
    "EpochRecord",
    "DivergenceError",
    "fit",
    "cd_epoch",
    "adagrad_epoch",
    "fit_linear_cd",
    "objective",
]


class DivergenceError(RuntimeError):
    """Objective or parameters became non-finite; carries the epoch index."""

    def __init__(self, message, epoch):
        super().__init__("%s (epoch %d)" % (message, epoch))
        self.epoch = epoch


@dataclass
class TrainConfig:
    """Hyper-parameters for fit().

    Attributes
    ----------
    degree : int
        Highest interaction degree m (ignored by all_subsets).
    rank : int or sequence of int
        Columns per factor matrix; a sequence gives one rank per degree
        t = 2..m for the separate variant.
    beta : float
        L2 strength, shared by linear weights and all factor matrices.
    epochs : int
        Outer epochs; 0 returns the initialized model.
    solver : str
        'cd' or 'adagrad'.
    learning_rate, epsilon : float
        AdaGrad step scale and denominator guard (unused by cd).
    seed : int
        Seeds initialization and sample shuffling.
    init_stddev : float
        Factor entries start from N(0, init_stddev^2); w and bias at 0.
    tol : float
        Stop once the relative objective decrease falls inside
        [0, tol); 0 disables early stopping.
    """

    degree: int = 2
    rank: object = 30
    beta: float = 0.1
    epochs: int = 50
    solver: str = "cd"
    learning_rate: float = 0.001
    epsilon: float = 1e-10
    seed: int = 0
    init_stddev: float = 0.01
    tol: float = 1e-6

    def __post_init__(self):
        if self.solver not in ("cd", "adagrad"):
            raise ValueError("solver must be 'cd' or 'adagrad', got %r"
                             % (self.solver,))
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("beta", "learning_rate", "epsilon", "init_stddev", "tol"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError("%s must be finite" % name)
            setattr(self, name, v)
        if self.beta < 0 or self.tol < 0:
            raise ValueError("beta and tol must be >= 0")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epsilon <= 0 or self.init_stddev <= 0:
            raise ValueError("epsilon and init_stddev must be > 0")

    def ranks_for(self, variant):
        n_mats = self.degree - 1 if variant == "separate" else 1
        if np.ndim(self.rank) == 0:
            ks = [int(self.rank)] * n_mats
        else:
            ks = [int(k) for k in self.rank]
        if len(ks) != n_mats:
            raise ValueError("expected %d ranks, got %d" % (n_mats, len(ks)))
        if any(k < 1 for k in ks):
            raise ValueError("ranks must be positive")
        return ks


@dataclass
class EpochRecord:
    """One trace row: epoch index, objective, cumulative training seconds."""

    epoch: int
    objective: float
    seconds: float


@dataclass
class FitResult:
    """Trained model plus its per-epoch convergence trace."""

    model: HofmModel
    trace: list
    converged: bool

    @property
    def epochs_run(self):
        return self.trace[-1].epoch


@dataclass
class _Block:
    kind: str  # 'linear', 'anova' or 'allsub'
    degree: int | None = None
    index: int | None = None  # position in model.factors


def _init_model(variant, d, config, rng):
    sigma = config.init_stddev
    if variant == "all_subsets":
        k, = config.ranks_for(variant)
        return HofmModel(variant=variant, d=d, bias=0.0, degree=None, w=None,
                         factors=[rng.normal(0.0, sigma, size=(d, k))])
    m = int(config.degree)
    if m < 2:
        raise ValueError("degree must be >= 2 for variant %r" % variant)
    if variant == "fm2" and m != 2:
        raise ValueError("fm2 requires degree 2")
    if variant == "shared_augmented":
        k, = config.ranks_for(variant)
        P = rng.normal(0.0, sigma, size=(d + m - 1, k))
        return HofmModel(variant=variant, d=d, bias=0.0, degree=m, w=None,
                         factors=[P])
    ks = config.ranks_for(variant)
    factors = [rng.normal(0.0, sigma, size=(d, k)) for k in ks]
    return HofmModel(variant=variant, d=d, bias=0.0, degree=m,
                     w=np.zeros(d), factors=factors)


def _blocks_of(model):
    blocks = [_Block(kind="linear")]
    if model.variant == "all_subsets":
        blocks.append(_Block(kind="allsub", index=0))
    elif model.variant == "shared_augmented":
        blocks.append(_Block(kind="anova", degree=model.degree, index=0))
    else:
        for i, t in enumerate(range(2, model.degree + 1)):
            blocks.append(_Block(kind="anova", degree=t, index=i))
    return blocks


def _penalty(model, beta):
    acc = 0.0 if model.w is None else float(model.w @ model.w)
    for P in model.factors:
        acc += float((P * P).sum())
    return 0.5 * beta * acc


class TrainState:
    """Mutable state threaded through the epoch-level operations.

    Holds the model, both sparse layouts of the data (augmented for the
    shared variant), the prediction cache, and the AdaGrad accumulators.
    Built by fit(); construct directly to drive cd_epoch/adagrad_epoch
    by hand.
    """

    def __init__(self, X, y, config, variant="separate", loss="squared"):
        if not isinstance(X, SampleMatrix):
            raise ValueError("X must be a SampleMatrix")
        if X.n < 1:
            raise ValueError("empty dataset")
        self.loss = get_loss(loss)
        y = self.loss.check_targets(y)
        if y.shape != (X.n,):
            raise ValueError("targets have shape %r, expected (%d,)"
                             % (y.shape, X.n))
        self.X = X
        self.y = y
        self.config = config
        self.variant = variant
        self.rng = np.random.default_rng(config.seed)
        self.model = _init_model(variant, X.d, config, self.rng)
        self.X_eff = (augment_matrix(X, self.model.degree)
                      if variant == "shared_augmented" else X)
        self.blocks = _blocks_of(self.model)
        self.y_hat = self._predict_full()
        self.epochs_done = 0
        # AdaGrad per-coordinate squared-gradient accumulators
        self.G_bias = np.zeros(1)
        self.G_w = None if self.model.w is None else np.zeros(X.d)
        self.G_factors = [np.zeros_like(P) for P in self.model.factors]
        self._contribs = None

    # -- prediction plumbing -------------------------------------------

    def _block_contrib(self, block):
        model = self.model
        if block.kind == "linear":
            out = np.full(self.X.n, model.bias)
            if model.w is not None:
                out += self.X.dot(model.w)
            return out
        P = model.factors[block.index]
        out = np.zeros(self.X.n)
        Xe = self.X_eff
        if block.kind == "anova":
            impl.predict_anova_batch(P, block.degree, Xe.indptr, Xe.indices,
                                     Xe.data, out)
        else:
            impl.predict_all_subsets_batch(P, Xe.indptr, Xe.indices, Xe.data, out)
        return out

    def _predict_full(self):
        total = self._block_contrib(self.blocks[0])
        for block in self.blocks[1:]:
            total += self._block_contrib(block)
        return total

    def refresh_predictions(self):
        """Recompute the prediction cache from the model."""
        self.y_hat = self._predict_full()

    def cached_objective(self):
        """Objective evaluated on the running prediction cache."""
        return (float(self.loss.value(self.y, self.y_hat).mean())
                + _penalty(self.model, self.config.beta))

    def fresh_objective(self):
        """Objective with predictions recomputed from the model."""
        return (float(self.loss.value(self.y, self._predict_full()).mean())
                + _penalty(self.model, self.config.beta))

    def _block_for_degree(self, degree):
        candidates = [b for b in self.blocks if b.kind != "linear"]
        if degree is None:
            if len(candidates) == 1:
                return candidates[0]
            raise ValueError("degree is required when several degree "
                             "blocks exist")
        for b in candidates:
            if b.degree == degree:
                return b
        raise ValueError("no degree-%r block in this model" % (degree,))

    # -- coordinate descent --------------------------------------------

    def _cd_linear_pass(self):
        model, loss = self.model, self.loss
        dl = self.loss.deriv(self.y, self.y_hat)
        delta = -float(dl.mean()) / loss.mu  # exact Newton step, bias unpenalized
        model.bias += delta
        self.y_hat += delta
        if model.w is not None:
            indptr, rows, vals = self.X.csc
            impl.cd_epoch_linear(model.w, indptr, rows, vals, self.y,
                                 self.y_hat, loss.code, loss.mu,
                                 self.config.beta)

    def _cd_degree_pass(self, block, columns=None):
        model, loss, beta = self.model, self.loss, self.config.beta
        P = model.factors[block.index]
        if columns is None:
            columns = range(P.shape[1])
        Xe = self.X_eff
        indptr, rows, vals = Xe.csc
        n = self.X.n
        if block.kind == "allsub":
            svals = np.empty(n)
            for s in columns:
                impl.rebuild_all_subsets_cache(P[:, s].copy(), Xe.indptr,
                                               Xe.indices, Xe.data, svals)
                impl.cd_epoch_all_subsets(P, s, Xe.indptr, Xe.indices, Xe.data,
                                          indptr, rows, vals, self.y,
                                          self.y_hat, svals, loss.code,
                                          loss.mu, beta)
            return
        m = block.degree
        avals = np.empty((n, m + 1))
        dvals = np.empty((n, m + 1))
        for s in columns:
            impl.rebuild_anova_caches(P[:, s].copy(), m, Xe.indptr, Xe.indices,
                                      Xe.data, avals, dvals)
            impl.cd_epoch_anova(P, s, m, indptr, rows, vals, self.y,
                                self.y_hat, avals, dvals, loss.code, loss.mu,
                                beta)

    # -- AdaGrad ---------------------------------------------------------

    def _adagrad_offsets(self, skip):
        if self._contribs is None:
            self._contribs = [self._block_contrib(b) for b in self.blocks]
        out = np.zeros(self.X.n)
        for b, c in zip(self.blocks, self._contribs):
            if b is not skip:
                out += c
        return out

    def _adagrad_pass(self, block):
        cfg, loss = self.config, self.loss
        order = self.rng.permutation(self.X.n)
        offsets = self._adagrad_offsets(block)
        if block.kind == "linear":
            w = self.model.w
            bias = np.array([self.model.bias])
            if w is None:
                w = np.zeros(0)
                gw = np.zeros(0)
                indptr = np.zeros(self.X.n + 1, dtype=np.int64)
                idx = np.zeros(0, dtype=np.int64)
                dat = np.zeros(0)
            else:
                gw = self.G_w
                indptr, idx, dat = self.X.indptr, self.X.indices, self.X.data
            bad = impl.adagrad_epoch_linear(w, bias, gw, self.G_bias, indptr,
                                            idx, dat, self.y, offsets, order,
                                            loss.code, cfg.beta,
                                            cfg.learning_rate, cfg.epsilon)
            self.model.bias = float(bias[0])
        else:
            P = self.model.factors[block.index]
            G = self.G_factors[block.index]
            Xe = self.X_eff
            if block.kind == "anova":
                bad = impl.adagrad_epoch_anova(P, block.degree, Xe.indptr,
                                               Xe.indices, Xe.data, self.y,
                                               offsets, G, order, loss.code,
                                               cfg.beta, cfg.learning_rate,
                                               cfg.epsilon)
            else:
                bad = impl.adagrad_epoch_all_subsets(P, Xe.indptr, Xe.indices,
                                                     Xe.data, self.y, offsets,
                                                     G, order, loss.code,
                                                     cfg.beta,
                                                     cfg.learning_rate,
                                                     cfg.epsilon)
        if bad >= 0:
            raise DivergenceError("non-finite value at sample %d" % bad,
                                  epoch=self.epochs_done + 1)
        i = self.blocks.index(block)
        self._contribs[i] = self._block_contrib(block)
        self.y_hat = sum(self._contribs)


def objective(model, X, y, loss="squared", beta=0.0):
    """Regularized mean loss of a model on a dataset.

    Mean loss over the rows plus (beta/2) times the squared Frobenius
    norms of the linear weights and every factor matrix; the bias is
    not penalized.
    """
    loss = get_loss(loss)
    y = loss.check_targets(y)
    from .model import predict_many
    preds = predict_many(model, X)
    return float(loss.value(y, preds).mean()) + _penalty(model, beta)


def fit_linear_cd(w, bias, X, y, loss="squared", beta=0.0, y_hat=None):
    """One coordinate-descent pass over the bias and linear weights.

    Updates the bias by its exact Newton step, then each weight in
    index order with step size (mu/n) sum_i x_ij^2 + beta.  Pass
    ``bias=None`` to fit a model without an intercept.  ``w`` and
    ``y_hat`` (when given) are updated in place.

    Returns
    -------
    (w, bias) : the updated weights and bias.
    """
    loss = get_loss(loss)
    y = loss.check_targets(y)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if y_hat is None:
        y_hat = X.dot(w) + (0.0 if bias is None else bias)
    if bias is not None:
        dl = loss.deriv(y, y_hat)
        delta = -float(dl.mean()) / loss.mu
        bias = bias + delta
        y_hat += delta
    indptr, rows, vals = X.csc
    impl.cd_epoch_linear(w, indptr, rows, vals, y, y_hat, loss.code, loss.mu,
                         beta)
    return w, bias


def cd_epoch(state, degree=None, columns=None):
    """One coordinate-descent epoch on one interaction-degree block.

    Sweeps the requested columns (all by default) of the block's factor
    matrix, features inner, rebuilding the per-sample caches at each
    column switch.  Returns the objective evaluated on the running
    prediction cache (within its documented 1e-8 drift of a fresh
    evaluation).
    """
    block = state._block_for_degree(degree)
    state._cd_degree_pass(block, columns=columns)
    obj = state.cached_objective()
    if not math.isfinite(obj):
        raise DivergenceError("objective is non-finite",
                              epoch=state.epochs_done + 1)
    return obj


def adagrad_epoch(state, degree=None):
    """One AdaGrad pass over all samples for one interaction-degree block.

    Samples are visited in a fresh permutation drawn from the state's
    generator; the other blocks' predictions stay fixed for the whole
    pass.
    """
    state._adagrad_pass(state._block_for_degree(degree))


def fit(X, y, config, variant="separate", loss="squared"):
    """Train a model from scratch.

    Parameters
    ----------
    X : SampleMatrix
    y : array-like of shape (n,)
        Targets; in {-1, +1} for the logistic loss.
    config : TrainConfig
    variant : str
        'separate', 'shared_augmented', 'all_subsets' or 'fm2'.
    loss : str or LossFunction

    Returns
    -------
    FitResult
        ``result.model`` is the trained model; ``result.trace`` holds
        one EpochRecord per epoch (epoch 0 = initialization), with
        cumulative wall-clock seconds of training work (objective
        evaluation for the trace excluded).

    Raises
    ------
    DivergenceError
        If the objective or any parameter becomes non-finite.
    """
    state = TrainState(X, y, config, variant=variant, loss=loss)
    obj = state.fresh_objective()
    if not math.isfinite(obj):
        raise DivergenceError("objective is non-finite at initialization",
                              epoch=0)
    trace = [EpochRecord(epoch=0, objective=obj, seconds=0.0)]
    elapsed = 0.0
    converged = False
    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        for block in state.blocks:
            if config.solver == "cd":
                if block.kind == "linear":
                    state._cd_linear_pass()
                else:
                    state._cd_degree_pass(block)
            else:
                state._adagrad_pass(block)
        state.epochs_done = epoch
        if epoch % 10 == 0:  # bound incremental-update drift
            state.refresh_predictions()
        elapsed += time.perf_counter() - start
        prev, obj = obj, state.fresh_objective()
        if not math.isfinite(obj):
            raise DivergenceError("objective is non-finite", epoch=epoch)
        trace.append(EpochRecord(epoch=epoch, objective=obj, seconds=elapsed))
        decrease = prev - obj
        if config.tol > 0 and 0 <= decrease < config.tol * max(abs(prev), 1e-12):
            converged = True
            break
    return FitResult(model=state.model, trace=trace, converged=converged)
