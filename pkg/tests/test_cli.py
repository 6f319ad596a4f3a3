"""End-to-end command-line workflows."""

import numpy as np
import pytest

from hofm.cli import main
from hofm.data import dump_svmlight
from hofm.model import load_model
from hofm.sparse import SampleMatrix


@pytest.fixture
def data_file(tmp_path):
    rng = np.random.default_rng(0)
    dense = rng.normal(size=(40, 8)) * (rng.random((40, 8)) < 0.5)
    for i in range(40):
        if not dense[i].any():
            dense[i, 0] = 1.0
    X = SampleMatrix.from_dense(dense)
    y = rng.normal(size=40)
    path = tmp_path / "train.svm"
    with open(path, "w") as fh:
        dump_svmlight(X, y, fh)
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_train_writes_model_and_trace(tmp_path, data_file, capsys):
    out = tmp_path / "model.txt"
    code = run("train", "--data", data_file, "--out", out, "--degree", "3",
               "--rank", "4", "--beta", "0.1", "--solver", "cd",
               "--epochs", "3", "--seed", "7", "--tol", "0")
    assert code == 0
    assert "final objective" in capsys.readouterr().out
    model = load_model(out)
    assert model.degree == 3 and model.ranks == [4, 4]
    trace = (tmp_path / "model.txt.trace.csv").read_text().splitlines()
    assert trace[0] == "epoch,objective,seconds"
    assert len(trace) == 5  # header + epochs 0..3


def test_train_deterministic_model_bytes(tmp_path, data_file):
    outs = []
    for name in ("m1.txt", "m2.txt"):
        out = tmp_path / name
        code = run("train", "--data", data_file, "--out", out, "--degree", "2",
                   "--rank", "3", "--solver", "adagrad", "--epochs", "4",
                   "--seed", "11", "--tol", "0")
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_train_zero_epochs_writes_initialized_model(tmp_path, data_file):
    out = tmp_path / "init.txt"
    assert run("train", "--data", data_file, "--out", out,
               "--epochs", "0", "--seed", "1") == 0
    model = load_model(out)
    assert model.bias == 0.0
    np.testing.assert_array_equal(model.w, np.zeros(8))


def test_train_missing_data_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        run("train", "--out", tmp_path / "m.txt")
    assert err.value.code == 2


def test_train_reports_file_errors(tmp_path, capsys):
    bad = tmp_path / "bad.svm"
    bad.write_text("1 notatoken\n")
    assert run("train", "--data", bad, "--out", tmp_path / "m.txt") == 1
    assert "error:" in capsys.readouterr().err


def test_predict_roundtrip_matches_training_cache(tmp_path, data_file):
    model_path = tmp_path / "model.txt"
    assert run("train", "--data", data_file, "--out", model_path,
               "--degree", "2", "--rank", "3", "--epochs", "5",
               "--seed", "3", "--tol", "0") == 0
    preds_path = tmp_path / "preds.txt"
    assert run("predict", "--model", model_path, "--data", data_file,
               "--out", preds_path) == 0
    preds = np.array([float(v) for v in preds_path.read_text().split()])
    assert preds.shape == (40,)

    from hofm.data import load_svmlight
    from hofm.model import predict_many
    X, _ = load_svmlight(str(data_file))
    model = load_model(model_path)
    np.testing.assert_allclose(preds, predict_many(model, X), rtol=1e-8)


def test_predict_dimension_mismatch(tmp_path, data_file, capsys):
    model_path = tmp_path / "model.txt"
    assert run("train", "--data", data_file, "--out", model_path,
               "--epochs", "1", "--seed", "0") == 0
    wide = tmp_path / "wide.svm"
    wide.write_text("0 12:1\n")
    assert run("predict", "--model", model_path, "--data", wide,
               "--out", tmp_path / "p.txt") == 1
    assert "error:" in capsys.readouterr().err


def test_evaluate_prints_metric(tmp_path, data_file, capsys):
    model_path = tmp_path / "model.txt"
    assert run("train", "--data", data_file, "--out", model_path,
               "--epochs", "2", "--seed", "0") == 0
    capsys.readouterr()
    assert run("evaluate", "--model", model_path, "--data", data_file,
               "--metric", "rmse") == 0
    assert capsys.readouterr().out.startswith("rmse ")


def test_link_command_end_to_end(tmp_path, capsys):
    rng = np.random.default_rng(5)
    n, d = 20, 6
    feats = rng.normal(size=(n, d))
    feats[:, 0] = 1.0
    X = SampleMatrix.from_dense(feats)
    a_path = tmp_path / "nodes.svm"
    with open(a_path, "w") as fh:
        dump_svmlight(X, np.zeros(n), fh)
    pairs_path = tmp_path / "pairs.txt"
    pairs = [(i, j) for i in range(0, 12, 2) for j in (i + 1, i + 3) if j < n]
    pairs_path.write_text("\n".join("%d %d" % p for p in pairs) + "\n")

    code = run("link", "--a", a_path, "--pairs", pairs_path, "--degree", "2",
               "--rank", "3", "--epochs", "5", "--seed", "2", "--tol", "0")
    out = capsys.readouterr().out
    assert code == 0
    assert "test auc" in out

    # same seed, same reported AUC
    run("link", "--a", a_path, "--pairs", pairs_path, "--degree", "2",
        "--rank", "3", "--epochs", "5", "--seed", "2", "--tol", "0")
    assert capsys.readouterr().out == out


def test_link_bad_pair_index(tmp_path, data_file, capsys):
    pairs_path = tmp_path / "pairs.txt"
    pairs_path.write_text("0 99\n")
    assert run("link", "--a", data_file, "--pairs", pairs_path) == 1
    assert "error:" in capsys.readouterr().err


def test_bench_writes_cells(tmp_path, data_file):
    out = tmp_path / "bench.csv"
    code = run("bench", "--data", data_file, "--out", out,
               "--solvers", "cd,adagrad", "--degrees", "2,3",
               "--epochs", "2", "--rank", "2", "--seed", "0")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "solver,m,epoch,objective,seconds"
    assert len(lines) == 1 + 4 * 3

    single = tmp_path / "single.csv"
    assert run("bench", "--data", data_file, "--out", single,
               "--degrees", "2", "--solvers", "cd", "--epochs", "1") == 0
    assert len(single.read_text().splitlines()) == 1 + 2


def test_bench_rejects_unknown_solver(tmp_path, data_file):
    with pytest.raises(SystemExit):
        run("bench", "--data", data_file, "--out", tmp_path / "x.csv",
            "--solvers", "lbfgs")


def test_seed_env_fallback(tmp_path, data_file, monkeypatch):
    monkeypatch.setenv("HOFM_SEED", "33")
    out_env = tmp_path / "env.txt"
    assert run("train", "--data", data_file, "--out", out_env,
               "--epochs", "1", "--tol", "0") == 0
    monkeypatch.delenv("HOFM_SEED")
    out_flag = tmp_path / "flag.txt"
    assert run("train", "--data", data_file, "--out", out_flag,
               "--epochs", "1", "--seed", "33", "--tol", "0") == 0
    assert out_env.read_bytes() == out_flag.read_bytes()