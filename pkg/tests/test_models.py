import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import lstm_step_loops
from rulfp.diffcore import LayerSpec, Tensor, grad, load_params, save_params
from rulfp.errors import ConfigurationError, DataError, TrainingDiverged
from rulfp.metrics import rmse, spearman
from rulfp.models import (ArchitectureSpec, LossWeights, TrainConfig, build_model, dw_nll_loss,
                          dw_train, frozen_leaves, model_from_manifest, mtl_loss, network_outputs,
                          objective, predict, predict_arrays, preset, small_arch, train, train_any)
from rulfp.pipeline import WindowingConfig, WindowSet, build_windowset, synth_weibull
from rulfp.weibull import softplus


def _ws(rng, n=12, w=4, d=3, censored_share=0.4, t_scale=3.0):
    censored = rng.random(n) < censored_share
    censored[0], censored[-1] = False, True
    t_g = np.where(censored, np.nan, rng.uniform(0.2, t_scale, n))
    rem = np.where(censored, rng.uniform(0.0, t_scale, n), np.nan)
    f = ((~censored) & (t_g < 1.0)).astype(np.int64)
    return WindowSet(np.array([f"d{i}" for i in range(n)]), np.arange(n) + w,
                     rng.standard_normal((n, w, d)), f, t_g, censored, rem)


def _model(kind, d=3, seed=0, **kw):
    return build_model(kind, small_arch(kind, **kw), d, seed, horizon=1.0, max_rul=13.0)


# ------------------------------------------------------------------ architectures
def test_presets():
    mtl = preset("cmapss", "mtl")
    assert mtl.trunk[0].width == 200
    assert [l.width for l in mtl.trunk if l.kind == "elu"] == [100, 64]
    assert [l.width for l in mtl.heads["rul"]] == [32, 1]
    assert preset("backblaze", "dw").heads["weibull"][-1].width == 2
    assert all(l.kind != "dropout" for l in preset("cmapss", "fp", dropout_p=0.0).trunk)
    with pytest.raises(ConfigurationError):
        preset("cmapss", "cox")


def test_architecture_validation():
    good = small_arch("fp")
    with pytest.raises(ConfigurationError):
        good.validate("mtl")
    bad = ArchitectureSpec([LayerSpec("elu", 4)], {"fp": [LayerSpec("linear", 2)]})
    with pytest.raises(ConfigurationError):
        bad.validate("fp")
    wrong_out = ArchitectureSpec([LayerSpec("lstm", 4)], {"weibull": [LayerSpec("linear", 3)]})
    with pytest.raises(ConfigurationError):
        wrong_out.validate("dw")
    assert ArchitectureSpec.from_dict(good.to_dict()).to_dict() == good.to_dict()


def test_input_width_mismatch(rng):
    m = _model("fp")
    with pytest.raises(ConfigurationError):
        predict_arrays(m, rng.standard_normal((2, 4, 5)))


# ------------------------------------------------------------------ forward examples
def _zero(model):
    for name, arr in model.params.items():
        model.params[name] = np.zeros_like(arr)


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=20)
def test_zero_weight_weibull_head(b1, b2):
    m = _model("dw")
    _zero(m)
    m.params["weibull.0.b"] = np.array([b1, b2])
    out = predict_arrays(m, np.random.default_rng(0).standard_normal((3, 4, 3)))
    np.testing.assert_allclose(out["lam"], math.exp(b1), rtol=1e-14)
    np.testing.assert_allclose(out["k"], max(float(softplus(b2)), 1e-2), rtol=1e-14)


def test_equal_fp_columns_give_half(rng):
    m = _model("fp")
    W = m.params["fp.0.W"]
    W[:, 1] = W[:, 0]
    m.params["fp.0.W"] = W
    m.params["fp.0.b"] = np.array([0.3, 0.3])
    np.testing.assert_allclose(predict_arrays(m, rng.standard_normal((5, 4, 3)))["fp_prob"], 0.5,
                               atol=1e-15)


def test_forward_matches_hand_composed_oracle(rng):
    m = _model("rul", lstm=3, fcs=(2,))
    x = rng.standard_normal((4, 3))
    p = {k: v.tolist() for k, v in m.params.items()}
    h, c = [0.0] * 3, [0.0] * 3
    for t in range(4):
        h, c = lstm_step_loops(x[t], h, c, p["trunk.0.W_x"], p["trunk.0.W_h"], p["trunk.0.b"])
    z = np.array(h) @ m.params["trunk.1.W"] + m.params["trunk.1.b"]
    z = np.where(z > 0, z, np.expm1(np.minimum(z, 0)))
    y = z @ m.params["rul.0.W"] + m.params["rul.0.b"]
    out = m.forward(frozen_leaves(m), x[None])["rul"].data
    np.testing.assert_allclose(out.reshape(-1), y, rtol=1e-12, atol=1e-14)


# ------------------------------------------------------------------ loss examples
def _mini(censored, t_g, rem, f):
    n = len(censored)
    return WindowSet(np.array(["a"] * n), np.arange(n), np.zeros((n, 1, 1)), np.array(f),
                     np.array(t_g, float), np.array(censored), np.array(rem, float))


def test_mtl_loss_examples():
    half = Tensor(np.log(np.full((1, 2), 0.5)))
    censored = _mini([True], [np.nan], [20.0], [0])
    w = LossWeights(alpha_3=0.0)
    J, parts = mtl_loss(censored, {"fp": half, "rul": Tensor(np.array([0.0]))}, w)
    assert parts["L_r"] == 20.0 and parts["L_c"] == pytest.approx(math.log(2), rel=1e-15)
    _, parts = mtl_loss(censored, {"fp": half, "rul": Tensor(np.array([25.0]))}, w)
    assert parts["L_r"] == 0.0
    failed = _mini([False], [3.0], [np.nan], [1])
    J, parts = mtl_loss(failed, {"fp": half, "rul": Tensor(np.array([1.0]))}, LossWeights(alpha_3=0))
    assert parts["L_r"] == 4.0 and parts["L_c"] == pytest.approx(1000 * math.log(2))
    _, parts = mtl_loss(censored, {"fp": half, "rul": Tensor(np.array([0.0]))},
                        LossWeights(hinge=False))
    assert parts["L_r"] == 0.0


def test_mtl_loss_rejects_unlabelled_failed_window():
    bad = _mini([False], [np.nan], [np.nan], [0])
    with pytest.raises(DataError):
        mtl_loss(bad, {"fp": Tensor(np.zeros((1, 2))), "rul": Tensor(np.zeros(1))}, LossWeights())


@given(st.floats(0, 5), st.floats(0, 5), st.floats(0, 1e-2), st.integers(0, 50))
@settings(max_examples=25)
def test_mtl_objective_is_the_weighted_sum_of_its_parts(a1, a2, a3, seed):
    rng = np.random.default_rng(seed)
    m = _model("mtl")
    cfg = TrainConfig(alpha_1=a1, alpha_2=a2, alpha_3=a3, alpha_f=7.0)
    J, parts = objective(m, "mtl", frozen_leaves(m), _ws(rng), cfg)
    assert float(J.data) == pytest.approx(a1 * parts["L_c"] + a2 * parts["L_r"] + a3 * parts["l2"],
                                          rel=1e-12, abs=1e-12)


def test_hinge_inactive_when_prediction_exceeds_censoring(rng):
    m = _model("mtl")
    ws = _ws(rng)
    ws.censor_remaining = np.where(ws.censored, -50.0, np.nan)  # every censored gap negative
    cfg = TrainConfig()
    _, with_hinge = objective(m, "mtl", frozen_leaves(m), ws, cfg)
    _, without = objective(m, "mtl", frozen_leaves(m), ws, TrainConfig(hinge=False))
    assert with_hinge["L_r"] == without["L_r"]


def test_mtl_without_regression_matches_failure_only_network(rng):
    mtl = _model("mtl", seed=3)
    fp = _model("fp", seed=4)
    for name in fp.params.names():
        fp.params[name] = mtl.params[name]
    ws = _ws(rng)
    cfg = TrainConfig(alpha_2=0.0, alpha_3=1e-3, alpha_f=5.0)
    lm, lf = mtl.params.leaves(), fp.params.leaves()
    gm = grad(objective(mtl, "mtl", lm, ws, cfg)[0], lm)
    gf = grad(objective(fp, "fp", lf, ws, cfg)[0], lf)
    for name in fp.params.names():
        np.testing.assert_allclose(gm[name], gf[name], rtol=1e-12, atol=1e-12)


def test_pretrain_loss_is_squared_rmse_on_failed_windows(rng):
    m = _model("dw")
    ws = _ws(rng, censored_share=0.0)
    ws = ws.subset(np.flatnonzero(~ws.censored))
    cfg = TrainConfig(alpha_dw=0.0)
    loss, _ = objective(m, "dw_pretrain", frozen_leaves(m), ws, cfg)
    out = predict_arrays(m, ws.X)
    assert out["rul_hat"].max() < m.max_rul  # no clipping in play
    assert float(loss.data) == pytest.approx(rmse(out["rul_hat"], ws.t_g) ** 2, rel=1e-12)


def test_censored_windows_enter_the_likelihood(rng):
    m = _model("dw")
    ws = _ws(rng, censored_share=0.5)
    out = network_outputs(m, frozen_leaves(m), ws.X)
    full, _ = dw_nll_loss(out["lam"], out["k"], ws, use_poly=False)
    keep = np.flatnonzero(~ws.censored)
    only, _ = dw_nll_loss(out["lam"][keep], out["k"][keep], ws.subset(keep), use_poly=False)
    assert abs(float(full.data) - float(only.data)) > 1e-6


# ------------------------------------------------------------------ inference
@pytest.mark.parametrize("kind", ["dw", "mtl", "fp", "rul"])
def test_prediction_ranges(kind, rng):
    m = _model(kind)
    out = predict_arrays(m, 3 * rng.standard_normal((40, 4, 3)))
    assert np.all((out["fp_prob"] >= 0) & (out["fp_prob"] <= 1))
    if kind != "fp":
        assert np.all((out["rul_hat"] >= 0) & (out["rul_hat"] <= m.max_rul))
    else:
        assert "rul_hat" not in out


def test_rul_network_ranks_failure_opposite_to_rul(rng):
    m = _model("rul")
    out = predict_arrays(m, rng.standard_normal((50, 4, 3)))
    assert spearman(out["fp_prob"], out["rul_hat"]) == pytest.approx(-1.0, abs=1e-12)


def test_weibull_failure_probability_formula_and_horizon_monotonicity(rng):
    m = _model("dw")
    X = rng.standard_normal((30, 4, 3))
    prev = np.zeros(30)
    for tau in (0.25, 0.5, 1.0, 2.0, 4.0):
        out = predict_arrays(m, X, horizon=tau)
        np.testing.assert_allclose(out["fp_prob"], 1 - np.exp(-(tau / out["lam"]) ** out["k"]),
                                   rtol=1e-12, atol=1e-15)
        assert np.all(out["fp_prob"] >= prev)
        prev = out["fp_prob"]


def test_predict_records(rng):
    m = _model("dw")
    ws = _ws(rng)
    recs = predict(m, ws)
    assert len(recs) == len(ws) and recs[0].weibull is not None
    assert predict(_model("fp"), ws)[0].rul_hat is None
    assert predict_arrays(m, np.zeros((0, 4, 3)))["fp_prob"].shape == (0,)


# ------------------------------------------------------------------ training
def _tiny_data(seed=0):
    seqs, _ = synth_weibull(120, 3, seed=seed)
    cfg = WindowingConfig(5, 5, 5, 5, 500)
    return build_windowset(seqs[:90], cfg), build_windowset(seqs[90:], cfg)


def test_training_is_deterministic():
    tr, va = _tiny_data()
    cfg = TrainConfig(max_epochs=3, batch_size=64, alpha_f=5.0)
    runs = []
    for _ in range(2):
        m, hist = train(_model("mtl"), tr, va, cfg)
        runs.append((hist, m.params))
    assert runs[0][0] == runs[1][0]
    assert runs[0][1].equal(runs[1][1])


def test_training_reduces_loss_and_keeps_best():
    tr, va = _tiny_data()
    cfg = TrainConfig(max_epochs=15, batch_size=64, lr=1e-2, early_stop="loss", patience=100)
    m, hist = train(_model("rul"), tr, va, cfg)
    assert hist[-1]["loss"] < hist[0]["loss"]
    best = min(r["val_value"] for r in hist)
    loss, _ = objective(m, "rul", frozen_leaves(m), va, cfg)
    assert float(loss.data) == pytest.approx(best, rel=1e-12)


def test_early_stopping_respects_patience():
    tr, va = _tiny_data()
    cfg = TrainConfig(max_epochs=200, batch_size=64, lr=0.5, patience=2, early_stop="loss")
    _, hist = train(_model("fp"), tr, va, cfg)
    assert len(hist) < 200 and [r["best"] for r in hist[-2:]] == [0, 0]


def test_weibull_phases_order():
    tr, va = _tiny_data()
    m = _model("dw")
    cfg = TrainConfig(max_epochs=2, pretrain_max_epochs=2, batch_size=64, use_poly=False)
    with pytest.raises(ConfigurationError):
        dw_train(m, tr, va, cfg)
    with pytest.raises(ConfigurationError):
        train_any(m, tr, va, TrainConfig(pretrain=False))
    with pytest.raises(ConfigurationError):
        train(m, tr, va, cfg)
    m, hist = train_any(m, tr, va, cfg)
    assert m.pretrained and [r["phase"] for r in hist] == ["dw_pretrain"] * 2 + ["dw"] * 2


def test_divergence_keeps_last_good_parameters():
    tr, va = _tiny_data()
    bad = tr.subset(np.arange(len(tr)))
    bad.X = bad.X.copy()
    bad.X[5, 2, 1] = np.nan
    m = _model("fp")
    before = m.params.copy()
    with pytest.raises(TrainingDiverged) as err:
        train(m, bad, va, TrainConfig(max_epochs=2, batch_size=len(bad)))
    assert err.value.params.equal(before)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(lr=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(early_stop="accuracy")
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"learning_rate": 1e-3})
    cfg = TrainConfig(lr=2e-3, hinge=False)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg


# ------------------------------------------------------------------ checkpoints
@pytest.mark.parametrize("kind", ["dw", "mtl"])
def test_checkpoint_reload_is_bit_exact(kind, tmp_path, rng):
    m = _model(kind, seed=11)
    m.pretrained = True
    save_params(tmp_path / "p.npz", m.params)
    (tmp_path / "m.json").write_text(json.dumps(m.manifest()))
    back = model_from_manifest(json.loads((tmp_path / "m.json").read_text()),
                               load_params(tmp_path / "p.npz"))
    X = rng.standard_normal((7, 4, 3))
    a, b = predict_arrays(m, X), predict_arrays(back, X)
    assert back.pretrained and a.keys() == b.keys()
    for key in a:
        assert a[key].tobytes() == b[key].tobytes()
