"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``ACCEPTANCE <n> PASS|FAIL`` line to the terminal (even
under output capture) before asserting. The FD001 criteria read the NASA
C-MAPSS text files from ``$CMAPSS_DIR``; without them those tests fail and say
so, because the criterion has not been demonstrated.
"""

import json
import math
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
from scipy import optimize, stats

from conftest import cmapss_dir
from oracles import grid_mle
from rulfp.cli import main
from rulfp.diffcore import Tensor, grad
from rulfp.models import TrainConfig, build_model, predict_arrays, small_arch, train_any
from rulfp.models.checks import CHECK_NAMES, TOLERANCE, gradcheck_suite
from rulfp.pipeline import (SynthConfig, WindowingConfig, apply_normalizer, build_windowset,
                            fit_normalizer, load_cmapss, positive_fraction, split_devices,
                            synth_weibull)
from rulfp.weibull import (WeibullParams, expected_rul, gamma_fn, poly_pow, sample, transform_t,
                           weibull_nll)

TESTS = Path(__file__).parent


@pytest.fixture
def announce(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def say(number: int, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {detail}"
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
    return say


# ------------------------------------------------------------------ 1. gradients
def test_gradient_fidelity(announce):
    start = time.perf_counter()
    results = gradcheck_suite(seed=0)
    elapsed = time.perf_counter() - start
    worst = max(results, key=lambda r: r.max_rel_error)
    names = {r.name for r in results}
    ok = (all(r.passed and r.max_rel_error < 1e-5 for r in results) and elapsed < 60
          and names == set(CHECK_NAMES) and {"dw_nll_poly", "mtl_loss", "lstm_sequence"} <= names)
    announce(1, ok, f"{len(results)} checks, worst {worst.name} = {worst.max_rel_error:.2e} "
                    f"(< {TOLERANCE:g}), {elapsed:.1f}s")
    assert ok


# ------------------------------------------------------------------ 2. MLE recovery
def _censored_draws(n, lam, k, q, seed):
    rng = np.random.default_rng(seed)
    life = sample(WeibullParams(lam, k), rng.uniform(1e-12, 1, n))
    theta = ((1 - q) / q) ** (1 / k)
    cens = sample(WeibullParams(theta * lam, k), rng.uniform(1e-12, 1, n))
    return np.minimum(life, cens), (life <= cens).astype(float)


def _constant_output_fit(t, delta):
    """Fit one shared network output (o1, o2) through the Weibull output transform."""
    def f(x):
        o = Tensor(x.reshape(1, 2), requires_grad=True)
        lam, k = transform_t(o)
        loss = weibull_nll(t, delta, lam, k, reduction="mean")
        return float(loss.data), grad(loss, {"o": o})["o"].reshape(-1)

    x0 = np.array([math.log(np.mean(t)), 0.5])
    res = optimize.minimize(f, x0, jac=True, method="L-BFGS-B", options={"gtol": 1e-10})
    lam, k = transform_t(Tensor(res.x.reshape(1, 2)))
    return float(lam.data[0]), float(k.data[0])


def test_weibull_mle_recovery(announce):
    start = time.perf_counter()
    t, delta = _censored_draws(5000, 50.0, 1.8, 0.3, seed=2024)
    lam_hat, k_hat = _constant_output_fit(t, delta)
    lam_g, k_g = grid_mle(t, delta, np.linspace(30, 70, 201), np.linspace(1.0, 2.6, 201))
    elapsed = time.perf_counter() - start
    errs = (abs(lam_hat / lam_g - 1), abs(k_hat / k_g - 1), abs(lam_hat / 50 - 1),
            abs(k_hat / 1.8 - 1))
    ok = errs[0] < 0.05 and errs[1] < 0.05 and errs[2] < 0.10 and errs[3] < 0.10 and elapsed < 60
    announce(2, ok, f"fit (lam={lam_hat:.3f}, k={k_hat:.4f}), grid (lam={lam_g:.3f}, k={k_g:.4f}), "
                    f"censored {1 - delta.mean():.3f}, {elapsed:.1f}s")
    assert ok


# ------------------------------------------------------------------ 3. closed forms
def test_closed_form_checks(announce):
    rng = np.random.default_rng(7)
    worst_mc = 0.0
    for _ in range(10):
        p = WeibullParams(float(rng.uniform(1, 100)), float(rng.uniform(0.8, 5)))
        mc = sample(p, rng.uniform(1e-15, 1.0, 1_000_000)).mean()
        worst_mc = max(worst_mc, abs(expected_rul(p) / mc - 1))
    u = np.linspace(-1, 1, 10_000)
    p = WeibullParams(3.0, 2.0)
    t = p.lam * np.exp(u / p.k)
    poly_err = float(np.max(np.abs(poly_pow(t, p) - np.exp(u))))
    x = np.linspace(0.05, 20, 4000)
    recur = float(np.max(np.abs(gamma_fn(x + 1) / (x * gamma_fn(x)) - 1)))
    ok = worst_mc < 0.005 and poly_err <= 0.022652 and recur < 1e-10
    announce(3, ok, f"MC mean rel err {worst_mc:.2e}, poly err {poly_err:.5f}, "
                    f"Gamma recurrence {recur:.1e}")
    assert ok


# ------------------------------------------------------------------ 4. synthetic DW
def test_synthetic_weibull_end_to_end(announce):
    start = time.perf_counter()
    cfg = SynthConfig(w=5, k=1.8, censor_fraction=0.3)
    seqs, truth = synth_weibull(5000, 8, cfg, seed=0)
    pool, held = split_devices(seqs, 0.2, seed=0)
    train_seqs, val_seqs = split_devices(pool, 0.3, seed=1)
    stats_ = fit_normalizer(train_seqs)
    # one window per device, ending where the residual life clock starts
    wc = WindowingConfig(cfg.w, 10 ** 6, 0, 5, 10 ** 6)
    tr, va, te = (build_windowset(apply_normalizer(stats_, s), wc)
                  for s in (train_seqs, val_seqs, held))
    model = build_model("dw", small_arch("dw", lstm=16, fcs=(16, 8)), tr.n_features, seed=0,
                        horizon=1.0, max_rul=wc.max_rul_units)
    tcfg = TrainConfig(lr=3e-3, batch_size=128, max_epochs=150, pretrain_max_epochs=30,
                       patience=15, use_poly=False, min_tg=0.1, early_stop="loss")
    model, history = train_any(model, tr, va, tcfg)
    out = predict_arrays(model, te.X)
    index = {d: i for i, d in enumerate(truth.device_id)}
    rows = np.array([index[d] for d in te.device_id])
    lam_err = float(np.median(np.abs(out["lam"] / truth.lam[rows] - 1)))
    k_med = float(np.median(out["k"]))
    rho = float(stats.spearmanr(out["rul_hat"], truth.lifetime[rows]).statistic)
    elapsed = time.perf_counter() - start
    ok = lam_err < 0.15 and abs(k_med / cfg.k - 1) <= 0.20 and rho >= 0.8 and elapsed < 900
    announce(4, ok, f"{len(te)} held-out devices: median |lam err| {lam_err:.3f}, median k "
                    f"{k_med:.3f} (true {cfg.k}), Spearman {rho:.3f}, {len(history)} epochs, "
                    f"{elapsed:.0f}s")
    assert ok


# ------------------------------------------------------------------ 5-7. FD001
def _need_fd001(announce, number):
    path = cmapss_dir()
    if path is None:
        announce(number, False, "FD001 data not available; set CMAPSS_DIR to the directory "
                                "holding train_FD001.txt, test_FD001.txt and RUL_FD001.txt")
        pytest.fail("criterion not demonstrated: C-MAPSS FD001 files are missing")
    return path


@pytest.fixture(scope="module")
def fd001_runs(tmp_path_factory):
    """Prepare FD001 once and train the RUL, MTL and DW networks through the CLI."""
    path = cmapss_dir()
    if path is None:
        return None
    root = tmp_path_factory.mktemp("fd001")
    base = ["--set", "dataset.kind=cmapss", "--set", f"dataset.path={path}"]
    assert main(["prepare", "-o", str(root / "prepared_root")] + base) == 0
    runs = {}
    for kind in ("rul", "mtl", "dw"):
        out = root / kind
        out.mkdir()
        (out / "prepared").symlink_to(root / "prepared_root" / "prepared")
        start = time.perf_counter()
        code = main(["train", "-o", str(out), "--set", f"model.kind={kind}"] + base)
        elapsed = time.perf_counter() - start
        metrics = json.loads((out / "train" / "run_0" / "metrics.json").read_text()) \
            if code == 0 else {}
        runs[kind] = {"code": code, "seconds": elapsed, **metrics}
    return runs


def test_fd001_reproduction(announce, fd001_runs):
    _need_fd001(announce, 5)
    r = fd001_runs
    ok = (all(r[k]["code"] == 0 and r[k]["seconds"] <= 1800 for k in r)
          and r["rul"]["rmse"] <= 30 and r["mtl"]["rmse"] <= 30 and r["mtl"]["auc_pr"] >= 0.55
          and r["dw"]["rmse"] <= 32 and r["dw"]["auc_pr"] >= 0.55
          and r["mtl"]["auc_roc"] - r["rul"]["auc_roc"] >= 0.10)
    announce(5, ok, "; ".join(
        f"{k}: rmse {r[k].get('rmse', float('nan')):.2f}, auc_pr {r[k].get('auc_pr', float('nan')):.3f}, "
        f"auc_roc {r[k].get('auc_roc', float('nan')):.3f}, {r[k]['seconds']:.0f}s" for k in r))
    assert ok


def test_fd001_consistency(announce, fd001_runs):
    _need_fd001(announce, 6)
    r = fd001_runs
    rho = {k: r[k].get("spearman_consistency", float("nan")) for k in r}
    ok = abs(rho["rul"] + 1.0) < 5e-4 and rho["dw"] <= -0.5 and rho["mtl"] <= -0.5
    announce(6, ok, ", ".join(f"{k} {v:.3f}" for k, v in rho.items()))
    assert ok


def test_fd001_positive_fraction(announce):
    path = _need_fd001(announce, 7)
    train, _, _ = load_cmapss(path, "FD001")
    frac = positive_fraction(train, WindowingConfig.cmapss())
    ok = abs(100 * frac - 0.85) <= 0.3
    announce(7, ok, f"positive-window fraction {100 * frac:.3f}% (target 0.85 +/- 0.3 points)")
    assert ok


# ------------------------------------------------------------------ 8. property suites
REQUIRED = {
    "test_metrics.py::test_roc_area_matches_mann_whitney": "Mann-Whitney AUC oracle",
    "test_weibull.py::test_sample_kolmogorov_distance": "inverse-CDF Kolmogorov check",
    "test_models.py::test_mtl_objective_is_the_weighted_sum_of_its_parts": "loss decomposition",
    "test_models.py::test_training_is_deterministic": "training determinism",
    "test_diffcore.py::test_adam_trajectory_bitwise_reproducible": "optimizer determinism",
    "test_cli.py::test_prepare_is_byte_identical_on_rerun": "prepare determinism",
}


def test_property_suites(announce, tmp_path):
    files = ["test_diffcore.py", "test_weibull.py", "test_pipeline.py", "test_metrics.py",
             "test_models.py", "test_config.py", "test_cli.py"]
    report = tmp_path / "junit.xml"
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           f"--junitxml={report}", *files], cwd=TESTS, capture_output=True,
                          text=True)
    cases = {}
    for case in ET.parse(report).getroot().iter("testcase"):
        name = case.get("classname").split(".")[-1] + ".py::" + case.get("name").split("[")[0]
        failed = any(child.tag in ("failure", "error", "skipped") for child in case)
        cases[name] = cases.get(name, True) and not failed
    missing = [k for k in REQUIRED if k not in cases]
    bad = [k for k, v in cases.items() if not v]
    ok = proc.returncode == 0 and not missing and not bad
    announce(8, ok, f"{len(cases)} property and unit tests, {len(bad)} failing, "
                    f"required present: {len(REQUIRED) - len(missing)}/{len(REQUIRED)}")
    assert ok, proc.stdout[-3000:]
