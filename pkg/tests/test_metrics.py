import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy import stats

from oracles import average_precision_bruteforce, mann_whitney_auc
from rulfp.errors import DomainError
from rulfp.metrics import (EvalReport, default_edges, pr_auc, roc_auc, rmse, rul_confusion,
                           spearman)

scores_labels = st.integers(2, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(-5, 5).map(float), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n)))


# ------------------------------------------------------------------ rmse
def test_rmse_examples():
    assert rmse([3.0], [0.0]) == 3.0
    assert rmse([2.0, 4.0], [0.0, 0.0]) == pytest.approx(np.sqrt(10.0), rel=1e-15)
    with pytest.raises(DomainError):
        rmse([], [])
    with pytest.raises(DomainError):
        rmse([1.0, 2.0], [1.0])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.randoms())
def test_rmse_permutation_invariant_and_nonnegative(xs, rnd):
    t = [x * 0.5 + 1 for x in xs]
    pairs = list(zip(xs, t))
    rnd.shuffle(pairs)
    a = rmse(xs, t)
    b = rmse([p for p, _ in pairs], [q for _, q in pairs])
    assert a >= 0 and a == pytest.approx(b, rel=1e-12, abs=1e-12)


# ------------------------------------------------------------------ ROC
@given(scores_labels)
def test_roc_area_matches_mann_whitney(data):
    s, y = data
    assume(0 < sum(y) < len(y))
    _, area = roc_auc(s, y)
    assert area == pytest.approx(mann_whitney_auc(s, y), abs=1e-12)


def test_roc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])[1] == 1.0
    assert roc_auc([0.5] * 6, [1, 0, 1, 0, 0, 1])[1] == 0.5
    (fpr, tpr, thr), _ = roc_auc([0.9, 0.1], [1, 0])
    assert fpr[0] == tpr[0] == 0 and fpr[-1] == tpr[-1] == 1 and thr[0] == np.inf
    with pytest.raises(DomainError):
        roc_auc([0.1, 0.2], [1, 1])
    with pytest.raises(DomainError):
        roc_auc([np.nan, 0.2], [1, 0])


def test_roc_random_scores_near_half(rng):
    y = rng.integers(0, 2, 20_000)
    _, area = roc_auc(rng.random(20_000), y)
    assert abs(area - 0.5) < 0.02


# ------------------------------------------------------------------ PR
def test_pr_single_positive_examples():
    n = 8
    s = np.arange(n, 0, -1, dtype=float)
    first = np.zeros(n, int)
    first[0] = 1
    last = np.zeros(n, int)
    last[-1] = 1
    assert pr_auc(s, first)[1] == 1.0
    assert pr_auc(s, last)[1] == pytest.approx(1 / n)
    with pytest.raises(DomainError):
        pr_auc([0.1, 0.2], [0, 0])


@given(scores_labels)
def test_pr_matches_bruteforce(data):
    s, y = data
    assume(sum(y) > 0)
    assert pr_auc(s, y)[1] == pytest.approx(average_precision_bruteforce(s, y), abs=1e-12)


@given(scores_labels)
def test_pr_invariant_under_monotone_transform(data):
    s, y = data
    assume(sum(y) > 0)
    t = np.exp(np.asarray(s) / 3.0) * 2 - 7
    assert pr_auc(t, y)[1] == pytest.approx(pr_auc(s, y)[1], abs=1e-12)
    assert 0 <= pr_auc(s, y)[1] <= 1


def test_pr_random_scores_near_base_rate(rng):
    y = (rng.random(50_000) < 0.1).astype(int)
    _, area = pr_auc(rng.random(50_000), y)
    assert abs(area - y.mean()) < 0.01


def test_pr_curve_endpoints():
    (rec, prec, thr), _ = pr_auc([0.9, 0.3, 0.6], [1, 0, 1])
    assert rec[0] == 0 and prec[0] == 1 and rec[-1] == 1 and thr[0] == np.inf


# ------------------------------------------------------------------ Spearman
def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 2, 4], [4, 3, 3, 1]) == pytest.approx(-1.0, abs=1e-15)
    with pytest.raises(DomainError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(DomainError):
        spearman([1], [1])


@given(st.lists(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=3, max_size=30))
def test_spearman_matches_scipy_and_is_antisymmetric(pairs):
    x = np.array([p[0] for p in pairs], float)
    y = np.array([p[1] for p in pairs], float)
    assume(np.ptp(x) > 0 and np.ptp(y) > 0)
    r = spearman(x, y)
    assert r == pytest.approx(stats.spearmanr(x, y).statistic, abs=1e-12)
    assert spearman(x, -y) == pytest.approx(-r, abs=1e-12)
    assert spearman(y, x) == pytest.approx(r, abs=1e-12)


# ------------------------------------------------------------------ confusion
def test_confusion_perfect_prediction_is_diagonal():
    edges = default_edges(120.0, 6)
    truth = np.array([5, 25, 45, 65, 85, 105, 120.0])
    mat = rul_confusion(truth, truth, edges)
    assert np.array_equal(mat, np.diag(np.diag(mat))) and mat.sum() == 7
    assert mat[-1, -1] == 2  # top edge belongs to the last bin


def test_confusion_constant_top_prediction_fills_last_column(caplog):
    edges = default_edges(120.0, 6)
    truth = np.linspace(0, 119, 30)
    with caplog.at_level("WARNING"):
        mat = rul_confusion(np.full(30, 500.0), truth, edges)
    assert mat[:, :-1].sum() == 0 and mat[:, -1].sum() == 30
    assert "clipped" in caplog.text


def test_confusion_bad_edges():
    with pytest.raises(DomainError):
        rul_confusion([1.0], [1.0], [0.0, 0.0, 1.0])


def test_report_omits_missing_metrics():
    d = EvalReport("fp", 10, auc_roc=0.7, auc_pr=0.2).to_dict()
    assert "rmse" not in d and d["auc_roc"] == 0.7
