import numpy as np
import pytest
from sklearn.feature_selection import mutual_info_regression

from simreg.numeric import Dataset
from simreg.relevance import InvalidMetric, assess_relevance, mutual_information, sort_by_relevance


def test_perfect_linear_correlation():
    x = np.linspace(-1, 1, 50)
    assert assess_relevance(Dataset({"x": x}, 3 * x), "correlation")["x"] == pytest.approx(1.0)


def test_independent_noise_correlation_bound():
    rng = np.random.default_rng(11)
    d = Dataset({"x": rng.normal(size=10**4)}, rng.normal(size=10**4))
    assert assess_relevance(d, "correlation")["x"] < 0.05


def test_both_is_equal_weight_blend():
    rng = np.random.default_rng(12)
    x = rng.uniform(-2, 2, 300)
    d = Dataset({"x": x}, x**2 + 0.1 * rng.normal(size=300))
    c = assess_relevance(d, "correlation")["x"]
    m = assess_relevance(d, "mutual_information")["x"]
    assert assess_relevance(d, "both")["x"] == pytest.approx(0.5 * c + 0.5 * m, rel=1e-12)


def test_mi_matches_reference_estimator():
    rng = np.random.default_rng(13)
    for _ in range(5):
        x = rng.uniform(-3, 3, 400)
        y = np.sin(x) + 0.2 * rng.normal(size=400)
        ref = mutual_info_regression(x[:, None], y, n_neighbors=3, random_state=0)[0]
        assert mutual_information(x, y) == pytest.approx(ref, abs=1e-3)


def test_mi_nonnegative_and_deterministic():
    rng = np.random.default_rng(14)
    x, y = rng.normal(size=200), rng.normal(size=200)
    assert mutual_information(x, y) >= 0.0
    assert mutual_information(x, y, seed=3) == mutual_information(x, y, seed=3)


def test_row_permutation_invariance():
    rng = np.random.default_rng(15)
    x, z = rng.uniform(0, 5, 250), rng.normal(size=250)
    y = np.log1p(x) + 0.3 * z
    perm = rng.permutation(250)
    a = assess_relevance(Dataset({"x": x, "z": z}, y))
    b = assess_relevance(Dataset({"x": x[perm], "z": z[perm]}, y[perm]))
    for name in a:
        assert a[name] == pytest.approx(b[name], abs=1e-9)


def test_constant_column_scores_zero_in_correlation():
    d = Dataset({"c": np.ones(20), "x": np.arange(20.0)}, np.arange(20.0) * 2)
    scores = assess_relevance(d, "correlation")
    assert scores["c"] == 0.0 and scores["x"] == pytest.approx(1.0)


def test_invalid_metric():
    d = Dataset({"x": [1.0, 2.0, 3.0]}, [1.0, 2.0, 3.0])
    with pytest.raises(InvalidMetric):
        assess_relevance(d, "entropy")


def test_sort_by_relevance():
    assert sort_by_relevance({"x": 0.9, "y": 0.1}) == ["x", "y"]
    assert sort_by_relevance({"y": 0.5, "x": 0.5}) == ["x", "y"]
    assert sort_by_relevance({"q": 0.0}) == ["q"]
