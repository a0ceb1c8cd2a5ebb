import warnings
from functools import lru_cache

import numpy as np
import pytest

from src.constants import METRIC_NAMES
from src.metrics import TrendCurve, delta_bias, delta_div, evaluate_trend, frechet_distance, pearson_corr


def recursive_frechet(a, b):
    n, m = len(a), len(b)
    xa = np.arange(n) / (n - 1) if n > 1 else np.zeros(1)
    xb = np.arange(m) / (m - 1) if m > 1 else np.zeros(1)

    def dist(i, j):
        return float(np.hypot(xa[i] - xb[j], a[i] - b[j]))

    @lru_cache(maxsize=None)
    def coupling(i, j):
        if i == 0 and j == 0:
            return dist(0, 0)
        if i == 0:
            return max(coupling(0, j - 1), dist(0, j))
        if j == 0:
            return max(coupling(i - 1, 0), dist(i, 0))
        return max(min(coupling(i - 1, j), coupling(i - 1, j - 1), coupling(i, j - 1)), dist(i, j))

    return coupling(n - 1, m - 1)


def test_frechet_matches_recursive_definition(rng):
    for _ in range(200):
        n = int(rng.integers(1, 13))
        a, b = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        assert frechet_distance(a, b) == pytest.approx(recursive_frechet(a, b), abs=1e-12)


def test_frechet_identity_and_offset(rng):
    a = rng.uniform(-0.5, 0.5, 10)
    assert frechet_distance(a, a) == 0.0
    assert frechet_distance(a, a + 0.3) == pytest.approx(0.3, abs=1e-12)


def test_bias_and_div_match_definition(rng):
    for _ in range(50):
        a, b = rng.uniform(-1, 1, 30), rng.uniform(-1, 1, 30)
        gaps = [abs(y - x) for x, y in zip(a, b)]
        mean = sum(gaps) / len(gaps)
        var = sum((g - mean) ** 2 for g in gaps) / len(gaps)
        assert delta_bias(a, b) == pytest.approx(mean, abs=1e-12)
        assert delta_div(a, b) == pytest.approx(var, abs=1e-12)


def test_pearson_matches_definition(rng):
    for _ in range(50):
        a, b = rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20)
        assert pearson_corr(a, b) == pytest.approx(np.corrcoef(a, b)[0, 1], abs=1e-12)


def test_pearson_constant_curve_is_zero():
    assert pearson_corr([0.2, 0.2, 0.2], [0.1, 0.5, -0.3]) == 0.0


def test_pearson_of_linear_curves():
    a = np.linspace(-0.5, 0.5, 30)
    assert pearson_corr(a, 0.3 * a + 0.1) == pytest.approx(1.0)
    assert pearson_corr(a, -a) == pytest.approx(-1.0)


def test_pearson_constant_curve_emits_no_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert pearson_corr([0.1, 0.5, -0.3], [0.0, 0.0, 0.0]) == 0.0


def test_pearson_needs_two_points():
    with pytest.raises(ValueError):
        pearson_corr([0.1], [0.2])


def test_length_mismatch_raises():
    with pytest.raises(ValueError):
        delta_bias([0.1, 0.2], [0.1])


def test_evaluate_trend_keys_and_single_point():
    metrics = evaluate_trend([0.5], [0.25])
    assert tuple(metrics) == METRIC_NAMES
    assert metrics["ΔBias"] == 0.25
    assert metrics["ΔDiv"] == 0.0
    assert metrics["Corr."] == 0.0
    assert metrics["F."] == 0.25


def test_trend_curve_from_history():
    curve = TrendCurve.from_history(np.array([[1.0, 0.0, 0.5], [0.0, 0.0, -0.5]]))
    np.testing.assert_array_equal(curve.values, [0.5, 0.0, 0.0])
    assert len(curve) == 3
    assert evaluate_trend(curve, curve)["F."] == 0.0
