import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import mvindex

DATA = Path(os.environ.get("MVINDEX_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def bundled():
    table = mvindex.load_returns(DATA / "synthetic_prices.csv", "KLCI")
    rf = mvindex.average_risk_free(DATA / "synthetic_riskfree.csv")
    return table, mvindex.markowitz_estimates(table), mvindex.index_model_estimates(table), rf


def test_ingest_shapes(bundled):
    table, _, _, rf = bundled
    assert table.returns.shape == (127, 11)
    assert table.months[0] == "2013-02" and table.months[-1] == "2023-08"
    assert table.tickers[table.market_index] == "KLCI"
    assert rf == pytest.approx(0.002139918, abs=1e-9)


def test_estimates_match_numpy(bundled):
    table, mm, im, _ = bundled
    np.testing.assert_allclose(mm.mean, table.returns.mean(axis=0), rtol=0, atol=1e-15)
    np.testing.assert_allclose(mm.cov, np.cov(table.returns, rowvar=False), rtol=0, atol=1e-15)
    market = table.returns[:, table.market_index]
    slope = np.polyfit(market, table.returns[:, 0], 1)[0]
    assert im.beta[0] == pytest.approx(slope, abs=1e-10)
    assert mvindex.estimator_count(mvindex.Model.MM, 11) == 77
    assert mvindex.estimator_count(mvindex.Model.IM, 11) == 35


def test_diagonal_pair_solutions():
    cov = np.diag([0.01, 0.04])
    mean = np.array([0.01, 0.02])
    mv = mvindex.solve_min_variance(cov, "c3")
    np.testing.assert_allclose(mv.weights, [0.8, 0.2], atol=1e-9)
    ms = mvindex.solve_max_sharpe(cov, mean, 0.0, "c3")
    np.testing.assert_allclose(ms.weights, [2 / 3, 1 / 3], atol=1e-8)
    assert ms.sharpe == pytest.approx(math.sqrt(0.02), rel=1e-8)
    assert ms.converged and ms.kkt_residual <= 1e-6
    np.testing.assert_allclose(mvindex.closed_form_tangency(cov, mean, 0.0), [2 / 3, 1 / 3], atol=1e-14)


def test_regimes_on_bundled_data(bundled):
    table, mm, _, rf = bundled
    k = table.market_index
    for c in mvindex.ConstraintSet.all(k):
        sol = mvindex.solve_max_sharpe(mm.cov, mm.mean, rf, c)
        feasible, violations = mvindex.check_feasible(sol.weights, c, 1e-7)
        assert feasible, violations
    c5 = mvindex.solve_min_variance(mm.cov, "c5", mean=mm.mean, rf=rf, market_index=k)
    assert c5.weights[k] == 0.0
    c1 = mvindex.solve_max_sharpe(mm.cov, mm.mean, rf, mvindex.ConstraintSet("c1", k))
    assert np.abs(c1.weights).sum() <= 2 + 1e-7


def test_frontier_and_cloud():
    cov = np.diag([0.01, 0.04])
    mean = np.array([0.01, 0.02])
    curve = mvindex.trace_frontier(cov, mean, 0.0, "c4", grid=3)
    assert curve.points[0] == pytest.approx([math.sqrt(0.008), 0.012])
    assert curve.points[-1] == pytest.approx([0.2, 0.02])
    cal = mvindex.capital_allocation_line(0.0, curve.tangency.stats, 0.3, 10)
    assert cal[0].tolist() == [0.0, 0.0]
    cloud = mvindex.sample_cloud("c4", 3, 100, seed=7)
    assert cloud.shape == (100, 3) and (cloud >= 0).all()
    np.testing.assert_allclose(cloud.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_array_equal(cloud, mvindex.sample_cloud("c4", 3, 100, seed=7))


def test_compare_report(bundled):
    _, mm, im, rf = bundled
    report = json.loads(mvindex.compare_models(mm, im, rf))
    assert report["estimator_counts"] == {"MM": 77, "IM": 35}
    assert len(report["rows"]) == 20


def test_errors_map_to_python_exceptions():
    with pytest.raises(mvindex.InfeasibleError):
        mvindex.solve_target_return(np.diag([0.01, 0.04]), np.array([0.01, 0.02]), 0.5, "c4")
    with pytest.raises(mvindex.UnboundedError):
        mvindex.solve_max_sharpe(np.diag([0.01, 0.04]), np.array([0.001, 0.002]), 0.01, "c4")
    with pytest.raises(mvindex.ConfigurationError):
        mvindex.ConstraintSet("c7")
    with pytest.raises(mvindex.Error):
        mvindex.load_returns(DATA / "missing.csv")
