import json
import math
import time

import pytest

import verify_suite
from config import config
from connectivity import ShootOptions
from constants import CHECK_TOLERANCES
from metric_zoo import INVARIANTS, ORACLE_INVARIANTS
from metrics import zoo_metrics
from verify_suite import (
    CheckReport, SuiteReport, check_chern_consistency, check_connection_family_invariance,
    check_energy_conservation, check_fundamental_inequality, check_gauss_lemma, check_metric_algebra,
    check_path_residuals, check_quadratic_growth, check_radial_minimality, replay_witness, run_all,
)
from utils.exceptions import ConvexityError, InputError

TINY = {
    "algebra_flags": 10,
    "energy_flags": 1,
    "chern_flags": 3,
    "gauss_flags": 2,
    "radial_curves": 1,
    "inequality_trials": 8,
    "family_flags": 2,
    "growth_epsilon": 0.3,
    "growth_mus": [0.25],
}


def assert_passed(report: CheckReport):
    assert report.passed, report.to_dict()
    assert report.tolerance == CHECK_TOLERANCES[report.check]


class TestChecks:
    def test_metric_algebra(self, randers_expr):
        report = check_metric_algebra(randers_expr, samples=20, seed=4)
        assert_passed(report)
        assert report.witness["quantity"] in report.details
        assert replay_witness(randers_expr, report) == pytest.approx(report.max_residual, abs=1e-15)

    def test_metric_algebra_rejects_quartic(self, quartic):
        with pytest.raises(ConvexityError):
            check_metric_algebra(quartic, samples=100)

    def test_energy_conservation(self, poincare):
        report = check_energy_conservation(poincare, flags=3, t_end=0.5, step=1e-2)
        assert_passed(report)
        assert report.samples == 3
        assert replay_witness(poincare, report) == pytest.approx(report.max_residual, rel=1e-2)

    def test_chern_consistency(self, poincare, randers_expr):
        report = check_chern_consistency(poincare, flags=4)
        assert_passed(report)
        assert report.details["riemannian_reduction"]
        assert report.samples == 8
        assert not check_chern_consistency(randers_expr, flags=2).details["riemannian_reduction"]

    def test_path_residuals(self, sphere):
        report = check_path_residuals(sphere, flags=2, step=0.05, stride=5)
        assert_passed(report)
        assert replay_witness(sphere, report) == pytest.approx(report.max_residual, rel=1e-2)

    def test_gauss_lemma(self, poincare, randers_expr):
        assert_passed(check_gauss_lemma(randers_expr, flags=5, step=0.25))
        report = check_gauss_lemma(poincare, flags=3, step=0.05)
        assert_passed(report)
        assert replay_witness(poincare, report) == pytest.approx(report.max_residual, rel=1e-2, abs=1e-12)

    def test_radial_minimality(self, randers_expr, poincare):
        report = check_radial_minimality(randers_expr, curves=5, step=0.25)
        assert_passed(report)
        assert report.details["radial_equality"] < 1e-9
        assert_passed(check_radial_minimality(poincare, curves=3, step=0.01))

    def test_fundamental_inequality(self, randers_flat, sphere):
        for metric in (randers_flat, sphere):
            report = check_fundamental_inequality(metric, trials=40, seed=7)
            assert_passed(report)
            assert report.samples == 40

    def test_quadratic_growth(self, euclidean):
        report = check_quadratic_growth(euclidean, epsilon=0.3, step=0.25, opts=ShootOptions(step=0.25))
        assert_passed(report)
        (fit,) = report.details["fits"]
        assert fit["rho"] == pytest.approx(0.3)
        # d(0, c(t)) = sqrt(ε² + t²)，窗口内 (d - d0)/t² >= (sqrt(2) - 1)/ε
        assert fit["fitted_mu"] >= (math.sqrt(2) - 1) / 0.3 - 1e-6

    def test_connection_family_invariance(self, euclidean):
        report = check_connection_family_invariance(euclidean, flags=2, seeds=(0,), step=0.25)
        assert_passed(report)
        assert 0.2 < report.details["control_deviation"] < 0.6

    def test_replay_requires_witness(self, euclidean):
        empty = CheckReport("gauss_lemma", "euclidean", 0, 0.0, 1e-5)
        with pytest.raises(InputError):
            replay_witness(euclidean, empty)

    def test_radial_equality_is_enforced(self, euclidean, monkeypatch):
        """零振幅曲线就是径向线段本身，长度偏差超过 1e-9 记为违例。"""
        real = verify_suite._radial_margins

        def shifted(metric, witnesses):
            return [m + (1e-6 if w["amplitude"] == 0.0 else 0.0) for w, m in zip(witnesses, real(metric, witnesses))]

        monkeypatch.setattr(verify_suite, "_radial_margins", shifted)
        report = check_radial_minimality(euclidean, curves=5, step=0.25)
        assert report.violations == 1
        assert not report.passed
        assert report.details["radial_equality"] == pytest.approx(1e-6, rel=1e-3)

    def test_radial_equality_uses_finer_step(self, poincare, monkeypatch):
        seen = []
        real = verify_suite._radial_margins

        def recording(metric, witnesses):
            seen.extend(witnesses)
            return real(metric, witnesses)

        monkeypatch.setattr(verify_suite, "_radial_margins", recording)
        report = check_radial_minimality(poincare, curves=5, step=0.02)
        assert_passed(report)
        assert {w["amplitude"]: w["step"] for w in seen}[0.0] == pytest.approx(0.005)
        assert all(w["step"] == 0.02 for w in seen if w["amplitude"] > 0.0)

    def test_quadratic_growth_acceptance_coefficient(self, euclidean):
        report = check_quadratic_growth(euclidean, epsilon=0.2, mus=(0.4,), step=0.25, opts=ShootOptions(step=0.25))
        assert_passed(report)
        (fit,) = report.details["fits"]
        assert fit["coefficient"] == pytest.approx(0.4 / 0.2)
        assert fit["rho"] == pytest.approx(0.2)

    @pytest.mark.parametrize("name", ["poincare", "sphere"])
    def test_quadratic_growth_curved(self, request, name):
        metric = request.getfixturevalue(name)
        report = check_quadratic_growth(metric, epsilon=0.2, mus=(0.2, 0.4), seed=3, step=0.05)
        assert_passed(report)
        fits = {fit["mu"]: fit for fit in report.details["fits"]}
        assert fits[0.2]["rho"] > 0.0
        assert fits[0.2]["fitted_mu"] > 0.0

    def test_growth_witness_replays_with_run_seed(self, sphere):
        report = check_quadratic_growth(sphere, epsilon=0.2, mus=(0.2,), seed=9, step=0.05)
        assert report.witness["seed"] == 9
        assert replay_witness(sphere, report) == pytest.approx(report.max_residual, abs=1e-9)

    def test_quadratic_growth_rejects_mu_outside_unit_interval(self, euclidean):
        with pytest.raises(InputError):
            check_quadratic_growth(euclidean, mus=(1.5,))

    def test_algebra_scores_every_flag_invariant(self, poincare):
        report = check_metric_algebra(poincare, samples=10, seed=2)
        assert set(report.details) == set(INVARIANTS)
        assert report.witness["quantity"] in set(INVARIANTS) - set(ORACLE_INVARIANTS)

    def test_report_json_has_no_infinity(self):
        report = CheckReport("gauss_lemma", "m", 0, math.inf, 1e-5, 1, details={"nan": math.nan, "ok": [1.0]})
        data = report.to_dict()
        assert data["max_residual"] is None
        assert data["details"] == {"nan": None, "ok": [1.0]}
        text = json.dumps(SuiteReport(0, ["m"], [report]).to_dict(), allow_nan=False)
        assert "Infinity" not in text and "NaN" not in text


class TestRunAll:
    def test_empty_set(self):
        suite = run_all([])
        assert suite.passed
        assert suite.to_dict()["reports"] == []

    def test_rejects_non_convex_metric(self, quartic):
        suite = run_all([quartic], settings=dict(TINY, algebra_flags=100))
        assert not suite.passed
        assert "quartic" in suite.rejected
        assert suite.reports == []

    def test_euclidean_suite_is_deterministic(self, euclidean):
        first = run_all([euclidean], seed=11, settings=TINY, concurrency=2)
        second = run_all([euclidean], seed=11, settings=TINY, concurrency=1)
        assert first.passed, [r.to_dict() for r in first.failures()]
        assert [r.check for r in first.reports][0] == "metric_algebra"
        assert len(first.reports) == 9
        assert first.to_dict() == second.to_dict()

    def test_failures_listed(self):
        suite = SuiteReport(0, ["m"], [CheckReport("gauss_lemma", "m", 1, 1.0, 1e-5)])
        assert not suite.passed
        assert [r.check for r in suite.failures()] == ["gauss_lemma"]

    def test_zoo_is_deterministic(self):
        first = run_all(zoo_metrics(), seed=42, settings=TINY)
        second = run_all(zoo_metrics(), seed=42, settings=TINY, concurrency=1)
        assert json.dumps(first.to_dict(), allow_nan=False) == json.dumps(second.to_dict(), allow_nan=False)

    def test_reduced_zoo_run_is_fast(self):
        start = time.perf_counter()
        suite = run_all(zoo_metrics(), seed=42, settings=TINY)
        assert time.perf_counter() - start < 60.0
        assert suite.passed, [r.to_dict() for r in suite.failures()]


class TestAcceptance:
    def test_default_settings_reproduce_acceptance_run(self):
        assert config.verify["radial_curves"] == 200
        assert config.verify["growth_epsilon"] == 0.2
        assert min(config.verify["growth_mus"]) <= 0.4 <= max(config.verify["growth_mus"])

    def test_zoo_seed_42_passes_within_five_minutes(self):
        start = time.perf_counter()
        suite = run_all(zoo_metrics(), seed=42)
        elapsed = time.perf_counter() - start
        assert suite.passed, [r.to_dict() for r in suite.failures()]
        assert len(suite.reports) == 9 * len(zoo_metrics())
        assert elapsed < 300.0
