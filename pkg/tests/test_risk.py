"""Risk formulas against quadrature/enumeration oracles; bound evaluators."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from bml.errors import DomainError, NotExact
from bml.model import (
    MixtureModel,
    explicit_mean,
    explicit_spectrum,
    isotropic_spectrum,
    polynomial_spectrum,
    rotated_spectrum,
    sphere_mean,
)
from bml.risk import (
    build_risk_report,
    check_assumptions,
    concentration_bound_checks,
    concentration_diagnostics,
    exact_gaussian_log_risk,
    exact_gaussian_risk,
    isotropic_upper_bound,
    margin_statistic,
    monte_carlo_risk,
    risk_lower_bound,
    risk_upper_bound,
    sub_gaussian_risk_bound,
    upper_bound_exponent,
)
from bml.sampling import sample_dataset
from bml.solvers import min_norm_interpolator, sherman_morrison_row

from conftest import dataset_from_arrays


def _iso_model(d, mu_norm, dist="gaussian"):
    mu = np.zeros(d)
    mu[0] = mu_norm
    return MixtureModel(mean=explicit_mean(mu), cov=isotropic_spectrum(d), entry_dist=dist)


def _phi_oracle(x: float) -> float:
    """Standard normal CDF by adaptive quadrature of the density."""
    val, err = quad(lambda t: math.exp(-t * t / 2.0) / math.sqrt(2 * math.pi), -60.0, x)
    assert err < 1e-12
    return val


class TestExactGaussianRisk:
    def test_orthogonal_mean_is_half(self):
        model = _iso_model(4, 1.0)
        theta = np.array([0.0, 2.0, 0.0, 0.0])
        assert exact_gaussian_risk(theta, model) == 0.5

    def test_against_quadrature_oracle(self):
        model = _iso_model(4, 1.0)
        risk = exact_gaussian_risk(model.mean.vector, model)
        np.testing.assert_allclose(risk, _phi_oracle(-1.0), atol=1e-12)

        model2 = _iso_model(4, 2.5)
        risk2 = exact_gaussian_risk(model2.mean.vector, model2)
        np.testing.assert_allclose(risk2, _phi_oracle(-2.5), atol=1e-12)

    def test_scale_invariance(self):
        model = _iso_model(6, 1.7)
        theta = np.array([1.0, -0.3, 0.2, 0.0, 0.4, 0.0])
        base = exact_gaussian_risk(theta, model)
        # power-of-two scalings are exact in floating point
        for c in (0.25, 4.0, 2.0**20):
            assert exact_gaussian_risk(c * theta, model) == base
        for c in (0.01, 3.0, 1e6):
            np.testing.assert_allclose(
                exact_gaussian_risk(c * theta, model), base, rtol=1e-12
            )

    def test_non_gaussian_rejected(self):
        model = _iso_model(3, 1.0, dist="rademacher")
        with pytest.raises(NotExact):
            exact_gaussian_risk(model.mean.vector, model)

    def test_zero_theta_rejected(self):
        model = _iso_model(3, 1.0)
        with pytest.raises(DomainError):
            exact_gaussian_risk(np.zeros(3), model)

    def test_strictly_decreasing_in_margin_statistic(self):
        risks = [
            exact_gaussian_risk(_iso_model(3, m).mean.vector, _iso_model(3, m))
            for m in np.linspace(0.1, 6.0, 25)
        ]
        assert np.all(np.diff(risks) < 0)

    def test_anisotropic_statistic(self):
        cov = explicit_spectrum([4.0, 1.0])
        model = MixtureModel(mean=explicit_mean([1.0, 1.0]), cov=cov)
        theta = np.array([1.0, 1.0])
        # <theta, mu> = 2, |theta|_Sigma = sqrt(5)
        np.testing.assert_allclose(
            margin_statistic(theta, model), 2.0 / np.sqrt(5.0), rtol=1e-14
        )


class TestLogRisk:
    def test_matches_log_of_risk(self):
        model = _iso_model(5, 1.3)
        r = exact_gaussian_risk(model.mean.vector, model)
        lr = exact_gaussian_log_risk(model.mean.vector, model)
        np.testing.assert_allclose(lr, math.log(r), rtol=1e-13)

    def test_deep_tail_against_asymptotic_oracle(self):
        # log Phi(-x) = -x^2/2 - log(x sqrt(2 pi)) + log(1 - 1/x^2 + 3/x^4 - ...)
        # the truncated series is off by ~105/x^8, i.e. ~210/x^10 relative
        for x in (10.0, 30.0, 60.0):
            model = _iso_model(3, x)
            lr = exact_gaussian_log_risk(model.mean.vector, model)
            series = 1.0 - 1.0 / x**2 + 3.0 / x**4 - 15.0 / x**6
            oracle = -0.5 * x * x - math.log(x * math.sqrt(2 * math.pi)) + math.log(series)
            np.testing.assert_allclose(lr, oracle, rtol=max(300.0 / x**10, 1e-13))

    def test_never_underflows(self):
        model = _iso_model(3, 200.0)
        assert exact_gaussian_risk(model.mean.vector, model) == 0.0  # beyond float range
        lr = exact_gaussian_log_risk(model.mean.vector, model)
        assert np.isfinite(lr) and lr < -19000


class TestMonteCarloRisk:
    def test_matches_exact_within_three_stderr(self):
        model = _iso_model(30, 1.0)
        est = monte_carlo_risk(model.mean.vector, model, 1_000_000, seed=3)
        exact = exact_gaussian_risk(model.mean.vector, model)
        assert abs(est.estimate - exact) <= 3 * est.stderr
        assert est.stderr > 0

    def test_orthogonal_theta_is_half(self):
        model = _iso_model(8, 2.0)
        theta = np.zeros(8)
        theta[3] = 1.0
        est = monte_carlo_risk(theta, model, 200_000, seed=4)
        assert abs(est.estimate - 0.5) <= 3 * est.stderr

    def test_rademacher_exhaustive_enumeration(self):
        # d = 1: margin = theta (mu + y u) with y u uniform on {-1, +1}
        def enum_risk(theta, mu):
            return np.mean([theta * (mu + s) < 0 for s in (-1.0, 1.0)])

        certain = _iso_model(1, 3.0, dist="rademacher")
        est = monte_carlo_risk(np.array([3.0]), certain, 10_000, seed=5)
        assert est.estimate == enum_risk(3.0, 3.0) == 0.0

        half = _iso_model(1, 0.5, dist="rademacher")
        est2 = monte_carlo_risk(np.array([1.0]), half, 400_000, seed=6)
        assert enum_risk(1.0, 0.5) == 0.5
        assert abs(est2.estimate - 0.5) <= 3 * est2.stderr

    def test_deterministic_given_seed(self):
        model = _iso_model(5, 1.0)
        a = monte_carlo_risk(model.mean.vector, model, 50_000, seed=7)
        b = monte_carlo_risk(model.mean.vector, model, 50_000, seed=7)
        assert a.estimate == b.estimate

    def test_minimum_sample_count(self):
        model = _iso_model(3, 1.0)
        with pytest.raises(DomainError):
            monte_carlo_risk(model.mean.vector, model, 999, seed=1)


class TestSubGaussianBound:
    def test_zero_projection_gives_one(self):
        model = _iso_model(4, 1.0)
        theta = np.array([0.0, 1.0, 0.0, 0.0])
        assert sub_gaussian_risk_bound(theta, model) == 1.0

    def test_half_constant_dominates_gaussian_tail(self):
        model = _iso_model(5, 2.0)
        bound = sub_gaussian_risk_bound(model.mean.vector, model, c=0.5)
        np.testing.assert_allclose(bound, math.exp(-2.0), rtol=1e-14)
        assert exact_gaussian_risk(model.mean.vector, model) <= bound

    def test_domination_on_random_instances(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            d = int(rng.integers(2, 12))
            lam = np.sort(rng.uniform(0.2, 3.0, d))[::-1]
            model = MixtureModel(
                mean=explicit_mean(rng.standard_normal(d)), cov=explicit_spectrum(lam)
            )
            theta = rng.standard_normal(d)
            if theta @ model.mean.vector < 0:
                theta = -theta
            assert exact_gaussian_risk(theta, model) <= sub_gaussian_risk_bound(
                theta, model, c=0.5
            ) * (1 + 1e-12)

    def test_scale_invariance(self):
        model = _iso_model(4, 1.5)
        theta = np.array([1.0, 0.5, 0.0, 0.0])
        base = sub_gaussian_risk_bound(theta, model)
        assert sub_gaussian_risk_bound(9.0 * theta, model) == base


class TestUpperBound:
    def test_isotropic_form_arithmetic(self):
        up = isotropic_upper_bound(10, 100, 2.0, c_prime=1.0)
        np.testing.assert_allclose(up.exponent, 160.0 / 140.0, rtol=1e-15)
        np.testing.assert_allclose(up.bound, math.exp(-8.0 / 7.0), rtol=1e-15)

    def test_general_form_arithmetic(self):
        model = _iso_model(100, 2.0)
        e = upper_bound_exponent(10, model)
        # n |mu|^4 = 160; denominator n |mu|^2 + d + n = 40 + 100 + 10
        np.testing.assert_allclose(e, 160.0 / 150.0, rtol=1e-14)

    def test_zero_mean_bound_is_one(self):
        model = MixtureModel(mean=explicit_mean(np.zeros(5)), cov=isotropic_spectrum(5))
        up = risk_upper_bound(3, model)
        assert up.exponent == 0.0 and up.bound == 1.0

    def test_invariant_under_mean_flip(self):
        model = _iso_model(20, 3.0)
        flipped = MixtureModel(
            mean=explicit_mean(-model.mean.vector), cov=model.cov
        )
        assert upper_bound_exponent(7, model) == upper_bound_exponent(7, flipped)

    def test_invariant_under_joint_rotation(self):
        lam = np.linspace(3.0, 0.5, 15)
        mu = np.random.default_rng(9).standard_normal(15)
        plain = MixtureModel(mean=explicit_mean(mu), cov=explicit_spectrum(lam))
        rot = rotated_spectrum(lam, seed=33)
        conjugated = MixtureModel(mean=explicit_mean(rot.rotation @ mu), cov=rot)
        np.testing.assert_allclose(
            upper_bound_exponent(6, plain),
            upper_bound_exponent(6, conjugated),
            rtol=1e-12,
        )


class TestLowerBound:
    def test_case_two_example(self):
        low = risk_lower_bound(10, _iso_model(10_000, 2.0))
        assert low.case == 2
        np.testing.assert_allclose(low.exponent, 160.0 / 10_000.0, rtol=1e-14)
        np.testing.assert_allclose(low.bound, math.exp(-0.016), rtol=1e-12)

    def test_case_one_example(self):
        low = risk_lower_bound(5, _iso_model(5, 100.0))
        assert low.case == 1
        np.testing.assert_allclose(low.exponent, 100.0**2, rtol=1e-14)

    def test_neither_case(self):
        low = risk_lower_bound(10, _iso_model(20, np.sqrt(2.0)))
        assert low.case is None and low.bound is None

    def test_gaussian_only(self):
        with pytest.raises(DomainError):
            risk_lower_bound(5, _iso_model(10, 1.0, dist="uniform"))


class TestCheckAssumptions:
    def test_small_instance_all_hold(self):
        verdict = check_assumptions(1, _iso_model(4, 1.0), c=1.0)
        assert verdict.satisfied
        assert all(c.ratio >= 1 for c in verdict.conditions)
        assert not verdict.degenerate

    def test_isotropic_reduction_ratios(self):
        n, d, r = 4, 256, 2.0
        verdict = check_assumptions(n, _iso_model(d, r), c=1.0)
        by_name = {c.name: c for c in verdict.conditions}
        np.testing.assert_allclose(by_name["trace_vs_spectral"].ratio, d / n**1.5)
        np.testing.assert_allclose(
            by_name["trace_vs_frobenius"].ratio, d / (n * math.sqrt(d))
        )
        np.testing.assert_allclose(
            by_name["trace_vs_mean_sigma"].ratio,
            d / (n * math.sqrt(math.log(n)) * r),
        )
        np.testing.assert_allclose(by_name["mean_energy_vs_sigma"].ratio, r**2 / r)

    def test_zero_mean_degenerate(self):
        model = MixtureModel(mean=explicit_mean(np.zeros(64)), cov=isotropic_spectrum(64))
        verdict = check_assumptions(4, model, c=1.0)
        assert verdict.degenerate
        by_name = {c.name: c for c in verdict.conditions}
        assert by_name["mean_energy_vs_sigma"].ok  # 0 >= 0 holds trivially

    def test_alignment_variant(self):
        cov = explicit_spectrum([4.0, 2.0, 1.0, 0.5])
        mu = np.array([0.0, 0.0, 3.0, 0.0])  # eigenvector with lambda = 1
        model = MixtureModel(mean=explicit_mean(mu), cov=cov)
        verdict = check_assumptions(2, model, c=1.0, alignment=True)
        by_name = {c.name: c for c in verdict.conditions}
        lam_k = 1.0
        expected = cov.trace / (2 * math.sqrt(lam_k * math.log(2)) * 3.0)
        np.testing.assert_allclose(by_name["trace_vs_aligned_mean"].ratio, expected)
        np.testing.assert_allclose(
            by_name["mean_energy_vs_eigenvalue"].ratio, 9.0 / lam_k
        )

    def test_alignment_requires_eigenvector(self):
        cov = explicit_spectrum([4.0, 1.0])
        model = MixtureModel(mean=explicit_mean([1.0, 1.0]), cov=cov)
        with pytest.raises(DomainError):
            check_assumptions(2, model, alignment=True)

    def test_strict_adds_condition(self):
        model = _iso_model(100, 1.0)
        base = check_assumptions(5, model)
        strict = check_assumptions(5, model, strict=True)
        assert len(strict.conditions) == len(base.conditions) + 1
        assert strict.conditions[-1].name == "trace_vs_root_log"


class TestConcentrationDiagnostics:
    def test_zero_mean_kills_mean_terms(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((8, 40))
        y = np.sign(rng.standard_normal(8))
        diag = concentration_diagnostics(dataset_from_arrays(X, y))
        assert diag.mean_margin_sq == 0.0
        assert diag.mean_component_sq == 0.0
        assert diag.t == 0.0 and diag.h == 0.0 and diag.D == 1.0

    def test_terms_nonnegative_and_consistent(self):
        model = MixtureModel(
            mean=sphere_mean(300, 3.0, seed=11), cov=polynomial_spectrum(300, 0.4)
        )
        data = sample_dataset(model, 8, seed=11)
        diag = concentration_diagnostics(data)
        assert diag.mean_margin_sq >= 0
        assert diag.mean_component_sq >= 0
        assert diag.noise_component_sq >= 0
        np.testing.assert_allclose(
            diag.mean_component**2, diag.mean_component_sq, rtol=1e-12
        )
        np.testing.assert_allclose(
            diag.noise_component**2, diag.noise_component_sq, rtol=1e-12
        )
        row = sherman_morrison_row(data)
        assert (diag.s, diag.t, diag.h, diag.D) == (row.s, row.t, row.h, row.D)

    def test_decomposition_brackets_risk_argument(self):
        # the interpolator's squared risk statistic against the two-sided
        # split of its Sigma-norm
        for seed in range(10):
            model = MixtureModel(
                mean=sphere_mean(500, 3.0, seed), cov=isotropic_spectrum(500)
            )
            data = sample_dataset(model, 10, seed)
            diag = concentration_diagnostics(data)
            ls = min_norm_interpolator(data)
            m2 = margin_statistic(ls, model) ** 2
            lo = diag.mean_margin_sq / (
                2 * (diag.mean_component_sq + diag.noise_component_sq)
            )
            hi = diag.mean_margin_sq / max(
                diag.mean_component_sq, diag.noise_component_sq
            )
            assert lo <= m2 <= hi

    def test_empirical_deviation_calibrated_cap(self):
        # |QQ' - d I|_2 <= 3 (n + sqrt(n d)) over 100 isotropic trials
        n, d = 10, 2000
        cap = 3 * (n + math.sqrt(n * d))
        for seed in range(100):
            model = MixtureModel(
                mean=sphere_mean(d, 3.0, seed), cov=isotropic_spectrum(d)
            )
            data = sample_dataset(model, n, seed)
            diag = concentration_diagnostics(data)
            assert diag.gram_deviation <= cap
            assert diag.sq_gram_deviation <= cap


class TestConcentrationBoundChecks:
    def test_zero_mean_vacuous_bounds_hold(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((10, 200))
        y = np.sign(rng.standard_normal(10))
        report = concentration_bound_checks(dataset_from_arrays(X, y))
        by_name = {c.name: c for c in report.checks}
        assert by_name["mean_noise_quadratic"].holds
        assert by_name["cross_term"].holds
        assert by_name["polarization_row"].value == 0.0

    def test_label_sandwich_is_algebraic(self):
        # consequence of the eigenvalue interval; holds on every draw
        for seed in range(20):
            model = MixtureModel(
                mean=sphere_mean(800, 2.0, seed), cov=polynomial_spectrum(800, 0.3)
            )
            data = sample_dataset(model, 8, seed)
            report = concentration_bound_checks(data)
            assert report.deviation_below_trace
            by_name = {c.name: c for c in report.checks}
            assert by_name["label_quadratic"].holds
            assert by_name["mean_noise_quadratic"].holds
            assert by_name["cross_term"].holds
            assert by_name["row_lower"].holds

    def test_reports_theoretical_form(self):
        model = MixtureModel(
            mean=sphere_mean(100, 1.0, seed=1), cov=isotropic_spectrum(100)
        )
        data = sample_dataset(model, 5, seed=1)
        report = concentration_bound_checks(data, theory_constant=2.0)
        expected = 2.0 * (5 * 1.0 + math.sqrt(5) * 10.0)
        np.testing.assert_allclose(report.theoretical_deviation, expected, rtol=1e-12)


class TestRiskReport:
    def test_gaussian_report_fields(self):
        model = MixtureModel(
            mean=sphere_mean(200, 3.0, seed=13), cov=isotropic_spectrum(200)
        )
        data = sample_dataset(model, 10, seed=13)
        clf = min_norm_interpolator(data)
        report = build_risk_report(clf, model, 10, mc_samples=20_000, seed=14)
        assert 0.0 <= report.exact_risk <= 1.0
        assert report.upper_exponent >= 0
        assert report.provenance == "interpolator"
        assert report.mc_stderr is None or report.mc_stderr >= 0
        assert abs(report.mc_risk - report.exact_risk) <= max(
            4 * report.mc_stderr, 5e-3
        )
        d = report.to_dict()
        assert d["assumptions"]["conditions"]

    def test_non_gaussian_uses_monte_carlo(self):
        model = MixtureModel(
            mean=sphere_mean(50, 2.0, seed=15),
            cov=isotropic_spectrum(50),
            entry_dist="uniform",
        )
        data = sample_dataset(model, 8, seed=15)
        clf = min_norm_interpolator(data)
        report = build_risk_report(clf, model, 8, seed=16)
        assert report.exact_risk is None
        assert report.mc_risk is not None
        assert report.lower_case is None
