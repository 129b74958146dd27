"""Population risk: exact Gaussian form, Monte Carlo, bound evaluators,
assumption checkers, and concentration diagnostics.

The absolute constants in the high-probability statements are unnamed, so
every evaluator takes them as explicit parameters (default 1).  Tests
therefore check scaling behavior, never the constants themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import erfc, log_ndtr

from .errors import DomainError, NotExact
from .model import CovarianceSpec, MixtureModel, spectral_summaries
from .sampling import Dataset, _draw_entries
from .solvers import LinearClassifier, _gram_factor, sherman_morrison_row
from .streams import STREAM_MC, rng_for_seed

# Monte-Carlo batches hold about this many matrix entries.
_MC_BATCH_ELEMENTS = 4_000_000


def _theta_vector(theta) -> np.ndarray:
    if isinstance(theta, LinearClassifier):
        theta = theta.theta
    return np.asarray(theta, dtype=np.float64).reshape(-1)


def margin_statistic(theta, model: MixtureModel) -> float:
    """Signal-to-noise statistic ``<theta, mu> / |theta|_Sigma``.

    The population risk of a Gaussian model is a strictly decreasing
    function of this number.
    """
    v = _theta_vector(theta)
    sig = model.cov.sigma_norm(v)
    if sig == 0.0:
        raise DomainError("risk statistic undefined for theta = 0")
    return float(v @ model.mean.vector) / sig


def exact_gaussian_risk(theta, model: MixtureModel) -> float:
    """Misclassification probability ``Phi(-<theta,mu>/|theta|_Sigma)``.

    Only Gaussian entry distributions admit this closed form; anything
    else raises ``NotExact`` and must go through Monte Carlo.  The normal
    CDF is evaluated through the complementary error function.
    """
    if model.entry_dist != "gaussian":
        raise NotExact(
            f"exact risk needs a gaussian model, got {model.entry_dist!r}"
        )
    m = margin_statistic(theta, model)
    return float(0.5 * erfc(m / math.sqrt(2.0)))


def exact_gaussian_log_risk(theta, model: MixtureModel) -> float:
    """``log`` of the exact risk, safe far below the underflow threshold."""
    if model.entry_dist != "gaussian":
        raise NotExact(
            f"exact risk needs a gaussian model, got {model.entry_dist!r}"
        )
    m = margin_statistic(theta, model)
    return float(log_ndtr(-m))


@dataclass(frozen=True)
class MonteCarloRisk:
    estimate: float
    stderr: float
    n_samples: int


def monte_carlo_risk(
    theta, model: MixtureModel, n_samples: int, seed: int
) -> MonteCarloRisk:
    """Fraction of fresh samples misclassified, with its standard error.

    Deterministic given ``seed``.  Samples are drawn through the model's
    own generative procedure (labels, raw entries, spectral coloring), so
    the estimate is independent of any closed-form shortcut.
    """
    if n_samples < 1_000:
        raise DomainError(f"need at least 1e3 samples, got {n_samples}")
    v = _theta_vector(theta)
    cov = model.cov
    if v.size != cov.d:
        raise DomainError(f"theta has length {v.size}, expected {cov.d}")
    proj_mean = float(v @ model.mean.vector)
    w = v if cov.rotation is None else cov.rotation.T @ v
    color = np.sqrt(cov.eigenvalues) * w  # noise loads as <color, u>

    rng = rng_for_seed(seed, STREAM_MC)
    batch = max(1, _MC_BATCH_ELEMENTS // cov.d)
    errors = 0
    left = n_samples
    while left > 0:
        m = min(batch, left)
        y = rng.integers(0, 2, size=m).astype(np.float64) * 2.0 - 1.0
        Z = _draw_entries(rng, model.entry_dist, (m, cov.d))
        scores = proj_mean + y * (Z @ color)
        errors += int(np.count_nonzero(scores < 0.0))
        left -= m
    p = errors / n_samples
    return MonteCarloRisk(
        estimate=p,
        stderr=math.sqrt(p * (1.0 - p) / n_samples),
        n_samples=n_samples,
    )


def sub_gaussian_risk_bound(theta, model: MixtureModel, c: float = 1.0) -> float:
    """Tail bound ``exp(-c (theta' mu)^2 / |theta|_Sigma^2)``.

    Valid for every entry distribution.  With ``c = 1/2`` and a Gaussian
    model it dominates the exact risk whenever ``theta' mu >= 0``.
    """
    if c <= 0:
        raise DomainError(f"constant must be positive, got {c}")
    m = margin_statistic(theta, model)
    return float(np.exp(-c * m * m))


@dataclass(frozen=True)
class UpperBound:
    exponent: float
    bound: float
    c_prime: float


def upper_bound_exponent(n: int, model: MixtureModel) -> float:
    """Exponent ``n|mu|^4 / (n|mu|_Sigma^2 + |Sigma|_F^2 + n|Sigma|_2^2)``."""
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    s = spectral_summaries(model.cov, model.mean)
    num = n * s["mu_norm"] ** 4
    den = (
        n * s["mu_sigma_norm"] ** 2
        + s["frobenius_norm"] ** 2
        + n * s["spectral_norm"] ** 2
    )
    return num / den


def risk_upper_bound(n: int, model: MixtureModel, c_prime: float = 1.0) -> UpperBound:
    """High-probability risk ceiling ``exp(-c_prime * exponent)``.

    ``c_prime`` is a free calibration knob; only the exponent scaling is
    a testable claim.
    """
    if c_prime <= 0:
        raise DomainError(f"constant must be positive, got {c_prime}")
    e = upper_bound_exponent(n, model)
    return UpperBound(exponent=e, bound=float(np.exp(-c_prime * e)), c_prime=c_prime)


def isotropic_upper_bound(
    n: int, d: int, mu_norm: float, c_prime: float = 1.0
) -> UpperBound:
    """Identity-covariance reduction ``exp(-c' n|mu|^4 / (n|mu|^2 + d))``.

    For Sigma = I the trace absorbs the spectral-norm term, which is why
    the denominator here has two terms instead of three.
    """
    if n < 1 or d < 1:
        raise DomainError("sample count and dimension must be >= 1")
    if c_prime <= 0:
        raise DomainError(f"constant must be positive, got {c_prime}")
    e = n * mu_norm**4 / (n * mu_norm**2 + d)
    return UpperBound(exponent=e, bound=float(np.exp(-c_prime * e)), c_prime=c_prime)


@dataclass(frozen=True)
class LowerBound:
    case: int | None  # 1, 2, or None when neither regime applies
    exponent: float | None
    bound: float | None


def risk_lower_bound(
    n: int,
    model: MixtureModel,
    c: float = 1.0,
    c_prime: float = 1.0,
    c_dprime: float = 1.0,
) -> LowerBound:
    """Matching risk floor in the two regimes where one exists.

    Case 1 (mean-noise dominated): ``n|mu|_Sigma^2 >= c (|Sigma|_F^2 +
    n|Sigma|_2^2)`` gives floor ``c'' exp(-c' |mu|^4 / |mu|_Sigma^2)``.
    Case 2 (spectrum dominated): ``|Sigma|_F^2 >= c n (|mu|_Sigma^2 +
    |Sigma|_2^2)`` gives floor ``c'' exp(-c' n |mu|^4 / |Sigma|_F^2)``.
    Outside both regimes no bound is emitted.
    """
    if model.entry_dist != "gaussian":
        raise DomainError("the risk floor is stated for Gaussian models only")
    if min(c, c_prime, c_dprime) <= 0:
        raise DomainError("constants must be positive")
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    s = spectral_summaries(model.cov, model.mean)
    mu2 = s["mu_norm"] ** 2
    musig2 = s["mu_sigma_norm"] ** 2
    f2 = s["frobenius_norm"] ** 2
    s2 = s["spectral_norm"] ** 2
    if n * musig2 >= c * (f2 + n * s2):
        e = mu2**2 / musig2
        return LowerBound(case=1, exponent=e, bound=float(c_dprime * np.exp(-c_prime * e)))
    if f2 >= c * n * (musig2 + s2):
        e = n * mu2**2 / f2
        return LowerBound(case=2, exponent=e, bound=float(c_dprime * np.exp(-c_prime * e)))
    return LowerBound(case=None, exponent=None, bound=None)


@dataclass(frozen=True)
class AssumptionCondition:
    name: str
    lhs: float
    rhs: float  # already scaled by the supplied constant
    ratio: float
    ok: bool


@dataclass(frozen=True)
class AssumptionVerdict:
    conditions: tuple[AssumptionCondition, ...]
    satisfied: bool
    constant: float
    degenerate: bool  # zero mean makes the mean conditions vacuous


def _aligned_eigenvalue(cov: CovarianceSpec, mu: np.ndarray) -> float:
    mu_sq = float(mu @ mu)
    if mu_sq == 0.0:
        raise DomainError("alignment check needs a nonzero mean")
    sig_mu = cov.matvec(mu)
    lam = float(mu @ sig_mu) / mu_sq
    if np.linalg.norm(sig_mu - lam * mu) > 1e-8 * np.linalg.norm(sig_mu):
        raise DomainError("mean is not an eigenvector of the covariance")
    return lam


def check_assumptions(
    n: int,
    model: MixtureModel,
    c: float = 1.0,
    alignment: bool = False,
    strict: bool = False,
) -> AssumptionVerdict:
    """Evaluate the trace-domination hypotheses behind the risk bounds.

    Each condition is reported as ``ratio = lhs / (c * rhs)`` with the
    verdict ``ratio >= 1``; the overall verdict is their conjunction.
    ``alignment=True`` swaps in the eigenvector-aligned-mean variants
    (requires ``Sigma mu = lambda_k mu``), and ``strict=True`` adds the
    redundant ``tr(Sigma) >= c n sqrt(log n)`` condition that appears
    alongside the spectral ones.
    """
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    if c <= 0:
        raise DomainError(f"constant must be positive, got {c}")
    s = spectral_summaries(model.cov, model.mean)
    tr = s["trace"]
    root_log = math.sqrt(math.log(n)) if n > 1 else 0.0
    conditions: list[AssumptionCondition] = []

    def add(name: str, lhs: float, rhs_raw: float) -> None:
        rhs = c * rhs_raw
        ratio = math.inf if rhs == 0.0 else lhs / rhs
        conditions.append(
            AssumptionCondition(name=name, lhs=lhs, rhs=rhs, ratio=ratio, ok=ratio >= 1.0)
        )

    add("trace_vs_spectral", tr, n**1.5 * s["spectral_norm"])
    add("trace_vs_frobenius", tr, n * s["frobenius_norm"])
    if alignment:
        lam_k = _aligned_eigenvalue(model.cov, model.mean.vector)
        add("trace_vs_aligned_mean", tr, n * math.sqrt(lam_k) * root_log * s["mu_norm"])
        add("mean_energy_vs_eigenvalue", s["mu_norm"] ** 2, lam_k)
    else:
        add("trace_vs_mean_sigma", tr, n * root_log * s["mu_sigma_norm"])
        add("mean_energy_vs_sigma", s["mu_norm"] ** 2, s["mu_sigma_norm"])
    if strict:
        add("trace_vs_root_log", tr, n * root_log)

    return AssumptionVerdict(
        conditions=tuple(conditions),
        satisfied=all(cond.ok for cond in conditions),
        constant=c,
        degenerate=s["mu_norm"] == 0.0,
    )


@dataclass(frozen=True)
class Diagnostics:
    """Concentration gaps and the risk-exponent decomposition terms.

    ``mean_margin_sq`` is the squared mean margin of the interpolator,
    the numerator of the risk exponent; ``mean_component_sq`` and
    ``noise_component_sq`` bound its denominator through the split of
    ``theta`` into a mean-aligned and a noise part (the components, not
    squared, are also reported).  ``s, t, h, D`` are the noise-Gram
    scalars of the closed-form row.
    """

    gram_deviation: float  # |Q Q' - tr(Sigma) I|_2, empirical
    sq_gram_deviation: float  # |Z Lam^2 Z' - |Sigma|_F^2 I|_2, empirical
    mean_margin_sq: float
    mean_component_sq: float
    noise_component_sq: float
    mean_component: float
    noise_component: float
    s: float
    t: float
    h: float
    D: float


def concentration_diagnostics(data: Dataset) -> Diagnostics:
    """Evaluate the spectral deviations and exponent terms on one sample.

    Needs the latent ``Q`` and ``Z`` matrices; slim datasets are rejected.
    All eigenvalue work happens on n-by-n matrices.
    """
    Q, Z = data.require_latents()
    model = data.model
    mu = model.mean.vector
    lam = model.cov.eigenvalues

    A = Q @ Q.T
    eps = float(np.max(np.abs(np.linalg.eigvalsh(A) - model.cov.trace)))
    M2 = (Z * lam**2) @ Z.T
    eps2 = float(
        np.max(np.abs(np.linalg.eigvalsh(M2) - model.cov.frobenius_norm**2))
    )

    G = data.X @ data.X.T
    w = cho_solve(_gram_factor(G), data.y, check_finite=False)
    musig = model.cov.sigma_norm(mu)
    i1 = float(w @ (data.X @ mu)) ** 2
    ytw = float(data.y @ w)
    i2 = ytw**2 * musig**2
    noise_part = Q.T @ w
    j2 = model.cov.sigma_norm(noise_part)
    row = sherman_morrison_row(data)
    return Diagnostics(
        gram_deviation=eps,
        sq_gram_deviation=eps2,
        mean_margin_sq=i1,
        mean_component_sq=i2,
        noise_component_sq=j2**2,
        mean_component=ytw * musig,
        noise_component=j2,
        s=row.s,
        t=row.t,
        h=row.h,
        D=row.D,
    )


@dataclass(frozen=True)
class BoundCheck:
    name: str
    value: float
    lower: float
    upper: float
    holds: bool


@dataclass(frozen=True)
class ConcentrationReport:
    checks: tuple[BoundCheck, ...]
    gram_deviation: float
    theoretical_deviation: float
    deviation_below_trace: bool

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)


def concentration_bound_checks(
    data: Dataset,
    polarization_constant: float = 5.0,
    theory_constant: float = 1.0,
) -> ConcentrationReport:
    """Evaluate both sides of the noise-Gram concentration inequalities.

    Uses the empirical spectral deviation ``eps = |Q Q' - tr(Sigma) I|_2``
    throughout, which makes the three quadratic-form sandwiches algebraic
    consequences of the eigenvalue interval.  The per-row polarization
    bound takes a calibrated constant (the theory leaves it unnamed); the
    per-row lower bound needs none.  The theoretical deviation
    ``theory_constant * sigma_u^2 (n |Sigma|_2 + sqrt(n) |Sigma|_F)`` is
    reported alongside for comparison.
    """
    Q, _ = data.require_latents()
    model = data.model
    y = data.y
    n = data.n
    mu = model.mean.vector
    tr = model.cov.trace
    musig = model.cov.sigma_norm(mu)

    A = Q @ Q.T
    eps = float(np.max(np.abs(np.linalg.eigvalsh(A) - tr)))
    factor = _gram_factor(A)
    nu = Q @ mu
    ainv_y = cho_solve(factor, y, check_finite=False)
    ainv_nu = cho_solve(factor, nu, check_finite=False)
    s = float(y @ ainv_y)
    t = float(nu @ ainv_nu)
    h = float(y @ ainv_nu)
    nu_norm = float(np.linalg.norm(nu))

    below = eps < tr
    checks: list[BoundCheck] = []

    def sandwich(name: str, value: float, numerator: float) -> None:
        lower = numerator / (tr + eps)
        upper = numerator / (tr - eps) if below else math.inf
        checks.append(
            BoundCheck(
                name=name,
                value=value,
                lower=lower,
                upper=upper,
                holds=bool(below and lower <= value <= upper),
            )
        )

    sandwich("label_quadratic", s, float(n))
    sandwich("mean_noise_quadratic", t, nu_norm**2)

    cross_cap = math.sqrt(n) * nu_norm / (tr - eps) if below else math.inf
    checks.append(
        BoundCheck(
            name="cross_term",
            value=abs(h),
            lower=0.0,
            upper=cross_cap,
            holds=bool(below and abs(h) <= cross_cap),
        )
    )

    root_log = math.sqrt(math.log(n)) if n > 1 else 0.0
    pol_value = float(np.max(np.abs(ainv_nu)))
    pol_cap = polarization_constant * musig * root_log / tr
    checks.append(
        BoundCheck(
            name="polarization_row",
            value=pol_value,
            lower=0.0,
            upper=pol_cap,
            holds=bool(pol_value <= pol_cap),
        )
    )

    row_value = float(np.min(y * ainv_y))
    row_floor = (tr - math.sqrt(n) * eps) / (tr**2 - eps**2) if below else -math.inf
    checks.append(
        BoundCheck(
            name="row_lower",
            value=row_value,
            lower=row_floor,
            upper=math.inf,
            holds=bool(below and row_value >= row_floor),
        )
    )

    theory = theory_constant * model.sigma_u**2 * (
        n * model.cov.spectral_norm + math.sqrt(n) * model.cov.frobenius_norm
    )
    return ConcentrationReport(
        checks=tuple(checks),
        gram_deviation=eps,
        theoretical_deviation=float(theory),
        deviation_below_trace=below,
    )


@dataclass(frozen=True)
class RiskReport:
    """One classifier's risk picture: exact/MC risk, bounds, assumptions."""

    provenance: str
    margin_statistic: float
    exact_risk: float | None
    log_risk: float | None
    mc_risk: float | None
    mc_stderr: float | None
    upper_exponent: float
    upper_bound: float
    lower_case: int | None
    lower_exponent: float | None
    lower_bound: float | None
    assumptions: AssumptionVerdict

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "margin_statistic": self.margin_statistic,
            "exact_risk": self.exact_risk,
            "log_risk": self.log_risk,
            "mc_risk": self.mc_risk,
            "mc_stderr": self.mc_stderr,
            "upper_exponent": self.upper_exponent,
            "upper_bound": self.upper_bound,
            "lower_case": self.lower_case,
            "lower_exponent": self.lower_exponent,
            "lower_bound": self.lower_bound,
            "assumptions": {
                "satisfied": self.assumptions.satisfied,
                "constant": self.assumptions.constant,
                "degenerate": self.assumptions.degenerate,
                "conditions": [
                    {
                        "name": cond.name,
                        "lhs": cond.lhs,
                        "rhs": cond.rhs,
                        "ratio": cond.ratio,
                        "ok": cond.ok,
                    }
                    for cond in self.assumptions.conditions
                ],
            },
        }


def build_risk_report(
    theta,
    model: MixtureModel,
    n: int,
    c: float = 1.0,
    c_prime: float = 1.0,
    c_dprime: float = 1.0,
    mc_samples: int | None = None,
    seed: int = 0,
) -> RiskReport:
    """Assemble exact/Monte-Carlo risk, both bounds and assumption checks."""
    provenance = theta.provenance if isinstance(theta, LinearClassifier) else "explicit"
    m = margin_statistic(theta, model)
    gaussian = model.entry_dist == "gaussian"
    exact = exact_gaussian_risk(theta, model) if gaussian else None
    log_risk = exact_gaussian_log_risk(theta, model) if gaussian else None
    mc = mc_stderr = None
    if mc_samples is not None or not gaussian:
        samples = mc_samples if mc_samples is not None else 100_000
        est = monte_carlo_risk(theta, model, samples, seed)
        mc, mc_stderr = est.estimate, est.stderr
    upper = risk_upper_bound(n, model, c_prime)
    lower = (
        risk_lower_bound(n, model, c, c_prime, c_dprime)
        if gaussian
        else LowerBound(case=None, exponent=None, bound=None)
    )
    return RiskReport(
        provenance=provenance,
        margin_statistic=m,
        exact_risk=exact,
        log_risk=log_risk,
        mc_risk=mc,
        mc_stderr=mc_stderr,
        upper_exponent=upper.exponent,
        upper_bound=upper.bound,
        lower_case=lower.case,
        lower_exponent=lower.exponent,
        lower_bound=lower.bound,
        assumptions=check_assumptions(n, model, c),
    )
