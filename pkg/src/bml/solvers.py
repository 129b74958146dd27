"""Margin solvers: minimum-norm interpolation, hard-margin SVM, their
equivalence certificate, and the logistic gradient-descent direction.

Everything works in Gram space (n-by-n systems); no d-by-d matrix is ever
formed, so d in the thousands with n in the hundreds stays light.  All
classifiers are intercept-free: the decision rule is the sign of <theta, x>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import expit

from .errors import (
    DegenerateGram,
    DomainError,
    InternalInvariantViolation,
    NotConverged,
    NotSeparable,
    StepTooLarge,
)
from .sampling import Dataset

# Cholesky pivots of the Gram matrix below this times tr(G)/n fail the solve.
_PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class LinearClassifier:
    """A weight vector with its provenance and solver diagnostics."""

    theta: np.ndarray
    provenance: str  # "svm" | "interpolator" | "logistic_gd"
    diagnostics: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.theta))

    def margins(self, data: Dataset) -> np.ndarray:
        return data.y * (data.X @ self.theta)


@dataclass(frozen=True)
class EquivalenceVerdict:
    """Sign certificate for SVM-equals-interpolator.

    ``criterion[i] = y_i * ((X X')^{-1} y)_i``; the two solvers coincide
    exactly when every entry is positive.  Instances whose minimum lies
    within ``tau`` of zero are reported ``marginal`` because floating
    point cannot certify the sign there.
    """

    criterion: np.ndarray
    min_value: float
    tau: float
    verdict: str  # "equal" | "not_equal" | "marginal"


@dataclass(frozen=True)
class ShermanMorrisonRow:
    """Closed form of ``y' (X X')^{-1}`` split off the noise Gram.

    With ``A = Q Q'`` and ``nu = Q mu``: ``s = y' A^{-1} y``,
    ``t = nu' A^{-1} nu``, ``h = y' A^{-1} nu`` and
    ``D = s (|mu|^2 - t) + (1 + h)^2``, which is provably positive.
    """

    row: np.ndarray
    D: float
    s: float
    t: float
    h: float


def gram_matrix(data: Dataset) -> np.ndarray:
    return data.X @ data.X.T


def _gram_factor(G: np.ndarray):
    n = G.shape[0]
    try:
        factor = cho_factor(G, lower=True, check_finite=False)
    except LinAlgError as exc:
        raise DegenerateGram(f"Gram factorization failed: {exc}") from None
    pivots = np.diag(factor[0]) ** 2
    floor = _PIVOT_RTOL * float(np.trace(G)) / n
    if pivots.min() < floor:
        raise DegenerateGram(
            f"Gram pivot {pivots.min():.3e} below threshold {floor:.3e}"
        )
    return factor


def _gram_solve(G: np.ndarray, b: np.ndarray) -> np.ndarray:
    return cho_solve(_gram_factor(G), b, check_finite=False)


def min_norm_interpolator(
    data: Dataset, gram: np.ndarray | None = None
) -> LinearClassifier:
    """Minimum-norm vector with ``y_i <theta, x_i> = 1`` for all i.

    Computed as ``X' (X X')^{-1} y`` through a symmetric positive-definite
    factorization of the Gram matrix, with one step of iterative
    refinement if the constraint residual asks for it.

    Raises
    ------
    DomainError
        If n > d (no interpolator exists generically).
    DegenerateGram
        If the Gram matrix is numerically singular.
    """
    X, y = data.X, data.y
    n, d = X.shape
    if n > d:
        raise DomainError(f"interpolation needs n <= d, got n={n}, d={d}")
    G = gram_matrix(data) if gram is None else gram
    factor = _gram_factor(G)
    w = cho_solve(factor, y, check_finite=False)
    theta = X.T @ w
    residual = float(np.max(np.abs(y * (X @ theta) - 1.0)))
    if residual > 1e-8:
        w = w + cho_solve(factor, y - G @ w, check_finite=False)
        theta = X.T @ w
        residual = float(np.max(np.abs(y * (X @ theta) - 1.0)))
        if residual > 1e-8:
            raise DegenerateGram(
                f"interpolation residual {residual:.3e} exceeds 1e-8 after refinement"
            )
    return LinearClassifier(
        theta=theta,
        provenance="interpolator",
        diagnostics={"residual": residual, "dual_coefficients": y * w},
    )


def hard_margin_svm(
    data: Dataset,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    gram: np.ndarray | None = None,
    warm_start: bool = True,
) -> LinearClassifier:
    """Hard-margin SVM without intercept, solved in the dual.

    The dual ``max_{alpha >= 0} sum(alpha) - 0.5 |sum alpha_i y_i x_i|^2``
    has box constraints only, so each coordinate maximization is a
    closed-form clamp; coordinates are swept cyclically until the relative
    duality gap drops below ``tol``.  The gap is certified against the
    feasibility-rescaled primal point, so success guarantees optimality.

    Parameters
    ----------
    tol : float
        Relative duality gap at which to stop (default 1e-10).
    max_iter : int
        Sweep budget over all n coordinates.
    gram : ndarray, optional
        Precomputed ``X X'`` to reuse across solvers.
    warm_start : bool
        Start from the clipped interpolator coefficients when the Gram
        matrix allows it; exact when every training point is a support
        vector, and a good first guess otherwise.

    Raises
    ------
    NotSeparable
        If no positive-margin separator exists (detected by an unbounded
        dual or by a still-negative margin at the iteration cap).
    NotConverged
        If the gap is above ``tol`` after ``max_iter`` sweeps but the data
        look separable; carries the reached gap.
    """
    X, y = data.X, data.y
    n = X.shape[0]
    G = gram_matrix(data) if gram is None else gram
    K = G * np.outer(y, y)
    K = np.ascontiguousarray(K)
    kd = np.diag(K).copy()
    if np.any(kd <= 0):
        raise NotSeparable("a training point has zero norm; no margin exists")

    alpha = np.zeros(n)
    if warm_start:
        try:
            w = _gram_solve(G, y)
            alpha = np.maximum(y * w, 0.0)
        except DegenerateGram:
            pass

    gap = np.inf
    min_margin = -np.inf
    sweeps = 0
    rows = [K[i] for i in range(n)]
    for sweeps in range(1, max_iter + 1):
        g = K @ alpha
        # alpha_i = 0 with margin above 1 clamps back to 0: skipping it is a no-op
        active = np.flatnonzero(~((alpha == 0.0) & (g > 1.0)))
        for i in active:
            step = (1.0 - g[i]) / kd[i]
            new = alpha[i] + step
            if new < 0.0:
                new = 0.0
            step = new - alpha[i]
            if step != 0.0:
                g += step * rows[i]
                alpha[i] = new
        dual = float(alpha.sum() - 0.5 * (alpha @ g))
        min_margin = float(g.min())
        if min_margin > 0.0:
            sq = float(alpha @ g)
            primal = 0.5 * sq / (min_margin * min_margin)
            gap = primal - dual
            if gap <= tol * primal:
                break
        elif alpha.sum() > 1e12:
            raise NotSeparable(
                f"dual is unbounded after {sweeps} sweeps (min margin {min_margin:.3e})"
            )
    else:
        if min_margin < 0.0:
            raise NotSeparable(
                f"min margin still {min_margin:.3e} after {max_iter} sweeps"
            )
        raise NotConverged(
            f"relative duality gap {gap:.3e} above tol after {max_iter} sweeps",
            gap=gap,
            sweeps=max_iter,
        )

    theta = (X * y[:, None]).T @ alpha
    margins = y * (X @ theta)
    support = alpha > 0
    comp_residual = (
        float(np.max(np.abs(margins[support] - 1.0))) if support.any() else 0.0
    )
    return LinearClassifier(
        theta=theta,
        provenance="svm",
        diagnostics={
            "sweeps": sweeps,
            "gap": float(gap),
            "min_margin": float(margins.min()),
            "support_size": int(support.sum()),
            "complementarity_residual": comp_residual,
            "alpha": alpha,
        },
    )


def sv_proliferation_predicate(
    data: Dataset, tau: float | None = None, gram: np.ndarray | None = None
) -> EquivalenceVerdict:
    """Certificate that every training point is a support vector.

    Solves ``w = (X X')^{-1} y`` once and reports the componentwise signs
    of ``c_i = y_i w_i``.  The default strictness band is
    ``tau = 1e-10 * max|w|``.
    """
    G = gram_matrix(data) if gram is None else gram
    w = _gram_solve(G, data.y)
    c = data.y * w
    if tau is None:
        tau = 1e-10 * float(np.max(np.abs(w)))
    mn = float(c.min())
    if abs(mn) <= tau:
        verdict = "marginal"
    elif mn > tau:
        verdict = "equal"
    else:
        verdict = "not_equal"
    return EquivalenceVerdict(criterion=c, min_value=mn, tau=float(tau), verdict=verdict)


def sherman_morrison_row(data: Dataset) -> ShermanMorrisonRow:
    """``y' (X X')^{-1}`` via the rank-two update over the noise Gram.

    Works entirely with ``A = Q Q'``: the mean only enters through
    ``nu = Q mu`` and ``|mu|^2``, so the d-dimensional feature Gram is
    never refactored.

    Raises
    ------
    DegenerateGram
        If the noise Gram is numerically singular.
    InternalInvariantViolation
        If the always-positive denominator ``D`` is not positive.
    """
    Q, _ = data.require_latents()
    y = data.y
    mu = data.model.mean.vector
    A = Q @ Q.T
    factor = _gram_factor(A)
    nu = Q @ mu
    ainv_y = cho_solve(factor, y, check_finite=False)
    ainv_nu = cho_solve(factor, nu, check_finite=False)
    s = float(y @ ainv_y)
    t = float(nu @ ainv_nu)
    h = float(y @ ainv_nu)
    D = s * (float(mu @ mu) - t) + (1.0 + h) ** 2
    if D <= 0.0:
        raise InternalInvariantViolation(f"denominator D = {D:.6e} is not positive")
    row = ((1.0 + h) * ainv_y - s * ainv_nu) / D
    return ShermanMorrisonRow(row=row, D=D, s=s, t=t, h=h)


@dataclass(frozen=True)
class GdTrace:
    """Gradient-descent trajectory summary for logistic regression."""

    classifier: LinearClassifier
    iterations: np.ndarray  # checkpoint iteration numbers
    losses: np.ndarray
    cosines: np.ndarray  # cosine to the max-margin direction (nan if unavailable)
    separable: bool


def logistic_gd_direction(
    data: Dataset,
    eta: float = 0.1,
    iters: int = 100_000,
    reference: LinearClassifier | None = None,
    n_checkpoints: int = 60,
) -> GdTrace:
    """Full-batch gradient descent on the logistic loss from zero.

    The iterate stays in the row space of ``X``, so the update is run on
    Gram coordinates (n per step) and materialized to a d-vector only at
    checkpoints, where the loss and the cosine to the max-margin
    direction are recorded.  Checkpoints are logarithmically spaced.

    Parameters
    ----------
    eta : float
        Learning rate; there is no step-size theory here, only the
        divergence detector below.
    reference : LinearClassifier, optional
        Direction to compare against; solved internally when omitted.

    Raises
    ------
    StepTooLarge
        If the loss increases at three consecutive checkpoints.
    """
    if eta <= 0:
        raise DomainError(f"learning rate must be positive, got {eta}")
    if iters < 1:
        raise DomainError(f"iteration count must be >= 1, got {iters}")
    X, y = data.X, data.y
    n = X.shape[0]
    G = gram_matrix(data)

    ref_theta = None
    separable = True
    if reference is not None:
        ref_theta = reference.theta
    else:
        try:
            ref_theta = hard_margin_svm(data, gram=G).theta
        except (NotSeparable, NotConverged):
            separable = False
    ref_norm = float(np.linalg.norm(ref_theta)) if ref_theta is not None else 0.0

    marks = np.unique(
        np.round(np.geomspace(1, iters, num=min(n_checkpoints, iters))).astype(int)
    )
    c = np.zeros(n)
    m = np.zeros(n)
    its, losses, cosines = [], [], []
    rises = 0
    mark_pos = 0
    for step in range(1, iters + 1):
        c += (eta / n) * (y * expit(-m))
        m = y * (G @ c)
        if mark_pos < marks.size and step == marks[mark_pos]:
            mark_pos += 1
            loss = float(np.mean(np.logaddexp(0.0, -m)))
            theta = X.T @ c
            if ref_theta is not None and ref_norm > 0:
                cos = float(
                    theta @ ref_theta / (np.linalg.norm(theta) * ref_norm)
                )
            else:
                cos = np.nan
            if losses and loss > losses[-1]:
                rises += 1
                if rises >= 3:
                    raise StepTooLarge(
                        f"loss rose over {rises} consecutive checkpoints "
                        f"(eta={eta} too large)"
                    )
            else:
                rises = 0
            its.append(step)
            losses.append(loss)
            cosines.append(cos)

    theta = X.T @ c
    classifier = LinearClassifier(
        theta=theta,
        provenance="logistic_gd",
        diagnostics={"iterations": iters, "final_loss": losses[-1]},
    )
    return GdTrace(
        classifier=classifier,
        iterations=np.asarray(its),
        losses=np.asarray(losses),
        cosines=np.asarray(cosines),
        separable=separable,
    )
