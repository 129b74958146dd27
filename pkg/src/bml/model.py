"""Mixture distribution specs: mean constructors, covariance spectra, norms.

The data law is fixed by a covariance spectrum (eigenvalues plus an
optional rotation), a mean vector, and an entry distribution for the
latent noise.  Everything is immutable after construction and cheap to
share across concurrent trials.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError
from .streams import STREAM_MEAN, STREAM_ROTATION, rng_for_seed

ENTRY_DISTS = ("gaussian", "rademacher", "uniform")

# Recorded sub-Gaussian norm per entry distribution (metadata only).
DEFAULT_SIGMA_U = {"gaussian": 1.0, "rademacher": 1.0, "uniform": np.sqrt(3.0)}


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance given by its eigenvalues (non-increasing, positive).

    ``rotation`` is an orthogonal matrix whose columns are eigenvectors;
    ``None`` means the identity, i.e. a diagonal covariance.  Trace,
    Frobenius norm and spectral norm are exact functions of the spectrum.
    """

    eigenvalues: np.ndarray
    rotation: np.ndarray | None = None
    kind: str = "explicit"
    alpha: float | None = None
    rotation_seed: int | None = None

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=np.float64).reshape(-1)
        if lam.size < 1:
            raise DomainError("spectrum must contain at least one eigenvalue")
        if not np.all(lam > 0):
            raise DomainError("all eigenvalues must be strictly positive")
        if np.any(np.diff(lam) > 0):
            raise DomainError("eigenvalues must be sorted non-increasing")
        object.__setattr__(self, "eigenvalues", _readonly(lam))
        if self.rotation is not None:
            v = np.asarray(self.rotation, dtype=np.float64)
            if v.shape != (lam.size, lam.size):
                raise ShapeError(
                    f"rotation must be ({lam.size}, {lam.size}), got {v.shape}"
                )
            object.__setattr__(self, "rotation", _readonly(v))

    @property
    def d(self) -> int:
        return self.eigenvalues.size

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    @property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(self.eigenvalues**2)))

    @property
    def spectral_norm(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply the covariance matrix to ``v``."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.d:
            raise ShapeError(f"vector has length {v.shape[-1]}, expected {self.d}")
        if self.rotation is None:
            return self.eigenvalues * v
        w = v @ self.rotation
        return (self.eigenvalues * w) @ self.rotation.T

    def sigma_norm(self, v: np.ndarray) -> float:
        """Mahalanobis-type norm sqrt(v' Sigma v)."""
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.size != self.d:
            raise ShapeError(f"vector has length {v.size}, expected {self.d}")
        w = v if self.rotation is None else self.rotation.T @ v
        return float(np.sqrt(np.sum(self.eigenvalues * w**2)))


def polynomial_spectrum(d: int, alpha: float) -> CovarianceSpec:
    """Spectrum with eigenvalues ``k**(-alpha)`` for k = 1..d.

    Parameters
    ----------
    d : int
        Dimension, at least 1.
    alpha : float
        Decay exponent; must lie in [0, 1).

    Raises
    ------
    DomainError
        If ``d < 1`` or ``alpha`` is outside [0, 1).
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if not (0.0 <= alpha < 1.0):
        raise DomainError(f"decay exponent must lie in [0, 1), got {alpha}")
    lam = np.arange(1, d + 1, dtype=np.float64) ** (-float(alpha))
    return CovarianceSpec(eigenvalues=lam, kind="polynomial", alpha=float(alpha))


def isotropic_spectrum(d: int) -> CovarianceSpec:
    """Identity covariance in dimension ``d``."""
    return polynomial_spectrum(d, 0.0)


def explicit_spectrum(
    values, rotation: np.ndarray | None = None, rotation_seed: int | None = None
) -> CovarianceSpec:
    return CovarianceSpec(
        eigenvalues=np.asarray(values, dtype=np.float64),
        rotation=rotation,
        kind="explicit",
        rotation_seed=rotation_seed,
    )


def random_rotation(d: int, seed: int) -> np.ndarray:
    """Seeded random orthogonal matrix (QR of a Gaussian, signs fixed).

    Fixing the signs of R's diagonal makes the factorization unique, so
    the rotation is a deterministic function of ``(d, seed)`` and Haar
    distributed over the orthogonal group.
    """
    rng = rng_for_seed(seed, STREAM_ROTATION)
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def rotated_spectrum(values, seed: int) -> CovarianceSpec:
    """Explicit spectrum conjugated by a seeded random rotation."""
    lam = np.asarray(values, dtype=np.float64)
    return CovarianceSpec(
        eigenvalues=lam,
        rotation=random_rotation(lam.size, seed),
        kind="explicit",
        rotation_seed=int(seed),
    )


@dataclass(frozen=True)
class MeanSpec:
    """A realized mean vector together with how it was constructed."""

    kind: str
    vector: np.ndarray
    radius: float | None = None
    index: int | None = None
    sparsity: int | None = None
    weight: float | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "vector", _readonly(np.ravel(self.vector)))

    @property
    def d(self) -> int:
        return self.vector.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def explicit_mean(values) -> MeanSpec:
    return MeanSpec(kind="explicit", vector=np.asarray(values, dtype=np.float64))


def sphere_mean(d: int, radius: float, seed: int) -> MeanSpec:
    """Mean drawn uniformly from the radius-``radius`` sphere in R^d.

    Deterministic given ``(d, radius, seed)``; the realized norm equals
    ``radius`` to machine precision.
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if radius < 0:
        raise DomainError(f"radius must be non-negative, got {radius}")
    rng = rng_for_seed(seed, STREAM_MEAN)
    g = rng.standard_normal(d)
    norm = np.linalg.norm(g)
    vec = np.zeros(d) if radius == 0 else (radius / norm) * g
    return MeanSpec(kind="sphere", vector=vec, radius=float(radius), seed=int(seed))


def eigvec_mean(cov: CovarianceSpec, index: int, norm: float) -> MeanSpec:
    """Mean aligned with the ``index``-th (1-based) eigenvector of ``cov``."""
    if not (1 <= index <= cov.d):
        raise DomainError(f"eigenvector index must be in [1, {cov.d}], got {index}")
    if cov.rotation is None:
        vec = np.zeros(cov.d)
        vec[index - 1] = norm
    else:
        vec = norm * cov.rotation[:, index - 1]
    return MeanSpec(kind="eigvec", vector=vec, radius=float(norm), index=int(index))


def rare_weak_mean(d: int, s: int, gamma: float) -> MeanSpec:
    """Sparse mean with exactly ``s`` leading entries equal to ``gamma``."""
    if not (0 <= s <= d):
        raise DomainError(f"sparsity must be in [0, {d}], got {s}")
    vec = np.zeros(d)
    vec[:s] = gamma
    return MeanSpec(kind="rare_weak", vector=vec, sparsity=int(s), weight=float(gamma))


@dataclass(frozen=True)
class MixtureModel:
    """Full data-generating law: label-signed mean plus rotated noise.

    A sample is ``x = y * mu + V diag(lam)^(1/2) u`` with ``y`` Rademacher
    and ``u`` having i.i.d. zero-mean unit-variance entries from
    ``entry_dist``.  ``sigma_u`` records the sub-Gaussian norm bound of
    the entries; it is metadata and never enters any computation.
    """

    mean: MeanSpec
    cov: CovarianceSpec
    entry_dist: str = "gaussian"
    sigma_u: float = field(default=0.0)

    def __post_init__(self):
        if self.entry_dist not in ENTRY_DISTS:
            raise DomainError(
                f"entry_dist must be one of {ENTRY_DISTS}, got {self.entry_dist!r}"
            )
        if self.mean.d != self.cov.d:
            raise ShapeError(
                f"mean dimension {self.mean.d} != covariance dimension {self.cov.d}"
            )
        if self.sigma_u == 0.0:
            object.__setattr__(self, "sigma_u", DEFAULT_SIGMA_U[self.entry_dist])
        elif self.sigma_u < 0:
            raise DomainError("sigma_u must be positive")

    @property
    def d(self) -> int:
        return self.cov.d


def spectral_summaries(cov: CovarianceSpec, mean: MeanSpec) -> dict[str, float]:
    """The five norms the risk bounds consume.

    Returns ``trace`` = tr(Sigma), ``frobenius_norm`` = |Sigma|_F,
    ``spectral_norm`` = |Sigma|_2, ``mu_norm`` = |mu|_2 and
    ``mu_sigma_norm`` = sqrt(mu' Sigma mu).
    """
    if mean.d != cov.d:
        raise ShapeError(f"mean dimension {mean.d} != covariance dimension {cov.d}")
    return {
        "trace": cov.trace,
        "frobenius_norm": cov.frobenius_norm,
        "spectral_norm": cov.spectral_norm,
        "mu_norm": mean.norm,
        "mu_sigma_norm": cov.sigma_norm(mean.vector),
    }


# --- serialization ---------------------------------------------------------
#
# Document schema (TOML or JSON):
#   d          : int
#   spectrum   : {kind: "polynomial", alpha} | {kind: "explicit", values}
#                optional rotation_seed for a seeded random rotation
#   mean       : {kind: "sphere", r} | {kind: "eigvec", k, r}
#                | {kind: "rare_weak", s, gamma} | {kind: "explicit", values}
#   entry_dist : "gaussian" | "rademacher" | "uniform"
#   seed       : int (realizes the sphere mean; optional otherwise)


def model_to_dict(model: MixtureModel) -> dict:
    cov, mean = model.cov, model.mean
    if cov.kind == "polynomial":
        spectrum: dict = {"kind": "polynomial", "alpha": cov.alpha}
    else:
        spectrum = {"kind": "explicit", "values": cov.eigenvalues.tolist()}
    if cov.rotation is not None:
        if cov.rotation_seed is None:
            raise DomainError("only seeded rotations can be serialized")
        spectrum["rotation_seed"] = cov.rotation_seed
    if mean.kind == "sphere":
        mean_doc: dict = {"kind": "sphere", "r": mean.radius}
    elif mean.kind == "eigvec":
        mean_doc = {"kind": "eigvec", "k": mean.index, "r": mean.radius}
    elif mean.kind == "rare_weak":
        mean_doc = {"kind": "rare_weak", "s": mean.sparsity, "gamma": mean.weight}
    else:
        mean_doc = {"kind": "explicit", "values": mean.vector.tolist()}
    doc = {
        "d": model.d,
        "spectrum": spectrum,
        "mean": mean_doc,
        "entry_dist": model.entry_dist,
    }
    if mean.seed is not None:
        doc["seed"] = mean.seed
    return doc


def model_from_dict(doc: dict) -> MixtureModel:
    try:
        d = int(doc["d"])
        spec_doc = doc["spectrum"]
        mean_doc = doc["mean"]
    except KeyError as exc:
        raise DomainError(f"model document is missing field {exc}") from None
    seed = int(doc.get("seed", 0))

    kind = spec_doc.get("kind", "polynomial")
    rotation_seed = spec_doc.get("rotation_seed")
    if kind == "polynomial":
        cov = polynomial_spectrum(d, float(spec_doc.get("alpha", 0.0)))
        if rotation_seed is not None:
            cov = CovarianceSpec(
                eigenvalues=cov.eigenvalues,
                rotation=random_rotation(d, int(rotation_seed)),
                kind="polynomial",
                alpha=cov.alpha,
                rotation_seed=int(rotation_seed),
            )
    elif kind == "explicit":
        values = np.asarray(spec_doc["values"], dtype=np.float64)
        if values.size != d:
            raise ShapeError(f"spectrum has {values.size} values, expected d={d}")
        if rotation_seed is not None:
            cov = rotated_spectrum(values, int(rotation_seed))
        else:
            cov = explicit_spectrum(values)
    else:
        raise DomainError(f"unknown spectrum kind {kind!r}")

    mkind = mean_doc.get("kind", "sphere")
    if mkind == "sphere":
        mean = sphere_mean(d, float(mean_doc["r"]), int(mean_doc.get("seed", seed)))
    elif mkind == "eigvec":
        mean = eigvec_mean(cov, int(mean_doc["k"]), float(mean_doc["r"]))
    elif mkind == "rare_weak":
        mean = rare_weak_mean(d, int(mean_doc["s"]), float(mean_doc["gamma"]))
    elif mkind == "explicit":
        values = np.asarray(mean_doc["values"], dtype=np.float64)
        if values.size != d:
            raise ShapeError(f"mean has {values.size} values, expected d={d}")
        mean = explicit_mean(values)
    else:
        raise DomainError(f"unknown mean kind {mkind!r}")

    return MixtureModel(
        mean=mean, cov=cov, entry_dist=doc.get("entry_dist", "gaussian")
    )


def read_document(path: str | Path) -> dict:
    """Parse a ``.toml`` or ``.json`` file into a plain dict."""
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return json.loads(raw)
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(raw)


def load_model(path: str | Path) -> MixtureModel:
    """Read a model spec from a ``.toml`` or ``.json`` document."""
    return model_from_dict(read_document(path))


def model_to_json(model: MixtureModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)
