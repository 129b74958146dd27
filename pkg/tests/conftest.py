"""Shared builders for tests: datasets with explicit features."""

from __future__ import annotations

import numpy as np

from bml.model import (
    CovarianceSpec,
    MixtureModel,
    explicit_mean,
    isotropic_spectrum,
)
from bml.sampling import Dataset


def dataset_from_arrays(
    X,
    y,
    mu=None,
    cov: CovarianceSpec | None = None,
    entry_dist: str = "gaussian",
    seed: int = 0,
) -> Dataset:
    """Wrap explicit arrays in a Dataset with consistent latent pieces.

    ``Q = X - y mu'`` and ``Z = Q V diag(lam)^(-1/2)`` so the structural
    invariants hold exactly for the supplied model.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    mu = np.zeros(d) if mu is None else np.asarray(mu, dtype=np.float64)
    cov = isotropic_spectrum(d) if cov is None else cov
    model = MixtureModel(mean=explicit_mean(mu), cov=cov, entry_dist=entry_dist)
    Q = X - np.outer(y, mu)
    back = Q if cov.rotation is None else Q @ cov.rotation
    Z = back / np.sqrt(cov.eigenvalues)[None, :]
    return Dataset(X=X, y=y, Q=Q, Z=Z, model=model, seed=seed)


def random_separable(rng: np.random.Generator, n: int, d: int, mu_scale: float = 2.0):
    """A generic-position instance; separable whenever n <= d."""
    mu = mu_scale * rng.standard_normal(d) / np.sqrt(d)
    y = rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0
    Q = rng.standard_normal((n, d))
    X = np.outer(y, mu) + Q
    return dataset_from_arrays(X, y, mu=mu)
