"""Dataset generation from a mixture model.

Sampling is pure: the returned arrays are a deterministic function of
``(model, n, seed)``.  The latent noise ``Q`` and raw entry matrix ``Z``
are kept on the dataset because the concentration diagnostics need them;
pass ``slim=True`` in large sweeps to drop both.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError
from .model import MixtureModel
from .streams import STREAM_DATA, rng_for_seed


@dataclass(frozen=True)
class Dataset:
    """Training sample ``X = y mu' + Q`` with its latent pieces.

    ``X`` is n-by-d, ``y`` has entries in {-1, +1}, ``Q = Z diag(lam)^(1/2) V'``
    is the noise part and ``Z`` the raw entry matrix.  ``Q`` and ``Z`` are
    ``None`` for slim datasets.
    """

    X: np.ndarray
    y: np.ndarray
    Q: np.ndarray | None
    Z: np.ndarray | None
    model: MixtureModel
    seed: int

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def slim(self) -> bool:
        return self.Q is None

    def require_latents(self) -> tuple[np.ndarray, np.ndarray]:
        if self.Q is None or self.Z is None:
            raise DomainError(
                "this operation needs the latent Q and Z matrices; "
                "resample without slim=True"
            )
        return self.Q, self.Z


def _draw_entries(rng: np.random.Generator, dist: str, shape) -> np.ndarray:
    if dist == "gaussian":
        return rng.standard_normal(shape)
    if dist == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    # uniform on [-sqrt(3), sqrt(3)] has variance 1
    half = np.sqrt(3.0)
    return rng.uniform(-half, half, size=shape)


def sample_dataset(
    model: MixtureModel, n: int, seed: int, slim: bool = False
) -> Dataset:
    """Draw ``n`` i.i.d. pairs from ``model``.

    Labels are Rademacher, the entry matrix ``Z`` is i.i.d. from the
    model's entry distribution, and features are assembled exactly as
    ``X = y mu' + Z diag(lam)^(1/2) V'``.

    Parameters
    ----------
    model : MixtureModel
    n : int
        Sample count, at least 1.
    seed : int
        Any 64-bit integer; fixes the draw completely.
    slim : bool
        Drop ``Q`` and ``Z`` from the result to save memory.
    """
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    rng = rng_for_seed(seed, STREAM_DATA)
    y = rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0
    Z = _draw_entries(rng, model.entry_dist, (n, model.d))
    scaled = Z * np.sqrt(model.cov.eigenvalues)[None, :]
    Q = scaled if model.cov.rotation is None else scaled @ model.cov.rotation.T
    X = np.outer(y, model.mean.vector) + Q
    if slim:
        return Dataset(X=X, y=y, Q=None, Z=None, model=model, seed=int(seed))
    return Dataset(X=X, y=y, Q=Q, Z=Z, model=model, seed=int(seed))


def dataset_to_csv(data: Dataset, path: str | Path) -> None:
    """Dump rows ``y, x_1, ..., x_d`` for external inspection."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y"] + [f"x{j}" for j in range(1, data.d + 1)])
        for i in range(data.n):
            writer.writerow(
                [repr(float(data.y[i]))] + [repr(float(v)) for v in data.X[i]]
            )
