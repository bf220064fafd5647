"""Domain types shared by every module: problem instances and SVD-derived data."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class InvalidInputError(ValueError):
    """Raised when user-supplied data violates a documented precondition."""


class DegenerateSpectrumError(InvalidInputError):
    """Raised when a spectrum carries no energy (all eigenvalues zero)."""


def _finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class InverseProblem:
    """One instance of ``y = A x + noise`` with elastic-net mixing ``alpha``."""

    A: np.ndarray
    y: np.ndarray
    alpha: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
            raise InvalidInputError("A must be a nonempty 2-D matrix")
        if y.shape[0] != A.shape[0]:
            raise InvalidInputError(
                f"y has length {y.shape[0]} but A has {A.shape[0]} rows")
        if not (self.alpha > 0 and np.isfinite(self.alpha)):
            raise InvalidInputError("alpha must be positive and finite")
        _finite("A", A)
        _finite("y", y)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def with_y(self, y: np.ndarray) -> "InverseProblem":
        """Same operator and mixing parameter, different observation."""
        return InverseProblem(self.A, y, self.alpha)


@dataclass(frozen=True)
class GroundTruth:
    """The signal, noise level and realized noise behind a synthetic observation."""

    x: np.ndarray
    sigma: float
    w: np.ndarray
    h: int


@dataclass(frozen=True)
class SpectralData:
    """SVD-derived quantities of a forward matrix.

    ``sigma_min`` is the smallest singular value of ``A`` seen as a map on
    ``R^d`` (zero whenever ``A`` is rank deficient, including ``m < d``),
    while ``pinv`` discards singular values at or below the cutoff.
    """

    sigma_min: float
    sigma_max: float
    theta: float
    pinv: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    rank: int
    singular_values: np.ndarray = field(repr=False)
    gram: np.ndarray = field(repr=False)
    orthogonal_design: bool = False

    def lipschitz(self, t: float, alpha: float) -> float:
        """Contraction constant of the soft-thresholding map at ``t``."""
        lo, hi = self.sigma_min ** 2, self.sigma_max ** 2
        return t * (hi - lo) / (t * (hi + lo) + 2.0 * alpha * (1.0 - t))


def spectral_data(A: np.ndarray, rcond: Optional[float] = None) -> SpectralData:
    """Compute singular values, pseudo-inverse and range projections of ``A``.

    Parameters
    ----------
    A : (m, d) array
    rcond : float, optional
        Relative cutoff; singular values ``<= rcond * sigma_max`` count as
        zero. Defaults to ``eps * max(m, d)``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        raise InvalidInputError("A must be nonempty")
    _finite("A", A)
    m, d = A.shape
    if rcond is None:
        rcond = np.finfo(float).eps * max(m, d)
    if rcond < 0:
        raise InvalidInputError("rcond must be nonnegative")

    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    smax = float(s[0])
    if smax == 0.0:
        raise InvalidInputError("A is the zero matrix")
    keep = s > rcond * smax
    rank = int(keep.sum())
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    pinv = (Vt.T * inv_s) @ U.T
    Ur, Vr = U[:, keep], Vt[keep].T
    P = Vr @ Vr.T
    Q = Ur @ Ur.T
    smin = float(s[-1]) if (rank == d) else 0.0
    gram = A.T @ A
    ortho = bool(m >= d and np.max(np.abs(gram - np.eye(d))) <= 1e-12)
    return SpectralData(
        sigma_min=smin,
        sigma_max=smax,
        theta=0.5 * (smin ** 2 + smax ** 2),
        pinv=pinv,
        P=P,
        Q=Q,
        rank=rank,
        singular_values=s,
        gram=gram,
        orthogonal_design=ortho,
    )
