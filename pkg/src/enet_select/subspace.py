"""Learned prior: sample covariance, top-h eigenprojection and the empirical estimator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DegenerateSpectrumError, InvalidInputError, SpectralData

H_CRITERIA = ("spectral_gap", "relative_gap", "cum_energy", "rel_cum_energy",
              "relative_gap_restricted")


@dataclass(frozen=True)
class TrainingSet:
    """``N`` observation samples stacked as the rows of an ``(N, m)`` array."""

    samples: np.ndarray

    def __post_init__(self):
        try:
            S = np.asarray(self.samples, dtype=float)
        except ValueError as exc:  # ragged input
            raise InvalidInputError("samples have inconsistent lengths") from exc
        if S.ndim == 1:
            S = S[None, :]
        if S.ndim != 2 or S.shape[0] < 1 or S.shape[1] < 1:
            raise InvalidInputError("need at least one nonempty sample")
        if not np.all(np.isfinite(S)):
            raise InvalidInputError("samples contain non-finite entries")
        object.__setattr__(self, "samples", S)

    @classmethod
    def from_list(cls, samples: Sequence[np.ndarray]) -> "TrainingSet":
        lengths = {np.asarray(s).size for s in samples}
        if len(lengths) > 1:
            raise InvalidInputError("samples have inconsistent lengths")
        return cls(np.array([np.asarray(s, dtype=float).ravel() for s in samples]))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def m(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance with its eigenpairs sorted by descending eigenvalue."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SubspaceModel:
    h: int
    projection: np.ndarray
    source: CovarianceEstimate


@dataclass(frozen=True)
class HCriterion:
    """How to read the intrinsic dimension off a covariance spectrum.

    ``printed_relative_gap`` switches the relative-gap kinds to the literal
    ``1 - lam_k / lam_{k+1}`` form, which is never positive on a descending
    spectrum and is kept only for comparison.
    """

    kind: str = "relative_gap_restricted"
    threshold: float = 0.95
    restrict_fraction: float = 0.5
    printed_relative_gap: bool = False

    def __post_init__(self):
        if self.kind not in H_CRITERIA:
            raise InvalidInputError(f"unknown criterion {self.kind!r}")
        if not 0 < self.threshold <= 1:
            raise InvalidInputError("threshold must lie in (0, 1]")
        if not 0 < self.restrict_fraction <= 1:
            raise InvalidInputError("restrict_fraction must lie in (0, 1]")


def empirical_covariance(ts: TrainingSet) -> CovarianceEstimate:
    """``(1/N) * sum_i y_i y_i^T`` with a descending eigendecomposition."""
    if not isinstance(ts, TrainingSet):
        ts = TrainingSet(ts)
    Y = ts.samples
    C = Y.T @ Y / ts.n
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1]
    w = np.maximum(w[order], 0.0)
    return CovarianceEstimate(C, w, V[:, order])


def top_h_projection(cov: CovarianceEstimate, h: int) -> SubspaceModel:
    m = cov.eigenvalues.size
    if not 1 <= h <= m:
        raise InvalidInputError(f"h must lie in [1, {m}], got {h}")
    V = cov.eigenvectors[:, :h]
    return SubspaceModel(int(h), V @ V.T, cov)


def empirical_estimator(spec: SpectralData, model: SubspaceModel,
                        y: np.ndarray) -> np.ndarray:
    """``x_hat = A^+ (Pi_hat y)``."""
    y = np.asarray(y, dtype=float).ravel()
    if y.size != model.projection.shape[0] or spec.pinv.shape[1] != y.size:
        raise InvalidInputError("dimension mismatch between y, projection and A")
    return spec.pinv @ (model.projection @ y)


def _relative_gaps(lam: np.ndarray, printed: bool) -> np.ndarray:
    """Gap score for each k = 1..m-1; zero where the ratio is undefined."""
    a, b = lam[:-1], lam[1:]
    out = np.zeros(a.size)
    if printed:
        ok = b > 0
        out[ok] = 1.0 - a[ok] / b[ok]
        out[~ok] = -np.inf
    else:
        ok = a > 0
        out[ok] = 1.0 - b[ok] / a[ok]
    return out


def numerical_rank(lam: np.ndarray) -> int:
    """Count of eigenvalues above round-off relative to the largest."""
    if lam.size == 0 or lam[0] <= 0:
        return 0
    return int(np.sum(lam > lam[0] * lam.size * np.finfo(float).eps))


def estimate_h(cov: CovarianceEstimate | np.ndarray, crit: HCriterion = HCriterion()) -> int:
    """Estimate the intrinsic dimension ``h`` (1-based, "keep the top h").

    ``cov`` may also be a bare descending spectrum. The relative-gap kinds
    only consider ``k`` below the numerical rank: past it the ratio
    ``lam_{k+1}/lam_k`` compares round-off and the score is meaningless, and
    at the rank itself the drop to exact zero would always score 1.
    """
    lam = cov.eigenvalues if isinstance(cov, CovarianceEstimate) else np.asarray(cov, float)
    lam = np.maximum(np.sort(lam)[::-1], 0.0)
    m = lam.size
    if m < 2:
        raise InvalidInputError("need at least two eigenvalues")
    total = lam.sum()
    if total <= 0:
        raise DegenerateSpectrumError("all eigenvalues are zero")

    if crit.kind == "spectral_gap":
        return int(np.argmax(lam[:-1] - lam[1:])) + 1
    if crit.kind == "cum_energy":
        frac = np.cumsum(lam) / total
        return int(np.argmax(frac >= crit.threshold - 1e-12)) + 1
    if crit.kind == "rel_cum_energy":
        c = np.cumsum(lam)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(c[1:] > 0, c[:-1] / c[1:], 0.0)
        hit = np.flatnonzero(ratio >= crit.threshold - 1e-12)
        return int(hit[0]) + 1 if hit.size else m

    scores = _relative_gaps(lam, crit.printed_relative_gap)
    r = numerical_rank(lam)
    limit = min(m - 1, max(r - 1, 1))
    if crit.kind == "relative_gap_restricted":
        limit = min(limit, max(int(np.floor(crit.restrict_fraction * m)), 1))
    return int(np.argmax(scores[:limit])) + 1
