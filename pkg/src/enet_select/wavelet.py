"""Elastic-net image denoising in an orthogonal Daubechies wavelet basis.

With ``W`` orthogonal the image-domain problem::

    t ||Z - Y||^2 + (1 - t) (||W Z||_1 + alpha ||Z||^2)

is the orthogonal-design elastic net in the coefficients ``W Y``, so every
quantity below is computed exactly in the coefficient domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pywt

from .loss import oracle_grid
from .metrics import psnr
from .model import InvalidInputError
from .opten import OptENConfig, opten_select
from .solver import closed_form_orthogonal, zero_threshold

WAVELET = "db4"
MODE = "periodization"


def default_levels(shape) -> int:
    """``log2(min(height, width)) - 3``, at least 1."""
    return max(int(np.floor(np.log2(min(shape)))) - 3, 1)


@dataclass(frozen=True)
class WaveletCoeffs:
    """Multilevel 2-D coefficients.

    ``bands`` is ``[cA_J, (cH_J, cV_J, cD_J), ..., (cH_1, cV_1, cD_1)]``
    (coarsest first). :meth:`flat` concatenates the approximation and then,
    level by level from coarse to fine, the horizontal, vertical and diagonal
    details, each raveled row-major.
    """

    levels: int
    shape: Tuple[int, int]
    bands: list

    def flat(self) -> np.ndarray:
        parts = [self.bands[0].ravel()]
        for det in self.bands[1:]:
            parts.extend(b.ravel() for b in det)
        return np.concatenate(parts)

    def with_flat(self, vec: np.ndarray) -> "WaveletCoeffs":
        """Same layout, entries replaced from a flat vector."""
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != self.size:
            raise InvalidInputError("flat vector has the wrong length")
        out, i = [], 0
        a = self.bands[0]
        out.append(vec[i:i + a.size].reshape(a.shape))
        i += a.size
        for det in self.bands[1:]:
            lvl = []
            for b in det:
                lvl.append(vec[i:i + b.size].reshape(b.shape))
                i += b.size
            out.append(tuple(lvl))
        return WaveletCoeffs(self.levels, self.shape, out)

    @property
    def size(self) -> int:
        return self.bands[0].size + sum(b.size for det in self.bands[1:] for b in det)


def dwt2(img: np.ndarray, levels: Optional[int] = None) -> WaveletCoeffs:
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise InvalidInputError("image must be 2-D")
    J = default_levels(img.shape) if levels is None else int(levels)
    if J < 1:
        raise InvalidInputError("levels must be >= 1")
    if any(n % (2 ** J) for n in img.shape):
        raise InvalidInputError(f"image dimensions {img.shape} must be divisible by 2^{J}")
    bands = pywt.wavedec2(img, WAVELET, mode=MODE, level=J)
    return WaveletCoeffs(J, img.shape, [bands[0]] + [tuple(d) for d in bands[1:]])


def idwt2(coeffs: WaveletCoeffs) -> np.ndarray:
    img = pywt.waverec2(coeffs.bands, WAVELET, mode=MODE)
    return img[:coeffs.shape[0], :coeffs.shape[1]]


def top_h_mask(c: np.ndarray, h: int) -> np.ndarray:
    """Boolean mask of the ``h`` largest ``|c|`` (ties to the lower index)."""
    if not 1 <= h <= c.size:
        raise InvalidInputError(f"h must lie in [1, {c.size}]")
    keep = np.zeros(c.size, dtype=bool)
    keep[np.argsort(-np.abs(c), kind="stable")[:h]] = True
    return keep


def hard_threshold_estimator(Y: np.ndarray, h: int, levels: Optional[int] = None) -> np.ndarray:
    """Image rebuilt from the ``h`` largest wavelet coefficients of ``Y``."""
    C = dwt2(Y, levels)
    c = C.flat()
    return idwt2(C.with_flat(np.where(top_h_mask(c, h), c, 0.0)))


def shrink_coeffs(c: np.ndarray, alpha: float, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise InvalidInputError("t must lie in [0, 1]")
    return closed_form_orthogonal(c, t, alpha)


def denoise(Y: np.ndarray, alpha: float, t: float, levels: Optional[int] = None,
            clip: bool = True) -> np.ndarray:
    """Elastic-net denoised image, clipped to ``[0, 1]`` unless ``clip=False``."""
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    C = dwt2(Y, levels)
    Z = idwt2(C.with_flat(shrink_coeffs(C.flat(), alpha, t)))
    return np.clip(Z, 0.0, 1.0) if clip else Z


class CoefficientLoss:
    """``t -> ||Z^t - R||^2`` computed on wavelet coefficients (Parseval).

    ``Z^t`` is the unclipped denoised image and ``R`` the reference image
    whose coefficients are ``ref``. Exposes ``t_floor`` and ``values`` so it
    plugs into :func:`opten_select` and :func:`grid_minimize`.
    """

    def __init__(self, c_y: np.ndarray, ref: np.ndarray, alpha: float):
        self.c_y = np.asarray(c_y, dtype=float)
        self.ref = np.asarray(ref, dtype=float)
        self.alpha = float(alpha)
        self.t_floor = zero_threshold(self.c_y)

    def __call__(self, t: float) -> float:
        r = closed_form_orthogonal(self.c_y, t, self.alpha) - self.ref
        return float(r @ r)

    def values(self, ts) -> np.ndarray:
        return np.array([self(float(t)) for t in np.asarray(ts, dtype=float)])


def mse_curve(Y: np.ndarray, X: np.ndarray, levels: Optional[int] = None) -> np.ndarray:
    """``MSE(X, X_hat_h)`` for ``h = 1..p`` from cumulative coefficient sums."""
    cy = dwt2(Y, levels).flat()
    cx = dwt2(X, levels).flat()
    order = np.argsort(-np.abs(cy), kind="stable")
    gain = (cy[order] - cx[order]) ** 2 - cx[order] ** 2
    return (np.sum(cx ** 2) + np.cumsum(gain)) / cy.size


def oracle_h(Y: np.ndarray, X: np.ndarray, levels: Optional[int] = None) -> int:
    """The ``h`` whose hard-threshold estimate is closest to ``X`` (smallest on ties)."""
    return int(np.argmin(mse_curve(Y, X, levels))) + 1


@dataclass(frozen=True)
class HSchedule:
    h0: int = 64
    h_step: int = 64
    delta_t: float = 1e-3
    t_cap: float = 1.0 - 1e-6
    max_steps: int = 256

    def __post_init__(self):
        if self.h0 < 1 or self.h_step < 1:
            raise InvalidInputError("h0 and h_step must be >= 1")
        if self.max_steps < 1:
            raise InvalidInputError("max_steps must be >= 1")

    @classmethod
    def for_shape(cls, shape, **kw) -> "HSchedule":
        """``h0 = h_step = p / 256`` so the sweep can reach every coefficient."""
        step = max(int(np.prod(shape)) // 256, 1)
        return cls(h0=step, h_step=step, **kw)


@dataclass
class HeuristicResult:
    h: int
    t: float
    history: List[Tuple[int, float]]
    reason: str


def opten_for_h(c_y: np.ndarray, h: int, alpha: float,
                opten_cfg: OptENConfig = OptENConfig()) -> float:
    """OptEN on the empirical loss with the top-``h`` reference."""
    ref = np.where(top_h_mask(c_y, h), c_y, 0.0)
    t_hat, _ = opten_select(CoefficientLoss(c_y, ref, alpha), opten_cfg)
    return t_hat


def select_h_heuristic(Y: np.ndarray, alpha: float, sched: HSchedule = HSchedule(),
                       opten_cfg: OptENConfig = OptENConfig(),
                       levels: Optional[int] = None) -> HeuristicResult:
    """Grow ``h`` until the learned ``t`` drops, saturates, or the budget runs out.

    Returns the pair preceding the stopping step, or the first pair when the
    very first step already stops. ``h`` is capped at the coefficient count.
    """
    c_y = dwt2(Y, levels).flat()
    p = c_y.size
    history: List[Tuple[int, float]] = []
    reason = "max_steps"
    for k in range(sched.max_steps + 1):
        h = min(sched.h0 + k * sched.h_step, p)
        t_k = opten_for_h(c_y, h, alpha, opten_cfg)
        history.append((h, t_k))
        if k > 0 and t_k < history[-2][1] - sched.delta_t:
            reason = "decrease"
            break
        if t_k >= sched.t_cap:
            reason = "saturated"
            break
    last = history[-2] if len(history) > 1 else history[0]
    return HeuristicResult(last[0], last[1], history, reason)


def best_t_by_psnr(Y: np.ndarray, X: np.ndarray, alpha: float, grid_step: float = 1e-3,
                   levels: Optional[int] = None) -> Tuple[float, float]:
    """Grid search for the ``t`` maximizing ``PSNR(X, denoise(Y, t))``."""
    C = dwt2(Y, levels)
    c = C.flat()
    best = (-np.inf, 0.0)
    for t in oracle_grid(grid_step):
        Z = np.clip(idwt2(C.with_flat(closed_form_orthogonal(c, t, alpha))), 0.0, 1.0)
        v = psnr(X, Z)
        if v > best[0]:
            best = (v, float(t))
    return best[1], best[0]


def phantom(n: int = 128, seed=0) -> np.ndarray:
    """Piecewise-constant ellipses and rectangles over a smooth gradient, in ``[0, 1]``."""
    if n < 8:
        raise InvalidInputError("phantom size must be >= 8")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    yy, xx = np.mgrid[0:n, 0:n] / (n - 1.0)
    ang = rng.uniform(0, 2 * np.pi)
    img = 0.25 * (np.cos(ang) * xx + np.sin(ang) * yy)
    for _ in range(rng.integers(3, 6)):
        cx, cy = rng.uniform(0.2, 0.8, 2)
        ax, ay = rng.uniform(0.08, 0.3, 2)
        img += rng.uniform(0.2, 0.6) * (((xx - cx) / ax) ** 2 + ((yy - cy) / ay) ** 2 <= 1)
    for _ in range(rng.integers(1, 4)):
        x0, y0 = rng.uniform(0.05, 0.7, 2)
        w, h = rng.uniform(0.1, 0.3, 2)
        img += rng.uniform(-0.3, 0.3) * ((xx >= x0) & (xx <= x0 + w) & (yy >= y0) & (yy <= y0 + h))
    img -= img.min()
    return img / img.max()


def noisy_phantom(n: int, sigma: float, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Clean phantom and its noisy observation ``X + sigma * W`` (unclipped)."""
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    X = phantom(n, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,))))
    noise = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    return X, X + sigma * noise.standard_normal(X.shape)
