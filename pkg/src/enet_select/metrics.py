"""Reconstruction quality measures for sparse vectors and images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import InvalidInputError

SSIM_C1 = 0.01
SSIM_C2 = 0.03


@dataclass(frozen=True)
class TrialMetrics:
    rel_param_err: float
    rel_sol_err: float
    fdp: float
    tpp: float
    sparse_snr: float
    seconds: float


def _pair(a, b):
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise InvalidInputError("inputs differ in length")
    return a, b


def fdp(z, x, thresh: float = 0.5) -> float:
    """False discoveries among ``|z_i| > thresh`` over the number of discoveries."""
    z, x = _pair(z, x)
    found = np.abs(z) > thresh
    false = np.count_nonzero(found & (x == 0))
    return false / max(int(found.sum()), 1)


def tpp(z, x, thresh: float = 0.5, h: int | None = None) -> float:
    """Share of the true support (first ``h`` coordinates) that is recovered.

    When ``h`` is omitted the support is read off ``x`` directly.
    """
    z, x = _pair(z, x)
    if h is None:
        support = x != 0
        h = int(support.sum())
    else:
        if h < 1 or h > x.size:
            raise InvalidInputError("h must lie in [1, len(x)]")
        support = np.zeros(x.size, dtype=bool)
        support[:h] = True
    if h == 0:
        raise InvalidInputError("x has an empty support")
    return np.count_nonzero((np.abs(z) > thresh) & support & (x != 0)) / h


def relative_error(z, x) -> float:
    z, x = _pair(z, x)
    nx = np.linalg.norm(x)
    if nx == 0:
        raise InvalidInputError("reference vector is zero")
    return float(np.linalg.norm(z - x) / nx)


def relative_param_error(t_opt: float, t_hat: float) -> float:
    if not t_opt > 0:
        raise InvalidInputError("t_opt must be positive")
    return abs(t_opt - t_hat) / t_opt


def mse(X, Z) -> float:
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.shape != Z.shape:
        raise InvalidInputError("images differ in shape")
    return float(np.mean((X - Z) ** 2))


def psnr(X, Z) -> float:
    """``10 log10(range^2 / MSE)`` in dB, ``range = max(X) - min(X)``; ``inf`` if equal."""
    X = np.asarray(X, dtype=float)
    err = mse(X, Z)
    rng = float(X.max() - X.min())
    if rng == 0:
        raise InvalidInputError("reference image is constant")
    if err == 0:
        return np.inf
    return float(10.0 * np.log10(rng ** 2 / err))


def ssim(X, Z, c1: float = SSIM_C1, c2: float = SSIM_C2) -> float:
    """Whole-image structural similarity in the product form

    ``(2 mX mZ + c1) / (mX^2 mZ^2 + c1) * (2 sX sZ + c2) / (sX^2 sZ^2 + c2)``.

    Note the denominators multiply the squared moments, so the value is not
    1 at ``X = Z`` in general; use it for comparisons.
    """
    X = np.asarray(X, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if X.shape != Z.shape:
        raise InvalidInputError("images differ in shape")
    mx, mz = X.mean(), Z.mean()
    sx, sz = X.std(), Z.std()
    lum = (2 * mx * mz + c1) / (mx ** 2 * mz ** 2 + c1)
    con = (2 * sx * sz + c2) / (sx ** 2 * sz ** 2 + c2)
    return float(lum * con)


def sparse_snr(x, w, sigma: float, h: int) -> float:
    """Largest noise magnitude over the smallest on-support signal magnitude."""
    x = np.asarray(x, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if not 1 <= h <= x.size:
        raise InvalidInputError("h must lie in [1, len(x)]")
    lo = np.min(np.abs(x[:h]))
    if lo == 0:
        raise InvalidInputError("support contains a zero entry")
    return float(np.max(np.abs(sigma * w)) / lo)
