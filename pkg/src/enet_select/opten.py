"""OptEN: backtracking line search for the regularization parameter, starting at ``t = 1``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .model import InvalidInputError

STATUSES = ("gradient_converged", "max_iter", "boundary", "evaluation_failed")


@dataclass(frozen=True)
class OptENConfig:
    """Line-search constants.

    Failed Armijo tests are followed by up to ``max_backtracks`` further
    quadratic interpolations; ``max_backtracks=0`` takes the first
    interpolated step unconditionally. ``grid_fallback`` (off by default) compares the result with a coarse grid
    of step ``fallback_step`` and keeps whichever has the lower loss.
    """

    epsilon: float = 1e-3
    tol: float = 1e-4
    tol2: float = 1e-8
    alpha_step: float = 0.5
    c1: float = 1e-4
    beta: float = 0.5
    gamma: float = 10.0
    max_iter: int = 100
    max_backtracks: int = 10
    grid_fallback: bool = False
    fallback_step: float = 1e-2

    def __post_init__(self):
        for name in ("epsilon", "tol", "tol2", "c1", "gamma"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")
        for name in ("alpha_step", "beta"):
            if not 0 < getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1)")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.max_backtracks < 0:
            raise InvalidInputError("max_backtracks must be >= 0")
        if not 0 < self.fallback_step <= 0.5:
            raise InvalidInputError("fallback_step must lie in (0, 0.5]")


@dataclass
class OptENTrace:
    """Accepted iterates as ``(t, loss, p, step)``; ``step`` is nan for ``t_0``.

    ``p`` is the descent direction of the loss rescaled by ``|p_0|``.
    """

    iterates: List[Tuple[float, float, float, float]] = field(default_factory=list)
    status: str = "max_iter"
    evaluations: int = 0
    scale: float = 1.0

    def rows(self):
        return [(k, *it) for k, it in enumerate(self.iterates)]


class _EvalError(RuntimeError):
    pass


def opten_select(surface: Callable[[float], float], cfg: OptENConfig = OptENConfig(),
                 t_floor: Optional[float] = None) -> Tuple[float, OptENTrace]:
    """Search for the minimizer of ``surface`` on ``[t_floor, 1]``.

    Parameters
    ----------
    surface : callable
        Loss as a function of ``t``. Its ``t_floor`` attribute, when present,
        bounds the search from below (the loss is constant underneath).
    cfg : OptENConfig
    t_floor : float, optional
        Overrides the surface's own floor.

    Returns
    -------
    t_hat : float
    trace : OptENTrace
    """
    if t_floor is None:
        t_floor = float(getattr(surface, "t_floor", 0.0))
    if not 0.0 <= t_floor <= 1.0:
        raise InvalidInputError("t_floor must lie in [0, 1]")
    eps = cfg.epsilon
    trace = OptENTrace()
    cache: dict[float, float] = {}

    def R(t: float) -> float:
        t = min(max(t, 0.0), 1.0)
        if t not in cache:
            try:
                v = float(surface(t))
            except Exception as exc:  # any failure inside the surface aborts
                raise _EvalError(str(exc)) from exc
            if not math.isfinite(v):
                raise _EvalError(f"non-finite loss at t={t}")
            cache[t] = v
            trace.evaluations += 1
        return cache[t]

    def slope(t: float) -> float:
        if t + eps > 1.0:
            return (R(t) - R(t - eps)) / eps
        if t - eps < 0.0:
            return (R(t + eps) - R(t)) / eps
        return (R(t + eps) - R(t - eps)) / (2.0 * eps)

    try:
        t = 1.0
        r0 = R(t)
        p0 = -slope(t)
    except _EvalError:
        trace.status = "evaluation_failed"
        return 1.0, trace
    # Working on R / |p0| makes every constant below independent of the loss scale.
    scale = abs(p0) if p0 != 0 else 1.0
    trace.scale = scale
    p = p0 / scale
    trace.iterates.append((t, r0, p, math.nan))
    s_prev = cfg.alpha_step
    k = 0

    try:
        while True:
            if abs(p) < cfg.tol:
                trace.status = "gradient_converged"
                break
            if k >= cfg.max_iter:
                trace.status = "max_iter"
                break
            if (t >= 1.0 and p > 0) or (t <= t_floor and p < 0):
                trace.status = "boundary"
                break
            a = cfg.alpha_step
            t_try = min(max(t + a * p, t_floor), 1.0)
            a = (t_try - t) / p
            phi0 = R(t) / scale
            phi1 = R(t_try) / scale
            dphi0 = -p * p
            s = a
            for _ in range(cfg.max_backtracks + 1):
                if phi1 <= phi0 + cfg.c1 * a * dphi0:
                    s = a
                    break
                s = -0.5 * dphi0 * a * a / (phi1 - phi0 - dphi0 * a)
                a = s
                phi1 = R(min(max(t + a * p, t_floor), 1.0)) / scale
            if abs(s) < cfg.tol2 or abs(s_prev / s) > cfg.gamma:
                s = s_prev * cfg.beta
            t = min(max(t + s * p, t_floor), 1.0)
            s_prev = s
            k += 1
            r = R(t)
            p = -slope(t) / scale
            trace.iterates.append((t, r, p, s))
    except _EvalError:
        trace.status = "evaluation_failed"

    # The heuristic can end on a safeguarded step that went uphill.
    best = min(trace.iterates, key=lambda it: (it[1], -it[0]))
    t_hat = best[0]
    if cfg.grid_fallback:
        ts = np.arange(t_floor, 1.0, cfg.fallback_step)
        ts = np.append(ts, 1.0)
        try:
            vals = [R(float(u)) for u in ts]
            j = int(np.argmin(vals))
            if vals[j] < best[1]:
                t_hat = float(ts[j])
        except _EvalError:
            pass
    return float(t_hat), trace
