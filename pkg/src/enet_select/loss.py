"""Quadratic loss surfaces over ``t`` and closed-form minimizers used as oracles.

Four kinds share one interface::

    true_loss   ||z^t - x||^2
    empirical   ||z^t - x_hat||^2
    projected   ||P z^t - x_hat||^2        P = A^+ A
    modified    ||A z^t - Pi_hat y||^2

The analytic helpers assume an identity design (``A = I``, or more generally
``y`` already replaced by ``A^T y`` for an orthogonal design).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import InvalidInputError, InverseProblem, SpectralData
from .solver import (SolveConfig, closed_form_orthogonal, solution_path, solve,
                     zero_threshold)

LOSS_KINDS = ("true_loss", "empirical", "projected", "modified")


class LossSurface:
    """Callable ``t -> loss`` backed by cached, warm-started elastic-net solves.

    Parameters
    ----------
    kind : {"true_loss", "empirical", "projected", "modified"}
    prob, spec : the problem instance and its spectral data
    reference : x for ``true_loss``, x_hat for the other kinds
    pi_y : Pi_hat y, required for ``modified``
    solve_cfg : solver settings; ``warm_start`` is managed internally
    """

    def __init__(self, kind: str, prob: InverseProblem, spec: SpectralData,
                 reference: Optional[np.ndarray] = None,
                 pi_y: Optional[np.ndarray] = None,
                 solve_cfg: SolveConfig = SolveConfig()):
        if kind not in LOSS_KINDS:
            raise InvalidInputError(f"unknown loss kind {kind!r}")
        if kind == "modified":
            if pi_y is None:
                raise InvalidInputError("modified loss needs pi_y")
            pi_y = np.asarray(pi_y, dtype=float).ravel()
            if pi_y.size != prob.m:
                raise InvalidInputError("pi_y has the wrong length")
        else:
            if reference is None:
                raise InvalidInputError(f"{kind} loss needs a reference vector")
            reference = np.asarray(reference, dtype=float).ravel()
            if reference.size != prob.d:
                raise InvalidInputError("reference has the wrong length")
        self.kind = kind
        self.prob = prob
        self.spec = spec
        self.reference = reference
        self.pi_y = pi_y
        self.solve_cfg = solve_cfg
        self.t_floor = zero_threshold(prob.A.T @ prob.y)
        self.nonconverged = 0
        self._keys: list[float] = []
        self._z: dict[float, np.ndarray] = {}

    # -- solutions ----------------------------------------------------------

    def _nearest(self, t: float) -> Optional[np.ndarray]:
        if not self._keys:
            return None
        i = bisect.bisect_left(self._keys, t)
        cands = [self._keys[j] for j in (i - 1, i) if 0 <= j < len(self._keys)]
        return self._z[min(cands, key=lambda s: (abs(s - t), s))]

    def _store(self, t: float, z: np.ndarray) -> None:
        if t not in self._z:
            bisect.insort(self._keys, t)
        self._z[t] = z

    def solution(self, t: float) -> np.ndarray:
        """``z^t``, solved once and cached."""
        t = float(t)
        if not 0.0 <= t <= 1.0:
            raise InvalidInputError(f"t must lie in [0, 1], got {t}")
        z = self._z.get(t)
        if z is None:
            cfg = SolveConfig(self.solve_cfg.fp_tol, self.solve_cfg.max_iter,
                              self._nearest(t), self.solve_cfg.polish,
                              self.solve_cfg.polish_every)
            sol = solve(self.prob, self.spec, t, cfg)
            self.nonconverged += not sol.converged
            z = sol.z
            self._store(t, z)
        return z

    def loss_of(self, z: np.ndarray) -> float:
        if self.kind == "true_loss" or self.kind == "empirical":
            r = z - self.reference
        elif self.kind == "projected":
            r = self.spec.P @ z - self.reference
        else:
            r = self.prob.A @ z - self.pi_y
        return float(r @ r)

    def __call__(self, t: float) -> float:
        return self.loss_of(self.solution(t))

    eval = __call__

    def values(self, ts) -> np.ndarray:
        """Loss on many points; one warm-started sweep in ascending order."""
        ts = np.asarray(ts, dtype=float).ravel()
        if ts.size == 0:
            return np.zeros(0)
        if np.any((ts < 0) | (ts > 1)):
            raise InvalidInputError("t values must lie in [0, 1]")
        if self.spec.orthogonal_design:
            aty = self.prob.A.T @ self.prob.y
            Z = _closed_form_batch(aty, ts, self.prob.alpha)
            return np.array([self.loss_of(z) for z in Z])
        order = np.argsort(ts, kind="stable")
        todo = np.array([t for t in np.unique(ts) if t not in self._z])
        if todo.size:
            path = solution_path(self.prob, self.spec, todo, self.solve_cfg)
            self.nonconverged += int((~path.converged).sum())
            for t, z in zip(todo, path.solutions):
                self._store(float(t), z)
        out = np.empty(ts.size)
        for i in order:
            out[i] = self.loss_of(self._z[float(ts[i])])
        return out


def _closed_form_batch(aty: np.ndarray, ts: np.ndarray, alpha: float) -> np.ndarray:
    t = ts[:, None]
    mag = np.maximum(t * (1.0 + 2.0 * np.abs(aty)[None, :]) - 1.0, 0.0)
    return mag / (2.0 * (t * (1.0 - alpha) + alpha)) * np.sign(aty)[None, :]


def oracle_grid(grid_step: float) -> np.ndarray:
    """``{0, step, 2 step, ...}`` up to and including 1."""
    if not 0.0 < grid_step <= 0.5:
        raise InvalidInputError("grid_step must lie in (0, 0.5]")
    n = int(np.floor(1.0 / grid_step + 1e-9))
    ts = np.arange(n + 1) * grid_step
    if ts[-1] < 1.0 - 1e-12:
        ts = np.append(ts, 1.0)
    ts[-1] = min(ts[-1], 1.0)
    return ts


def grid_minimize(surface: Callable[[float], float], grid_step: float = 1e-3):
    """Exhaustive search on :func:`oracle_grid`; smallest ``t`` wins ties.

    Returns ``(t_star, value)``.
    """
    ts = oracle_grid(grid_step)
    if hasattr(surface, "values"):
        vals = surface.values(ts)
    else:
        vals = np.array([surface(float(t)) for t in ts])
    i = int(np.argmin(vals))
    return float(ts[i]), float(vals[i])


# --- identity-design analysis ------------------------------------------------

@dataclass(frozen=True)
class BreakpointSet:
    """Kinks of the identity-design loss.

    ``order`` sorts coordinates by descending ``|y|`` (stable), ``edges`` holds
    ``b_i = 1 + 2|y_i|`` in that order, and interval ``k`` is
    ``[1/b_k, 1/b_{k+1}]`` with ``1/b_0 = 0`` and ``1/b_{m+1} = 1``.
    """

    order: np.ndarray
    edges: np.ndarray

    @classmethod
    def from_y(cls, y: np.ndarray) -> "BreakpointSet":
        y = np.asarray(y, dtype=float).ravel()
        order = np.argsort(-np.abs(y), kind="stable")
        return cls(order, 1.0 + 2.0 * np.abs(y[order]))

    @property
    def breakpoints(self) -> np.ndarray:
        return 1.0 / self.edges

    def interval(self, k: int) -> tuple[float, float]:
        m = self.edges.size
        if not 0 <= k <= m:
            raise InvalidInputError(f"interval index must lie in [0, {m}]")
        lo = 0.0 if k == 0 else 1.0 / self.edges[k - 1]
        hi = 1.0 if k == m else 1.0 / self.edges[k]
        return lo, hi


def identity_loss(t: float, y: np.ndarray, reference: np.ndarray, alpha: float) -> float:
    """``||z^t - reference||^2`` for the identity design."""
    r = closed_form_orthogonal(y, t, alpha) - reference
    return float(r @ r)


def interval_minimizer(k: int, y: np.ndarray, reference: np.ndarray,
                       alpha: float) -> float:
    """Clamped stationary point of the identity-design loss on interval ``k``.

    ``y`` and ``reference`` must already be sorted by descending ``|y|``. On
    interval ``k`` the first ``k`` coordinates are active and the loss is a
    ratio of quadratics whose derivative vanishes at
    ``sum(a_i d_i) / sum(a_i c_i)`` over the active set.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(reference, dtype=float).ravel()
    m = y.size
    if not 0 <= k <= m:
        raise InvalidInputError(f"k must lie in [0, {m}]")
    if np.any(np.diff(np.abs(y)) > 0):
        raise InvalidInputError("y must be sorted by descending magnitude")
    bp = BreakpointSet(np.arange(m), 1.0 + 2.0 * np.abs(y))
    lo, hi = bp.interval(k)
    if k == 0:
        return lo
    s, ya, xa = np.sign(y[:k]), y[:k], x[:k]
    a = s * (1.0 + 2.0 * alpha * np.abs(ya))
    c = s + 2.0 * xa * (alpha - 1.0) + 2.0 * ya
    dd = s + 2.0 * alpha * xa
    num, den = float(a @ dd), float(a @ c)
    if den == 0.0:
        return hi
    return float(np.clip(num / den, lo, hi))


def analytic_minimizer_identity(y: np.ndarray, reference: np.ndarray,
                                alpha: float) -> float:
    """Global minimizer of the identity-design loss over ``[0, 1]``.

    Candidates are every interval minimizer plus every breakpoint and ``1``
    (a stationary point can be a maximum, in which case the minimum sits at
    an interval end). Smallest ``t`` wins ties.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(reference, dtype=float).ravel()
    if y.size != x.size:
        raise InvalidInputError("y and reference differ in length")
    bp = BreakpointSet.from_y(y)
    ys, xs = y[bp.order], x[bp.order]
    cands = {0.0, 1.0, *map(float, bp.breakpoints)}
    cands.update(interval_minimizer(k, ys, xs, alpha) for k in range(1, y.size + 1))
    ts = np.array(sorted(cands))
    vals = np.array([identity_loss(t, y, x, alpha) for t in ts])
    best = vals.min()
    # treat round-off level differences as ties so the smallest t wins
    tie = vals <= best + 1e-12 * max(1.0, abs(best))
    return float(ts[np.argmax(tie)])


# --- Bernoulli closed forms (alpha = 1) --------------------------------------

def _bernoulli_check(x, y, sigma, h):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    m = x.size
    if y.size != m:
        raise InvalidInputError("x and y differ in length")
    if not 1 <= h <= m:
        raise InvalidInputError("h must lie in [1, m]")
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    scale = 1e-9 * max(1.0, float(np.max(np.abs(y))))
    if np.any(np.abs(np.abs(y - x) - sigma) > scale):
        raise InvalidInputError("noise is not of the form sigma * (+-1)")
    if np.any(x[h:] != 0):
        raise InvalidInputError("x must vanish beyond its first h coordinates")
    if np.any(np.abs(x[:h]) < 2.0 * sigma - scale) or np.any(x[:h] == 0):
        raise InvalidInputError("support magnitudes must be at least 2 sigma")
    return x, y


def bernoulli_tstar(x: np.ndarray, y: np.ndarray, sigma: float, h: int) -> float:
    """Minimizer of the true loss for ``A = I``, ``alpha = 1`` and Rademacher noise.

    Returns ``t*`` clamped to ``[1/b_{h+1}, 1]`` where ``b_i = 1 + 2|y_i|``.
    """
    x, y = _bernoulli_check(x, y, sigma, h)
    m = x.size
    b = 1.0 + 2.0 * np.abs(y)
    s = np.sign(y)
    num = float(b[:h] @ (1.0 + 2.0 * s[:h] * x[:h]))
    den = float(b[:h] @ b[:h])
    lo = 0.0
    if h < m:
        bn = 1.0 + 2.0 * sigma
        num += (m - h) * bn
        den += (m - h) * bn ** 2
        lo = 1.0 / bn
    return float(np.clip(num / den, lo, 1.0))


def bernoulli_that(tstar: float, x: np.ndarray, xhat: np.ndarray, y: np.ndarray,
                   h: int) -> float:
    """Stationary point of the empirical loss, written as ``t*`` plus a correction.

    Coordinates with ``b_i > 1/t*`` are the ones active at ``t*``. ``h`` is
    only validated; the active set already determines the sums.
    """
    x = np.asarray(x, dtype=float).ravel()
    xhat = np.asarray(xhat, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if not (x.size == xhat.size == y.size):
        raise InvalidInputError("x, xhat and y differ in length")
    if not 1 <= h <= x.size:
        raise InvalidInputError("h must lie in [1, m]")
    if not tstar > 0:
        raise InvalidInputError("tstar must be positive")
    b = 1.0 + 2.0 * np.abs(y)
    act = b > 1.0 / tstar
    if not np.any(act):
        raise InvalidInputError("no coordinate is active at tstar")
    ba = b[act]
    corr = 2.0 * float(ba @ (np.sign(y[act]) * (xhat[act] - x[act])))
    return float(tstar + corr / float(ba @ ba))
