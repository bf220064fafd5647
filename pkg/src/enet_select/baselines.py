"""Classical parameter-choice rules evaluated on a warm-started regularization path.

Every rule returns a :class:`RuleOutcome` whose ``n_star`` indexes the path.
On the default grid ``t_n`` increases with ``n``, so a larger index means
less regularization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import InvalidInputError, InverseProblem, spectral_data
from .solver import RegPath, SolveConfig, solution_path, solve

RULE_NAMES = ("DP", "ME", "QO", "LC", "BP", "ENBP", "GCV", "NGCV")


@dataclass(frozen=True)
class RuleOutcome:
    """Selected index and parameter.

    ``fallback`` is set when no index satisfied the rule and ``n_max`` was
    returned by convention; ``note`` carries any other warning.
    """

    rule: str
    n_star: int
    t: float
    wall_time: float
    fallback: bool = False
    note: str = ""


def _outcome(rule, path, n, t0, fallback=False, note=""):
    return RuleOutcome(rule, int(n), float(path.t[n]), time.perf_counter() - t0,
                       fallback, note)


def _need(path: RegPath):
    if path.prob is None:
        raise InvalidInputError("this rule needs a path built by solution_path")
    spec = path.spec if path.spec is not None else spectral_data(path.prob.A)
    return path.prob, spec


def discrepancy(path: RegPath, sigma: float, tau: float = 1.0,
                m: Optional[int] = None) -> RuleOutcome:
    """First index whose residual is at most ``tau * sigma * sqrt(m)``."""
    t0 = time.perf_counter()
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    m = m if m is not None else _need(path)[0].m
    bound = tau * sigma * np.sqrt(m)
    hit = np.flatnonzero(path.residuals <= bound)
    if hit.size:
        return _outcome("DP", path, hit[0], t0)
    return _outcome("DP", path, path.n_max, t0, fallback=True)


def monotone_error(path: RegPath, A_pinv_T: np.ndarray, sigma: float,
                   tau: float = 1.0) -> RuleOutcome:
    """First index where the monotone-error quotient drops below the noise level.

    The quotient is ``<A z_n - y, B dz> / ||B dz||`` with ``B = (A^+)^T`` and
    ``dz = z_n - z_{n+1}``; where ``B dz = 0`` the discrepancy test is used.
    """
    t0 = time.perf_counter()
    prob, _ = _need(path)
    bound = tau * sigma * np.sqrt(prob.m)
    Z = path.solutions
    for n in range(path.n_max):
        u = A_pinv_T @ (Z[n] - Z[n + 1])
        nu = np.linalg.norm(u)
        if nu == 0:
            ok = path.residuals[n] <= bound
        else:
            ok = (prob.A @ Z[n] - prob.y) @ u / nu <= bound
        if ok:
            return _outcome("ME", path, n, t0)
    if path.residuals[-1] <= bound:
        return _outcome("ME", path, path.n_max, t0)
    return _outcome("ME", path, path.n_max, t0, fallback=True)


def quasi_optimality(path: RegPath) -> RuleOutcome:
    """Index of the smallest jump ``||z_n - z_{n+1}||``."""
    t0 = time.perf_counter()
    if path.n_max < 1:
        raise InvalidInputError("quasi-optimality needs at least two grid points")
    jumps = np.linalg.norm(np.diff(path.solutions, axis=0), axis=1)
    return _outcome("QO", path, int(np.argmin(jumps)), t0)


def l_curve(path: RegPath) -> RuleOutcome:
    """Corner of the L-curve read as the minimum of ``residual * ||z_n||``."""
    t0 = time.perf_counter()
    prod = path.residuals * np.linalg.norm(path.solutions, axis=1)
    return _outcome("LC", path, int(np.argmin(prod)), t0)


def noise_propagation(path: RegPath, probes: int = 4, rng_seed: int = 0,
                      solve_cfg: SolveConfig = SolveConfig()) -> np.ndarray:
    """``rho(k)``: root mean squared norm of the solution map applied to white noise."""
    prob, spec = _need(path)
    rng = np.random.default_rng(rng_seed)
    acc = np.zeros(len(path))
    for _ in range(probes):
        xi = rng.standard_normal(prob.m)
        pp = solution_path(prob.with_y(xi), spec, path.t, solve_cfg)
        acc += np.sum(pp.solutions ** 2, axis=1)
    return np.sqrt(acc / probes)


def balancing(path: RegPath, sigma: float, kappa: float = 0.25, probes: int = 4,
              rng_seed: int = 0, rho: Optional[np.ndarray] = None) -> RuleOutcome:
    """Smallest ``n`` with ``||z_n - z_k|| <= 4 kappa sigma rho(k)`` for all ``k >= n``."""
    t0 = time.perf_counter()
    if probes < 1:
        raise InvalidInputError("probes must be >= 1")
    if rho is None:
        rho = noise_propagation(path, probes, rng_seed)
    Z = path.solutions
    bound = 4.0 * kappa * sigma * rho
    for n in range(len(path)):
        dist = np.linalg.norm(Z[n:] - Z[n], axis=1)
        if np.all(dist <= bound[n:]):
            return _outcome("BP", path, n, t0)
    return _outcome("BP", path, path.n_max, t0, fallback=True)


def en_balancing(path_enbp: RegPath, C: float = 1.0 / 2500, alpha: Optional[float] = None,
                 d: Optional[int] = None) -> RuleOutcome:
    """Elastic-net balancing: scan from the end and stop at the first large jump.

    The path must come from a :class:`ParamGrid` since the bound depends on
    its ``mu0`` and ``q``.
    """
    t0 = time.perf_counter()
    grid = path_enbp.grid
    if grid is None:
        raise InvalidInputError("ENBP needs a path built on a ParamGrid")
    if not C > 0:
        raise InvalidInputError("C must be positive")
    if alpha is None or d is None:
        prob, _ = _need(path_enbp)
        alpha = prob.alpha if alpha is None else alpha
        d = prob.d if d is None else d
    Z = path_enbp.solutions
    for k in range(path_enbp.n_max - 1, -1, -1):
        bound = 4.0 * C / (np.sqrt(d) * alpha * grid.mu0 * grid.q ** (k + 1))
        if np.linalg.norm(Z[k] - Z[k + 1]) > bound:
            return _outcome("ENBP", path_enbp, k + 1, t0)
    return _outcome("ENBP", path_enbp, 0, t0)


def gcv_mc(path: RegPath, prob: Optional[InverseProblem] = None,
           probe_eps: Optional[float] = None, rng_seed: int = 0,
           solve_cfg: SolveConfig = SolveConfig()) -> RuleOutcome:
    """Generalized cross-validation with a one-probe divergence estimate.

    The trace of ``A A_n^{-1}`` is replaced by
    ``delta^T A (z_n(y + eps delta) - z_n) / eps`` for one Gaussian ``delta``.
    Indices whose estimate reaches ``m`` are skipped.
    """
    t0 = time.perf_counter()
    p, spec = _need(path)
    prob = prob or p
    m = prob.m
    eps = probe_eps if probe_eps is not None else 1e-4 * (1.0 + np.linalg.norm(prob.y))
    if not eps > 0:
        raise InvalidInputError("probe_eps must be positive")
    delta = np.random.default_rng(rng_seed).standard_normal(m)
    pert = prob.with_y(prob.y + eps * delta)
    Ad = prob.A.T @ delta
    crit = np.full(len(path), np.inf)
    for n, (t, z) in enumerate(zip(path.t, path.solutions)):
        cfg = SolveConfig(solve_cfg.fp_tol, solve_cfg.max_iter, z, solve_cfg.polish,
                          solve_cfg.polish_every)
        zp = solve(pert, spec, float(t), cfg).z
        est = float(Ad @ (zp - z)) / eps
        if est >= m:
            continue
        crit[n] = (path.residuals[n] ** 2 / m) / ((m - est) / m) ** 2
    if not np.isfinite(crit).any():
        return _outcome("GCV", path, path.n_max, t0, True, "all indices excluded")
    skipped = int(np.sum(~np.isfinite(crit)))
    note = f"{skipped} indices excluded" if skipped else ""
    return _outcome("GCV", path, int(np.argmin(crit)), t0, note=note)


def gamma_norm(z: np.ndarray, alpha: float) -> float:
    return float(np.sum(np.abs(z)) + alpha * (z @ z))


def ngcv(path: RegPath, prob: Optional[InverseProblem] = None,
         z_dagger: Optional[np.ndarray] = None) -> RuleOutcome:
    """Nonlinear GCV with ``s = ||z_n||_g / ||z^+||_g`` and ``||.||_g = ||.||_1 + alpha ||.||^2``."""
    t0 = time.perf_counter()
    p, spec = _need(path)
    prob = prob or p
    if z_dagger is None:
        z_dagger = spec.pinv @ prob.y
    ref = gamma_norm(np.asarray(z_dagger, dtype=float), prob.alpha)
    if ref == 0:
        raise InvalidInputError("z_dagger is zero")
    m, d = prob.m, prob.d
    s = np.array([gamma_norm(z, prob.alpha) for z in path.solutions]) / ref
    den = (1.0 - d * s / m) ** 2 / m
    with np.errstate(divide="ignore"):
        crit = np.where(den > 0, path.residuals ** 2 / np.where(den > 0, den, 1.0), np.inf)
    if not np.isfinite(crit).any():
        return _outcome("NGCV", path, path.n_max, t0, True, "all indices excluded")
    return _outcome("NGCV", path, int(np.argmin(crit)), t0)
