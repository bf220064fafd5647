"""Synthetic sparse-recovery benchmark: data generators, one trial, batches and sweeps.

Random streams are derived from a single integer seed with
:class:`numpy.random.SeedSequence`: the forward matrix uses spawn key ``(0,)``
and run ``r`` uses ``(1, r)``, so results do not depend on execution order or
on how runs are spread over worker processes.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import baselines as bl
from .loss import LossSurface, grid_minimize
from .metrics import fdp, relative_error, relative_param_error, tpp
from .model import InvalidInputError, InverseProblem, SpectralData, spectral_data
from .opten import OptENConfig, opten_select
from .solver import ParamGrid, solution_path
from .subspace import (HCriterion, TrainingSet, empirical_covariance,
                       empirical_estimator, estimate_h, top_h_projection)

REFERENCE_ROWS = ("t_opt", "xhat")
BENCH_COLUMNS = ("run", "rule", "n_star", "t", "rel_param_err", "rel_sol_err",
                 "fdp", "tpp", "seconds")
SWEEP_COLUMNS = ("axis", "value", "rule", "mean_rel_sol_err", "std_rel_sol_err", "runs")


def _rng(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


# --- generators ---------------------------------------------------------------

def gen_forward(m: int, d: int, rank: Optional[int] = None, seed=0) -> np.ndarray:
    """Gaussian matrix, optionally of prescribed rank, scaled to unit spectral norm."""
    if m < 1 or d < 1:
        raise InvalidInputError("m and d must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if rank is None:
        A = rng.standard_normal((m, d))
    else:
        if not 1 <= rank <= min(m, d):
            raise InvalidInputError("rank must lie in [1, min(m, d)]")
        A = rng.standard_normal((m, rank)) @ rng.standard_normal((rank, d))
    return A / np.linalg.norm(A, 2)


def gen_signal(d: int, h: int, seed=0, n: Optional[int] = None) -> np.ndarray:
    """``x_i = xi_i + 4 sgn(xi_i)`` on the first ``h`` coordinates, zero elsewhere.

    With ``n`` given, returns ``n`` independent signals as rows.
    """
    if not 1 <= h <= d:
        raise InvalidInputError("h must lie in [1, d]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rows = 1 if n is None else n
    X = np.zeros((rows, d))
    xi = rng.standard_normal((rows, h))
    X[:, :h] = xi + 4.0 * np.sign(xi)
    return X[0] if n is None else X


def gen_bernoulli_instance(m: int, h: int, sigma: float, seed=0):
    """Identity-design instance with Rademacher noise and ``|x_i|`` in ``[2s+0.1, 2s+3]``.

    Returns ``(x, y, w)`` with ``y = x + sigma * w``.
    """
    if sigma < 0:
        raise InvalidInputError("sigma must be nonnegative")
    if not 1 <= h <= m:
        raise InvalidInputError("h must lie in [1, m]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.zeros(m)
    x[:h] = rng.uniform(2 * sigma + 0.1, 2 * sigma + 3.0, h) * rng.choice([-1.0, 1.0], h)
    w = rng.choice([-1.0, 1.0], m)
    return x, x + sigma * w, w


def gen_observations(A: np.ndarray, h: int, sigma: float, n: int, rng):
    """``n`` rows of ``(x, w, y)`` from the sparse-signal model."""
    m, d = A.shape
    X = gen_signal(d, h, rng, n=n)
    W = rng.standard_normal((n, m))
    return X, W, X @ A.T + sigma * W


# --- configuration --------------------------------------------------------------

@dataclass(frozen=True)
class BenchConfig:
    """One benchmark table.

    ``opten_kinds`` lists the losses OptEN is run on and defaults to
    ``(loss_kind,)``. ``h_criterion`` set to
    ``None`` uses the true ``h`` for the learned projection; otherwise it
    names a spectral criterion. ``enbp_mu0``/``enbp_q`` define the separate
    ENBP grid: it starts at ``t = 0.05`` and each step divides the penalty
    weight by 1.05, so ``t`` grows along the grid as the backward scan needs.
    """

    m: int = 500
    d: int = 100
    h: int = 10
    sigma: float = 0.3
    alpha: float = 1e-3
    n_train: int = 50
    n_runs: int = 20
    rank: Optional[int] = None
    seed: int = 0
    loss_kind: str = "empirical"
    grid_step_oracle: float = 1e-3
    opten_kinds: Tuple[str, ...] = ()
    rules: Tuple[str, ...] = bl.RULE_NAMES
    h_criterion: Optional[str] = None
    mu0: float = 1.0
    q: float = 0.95
    n_max: int = 100
    enbp_mu0: float = 19.0
    enbp_q: float = 1.0 / 1.05
    enbp_C: float = 1.0 / 2500
    bp_kappa: float = 0.25
    bp_probes: int = 4
    tau: float = 1.0
    fdp_thresh: float = 0.5
    opten: OptENConfig = field(default_factory=OptENConfig)

    def __post_init__(self):
        if min(self.m, self.d, self.h, self.n_train, self.n_runs) < 1:
            raise InvalidInputError("sizes and counts must be positive")
        if self.h > self.d:
            raise InvalidInputError("h must not exceed d")
        if self.rank is not None and not 1 <= self.rank <= min(self.m, self.d):
            raise InvalidInputError("rank must lie in [1, min(m, d)]")
        if self.sigma < 0 or self.alpha <= 0:
            raise InvalidInputError("sigma must be >= 0 and alpha > 0")
        unknown = set(self.rules) - set(bl.RULE_NAMES)
        if unknown:
            raise InvalidInputError(f"unknown rules: {sorted(unknown)}")
        if self.loss_kind not in ("empirical", "projected", "modified"):
            raise InvalidInputError("loss_kind must be empirical, projected or modified")
        for k in self.opten_kinds:
            if k not in ("empirical", "projected", "modified"):
                raise InvalidInputError(f"unknown OptEN loss {k!r}")

    @property
    def kinds(self) -> Tuple[str, ...]:
        return self.opten_kinds or (self.loss_kind,)

    def method_names(self) -> List[str]:
        kinds = self.kinds
        names = ["OptEN" if len(kinds) == 1 else f"OptEN-{k}" for k in kinds]
        return names + list(self.rules)


@dataclass(frozen=True)
class MethodRow:
    rule: str
    n_star: int
    t: float
    rel_param_err: float
    rel_sol_err: float
    fdp: float
    tpp: float
    seconds: float


@dataclass
class TrialReport:
    run: int
    t_opt: float
    h_used: int
    rows: List[MethodRow]
    nonconverged: int = 0
    notes: List[str] = field(default_factory=list)

    def by_rule(self) -> Dict[str, MethodRow]:
        return {r.rule: r for r in self.rows}


# --- one trial ----------------------------------------------------------------------

def table_matrix(cfg: BenchConfig) -> np.ndarray:
    """The forward matrix shared by every run of a table."""
    return gen_forward(cfg.m, cfg.d, cfg.rank, _rng(cfg.seed, 0))


@dataclass
class TrialProblem:
    """The random draws of one run: test problem, truth and learned prior."""

    prob: InverseProblem
    spec: SpectralData
    x: np.ndarray
    xhat: np.ndarray
    pi_y: np.ndarray
    h_used: int
    rng: np.random.Generator = field(repr=False)

    def surface(self, kind: str) -> LossSurface:
        ref = self.x if kind == "true_loss" else self.xhat
        return LossSurface(kind, self.prob, self.spec, ref, self.pi_y)


def trial_problem(cfg: BenchConfig, run_index: int, A: Optional[np.ndarray] = None,
                  spec: Optional[SpectralData] = None, x: Optional[np.ndarray] = None,
                  w: Optional[np.ndarray] = None) -> TrialProblem:
    """Draw the training set and test pair of run ``run_index``.

    ``A``, ``x`` and ``w`` may be injected (tests); otherwise they are drawn
    from the config's seed.
    """
    if A is None:
        A = table_matrix(cfg)
    if spec is None:
        spec = spectral_data(A)
    rng = _rng(cfg.seed, 1, run_index)
    m, d = A.shape
    if (m, d) != (cfg.m, cfg.d):
        raise InvalidInputError("A does not match the configured shape")

    _, _, Y = gen_observations(A, cfg.h, cfg.sigma, cfg.n_train, rng)
    cov = empirical_covariance(TrainingSet(Y))
    h_used = cfg.h if cfg.h_criterion is None else estimate_h(cov, HCriterion(cfg.h_criterion))
    model = top_h_projection(cov, h_used)

    if x is None:
        x = gen_signal(d, cfg.h, rng)
    if w is None:
        w = rng.standard_normal(m)
    y = A @ x + cfg.sigma * w
    prob = InverseProblem(A, y, cfg.alpha)
    xhat = empirical_estimator(spec, model, y)
    return TrialProblem(prob, spec, x, xhat, model.projection @ y, h_used, rng)


def run_trial(cfg: BenchConfig, run_index: int, A: Optional[np.ndarray] = None,
              spec: Optional[SpectralData] = None, x: Optional[np.ndarray] = None,
              w: Optional[np.ndarray] = None) -> TrialReport:
    """Train the prior, draw a test pair and score every method on it."""
    tp = trial_problem(cfg, run_index, A, spec, x, w)
    prob, spec, x, xhat, pi_y, rng = tp.prob, tp.spec, tp.x, tp.xhat, tp.pi_y, tp.rng
    h_used = tp.h_used

    true = LossSurface("true_loss", prob, spec, x)
    t_opt, _ = grid_minimize(true, cfg.grid_step_oracle)

    def score(name, t, z, n_star, secs, param=True):
        rpe = relative_param_error(t_opt, t) if (param and t_opt > 0) else math.nan
        return MethodRow(name, n_star, t, rpe, relative_error(z, x),
                         fdp(z, x, cfg.fdp_thresh), tpp(z, x, cfg.fdp_thresh, cfg.h), secs)

    rows = [score("t_opt", t_opt, true.solution(t_opt), -1, 0.0),
            score("xhat", math.nan, xhat, -1, math.nan, param=False)]
    notes: List[str] = []
    nonconv = 0

    names = cfg.method_names()
    for name, kind in zip(names, cfg.kinds):
        t0 = time.perf_counter()
        surf = LossSurface(kind, prob, spec, xhat, pi_y)
        t_hat, trace = opten_select(surf, cfg.opten)
        secs = time.perf_counter() - t0
        nonconv += surf.nonconverged
        if trace.status == "evaluation_failed":
            notes.append(f"{name}: evaluation failed")
        rows.append(score(name, t_hat, true.solution(t_hat), -1, secs))

    rules = set(cfg.rules)
    grid = ParamGrid(cfg.mu0, cfg.q, cfg.n_max)
    path = None
    path_secs = 0.0
    if rules - {"ENBP"}:
        t0 = time.perf_counter()
        path = solution_path(prob, spec, grid)
        path_secs = time.perf_counter() - t0
        nonconv += int((~path.converged).sum())

    seed_bp = int(rng.integers(2 ** 63))
    seed_gcv = int(rng.integers(2 ** 63))
    outcomes = []
    for rule in cfg.rules:
        if rule == "DP":
            out = bl.discrepancy(path, cfg.sigma, cfg.tau)
        elif rule == "ME":
            out = bl.monotone_error(path, spec.pinv.T, cfg.sigma, cfg.tau)
        elif rule == "QO":
            out = bl.quasi_optimality(path)
        elif rule == "LC":
            out = bl.l_curve(path)
        elif rule == "BP":
            out = bl.balancing(path, cfg.sigma, cfg.bp_kappa, cfg.bp_probes, seed_bp)
        elif rule == "GCV":
            out = bl.gcv_mc(path, rng_seed=seed_gcv)
        elif rule == "NGCV":
            out = bl.ngcv(path)
        else:
            t0 = time.perf_counter()
            egrid = ParamGrid(cfg.enbp_mu0, cfg.enbp_q, cfg.n_max)
            epath = solution_path(prob, spec, egrid)
            nonconv += int((~epath.converged).sum())
            out = bl.en_balancing(epath, cfg.enbp_C)
            out = replace(out, wall_time=out.wall_time + time.perf_counter() - t0)
            z = epath.solutions[out.n_star]
            outcomes.append((out, z))
            continue
        out = replace(out, wall_time=out.wall_time + path_secs)
        outcomes.append((out, path.solutions[out.n_star]))

    for out, z in outcomes:
        if out.fallback:
            notes.append(f"{out.rule}: no index qualified, used n_max")
        rows.append(score(out.rule, out.t, z, out.n_star, out.wall_time))
    nonconv += true.nonconverged
    return TrialReport(run_index, t_opt, h_used, rows, nonconv, notes)


# --- batches ------------------------------------------------------------------------

def _run_one(args):
    cfg, r = args
    return run_trial(cfg, r)


def run_bench(cfg: BenchConfig, jobs: int = 1) -> List[TrialReport]:
    """All runs of a table, ordered by run index."""
    runs = range(cfg.n_runs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            reports = list(ex.map(_run_one, [(cfg, r) for r in runs]))
    else:
        A = table_matrix(cfg)
        spec = spectral_data(A)
        reports = [run_trial(cfg, r, A, spec) for r in runs]
    return sorted(reports, key=lambda rep: rep.run)


def bench_rows(reports: Sequence[TrialReport], timing: bool = True) -> List[tuple]:
    rows = []
    for rep in reports:
        for r in rep.rows:
            secs = r.seconds if timing or math.isnan(r.seconds) else 0.0
            rows.append((rep.run, r.rule, r.n_star, r.t, r.rel_param_err, r.rel_sol_err,
                         r.fdp, r.tpp, secs))
    return rows


def summarize(reports: Sequence[TrialReport]) -> Dict[str, Dict[str, float]]:
    """Mean of every metric per method (nan-aware)."""
    out: Dict[str, Dict[str, float]] = {}
    names = [r.rule for r in reports[0].rows]
    for name in names:
        rows = [rep.by_rule()[name] for rep in reports]
        out[name] = {k: float(np.nanmean([getattr(r, k) for r in rows]))
                     if not all(math.isnan(getattr(r, k)) for r in rows) else math.nan
                     for k in ("t", "rel_param_err", "rel_sol_err", "fdp", "tpp", "seconds")}
        out[name]["std_rel_sol_err"] = float(np.std([r.rel_sol_err for r in rows]))
    return out


def sweep(cfg: BenchConfig, axis: str, values: Sequence[float], jobs: int = 1) -> List[tuple]:
    """Mean and std of the relative solution error per method and axis value."""
    if axis not in ("sigma", "n_train"):
        raise InvalidInputError("axis must be sigma or n_train")
    if len(values) == 0:
        raise InvalidInputError("values must be nonempty")
    rows = []
    for v in values:
        v = int(v) if axis == "n_train" else float(v)
        reps = run_bench(replace(cfg, **{axis: v}), jobs)
        for name, stats in summarize(reps).items():
            if name == "t_opt":
                continue
            rows.append((axis, v, name, stats["rel_sol_err"], stats["std_rel_sol_err"],
                         len(reps)))
    return rows


# --- presets ------------------------------------------------------------------------

PRESETS: Dict[str, dict] = {
    "table1": dict(cfg={}),
    "table2": dict(cfg=dict(rank=40, loss_kind="projected",
                            opten_kinds=("projected", "modified"))),
    "fig3-sigma": dict(cfg=dict(rules=("DP", "BP", "NGCV")), axis="sigma",
                       values=(0.1, 0.2, 0.3, 0.4, 0.5)),
    "fig3-n": dict(cfg=dict(rules=("DP", "BP", "NGCV")), axis="n_train",
                   values=(20, 40, 60)),
}


def preset(name: str, full: bool = False, **overrides) -> Tuple[BenchConfig, Optional[str], tuple]:
    """``(config, sweep axis or None, sweep values)`` for a named preset."""
    if name not in PRESETS:
        raise InvalidInputError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = PRESETS[name]
    kw = dict(p["cfg"])
    if full:
        kw["n_runs"] = 100
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return BenchConfig(**kw), p.get("axis"), tuple(p.get("values", ()))


_INT_KEYS = {"m", "d", "h", "n_train", "n_runs", "rank", "seed", "n_max", "bp_probes"}
_FLOAT_KEYS = {"sigma", "alpha", "grid_step_oracle", "mu0", "q", "enbp_mu0", "enbp_q",
               "enbp_C", "bp_kappa", "tau", "fdp_thresh"}
_OPTEN_KEYS = {f for f in OptENConfig.__dataclass_fields__}


def config_from_mapping(kv: Dict[str, str]):
    """Build ``(BenchConfig, axis, values)`` from parsed ``key = value`` text.

    ``sweep_axis`` and ``sweep_values`` (comma separated) turn the run into a
    sweep; ``opten.<field>`` keys set line-search constants.
    """
    kw: dict = {}
    opt: dict = {}
    axis, values = None, ()
    for key, raw in kv.items():
        try:
            if key in _INT_KEYS:
                kw[key] = None if raw.lower() == "none" else int(raw)
            elif key in _FLOAT_KEYS:
                kw[key] = float(raw)
            elif key in ("loss_kind", "h_criterion"):
                kw[key] = None if raw.lower() == "none" else raw
            elif key in ("rules", "opten_kinds"):
                kw[key] = tuple(s.strip() for s in raw.split(",") if s.strip())
            elif key == "sweep_axis":
                axis = raw
            elif key == "sweep_values":
                values = tuple(float(s) for s in raw.split(",") if s.strip())
            elif key.startswith("opten.") and key[6:] in _OPTEN_KEYS:
                f = key[6:]
                kind = OptENConfig.__dataclass_fields__[f].type
                opt[f] = (raw.lower() in ("1", "true", "yes") if kind in (bool, "bool")
                          else int(raw) if kind in (int, "int") else float(raw))
            else:
                raise InvalidInputError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"bad value for {key}: {raw!r}") from exc
    if opt:
        kw["opten"] = OptENConfig(**opt)
    if axis is not None and not values:
        raise InvalidInputError("sweep_axis given without sweep_values")
    return BenchConfig(**kw), axis, values


def config_dict(cfg: BenchConfig) -> dict:
    d = asdict(cfg)
    d["opten"] = asdict(cfg.opten)
    return d
