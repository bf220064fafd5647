"""Command-line interface: ``enet-select {solve,bench,denoise,estimate-h}``.

Exit status is 0 on success, 1 on invalid input (including bad flags) and
2 on runtime failure such as a solver that did not converge.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from . import io as fio
from .loss import oracle_grid
from .metrics import psnr, ssim
from .model import InvalidInputError, InverseProblem, spectral_data
from .opten import OptENConfig, opten_select
from .solver import SolveConfig, solve
from .subspace import H_CRITERIA, HCriterion, TrainingSet, empirical_covariance, estimate_h

log = logging.getLogger("enet_select")


class RuntimeFailure(RuntimeError):
    """Raised for failures that map to exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# --- shared flag groups -----------------------------------------------------------------

def _add_opten_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("line search")
    d = OptENConfig()
    g.add_argument("--epsilon", type=float, default=d.epsilon, help="finite-difference width")
    g.add_argument("--tol", type=float, default=d.tol, help="stop when |p_k| < tol")
    g.add_argument("--tol2", type=float, default=d.tol2, help="smallest admissible step")
    g.add_argument("--step", type=float, default=d.alpha_step, help="trial step length")
    g.add_argument("--c1", type=float, default=d.c1, help="Armijo constant")
    g.add_argument("--beta", type=float, default=d.beta, help="safeguard shrink factor")
    g.add_argument("--gamma", type=float, default=d.gamma, help="safeguard step-ratio bound")
    g.add_argument("--max-iter", type=int, default=d.max_iter, dest="opten_max_iter",
                   help="line-search iteration budget")
    g.add_argument("--max-backtracks", type=int, default=d.max_backtracks,
                   help="extra interpolations after a failed Armijo test (0 = single step)")
    g.add_argument("--grid-fallback", action="store_true",
                   help="also scan a coarse grid and keep the lower loss (off by default)")


def _opten_cfg(a) -> OptENConfig:
    return OptENConfig(epsilon=a.epsilon, tol=a.tol, tol2=a.tol2, alpha_step=a.step,
                       c1=a.c1, beta=a.beta, gamma=a.gamma, max_iter=a.opten_max_iter,
                       max_backtracks=a.max_backtracks, grid_fallback=a.grid_fallback)


def _write_outputs(out: str, sub: str, params: dict, seed=None) -> None:
    fio.write_manifest(fio.manifest_path(out), sub, dict(params, argv=sys.argv[1:]), seed)


# --- solve -------------------------------------------------------------------------------

def cmd_solve(a) -> int:
    A = fio.read_matrix(a.matrix)
    y = fio.read_vector(a.obs)
    prob = InverseProblem(A, y, a.alpha)
    spec = spectral_data(A)
    sol = solve(prob, spec, a.t, SolveConfig(fp_tol=a.tol, max_iter=a.max_iter))
    fio.write_matrix(a.out, sol.z[:, None], header="z")
    _write_outputs(a.out, "solve", dict(matrix=a.matrix, obs=a.obs, t=a.t, alpha=a.alpha,
                                         tol=a.tol, max_iter=a.max_iter))
    print(f"iterations={sol.iterations} converged={sol.converged} "
          f"fp_residual={sol.fp_residual:.3e} nonzeros={int(np.count_nonzero(sol.z))}")
    if not sol.converged:
        raise RuntimeFailure(f"solver did not reach fp_tol={a.tol} in {a.max_iter} iterations")
    return 0


# --- bench -------------------------------------------------------------------------------

def _bench_config(a):
    from . import synthetic as sb

    if a.config:
        cfg, axis, values = sb.config_from_mapping(fio.read_config(a.config))
        if a.full:
            cfg = replace(cfg, n_runs=100)
    else:
        cfg, axis, values = sb.preset(a.preset, a.full)
    over = {}
    if a.runs is not None:
        over["n_runs"] = a.runs
    if a.seed is not None:
        over["seed"] = a.seed
    if a.opten_set:
        over["opten"] = _opten_cfg(a)
    return (replace(cfg, **over) if over else cfg), axis, values


def cmd_bench(a) -> int:
    from . import synthetic as sb

    if a.runs is not None and a.runs < 1:
        raise InvalidInputError("--runs must be >= 1")
    if a.jobs < 1:
        raise InvalidInputError("--jobs must be >= 1")
    cfg, axis, values = _bench_config(a)
    params = dict(config=sb.config_dict(cfg), sweep_axis=axis, sweep_values=list(values),
                  jobs=a.jobs, timing=not a.no_timing)

    if axis is not None:
        rows = sb.sweep(cfg, axis, values, a.jobs)
        n = fio.write_table(a.out, sb.SWEEP_COLUMNS, rows)
        for r in rows:
            print(f"{r[0]}={r[1]:<6g} {r[2]:<8} {r[3]:.4f} +- {r[4]:.4f}")
        if a.figures:
            from . import plotting

            plotting.sweep_lines(os.path.join(a.figures, f"sweep_{axis}.png"), rows)
    else:
        reports = sb.run_bench(cfg, a.jobs)
        n = fio.write_table(a.out, sb.BENCH_COLUMNS, sb.bench_rows(reports, not a.no_timing))
        summary = sb.summarize(reports)
        print(f"{'method':<18}{'t':>8}{'rel_param':>11}{'rel_sol':>10}{'fdp':>8}{'tpp':>7}")
        for name, s in summary.items():
            print(f"{name:<18}{s['t']:>8.4f}{s['rel_param_err']:>11.4f}"
                  f"{s['rel_sol_err']:>10.4f}{s['fdp']:>8.4f}{s['tpp']:>7.3f}")
        bad = sum(r.nonconverged for r in reports)
        if bad:
            log.warning("%d elastic-net solves did not converge", bad)
        for rep in reports:
            for note in rep.notes:
                log.info("run %d: %s", rep.run, note)
        if a.trace or a.dump_loss or a.figures:
            _bench_extras(a, cfg, summary, reports[0])
    _write_outputs(a.out, "bench", params, cfg.seed)
    log.info("wrote %d rows to %s", n, a.out)
    return 0


def _bench_extras(a, cfg, summary, first) -> None:
    """Trace, loss dump and figures, all for run 0."""
    from . import synthetic as sb

    tp = sb.trial_problem(cfg, 0)
    kind = a.dump_kind or cfg.kinds[0]
    if a.trace:
        _, trace = opten_select(tp.surface(cfg.kinds[0]), cfg.opten)
        fio.write_table(a.trace, ("k", "t", "loss", "p", "step"), trace.rows())
        log.info("OptEN status on run 0: %s", trace.status)
    ts = oracle_grid(a.dump_step)
    if a.dump_loss:
        fio.write_table(a.dump_loss, ("t", "value"), zip(ts, tp.surface(kind).values(ts)))
    if a.figures:
        from . import plotting

        kinds = ("true_loss",) + tuple(cfg.kinds)
        curves = {k: (ts, tp.surface(k).values(ts)) for k in kinds}
        marks = {r.rule: r.t for r in first.rows
                 if r.rule == "t_opt" or r.rule.startswith("OptEN")}
        plotting.loss_curves(os.path.join(a.figures, "loss_run0.png"), curves, marks)
        plotting.method_bars(os.path.join(a.figures, "rel_sol_err.png"), summary)


# --- denoise -----------------------------------------------------------------------------

def cmd_denoise(a) -> int:
    from . import wavelet as wv

    if (a.image is None) == (a.phantom is None):
        raise InvalidInputError("give exactly one of --image or --phantom")
    X = fio.read_pgm(a.image) if a.image else wv.phantom(a.phantom, a.seed)
    if a.sigma is not None:
        if a.sigma < 0:
            raise InvalidInputError("--sigma must be nonnegative")
        noise = np.random.default_rng(np.random.SeedSequence(a.seed, spawn_key=(1,)))
        Y = X + a.sigma * noise.standard_normal(X.shape)
    else:
        X, Y = None, X
    c = wv.dwt2(Y, a.levels).flat()
    ocfg = _opten_cfg(a)
    history = None
    if a.mode == "fixed-t":
        if a.t is None:
            raise InvalidInputError("--mode fixed-t needs --t")
        if a.dump_loss and a.h is None:
            raise InvalidInputError("--dump-loss needs an h (give --h with fixed-t)")
        h, t = a.h, a.t
    elif a.mode == "oracle":
        if a.h is not None:
            h = a.h
        elif X is None:
            raise InvalidInputError("--mode oracle needs --h or a clean input with --sigma")
        else:
            h = wv.oracle_h(Y, X, a.levels)
        t = wv.opten_for_h(c, h, a.alpha, ocfg)
    else:
        sched = wv.HSchedule.for_shape(Y.shape, delta_t=a.delta_t, t_cap=a.t_cap)
        if a.h0 is not None or a.h_step is not None:
            sched = replace(sched, h0=a.h0 or sched.h0, h_step=a.h_step or sched.h_step)
        if a.max_steps is not None:
            sched = replace(sched, max_steps=a.max_steps)
        res = wv.select_h_heuristic(Y, a.alpha, sched, ocfg, a.levels)
        h, t, history = res.h, res.t, res.history
        log.info("heuristic stopped: %s after %d steps", res.reason, len(history))
    Z = wv.denoise(Y, a.alpha, t, a.levels)
    fio.write_pgm(a.out, Z, binary=not a.ascii)

    rows = []
    Yc = np.clip(Y, 0.0, 1.0)
    if X is not None:
        t_best, _ = wv.best_t_by_psnr(Y, X, a.alpha, a.grid_step, a.levels)
        Zb = wv.denoise(Y, a.alpha, t_best, a.levels)
        rows.append(("noisy", -1, math.nan, psnr(X, Yc), ssim(X, Yc)))
        rows.append(("t_opt", -1 if h is None else h, t_best, psnr(X, Zb), ssim(X, Zb)))
        rows.append((a.mode, -1 if h is None else h, t, psnr(X, Z), ssim(X, Z)))
    else:
        rows.append((a.mode, -1 if h is None else h, t, math.nan, math.nan))
    for r in rows:
        print(f"{r[0]:<10} h={r[1]:<6} t={r[2]:.4f} psnr={r[3]:.3f} ssim={r[4]:.4f}")
    if a.report:
        fio.write_table(a.report, ("method", "h", "t", "psnr", "ssim"), rows)

    if a.dump_loss:
        if history is not None:
            fio.write_table(a.dump_loss, ("h", "t_hat"), history)
        else:
            ref = np.where(wv.top_h_mask(c, h), c, 0.0)
            ts = oracle_grid(a.grid_step)
            fio.write_table(a.dump_loss, ("t", "value"),
                            zip(ts, wv.CoefficientLoss(c, ref, a.alpha).values(ts)))
    if a.figures:
        from . import plotting

        imgs = {"noisy": Yc, "denoised": Z}
        if X is not None:
            imgs = {"clean": X, **imgs}
        plotting.image_triplet(os.path.join(a.figures, "denoise.png"), imgs)
        if history is not None:
            plotting.h_history(os.path.join(a.figures, "h_history.png"), history, h)
    params = {k: v for k, v in vars(a).items() if k != "func"}
    _write_outputs(a.out, "denoise", params, a.seed)
    return 0


# --- estimate-h --------------------------------------------------------------------------

def cmd_estimate_h(a) -> int:
    ts = TrainingSet(fio.read_matrix(a.samples))
    crit = HCriterion(a.criterion, a.threshold, a.fraction, a.printed_gap)
    h = estimate_h(empirical_covariance(ts), crit)
    print(f"criterion={a.criterion} h={h}")
    return 0


# --- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="enet-select",
                description="Unsupervised elastic-net parameter selection.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", parents=[common], help="solve one elastic-net problem")
    s.add_argument("--matrix", required=True, help="forward matrix A (CSV)")
    s.add_argument("--obs", required=True, help="observation y (CSV, one row or column)")
    s.add_argument("--t", type=float, required=True, help="parameter in [0, 1]")
    s.add_argument("--alpha", type=float, required=True, help="ridge weight (> 0)")
    s.add_argument("--tol", type=float, default=1e-10, help="fixed-point tolerance")
    s.add_argument("--max-iter", type=int, default=20000, help="iteration budget")
    s.add_argument("--out", required=True, help="solution z (CSV column)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", parents=[common], help="synthetic benchmark tables and sweeps")
    src = b.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=("table1", "table2", "fig3-sigma", "fig3-n"))
    src.add_argument("--config", help="key = value file ('#' comments)")
    b.add_argument("--runs", type=int, help="number of runs (overrides preset/config)")
    b.add_argument("--seed", type=int, help="master seed")
    b.add_argument("--full", action="store_true", help="100 runs instead of 20")
    b.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    b.add_argument("--out", required=True, help="result CSV")
    b.add_argument("--no-timing", action="store_true",
                   help="write 0 in the seconds column so output bytes are reproducible")
    b.add_argument("--trace", help="OptEN iterate table of run 0 (CSV)")
    b.add_argument("--dump-loss", help="loss curve of run 0 as a two-column CSV")
    b.add_argument("--dump-kind", choices=("true_loss", "empirical", "projected", "modified"),
                   help="which loss --dump-loss writes (default: the first OptEN loss)")
    b.add_argument("--dump-step", type=float, default=1e-3, help="t spacing of the dump")
    b.add_argument("--figures", metavar="DIR", help="also render PNG figures into DIR")
    _add_opten_flags(b)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("denoise", parents=[common], help="wavelet elastic-net denoising of a PGM image")
    img = d.add_mutually_exclusive_group()
    img.add_argument("--image", help="input PGM (P2 or P5)")
    img.add_argument("--phantom", type=int, metavar="N", help="use an N x N synthetic phantom")
    d.add_argument("--sigma", type=float,
                   help="add Gaussian noise of this level (omit if the input is already noisy)")
    d.add_argument("--seed", type=int, default=0, help="seed for noise and phantom")
    d.add_argument("--mode", choices=("oracle", "heuristic", "fixed-t"), default="heuristic")
    d.add_argument("--h", type=int, help="number of kept coefficients")
    d.add_argument("--t", type=float, help="parameter for --mode fixed-t")
    d.add_argument("--alpha", type=float, default=1e-3, help="ridge weight")
    d.add_argument("--levels", type=int, help="wavelet depth (default log2(min side) - 3)")
    d.add_argument("--h0", type=int, help="heuristic: first h")
    d.add_argument("--h-step", type=int, help="heuristic: h increment")
    d.add_argument("--delta-t", type=float, default=1e-3, help="heuristic: decrease tolerance")
    d.add_argument("--t-cap", type=float, default=1 - 1e-6, help="heuristic: saturation level")
    d.add_argument("--max-steps", type=int, help="heuristic: step budget")
    d.add_argument("--grid-step", type=float, default=1e-3, help="grid for t_opt and dumps")
    d.add_argument("--out", required=True, help="denoised PGM")
    d.add_argument("--ascii", action="store_true", help="write P2 instead of P5")
    d.add_argument("--report", help="PSNR/SSIM table (CSV)")
    d.add_argument("--dump-loss", help="loss curve, or (h, t) history in heuristic mode")
    d.add_argument("--figures", metavar="DIR", help="also render PNG figures into DIR")
    _add_opten_flags(d)
    d.set_defaults(func=cmd_denoise)

    e = sub.add_parser("estimate-h", parents=[common], help="read the signal dimension off training samples")
    e.add_argument("--samples", required=True, help="CSV with one sample per row")
    e.add_argument("--criterion", choices=H_CRITERIA, default="relative_gap_restricted")
    e.add_argument("--threshold", type=float, default=0.95, help="energy criteria threshold")
    e.add_argument("--fraction", type=float, default=0.5,
                   help="restricted relative gap: search the first fraction*m indices")
    e.add_argument("--printed-gap", action="store_true",
                   help="use 1 - lam_k/lam_{k+1} for the relative gap")
    e.set_defaults(func=cmd_estimate_h)
    return p


_OPTEN_DESTS = ("epsilon", "tol", "tol2", "step", "c1", "beta", "gamma", "opten_max_iter",
                "max_backtracks", "grid_fallback")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if a.command == "bench":
        defaults = build_parser().parse_args(["bench", "--preset", "table1", "--out", "x"])
        a.opten_set = any(getattr(a, k) != getattr(defaults, k) for k in _OPTEN_DESTS)
    try:
        return a.func(a)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeFailure as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything unexpected is a runtime failure
        log.debug("unhandled", exc_info=True)
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
