"""Static PNG figures for CLI reports (Agg backend, files only)."""

from __future__ import annotations

import os
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def loss_curves(path: str, curves: Mapping[str, Tuple[Sequence[float], Sequence[float]]],
                marks: Mapping[str, float] | None = None, title: str = "") -> str:
    """Loss functionals against ``t`` with optional vertical markers."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (ts, vals) in curves.items():
        ax.plot(ts, vals, label=name)
    for name, t in (marks or {}).items():
        ax.axvline(t, ls="--", lw=0.8, color="k" if name == "t_opt" else "C3")
        ax.annotate(name, (t, 1.0), xycoords=("data", "axes fraction"),
                    rotation=90, va="top", fontsize=8)
    ax.set_xlabel("t")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend()
    return _save(fig, path)


def method_bars(path: str, summary: Mapping[str, Mapping[str, float]],
                key: str = "rel_sol_err") -> str:
    names = [n for n in summary if n != "t_opt"]
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.bar(names, [summary[n][key] for n in names], color="C0")
    if "t_opt" in summary:
        ax.axhline(summary["t_opt"][key], color="k", ls="--", lw=0.8, label="t_opt")
        ax.legend()
    ax.set_ylabel(f"mean {key}")
    ax.tick_params(axis="x", rotation=45)
    return _save(fig, path)


def sweep_lines(path: str, rows: Iterable[Sequence]) -> str:
    """Rows as produced by the sweep: ``(axis, value, rule, mean, std, runs)``."""
    by_rule: Dict[str, list] = {}
    axis = ""
    for axis, v, rule, mean, std, _ in rows:
        by_rule.setdefault(rule, []).append((v, mean, std))
    fig, ax = plt.subplots(figsize=(6, 4))
    for rule, pts in by_rule.items():
        pts.sort()
        ax.errorbar([p[0] for p in pts], [p[1] for p in pts], yerr=[p[2] for p in pts],
                    marker="o", capsize=3, label=rule)
    ax.set_xlabel(axis)
    ax.set_ylabel("relative solution error")
    ax.legend()
    return _save(fig, path)


def h_history(path: str, history: Sequence[Tuple[int, float]], chosen: int) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([h for h, _ in history], [t for _, t in history], marker=".")
    ax.axvline(chosen, color="C3", ls="--", lw=0.8)
    ax.set_xlabel("h")
    ax.set_ylabel("learned t")
    return _save(fig, path)


def image_triplet(path: str, images: Mapping[str, object]) -> str:
    fig, axes = plt.subplots(1, len(images), figsize=(3 * len(images), 3.2))
    for ax, (name, img) in zip(list(getattr(axes, "flat", [axes])), images.items()):
        ax.imshow(img, cmap="gray", vmin=0, vmax=1)
        ax.set_title(name)
        ax.axis("off")
    return _save(fig, path)
