"""Render the five figure families from harness CSV outputs.

The renderer consumes files only: trajectory CSVs with the stable schema
`t,risk,D2,N,tr_B11,tr_B12,tr_B22,gamma,in_domain`, learning-rate sweep
tables, and phase-chase tables.  No numerics happen here beyond quantile
bands and interpolation onto a shared grid; every curve is drawn as stored.

Reference runs (deterministic theory curves) are recognized by an `ode`
token in the file name; remaining inputs are treated as simulation seeds.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TRAJECTORY_HEADER = "t,risk,D2,N,tr_B11,tr_B12,tr_B22,gamma,in_domain"
SWEEP_HEADER = "gamma,d2_initial,d2_final,final_risk,final_n,exited"
CHASE_HEADER = "t,q11,q12,risk"

FIGURE_IDS = (
    "fig1_concentration",
    "fig2_threshold",
    "fig3_pr_field",
    "fig4_pr_sgd_vs_theory",
    "fig5_phase_chase",
)


class SchemaError(ValueError):
    """Input CSV does not carry the expected header or has no rows."""


@dataclass
class FigureSpec:
    figure: str
    inputs: list
    out: str
    band: tuple = (0.1, 0.9)  # an 80 percent band
    stat: str = "risk"
    title: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise ValueError(f"unknown figure id {self.figure!r}; "
                             f"choose from {', '.join(FIGURE_IDS)}")
        if not self.inputs:
            raise SchemaError("figure spec needs at least one input CSV")


def load_table(path, expected_header: str) -> dict:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != expected_header:
            raise SchemaError(
                f"{path.name}: header {header!r} does not match the "
                f"expected schema {expected_header!r}")
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    data = np.array([[float(v) for v in row.split(",")] for row in rows])
    return {name: data[:, i] for i, name in enumerate(expected_header.split(","))}


def split_reference(paths) -> tuple[list, list]:
    """(reference paths, seed paths) by the `ode` file-name convention."""
    refs = [p for p in paths if re.search(r"ode", Path(p).name)]
    rest = [p for p in paths if p not in refs]
    return refs, rest


def band_containment(seed_paths, ode_path, stat: str = "risk",
                     quantiles: tuple = (0.1, 0.9), grid_size: int = 200) -> float:
    """Fraction of the common grid where the band contains the theory curve."""
    tables = [load_table(p, TRAJECTORY_HEADER) for p in seed_paths]
    ref = load_table(ode_path, TRAJECTORY_HEADER)
    t0 = max([tab["t"][0] for tab in tables] + [ref["t"][0]])
    t1 = min([tab["t"][-1] for tab in tables] + [ref["t"][-1]])
    grid = np.linspace(t0, t1, grid_size)
    curves = np.stack([np.interp(grid, tab["t"], tab[stat]) for tab in tables])
    lo = np.quantile(curves, quantiles[0], axis=0)
    hi = np.quantile(curves, quantiles[1], axis=0)
    ref_curve = np.interp(grid, ref["t"], ref[stat])
    inside = (ref_curve >= lo) & (ref_curve <= hi)
    return float(np.mean(inside))


def _fig1(spec: FigureSpec, ax) -> None:
    refs, seeds = split_reference(spec.inputs)
    if not refs or not seeds:
        raise SchemaError("fig1 needs one `ode` reference and seed runs")
    tables = [load_table(p, TRAJECTORY_HEADER) for p in seeds]
    t0 = max(tab["t"][0] for tab in tables)
    t1 = min(tab["t"][-1] for tab in tables)
    grid = np.linspace(t0, t1, 400)
    curves = np.stack([np.interp(grid, tab["t"], tab[spec.stat])
                       for tab in tables])
    lo = np.quantile(curves, spec.band[0], axis=0)
    hi = np.quantile(curves, spec.band[1], axis=0)
    ax.fill_between(grid, lo, hi, alpha=0.3, color="tab:blue",
                    label=f"simulation {int((spec.band[1]-spec.band[0])*100)}% band")
    for curve in curves:
        ax.plot(grid, curve, color="tab:blue", lw=0.4, alpha=0.4)
    for p in refs:
        ref = load_table(p, TRAJECTORY_HEADER)
        ax.plot(ref["t"], ref[spec.stat], color="tab:red", lw=2.0,
                label="theory")
    ax.set_xlabel("t")
    ax.set_ylabel(spec.stat)
    ax.legend()


def _fig2(spec: FigureSpec, ax) -> None:
    for p in spec.inputs:
        tab = load_table(p, SWEEP_HEADER)
        label = Path(p).stem.replace("fig2_sweep_", "")
        ax.plot(tab["gamma"], tab["d2_final"], marker="o", ms=3, label=label)
    tab0 = load_table(spec.inputs[0], SWEEP_HEADER)
    ax.axhline(tab0["d2_initial"][0], color="gray", ls="--", lw=1,
               label="initialization")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("learning rate")
    ax.set_ylabel("final distance to optimum")
    ax.legend(fontsize=8)


def _fig3(spec: FigureSpec, ax) -> None:
    for p in spec.inputs:
        tab = load_table(p, TRAJECTORY_HEADER)
        label = Path(p).stem.replace("fig3_", "")
        ax.plot(tab["tr_B12"], tab["tr_B11"], lw=1.2, label=label)
        ax.plot(tab["tr_B12"][-1:], tab["tr_B11"][-1:], "k.", ms=5)
    ax.set_xlabel("cross overlap")
    ax.set_ylabel("weighted norm")
    ax.legend(fontsize=7)


def _fig4(spec: FigureSpec, ax) -> None:
    refs, sims = split_reference(spec.inputs)
    if not refs or not sims:
        raise SchemaError("fig4 needs `ode` and simulation inputs")
    for p in sims:
        tab = load_table(p, TRAJECTORY_HEADER)
        ax.plot(tab["t"], tab[spec.stat], lw=0.8, alpha=0.8,
                label=f"simulation {Path(p).stem}")
    for p in refs:
        tab = load_table(p, TRAJECTORY_HEADER)
        ax.plot(tab["t"], tab[spec.stat], lw=2.0, ls="--",
                label=f"theory {Path(p).stem}")
    ax.set_xlabel("t")
    ax.set_ylabel(spec.stat)
    ax.legend(fontsize=7)


def _fig5(spec: FigureSpec, ax) -> None:
    for p in spec.inputs:
        tab = load_table(p, CHASE_HEADER)
        label = Path(p).stem.replace("fig5_chase_", "")
        line, = ax.plot(tab["t"], tab["q11"], lw=1.5, label=f"norm {label}")
        ax.plot(tab["t"], tab["q12"], lw=1.2, ls="--", color=line.get_color(),
                label=f"cross {label}")
    ax.set_xlabel("t")
    ax.set_ylabel("overlap entries")
    ax.set_xscale("log")
    ax.legend(fontsize=7)


_RENDERERS = {
    "fig1_concentration": _fig1,
    "fig2_threshold": _fig2,
    "fig3_pr_field": _fig3,
    "fig4_pr_sgd_vs_theory": _fig4,
    "fig5_phase_chase": _fig5,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the written image path."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=130)
    try:
        _RENDERERS[spec.figure](spec, ax)
        ax.set_title(spec.title or spec.figure.replace("_", " "))
        fig.tight_layout()
        out = Path(spec.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out)
    finally:
        plt.close(fig)
    return str(spec.out)
