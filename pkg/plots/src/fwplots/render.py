"""Render publication-style figures from fwbound CSV exports.

Inputs are parsed at double precision (figures need ~3 significant digits).
Rendering never modifies its inputs and works without a display server.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("rates", "heatmap", "phase", "gridsearch", "semicircle")


class SchemaError(ValueError):
    """Missing input or input that does not match the expected CSV schema."""


@dataclass
class FigureSpec:
    kind: str
    inputs: Sequence[Path]
    output: Path
    guides: bool = False
    shade: bool = False
    style: dict = field(default_factory=dict)


def read_table(path, columns) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise SchemaError(f"{path} lacks column(s) {missing}; header is {header}")
        idx = {c: header.index(c) for c in columns}
        data = {c: [] for c in columns}
        for row in reader:
            if not row:
                continue
            for c in columns:
                cell = row[idx[c]]
                data[c].append(float(cell) if cell else np.nan)
    if not data[columns[0]]:
        raise SchemaError(f"{path} has a header but no data rows")
    return {c: np.asarray(v) for c, v in data.items()}


def _save(fig, output: Path):
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    if output.suffix.lower() not in (".png", ".svg"):
        raise SchemaError(f"unsupported output format {output.suffix!r} (use .png or .svg)")
    fig.savefig(output, bbox_inches="tight")
    plt.close(fig)
    return output


def _render_rates(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6, 4))
    anchor = None
    for path in spec.inputs:
        tab = read_table(path, ("t", "gap"))
        mask = (tab["t"] > 0) & (tab["gap"] > 0)
        if not mask.any():
            raise SchemaError(f"{path} has no plottable (t > 0, gap > 0) rows")
        t, gap = tab["t"][mask], tab["gap"][mask]
        ax.loglog(t, gap, lw=1.2, label=Path(path).stem)
        if anchor is None:
            anchor = (t[0], gap[0], t[-1])
    if spec.guides:
        t0, g0, t1 = anchor
        tt = np.geomspace(t0, t1, 64)
        for power, style in ((-1, ":"), (-2, "--")):
            line, = ax.loglog(tt, g0 * (tt / t0) ** power, style, color="gray", lw=1)
            line.set_gid(f"guide-t{power}")
            line.set_label(f"t^{power}")
    ax.set_xlabel("iteration t")
    ax.set_ylabel("primal gap")
    ax.legend(fontsize=7)
    return _save(fig, spec.output)


def _render_heatmap(spec: FigureSpec):
    tab = read_table(spec.inputs[0], ("x", "y", "iters"))
    fig, ax = plt.subplots(figsize=(5, 5))
    n = max(9, int(np.sqrt(len(tab["x"]))) // 3)
    sc = ax.scatter(tab["x"], tab["y"], c=tab["iters"], s=(240 / n) ** 2,
                    marker="s", cmap="viridis", vmin=0, vmax=100)
    ax.plot([0], [1], "k*", markersize=12)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.colorbar(sc, ax=ax, label="iterations to 1e-4")
    return _save(fig, spec.output)


def _render_phase(spec: FigureSpec):
    if len(spec.inputs) < 4:
        raise SchemaError(
            "phase needs four inputs: trajectory.csv curve_sbar.csv curve_g.csv curve_affine.csv"
        )
    traj, sbar, g, affine = (read_table(p, ("r", "s")) for p in spec.inputs[:4])
    fig, ax = plt.subplots(figsize=(6, 4))
    if spec.shade:
        rr = g["r"]
        upper = np.interp(rr, sbar["r"], sbar["s"])
        ax.fill_between(rr, 0, g["s"], color="red", alpha=0.25, lw=0)
        ax.fill_between(rr, g["s"], upper, color="blue", alpha=0.25, lw=0)
    for tab, gid, style, label in (
        (sbar, "curve-sbar", "k-", "upper boundary of M"),
        (g, "curve-g", "k--", "monotonicity threshold"),
        (affine, "curve-affine", "b-", "affine lower bound"),
    ):
        line, = ax.plot(tab["r"], tab["s"], style, lw=1.4)
        line.set_gid(gid)
        line.set_label(label)
    ax.plot(traj["r"], traj["s"], "r.", markersize=4, label="trajectory")
    ax.set_xlim(0, min(1.0, max(float(traj["r"].max()) * 1.1, 0.2)))
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("r")
    ax.set_ylabel("s")
    ax.legend(fontsize=7, loc="lower left")
    return _save(fig, spec.output)


def _render_gridsearch(spec: FigureSpec):
    tab = read_table(spec.inputs[0], ("s0", "tau"))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(tab["s0"], tab["tau"], ".", markersize=2)
    ax.set_xlabel("initial contraction s0")
    ax.set_ylabel("stable phase length tau")
    return _save(fig, spec.output)


def _render_semicircle(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(5, 5))
    angle = np.linspace(0, 2 * np.pi, 256)
    ax.plot(np.cos(angle), np.sin(angle), "k-", lw=0.8)
    for path in spec.inputs:
        tab = read_table(path, ("t", "x", "y"))
        ax.plot(tab["x"], tab["y"], "-", lw=0.7, alpha=0.6)
        ax.scatter(tab["x"], tab["y"], c=tab["t"], s=6, cmap="plasma")
    ax.plot([0], [1], "k*", markersize=12)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return _save(fig, spec.output)


_RENDERERS = {
    "rates": _render_rates,
    "heatmap": _render_heatmap,
    "phase": _render_phase,
    "gridsearch": _render_gridsearch,
    "semicircle": _render_semicircle,
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path.

    Raises SchemaError when an input is missing or fails its schema.
    """
    if spec.kind not in _RENDERERS:
        raise SchemaError(f"unknown kind {spec.kind!r}; choose from {KINDS}")
    if not spec.inputs:
        raise SchemaError("at least one input file is required")
    return _RENDERERS[spec.kind](spec)
