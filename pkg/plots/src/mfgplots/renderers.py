"""The four figure kinds and their CSV schemas.

Every renderer validates the input schema, draws onto a fresh figure and
returns it; saving is the caller's job (the CLI saves PNG).  Rendering is
read-only and deterministic: identical CSVs produce identical data series
and figure dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

TRACE_COLUMNS = ["iter", "delta_qpire", "delta_qstarre", "delta_re",
                 "exploitability", "reg_exploitability", "wall_time_s"]
METRIC_COLUMNS = TRACE_COLUMNS[1:-1]
SIMPLEX_COLUMNS = ["alpha", "concept", "state", "action", "prob"]
RH_COLUMNS = ["horizon", "iter", "distance"]
SEQPAR_COLUMNS = ["variant", "subgame", "iterations"]

KINDS = ("convergence", "simplex", "rh", "seqpar")


class PlotError(ValueError):
    """Input file missing, empty, or not matching the kind's schema."""


@dataclass(frozen=True)
class PlotJob:
    inputs: tuple[Path, ...]
    kind: str
    output: Path
    log_y: bool = True
    state: int = 0  # simplex: which state's action rows to draw

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise PlotError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "output", Path(self.output))


def _load(path: Path, required: list[str], kind: str) -> pd.DataFrame:
    if not path.exists():
        raise PlotError(f"{path}: no such file")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise PlotError(f"{path}: not a readable CSV ({exc})") from None
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise PlotError(f"{path}: not a {kind} file, missing columns {missing}")
    if frame.empty:
        raise PlotError(f"{path}: contains no data rows")
    return frame


def _legend_names(paths: tuple[Path, ...]) -> list[str]:
    stems = [p.stem for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    return [f"{p.parent.name}/{p.stem}" if p.parent.name else p.stem for p in paths]


def plot_convergence(job: PlotJob):
    """One line per metric column against the iteration count; several
    input traces are overlaid and distinguished by a legend prefix."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    names = _legend_names(job.inputs)
    for path, name in zip(job.inputs, names):
        frame = _load(path, TRACE_COLUMNS, "trace")
        prefix = f"{name}: " if len(job.inputs) > 1 else ""
        for column in METRIC_COLUMNS:
            ax.plot(frame["iter"], frame[column], label=f"{prefix}{column}")
    if job.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("distance / exploitability")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _ternary_xy(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # barycentric (p0, p1, p2) -> 2D; corners at (0,0), (1,0), (1/2, sqrt(3)/2)
    x = probs[:, 1] + 0.5 * probs[:, 2]
    y = (np.sqrt(3.0) / 2.0) * probs[:, 2]
    return x, y


def plot_simplex(job: PlotJob):
    """Temperature sweep in the action simplex: one trajectory per concept
    over the sweep temperatures, for the configured state's first-step
    policy row.  Requires exactly three actions."""
    frame = _load(job.inputs[0], SIMPLEX_COLUMNS, "simplex")
    actions = sorted(frame["action"].unique())
    if len(actions) != 3:
        raise PlotError(f"simplex figure needs exactly 3 actions, found {len(actions)}")
    rows = frame[frame["state"] == job.state]
    if rows.empty:
        raise PlotError(f"no rows for state {job.state}")

    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    triangle = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2.0], [0.0, 0.0]])
    ax.plot(triangle[:, 0], triangle[:, 1], color="0.6", linewidth=1.0)
    for concept, group in rows.groupby("concept"):
        table = group.pivot_table(index="alpha", columns="action", values="prob")
        table = table.sort_index(ascending=False)  # hot to cold
        x, y = _ternary_xy(table.to_numpy())
        ax.plot(x, y, marker="o", markersize=4, label=concept)
    center = _ternary_xy(np.full((1, 3), 1.0 / 3.0))
    ax.scatter(*center, marker="*", s=120, color="black", zorder=5)
    ax.annotate("uniform", (center[0][0], center[1][0]),
                textcoords="offset points", xytext=(6, 6), fontsize=8)
    coldest = rows[rows["alpha"] == rows["alpha"].min()]
    cold_probs = coldest.pivot_table(index="concept", columns="action",
                                     values="prob").to_numpy()
    cx, cy = _ternary_xy(cold_probs)
    ax.annotate("low temperature", (float(cx.mean()), float(cy.mean())),
                textcoords="offset points", xytext=(6, -10), fontsize=8)
    ax.set_aspect("equal")
    ax.set_axis_off()
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    return fig


def plot_rh(job: PlotJob):
    """Distance to the full-horizon solution against iterations, one curve
    per lookahead horizon."""
    frame = _load(job.inputs[0], RH_COLUMNS, "rh")
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for horizon, group in frame.groupby("horizon"):
        ax.plot(group["iter"], group["distance"], label=f"H={horizon}")
    if job.log_y:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("distance to full-horizon solution")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def plot_seqpar(job: PlotJob):
    """Per-subgame iteration counts of the sequential and interleaved
    receding-horizon runs, side by side, with the totals in the legend."""
    frame = _load(job.inputs[0], SEQPAR_COLUMNS, "seqpar")
    totals = frame[frame["subgame"] == "total"]
    per_subgame = frame[frame["subgame"] != "total"].copy()
    if per_subgame.empty:
        raise PlotError("no per-subgame rows")
    per_subgame["subgame"] = per_subgame["subgame"].astype(int)
    variants = list(dict.fromkeys(per_subgame["variant"]))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    width = 0.8 / max(len(variants), 1)
    for i, variant in enumerate(variants):
        group = per_subgame[per_subgame["variant"] == variant].sort_values("subgame")
        total_row = totals[totals["variant"] == variant]["iterations"]
        label = variant if total_row.empty else f"{variant} (total {int(total_row.iloc[0])})"
        ax.bar(group["subgame"] + (i - (len(variants) - 1) / 2) * width,
               group["iterations"].astype(int), width=width, label=label)
    ax.set_xlabel("subgame start time")
    ax.set_ylabel("iterations to tolerance")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


_RENDERERS = {
    "convergence": plot_convergence,
    "simplex": plot_simplex,
    "rh": plot_rh,
    "seqpar": plot_seqpar,
}


def render(job: PlotJob):
    """Draw the job's figure, save it as PNG and return the figure."""
    fig = _RENDERERS[job.kind](job)
    job.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(job.output, format="png", dpi=150)
    return fig
