"""Figure renderers over the run CSVs.

Three figures per run: the consensus error on a log scale, the objective
profiles (true objective at the average and the summed oracle values) against
the reference optimum, and the per-agent component trajectories in the
classic style: agent estimates as dashed black lines, the optimum as a solid
red line.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def read_metrics_csv(path: str | Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (rounds, agents, components) with components (rows, n)."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    coords = [n for n in names if n.startswith("x")]
    k = np.atleast_1d(data["k"])
    agent = np.atleast_1d(data["agent"]).astype(int)
    comps = np.column_stack([np.atleast_1d(data[c]) for c in coords])
    return k, agent, comps


def plot_consensus(metrics: dict[str, np.ndarray], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.semilogy(metrics["k"], np.maximum(metrics["consensus_error"], 1e-300), color="black")
    ax.set_xlabel("round k")
    ax.set_ylabel("consensus error")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_objective(metrics: dict[str, np.ndarray], path: Path, f_star: float | None) -> Path:
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(metrics["k"], metrics["f_av_true"], color="black", label="f(x_av)")
    ax.plot(metrics["k"], metrics["f_oracle_sum"], color="gray", linestyle=":",
            label="sum of oracle values")
    if f_star is not None:
        ax.axhline(f_star, color="red", linewidth=1.2, label="f*")
    ax.set_xlabel("round k")
    ax.set_ylabel("objective")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_components(
    trajectory_csv: str | Path,
    path: Path,
    x_star: Sequence[float] | None = None,
    coords: Sequence[int] | None = None,
) -> Path:
    k, agent, comps = read_trajectory_csv(trajectory_csv)
    n = comps.shape[1]
    if coords is None:
        coords = (2, 3) if n >= 4 else tuple(range(n))
    fig, axes = plt.subplots(len(coords), 1, figsize=(6.4, 2.6 * len(coords)), sharex=True)
    axes = np.atleast_1d(axes)
    for ax, coord in zip(axes, coords):
        for i in np.unique(agent):
            mask = agent == i
            ax.plot(k[mask], comps[mask, coord], color="black", linestyle="--", linewidth=0.7)
        if x_star is not None:
            ax.axhline(float(x_star[coord]), color="red", linewidth=1.4)
        ax.set_ylabel(f"component {coord + 1}")
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("round k")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_run_figures(
    metrics_csv: str | Path,
    trajectory_csv: str | Path | None,
    out_dir: str | Path,
    f_star: float | None = None,
    x_star: Sequence[float] | None = None,
    coords: Sequence[int] | None = None,
) -> list[Path]:
    """Render all run figures into `out_dir`, returning the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = read_metrics_csv(metrics_csv)
    paths = [
        plot_consensus(metrics, out_dir / "consensus.png"),
        plot_objective(metrics, out_dir / "objective.png", f_star),
    ]
    if trajectory_csv is not None and Path(trajectory_csv).exists():
        paths.append(plot_components(trajectory_csv, out_dir / "components.png", x_star, coords))
    return paths
