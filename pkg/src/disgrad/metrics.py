"""Per-round diagnostics and the checks tying runs back to theory.

The quantities tracked here are the ones the convergence guarantees speak
about: the consensus error ``||x - 1 x_av||``, the true (nonsmooth) network
objective at the average iterate, the sum of oracle values, and the two
aggregated oracle inequalities that interpret the whole network as a single
inexact oracle queried at the average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import InvalidParameter

Array = np.ndarray

CSV_COLUMNS = (
    "k",
    "alpha_k",
    "delta_k",
    "consensus_error",
    "f_av_true",
    "f_oracle_sum",
    "subopt",
    "grad_sup",
)


class TrueObjective(Protocol):
    def true_objective(self, z: Array) -> float: ...


@dataclass(frozen=True)
class RunRecord:
    """One recorded round of a distributed run."""

    k: int
    alpha_k: float
    delta_k: float
    consensus_error: float
    f_av_true: float
    f_oracle_sum: float
    subopt: float
    grad_sup: float


@dataclass(frozen=True)
class Snapshot:
    """Full per-agent oracle data retained at one round for deep checks."""

    k: int
    alpha_k: float
    delta_k: float
    x: Array
    values: Array
    grads: Array


def consensus_error(state) -> float:
    """Frobenius norm of the deviation from the network average.

    Accepts a NetworkState or a raw (m, n) estimate matrix.  Zero exactly
    when all agents agree.
    """
    x = np.asarray(getattr(state, "x", state), dtype=float)
    x = np.atleast_2d(x)
    x_bar = x - x.mean(axis=0)
    return float(np.linalg.norm(x_bar))


def true_objective(problem: TrueObjective, z: Array) -> float:
    """Sum of the agents' true local objectives at a single point."""
    return float(problem.true_objective(np.asarray(z, dtype=float)))


def format_float(v: float) -> str:
    return format(v, ".17g")


def write_records_csv(records: Sequence[RunRecord], path: str | Path) -> Path:
    """Write the record stream as CSV, floats at 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(
            ",".join(
                [str(r.k)]
                + [
                    format_float(v)
                    for v in (
                        r.alpha_k,
                        r.delta_k,
                        r.consensus_error,
                        r.f_av_true,
                        r.f_oracle_sum,
                        r.subopt,
                        r.grad_sup,
                    )
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_trajectory_csv(
    ks: Sequence[int], states: Sequence[Array], path: str | Path
) -> Path:
    """Write per-agent estimate components at recorded rounds.

    Columns: k, agent (1-based), then one column per coordinate.
    """
    if len(ks) != len(states):
        raise InvalidParameter("one state per recorded round is required")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = int(np.asarray(states[0]).shape[1]) if states else 0
    header = ["k", "agent"] + [f"x{j + 1}" for j in range(dim)]
    lines = [",".join(header)]
    for k, x in zip(ks, states):
        x = np.asarray(x)
        for agent in range(x.shape[0]):
            row = [str(int(k)), str(agent + 1)] + [format_float(v) for v in x[agent]]
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class AggregatedOracleCheck:
    """Both aggregated oracle inequalities evaluated at one probe.

    ``xi`` is the aggregated gap at the consensual probe; the lower margin is
    xi itself and the upper margin is the bound
    ``L ||y - 1 x_av||^2 + L ||x_bar||^2 + m delta`` minus xi.
    ``accuracy_k = L ||x_bar||^2 + m delta`` is the induced accuracy of the
    network seen as a single inexact oracle at the average point.
    """

    k: int
    xi: float
    xi_lower_margin: float
    xi_upper_margin: float
    accuracy_k: float
    passed: bool


def aggregated_oracle_check(
    problem: TrueObjective,
    snapshot: Snapshot,
    probe: Array,
    lipschitz: float,
    delta: float,
    slack: float = 1e-9,
) -> AggregatedOracleCheck:
    """Evaluate the two aggregated oracle inequalities at a consensual probe.

    With ``Delta_i = g_i . (x_i - x_av)``, the aggregated gap at y is
    ``xi = f(y) - (sum_i v_i - sum_i Delta_i) - sum_i g_i . (y - x_av)``;
    it must be nonnegative and at most the quadratic bound above.
    """
    y = np.asarray(probe, dtype=float)
    x = snapshot.x
    m = x.shape[0]
    x_av = x.mean(axis=0)
    x_bar = x - x_av
    deltas = np.einsum("mj,mj->m", snapshot.grads, x_bar)
    xi = (
        float(problem.true_objective(y))
        - (float(np.sum(snapshot.values)) - float(np.sum(deltas)))
        - float(np.sum(snapshot.grads @ (y - x_av)))
    )
    bar_sq = float(np.sum(x_bar * x_bar))
    probe_sq = m * float((y - x_av) @ (y - x_av))
    upper_bound = lipschitz * probe_sq + lipschitz * bar_sq + m * delta
    lower_margin = xi
    upper_margin = upper_bound - xi
    return AggregatedOracleCheck(
        snapshot.k,
        xi,
        lower_margin,
        upper_margin,
        lipschitz * bar_sq + m * delta,
        passed=lower_margin >= -slack and upper_margin >= -slack,
    )


@dataclass(frozen=True)
class Theorem1Report:
    """Trailing-window suboptimality-floor check for constant-accuracy runs."""

    applicable: bool
    passed: bool
    margin: float
    min_trailing: float
    window_start_k: int
    bound: float
    f_star: float
    delta_sum: float
    note: str = ""


def theorem1_window_bound(
    records: Sequence[RunRecord],
    regime: str,
    f_star: float,
    delta_sum: float,
    gap_bound: float = 0.0,
    window_fraction: float = 0.2,
    slack: float = 1e-9,
) -> Theorem1Report:
    """Check ``min f(x_av)`` over the trailing window against f* + delta_sum.

    A finite run cannot evaluate a true liminf; the minimum over the last
    `window_fraction` of recorded rounds stands in for it.  The reference
    solver's own gap bound is added to the tolerance.
    """
    if regime != "theorem1":
        return Theorem1Report(
            False, False, math.nan, math.nan, 0, math.nan, f_star, delta_sum,
            note=f"inapplicable: schedule regime is {regime!r}",
        )
    if not records:
        raise InvalidParameter("no records to check")
    horizon = records[-1].k
    window_start = horizon - int(window_fraction * horizon) + 1
    trailing = [r.f_av_true for r in records if r.k >= window_start]
    if not trailing:
        trailing = [records[-1].f_av_true]
    min_trailing = float(np.min(trailing))
    bound = f_star + delta_sum + gap_bound + slack
    margin = bound - min_trailing
    return Theorem1Report(
        True, margin >= 0.0, margin, min_trailing, window_start, bound, f_star, delta_sum
    )


@dataclass(frozen=True)
class Theorem2Report:
    """Exact-convergence check for summable accumulated inexactness."""

    applicable: bool
    passed: bool
    max_final_distance: float
    tol: float
    final_average_distance: float
    trailing_max_distance: float
    monotone_fraction: float
    note: str = ""


def theorem2_convergence_check(
    final_state,
    recorded_averages: Sequence[Array],
    record_ks: Sequence[int],
    x_star: Array,
    tol: float,
    regime: str,
    trailing_fraction: float = 0.2,
) -> Theorem2Report:
    """Check every agent's final estimate against the unique optimum.

    Passes when ``max_i ||x_i(K) - x*|| <= tol``.  Also reports the trend of
    ``||x_av(k) - x*||`` over recorded rounds: the fraction of non-increasing
    consecutive steps and the maximum over the trailing window, as a
    convergence-of-distances diagnostic.
    """
    if regime != "theorem2":
        return Theorem2Report(
            False, False, math.nan, tol, math.nan, math.nan, math.nan,
            note=f"inapplicable: schedule regime is {regime!r}",
        )
    x = np.asarray(getattr(final_state, "x", final_state), dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    distances = np.linalg.norm(x - x_star, axis=1)
    max_final = float(np.max(distances))
    if len(recorded_averages) == 0:
        raise InvalidParameter("no recorded averages to check")
    av_dist = np.array([np.linalg.norm(av - x_star) for av in recorded_averages])
    horizon = record_ks[-1]
    window_start = horizon - int(trailing_fraction * horizon)
    trailing = av_dist[[i for i, k in enumerate(record_ks) if k >= window_start]]
    scale = max(av_dist.max(), 1.0)
    steps_down = np.diff(av_dist) <= 1e-9 * scale
    monotone_fraction = float(np.mean(steps_down)) if len(av_dist) > 1 else 1.0
    return Theorem2Report(
        True,
        max_final <= tol,
        max_final,
        tol,
        float(av_dist[-1]),
        float(trailing.max()) if trailing.size else float(av_dist[-1]),
        monotone_fraction,
    )
