"""Time-varying communication graphs and doubly stochastic mixing weights.

Agents exchange estimates along an undirected graph that may change over
rounds.  Every round's graph must be connected, and its weight matrix must be
doubly stochastic with diagonal and edge entries bounded below by a uniform
eta > 0.  Under those two assumptions the ordered product of weight matrices
converges entrywise to 1/m at the geometric rate ``q = 1 - eta / (4 m^2)``,
which is what drives consensus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import AssumptionViolation, InvalidParameter

Array = np.ndarray

Edge = tuple[int, int]


def normalize_edges(edges: Iterable[Sequence[int]], num_agents: int) -> tuple[Edge, ...]:
    """Canonical sorted (i, j) edge tuples over agents 1..m, no self loops."""
    seen: set[Edge] = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise InvalidParameter(f"self loop ({i}, {j}) is not a valid edge")
        if not (1 <= i <= num_agents and 1 <= j <= num_agents):
            raise InvalidParameter(f"edge ({i}, {j}) references agents outside 1..{num_agents}")
        seen.add((min(i, j), max(i, j)))
    return tuple(sorted(seen))


def is_connected(edges: Sequence[Edge], num_agents: int) -> bool:
    """Breadth-first connectivity over agents 1..m."""
    if num_agents <= 1:
        return True
    adjacency: dict[int, list[int]] = {i: [] for i in range(1, num_agents + 1)}
    for i, j in edges:
        adjacency[i].append(j)
        adjacency[j].append(i)
    frontier = [1]
    visited = {1}
    while frontier:
        node = frontier.pop()
        for other in adjacency[node]:
            if other not in visited:
                visited.add(other)
                frontier.append(other)
    return len(visited) == num_agents


def degrees(edges: Sequence[Edge], num_agents: int) -> Array:
    out = np.zeros(num_agents, dtype=int)
    for i, j in edges:
        out[i - 1] += 1
        out[j - 1] += 1
    return out


@dataclass(frozen=True)
class GraphPhase:
    """One topology held fixed for `dwell` consecutive rounds."""

    edges: tuple[Edge, ...]
    dwell: int

    def __post_init__(self) -> None:
        if self.dwell < 1:
            raise InvalidParameter(f"phase dwell must be >= 1, got {self.dwell}")


@dataclass(frozen=True)
class GraphSchedule:
    """Ordered phases of connected undirected graphs, optionally cycling.

    Rounds are indexed from k = 1.  When `cycling` is set the phase list
    repeats forever; otherwise the final phase persists.
    """

    num_agents: int
    phases: tuple[GraphPhase, ...]
    cycling: bool = True

    def __post_init__(self) -> None:
        if self.num_agents < 2:
            raise InvalidParameter(f"a network needs at least 2 agents, got {self.num_agents}")
        if len(self.phases) == 0:
            raise InvalidParameter("a graph schedule needs at least one phase")
        normalized = []
        for idx, phase in enumerate(self.phases):
            edges = normalize_edges(phase.edges, self.num_agents)
            if not is_connected(edges, self.num_agents):
                raise AssumptionViolation(
                    f"connectivity: graph of phase {idx} is not connected"
                )
            normalized.append(GraphPhase(edges, phase.dwell))
        object.__setattr__(self, "phases", tuple(normalized))

    @property
    def total_dwell(self) -> int:
        return sum(p.dwell for p in self.phases)

    def phase_index(self, k: int) -> int:
        """Phase active at round k (1-based)."""
        if k < 1:
            raise InvalidParameter(f"rounds are indexed from 1, got {k}")
        offset = (k - 1) % self.total_dwell if self.cycling else min(k - 1, self.total_dwell - 1)
        for idx, phase in enumerate(self.phases):
            if offset < phase.dwell:
                return idx
            offset -= phase.dwell
        return len(self.phases) - 1

    def edges_at(self, k: int) -> tuple[Edge, ...]:
        return self.phases[self.phase_index(k)].edges


@dataclass(frozen=True)
class WeightMatrix:
    """Doubly stochastic mixing weights with uniform positivity bound eta."""

    w: Array
    eta: float

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidParameter(f"weight matrix must be square, got shape {w.shape}")
        object.__setattr__(self, "w", w)

    @property
    def num_agents(self) -> int:
        return self.w.shape[0]


def _pattern_entries(w: Array, edges: Sequence[Edge]) -> Array:
    """Entries required to be >= eta: the diagonal plus both edge directions."""
    values = [w[i, i] for i in range(w.shape[0])]
    for i, j in edges:
        values.append(w[i - 1, j - 1])
        values.append(w[j - 1, i - 1])
    return np.array(values)


def metropolis_weights(edges: Iterable[Sequence[int]], num_agents: int) -> WeightMatrix:
    """Metropolis weights: ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on edges.

    Diagonal entries absorb the remainder so rows and columns sum to one; the
    result is symmetric, doubly stochastic, and has every diagonal and edge
    entry at least ``1 / (1 + max degree)``.
    """
    if num_agents < 2:
        raise InvalidParameter(f"a network needs at least 2 agents, got {num_agents}")
    edges = normalize_edges(edges, num_agents)
    if not is_connected(edges, num_agents):
        raise AssumptionViolation("connectivity: weight construction requires a connected graph")
    deg = degrees(edges, num_agents)
    w = np.zeros((num_agents, num_agents))
    for i, j in edges:
        value = 1.0 / (1.0 + max(deg[i - 1], deg[j - 1]))
        w[i - 1, j - 1] = value
        w[j - 1, i - 1] = value
    for i in range(num_agents):
        w[i, i] = 1.0 - np.sum(w[i]) + w[i, i]
    eta = float(np.min(_pattern_entries(w, edges)))
    return WeightMatrix(w, eta)


def randomized_weights(
    edges: Iterable[Sequence[int]],
    num_agents: int,
    eta_floor: float,
    seed: int,
) -> WeightMatrix:
    """Seeded doubly stochastic weights with all pattern entries >= eta_floor.

    Starts from the Metropolis matrix and applies, edge by edge in sorted
    order, a symmetric transfer ``(w_ij, w_ji) += t`` and ``(w_ii, w_jj) -= t``
    with t drawn uniformly from the interval that keeps every touched entry at
    or above eta_floor.  Each transfer preserves row and column sums exactly,
    so the result stays doubly stochastic with the sparsity pattern of the
    graph plus the diagonal.
    """
    edges = normalize_edges(edges, num_agents)
    deg = degrees(edges, num_agents)
    max_degree = int(np.max(deg)) if len(edges) else 0
    if not 0 < eta_floor <= 1.0 / (max_degree + 1):
        raise InvalidParameter(
            f"eta_floor must lie in (0, {1.0 / (max_degree + 1):.6g}] for this graph, got {eta_floor}"
        )
    base = metropolis_weights(edges, num_agents)
    w = base.w.copy()
    rng = np.random.default_rng(seed)
    for i, j in edges:
        a, b = i - 1, j - 1
        t_low = eta_floor - min(w[a, b], w[b, a])
        t_high = min(w[a, a], w[b, b]) - eta_floor
        if t_high <= t_low:
            continue
        t = rng.uniform(t_low, t_high)
        w[a, b] += t
        w[b, a] += t
        w[a, a] -= t
        w[b, b] -= t
    eta = float(np.min(_pattern_entries(w, edges)))
    return WeightMatrix(w, eta)


@dataclass(frozen=True)
class WeightValidation:
    """Residuals and flags from checking the mixing-weight invariants."""

    row_residual: float
    col_residual: float
    min_entry: float
    min_pattern_entry: float
    max_off_pattern: float
    eta: float
    passed: bool
    messages: tuple[str, ...] = field(default_factory=tuple)


def validate_weights(
    weights: WeightMatrix, edges: Iterable[Sequence[int]], tol: float = 1e-12
) -> WeightValidation:
    """Check double stochasticity, nonnegativity, pattern, and the eta bound."""
    w = weights.w
    m = w.shape[0]
    edges = normalize_edges(edges, m)
    row_residual = float(np.max(np.abs(w.sum(axis=1) - 1.0)))
    col_residual = float(np.max(np.abs(w.sum(axis=0) - 1.0)))
    min_entry = float(np.min(w))
    pattern = _pattern_entries(w, edges)
    min_pattern = float(np.min(pattern))
    allowed = np.zeros((m, m), dtype=bool)
    np.fill_diagonal(allowed, True)
    for i, j in edges:
        allowed[i - 1, j - 1] = True
        allowed[j - 1, i - 1] = True
    off = np.abs(np.where(allowed, 0.0, w))
    max_off_pattern = float(np.max(off)) if off.size else 0.0

    messages = []
    if row_residual > tol or col_residual > tol:
        messages.append("double stochasticity: row or column sums deviate from 1")
    if min_entry < -tol:
        messages.append("nonnegativity: a weight entry is negative")
    if max_off_pattern > tol:
        messages.append("sparsity: nonzero weight outside the graph pattern")
    if min_pattern < weights.eta - tol:
        messages.append("uniform positivity: a pattern entry falls below eta")
    return WeightValidation(
        row_residual,
        col_residual,
        min_entry,
        min_pattern,
        max_off_pattern,
        weights.eta,
        passed=not messages,
        messages=tuple(messages),
    )


@dataclass(frozen=True)
class MixingSchedule:
    """A graph schedule with one validated weight matrix per phase."""

    schedule: GraphSchedule
    matrices: tuple[WeightMatrix, ...]

    def __post_init__(self) -> None:
        if len(self.matrices) != len(self.schedule.phases):
            raise InvalidParameter("one weight matrix per phase is required")
        for phase, weights in zip(self.schedule.phases, self.matrices):
            report = validate_weights(weights, phase.edges)
            if not report.passed:
                raise AssumptionViolation(
                    "doubly stochastic weights: " + "; ".join(report.messages)
                )

    @property
    def num_agents(self) -> int:
        return self.schedule.num_agents

    @property
    def eta(self) -> float:
        return min(wm.eta for wm in self.matrices)

    @property
    def contraction_base(self) -> float:
        """Geometric mixing rate ``q = 1 - eta / (4 m^2)``."""
        m = self.num_agents
        return 1.0 - self.eta / (4.0 * m * m)

    def weight_at(self, k: int) -> WeightMatrix:
        return self.matrices[self.schedule.phase_index(k)]

    def matrix_at(self, k: int) -> Array:
        return self.weight_at(k).w


def build_mixing(
    schedule: GraphSchedule,
    kind: str = "metropolis",
    eta_floor: float | None = None,
    seed: int | None = None,
) -> MixingSchedule:
    """Construct per-phase weight matrices for a graph schedule."""
    matrices = []
    for idx, phase in enumerate(schedule.phases):
        if kind == "metropolis":
            matrices.append(metropolis_weights(phase.edges, schedule.num_agents))
        elif kind == "randomized":
            if eta_floor is None or seed is None:
                raise InvalidParameter("randomized weights need eta_floor and seed")
            phase_seed = np.random.SeedSequence(entropy=seed, spawn_key=(idx,))
            phase_seed_int = int(phase_seed.generate_state(1, np.uint64)[0])
            matrices.append(
                randomized_weights(phase.edges, schedule.num_agents, eta_floor, phase_seed_int)
            )
        else:
            raise InvalidParameter(f"unknown weight constructor {kind!r}")
    return MixingSchedule(schedule, tuple(matrices))


def phi_product(mixing: MixingSchedule, s: int, k: int) -> Array:
    """Ordered mixing product ``W(k) W(k-1) ... W(s)``.

    Doubly stochastic by construction; its entries approach 1/m at rate
    ``contraction_base ** (k - s)``.
    """
    if s > k:
        raise InvalidParameter(f"invalid range: s={s} must not exceed k={k}")
    if s < 1:
        raise InvalidParameter(f"rounds are indexed from 1, got s={s}")
    product = mixing.matrix_at(s).copy()
    for step in range(s + 1, k + 1):
        product = mixing.matrix_at(step) @ product
    return product
