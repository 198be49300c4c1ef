"""The synchronous distributed subgradient iteration with inexact oracles.

Each round k every agent queries its own oracle at its current estimate,
mixes estimates with its neighbors through the round's doubly stochastic
weights, and takes a step along its inexact gradient:

    x_i(k+1) = sum_j w_ij(k) x_j(k) - alpha_k g_i(k)

Because the weights are doubly stochastic, the network average obeys the
exact recursion ``x_av(k+1) = x_av(k) - alpha_k * mean_i g_i(k)``; the run
loop verifies this identity every round and records its worst residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import InvalidParameter, RunAborted
from .graphs import MixingSchedule, WeightMatrix
from .metrics import RunRecord, Snapshot
from .oracles import AccuracyBounds, OracleResponse

Array = np.ndarray


class OracleFamily(Protocol):
    """Per-agent oracles evaluated jointly once per round."""

    num_agents: int
    dimension: int

    def evaluate_all(self, x: Array, delta_k: float, k: int) -> tuple[Array, Array]: ...

    def accuracy_bounds(self, delta_k: float) -> AccuracyBounds: ...


@dataclass(frozen=True)
class NetworkState:
    """Stacked agent estimates (row i = agent i) plus the round counter."""

    x: Array
    k: int = 1

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise InvalidParameter(f"state must be an (agents, dimension) matrix, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidParameter("state contains non-finite entries")
        if self.k < 1:
            raise InvalidParameter(f"rounds are indexed from 1, got k={self.k}")
        object.__setattr__(self, "x", x)

    @property
    def num_agents(self) -> int:
        return self.x.shape[0]

    @property
    def dimension(self) -> int:
        return self.x.shape[1]


def average_and_error(state: NetworkState | Array) -> tuple[Array, Array]:
    """Column-wise average and the per-agent deviations from it.

    The deviation rows sum to the zero vector up to rounding.
    """
    x = np.asarray(getattr(state, "x", state), dtype=float)
    x_av = x.mean(axis=0)
    return x_av, x - x_av


def _as_gradient_matrix(responses, num_agents: int, dimension: int) -> Array:
    if isinstance(responses, np.ndarray):
        grads = responses
    else:
        grads = np.vstack([np.asarray(r.gradient, dtype=float) for r in responses])
    if grads.shape != (num_agents, dimension):
        raise InvalidParameter(
            f"gradient block has shape {grads.shape}, expected {(num_agents, dimension)}"
        )
    return grads


def mix_rows(w: Array, x: Array) -> Array:
    """Apply mixing weights with fixed ascending-column accumulation.

    Row i of the result is ``sum_j w_ij x_j`` accumulated left to right, so
    the floating-point outcome does not depend on how the work is scheduled.
    """
    mixed = w[:, 0:1] * x[0]
    for j in range(1, x.shape[0]):
        mixed += w[:, j : j + 1] * x[j]
    return mixed


def step(
    state: NetworkState,
    weights: WeightMatrix,
    alpha_k: float,
    responses: Sequence[OracleResponse] | Array,
) -> NetworkState:
    """One synchronous round: mix with neighbors, descend along oracles."""
    if not alpha_k > 0:
        raise InvalidParameter(f"step size must be > 0, got {alpha_k}")
    grads = _as_gradient_matrix(responses, state.num_agents, state.dimension)
    if not np.all(np.isfinite(grads)):
        raise RunAborted(f"non-finite oracle output at round {state.k}")
    if weights.w.shape[0] != state.num_agents:
        raise InvalidParameter(
            f"weights are {weights.w.shape[0]}x{weights.w.shape[0]} but the network has "
            f"{state.num_agents} agents"
        )
    x_new = mix_rows(weights.w, state.x) - alpha_k * grads
    return NetworkState(x_new, state.k + 1)


def average_update_residual(
    state_k: NetworkState | Array,
    state_k1: NetworkState | Array,
    alpha_k: float,
    responses: Sequence[OracleResponse] | Array,
) -> float:
    """Deviation from the exact average recursion across one round.

    Doubly stochastic mixing preserves the average, so
    ``x_av(k+1) - x_av(k) + alpha_k * mean_i g_i`` vanishes up to rounding.
    """
    x_k = np.asarray(getattr(state_k, "x", state_k), dtype=float)
    x_k1 = np.asarray(getattr(state_k1, "x", state_k1), dtype=float)
    grads = _as_gradient_matrix(responses, x_k.shape[0], x_k.shape[1])
    residual = x_k1.mean(axis=0) - x_k.mean(axis=0) + alpha_k * grads.mean(axis=0)
    return float(np.linalg.norm(residual))


@dataclass(frozen=True)
class StepSchedule:
    """Positive step sizes alpha_k with a declared summability class."""

    kind: str
    a: float = 0.0
    b: float = 0.0
    value: float = 0.0
    table: tuple[float, ...] = ()
    declared_class: str = ""

    _CLASSES = (
        "square-summable-not-summable",
        "summable",
        "non-summable-non-square-summable",
        "constant",
        "unclassifiable",
    )

    def __post_init__(self) -> None:
        if self.kind == "harmonic":
            if not self.a > 0 or self.b < 0:
                raise InvalidParameter("harmonic steps need a > 0 and b >= 0")
            expected = "square-summable-not-summable"
        elif self.kind == "constant":
            if not self.value > 0:
                raise InvalidParameter("constant steps must be > 0")
            expected = "constant"
        elif self.kind == "table":
            if len(self.table) == 0 or not all(v > 0 for v in self.table):
                raise InvalidParameter("step tables must be nonempty and positive")
            expected = self.declared_class or "unclassifiable"
        else:
            raise InvalidParameter(f"unknown step schedule kind {self.kind!r}")
        if self.declared_class and self.declared_class != expected:
            raise InvalidParameter(
                f"declared class {self.declared_class!r} inconsistent with kind {self.kind!r}"
            )
        if expected not in self._CLASSES:
            raise InvalidParameter(f"unknown summability class {expected!r}")
        object.__setattr__(self, "declared_class", expected)

    @classmethod
    def harmonic(cls, a: float, b: float = 0.0) -> "StepSchedule":
        """alpha_k = a / (k + b); square summable, not summable."""
        return cls("harmonic", a=a, b=b)

    @classmethod
    def constant(cls, value: float) -> "StepSchedule":
        return cls("constant", value=value)

    @classmethod
    def from_table(cls, values: Sequence[float], declared_class: str = "") -> "StepSchedule":
        return cls("table", table=tuple(float(v) for v in values), declared_class=declared_class)

    def alpha(self, k: int) -> float:
        if k < 1:
            raise InvalidParameter(f"rounds are indexed from 1, got {k}")
        if self.kind == "harmonic":
            return self.a / (k + self.b)
        if self.kind == "constant":
            return self.value
        return self.table[min(k, len(self.table)) - 1]


@dataclass(frozen=True)
class AccuracySchedule:
    """Nonnegative oracle accuracies delta_k."""

    kind: str
    value: float = 0.0
    scale: float = 0.0
    exponent: float = 1.0
    table: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "constant":
            if self.value < 0:
                raise InvalidParameter("constant accuracy must be >= 0")
        elif self.kind == "power":
            if self.scale < 0 or not self.exponent > 0:
                raise InvalidParameter("power accuracy needs scale >= 0 and exponent > 0")
        elif self.kind == "table":
            if len(self.table) == 0 or any(v < 0 for v in self.table):
                raise InvalidParameter("accuracy tables must be nonempty and nonnegative")
        else:
            raise InvalidParameter(f"unknown accuracy schedule kind {self.kind!r}")

    @classmethod
    def constant(cls, value: float) -> "AccuracySchedule":
        return cls("constant", value=value)

    @classmethod
    def power(cls, scale: float, exponent: float = 1.0) -> "AccuracySchedule":
        """delta_k = scale / k ** exponent."""
        return cls("power", scale=scale, exponent=exponent)

    @classmethod
    def from_table(cls, values: Sequence[float]) -> "AccuracySchedule":
        return cls("table", table=tuple(float(v) for v in values))

    def delta(self, k: int) -> float:
        if k < 1:
            raise InvalidParameter(f"rounds are indexed from 1, got {k}")
        if self.kind == "constant":
            return self.value
        if self.kind == "power":
            return self.scale / float(k) ** self.exponent
        return self.table[min(k, len(self.table)) - 1]


@dataclass(frozen=True)
class ScheduleClassification:
    """Analytic summability facts and the convergence regime they imply.

    Facts are None when the schedule kind admits no analytic answer (tables).
    """

    step_sum_divergent: bool | None
    step_square_summable: bool | None
    weighted_accuracy_summable: bool | None
    regime: str
    notes: tuple[str, ...] = ()


def classify_schedule(steps: StepSchedule, accuracy: AccuracySchedule) -> ScheduleClassification:
    """Decide which convergence guarantee a schedule pair falls under.

    ``theorem1``: steps diverge in sum but are square summable (constant-
    accuracy suboptimality floor applies).  ``theorem2``: additionally the
    weighted accuracy sum ``sum_k alpha_k delta_k`` is finite, giving exact
    convergence.  ``neither``: the step conditions fail.  Tables cannot be
    classified analytically and are reported as such.
    """
    notes: list[str] = []
    if steps.kind == "harmonic":
        divergent, square_summable = True, True
    elif steps.kind == "constant":
        divergent, square_summable = True, False
        notes.append("constant steps are not square summable and do not vanish")
    else:
        divergent = square_summable = None
        notes.append("step table is unclassifiable analytically")

    weighted: bool | None
    if accuracy.kind == "constant":
        if accuracy.value == 0.0:
            weighted = True
        elif divergent is None:
            weighted = None
        else:
            weighted = not divergent
    elif accuracy.kind == "power":
        if accuracy.scale == 0.0:
            weighted = True
        elif steps.kind == "harmonic":
            weighted = accuracy.exponent > 0
        elif steps.kind == "constant":
            weighted = accuracy.exponent > 1
        else:
            weighted = None
    else:
        if all(v == 0 for v in accuracy.table):
            weighted = True
        else:
            weighted = None
            notes.append("accuracy table is unclassifiable analytically")

    if divergent is None or square_summable is None or weighted is None:
        regime = "unclassifiable"
    elif not (divergent and square_summable):
        regime = "neither"
    elif weighted:
        regime = "theorem2"
    else:
        regime = "theorem1"
    return ScheduleClassification(divergent, square_summable, weighted, regime, tuple(notes))


@dataclass
class RunResult:
    """Everything a run emits: records, retained data, and the final state."""

    records: list[RunRecord]
    record_averages: list[Array]
    record_states: list[Array]
    snapshots: list[Snapshot]
    final_state: NetworkState
    gradient_bound: float
    gradient_flagged: bool
    max_average_residual: float

    @property
    def record_ks(self) -> list[int]:
        return [r.k for r in self.records]


def run(
    family: OracleFamily,
    mixing: MixingSchedule,
    steps: StepSchedule,
    accuracy: AccuracySchedule,
    x_init: Array,
    horizon: int,
    *,
    true_objective: Callable[[Array], float] | None = None,
    f_star: float | None = None,
    record_stride: int = 1,
    retention_stride: int = 0,
    gradient_flag_level: float = 1e6,
    sink: Callable[[RunRecord], None] | None = None,
) -> RunResult:
    """Execute `horizon` synchronous rounds from the given initial state.

    Rounds are a synchronization barrier: all oracle queries of round k see
    only round-k state, and the mixing step writes only round-(k+1) state.
    Records are emitted at round 1, every `record_stride`-th round, and the
    final round, in iteration order.  When `retention_stride` is positive,
    full per-agent oracle data is kept at those rounds for aggregated-oracle
    checks.  The run is deterministic given its inputs.
    """
    if horizon < 1:
        raise InvalidParameter(f"horizon must be >= 1, got {horizon}")
    if record_stride < 1:
        raise InvalidParameter(f"record_stride must be >= 1, got {record_stride}")
    x = np.array(x_init, dtype=float)
    if x.shape != (family.num_agents, family.dimension):
        raise InvalidParameter(
            f"x_init has shape {x.shape}, expected {(family.num_agents, family.dimension)}"
        )
    if mixing.num_agents != family.num_agents:
        raise InvalidParameter("mixing schedule and oracle family disagree on agent count")

    state = NetworkState(x, k=1)
    records: list[RunRecord] = []
    record_averages: list[Array] = []
    record_states: list[Array] = []
    snapshots: list[Snapshot] = []
    gradient_bound = 0.0
    max_residual = 0.0

    x_av = state.x.mean(axis=0)
    for k in range(1, horizon + 1):
        alpha_k = steps.alpha(k)
        delta_k = accuracy.delta(k)
        try:
            values, grads = family.evaluate_all(state.x, delta_k, k)
        except InvalidParameter as exc:
            raise RunAborted(f"oracle failure at round {k}: {exc}") from exc
        norms = np.sqrt(np.einsum("mj,mj->m", grads, grads))
        grad_sup = float(np.max(norms))
        gradient_bound = max(gradient_bound, grad_sup)

        if k == 1 or k % record_stride == 0 or k == horizon:
            x_bar = state.x - x_av
            ce = float(np.linalg.norm(x_bar))
            if true_objective is not None:
                f_true = float(true_objective(x_av))
            else:
                f_true = float("nan")
            subopt = f_true - f_star if f_star is not None else float("nan")
            record = RunRecord(
                k, float(alpha_k), float(delta_k), ce, f_true, float(np.sum(values)),
                float(subopt), grad_sup,
            )
            records.append(record)
            record_averages.append(x_av.copy())
            record_states.append(state.x.copy())
            if sink is not None:
                sink(record)
        if retention_stride and (k == 1 or k % retention_stride == 0):
            snapshots.append(
                Snapshot(k, float(alpha_k), float(delta_k), state.x.copy(), values.copy(), grads.copy())
            )

        new_state = step(state, mixing.weight_at(k), alpha_k, grads)
        x_av_next = new_state.x.mean(axis=0)
        residual = x_av_next - x_av + alpha_k * grads.mean(axis=0)
        max_residual = max(max_residual, float(np.linalg.norm(residual)))
        state = new_state
        x_av = x_av_next

    return RunResult(
        records,
        record_averages,
        record_states,
        snapshots,
        state,
        gradient_bound,
        gradient_bound > gradient_flag_level,
        max_residual,
    )
