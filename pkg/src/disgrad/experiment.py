"""Experiment configs, data synthesis, and the end-to-end runner.

Configs are versioned JSON documents (``"schema": 1``) with explicit seeds
for every random choice, so a config determines its outputs byte for byte.
Synthesized datasets are also dumped to disk on request, so downstream
consumers can share fixtures through data files instead of generator state.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import metrics
from .dynamics import (
    AccuracySchedule,
    ScheduleClassification,
    StepSchedule,
    classify_schedule,
    run,
)
from .errors import AssumptionViolation, ConfigError, InvalidParameter
from .graphs import GraphPhase, GraphSchedule, MixingSchedule, build_mixing
from .metrics import (
    AggregatedOracleCheck,
    aggregated_oracle_check,
    theorem1_window_bound,
    theorem2_convergence_check,
    write_records_csv,
    write_trajectory_csv,
)
from .oracles import ExactQuadraticOracles, LassoHuberOracles, NoisyQuadraticOracles
from .reference import ReferenceSolution, solve_lasso_prox, solve_quadratic_sum

Array = np.ndarray

SCHEMA_VERSION = 1

# Derivation indices for --seed-override streams, one per purpose.
_SEED_PURPOSES = {"data": 0, "weights": 1, "init": 2, "noise": 3}


def _require(mapping: dict, key: str, path: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{path}.{key}: missing required field")
    return mapping[key]


def _as_int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _as_float(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    total_rows: int
    agents: int
    block_rows: tuple[int, ...]
    dimension: int
    x0: tuple[float, ...]
    noise_halfwidth: float


@dataclass(frozen=True)
class ProblemConfig:
    kind: str  # exact_quadratic | lasso_huber | noisy_exact
    lambda_total: float = 0.0
    synth: SynthConfig | None = None
    data_file: str | None = None
    centers: tuple[tuple[float, ...], ...] = ()
    curvatures: tuple[float, ...] = ()
    noise_seed: int = 0


@dataclass(frozen=True)
class WeightsConfig:
    kind: str  # metropolis | randomized
    eta_floor: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class PhaseConfig:
    edges: tuple[tuple[int, int], ...]
    dwell: int


@dataclass(frozen=True)
class GraphConfig:
    phases: tuple[PhaseConfig, ...]
    cycling: bool
    weights: WeightsConfig


@dataclass(frozen=True)
class InitConfig:
    kind: str  # zeros | uniform | rows
    low: float = 0.0
    high: float = 0.0
    seed: int = 0
    rows: tuple[tuple[float, ...], ...] = ()


@dataclass(frozen=True)
class RunConfig:
    horizon: int
    x_init: InitConfig
    record_stride: int = 1
    retention_stride: int = 0


@dataclass(frozen=True)
class ChecksConfig:
    theorem1_window: float = 0.2
    theorem2_tol: float = 1e-2
    eq_slack: float = 1e-9


@dataclass(frozen=True)
class OutputConfig:
    csv: str
    reference: bool = True
    trajectory: str | None = None
    data_dump: str | None = None
    figures: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    schema: int
    problem: ProblemConfig
    graph: GraphConfig
    step: StepSchedule
    accuracy: AccuracySchedule
    run: RunConfig
    checks: ChecksConfig
    output: OutputConfig


def _parse_synth(raw: dict, path: str) -> SynthConfig:
    seed = _as_int(_require(raw, "seed", path), f"{path}.seed")
    total = _as_int(_require(raw, "total_rows", path), f"{path}.total_rows")
    agents = _as_int(_require(raw, "agents", path), f"{path}.agents")
    if "block_rows" in raw:
        br = raw["block_rows"]
        if isinstance(br, int):
            blocks = tuple([br] * agents)
        else:
            blocks = tuple(_as_int(v, f"{path}.block_rows[{i}]") for i, v in enumerate(br))
    else:
        raise ConfigError(f"{path}.block_rows: missing required field")
    if len(blocks) != agents:
        raise ConfigError(f"{path}.block_rows: expected {agents} entries, got {len(blocks)}")
    if sum(blocks) != total:
        raise ConfigError(
            f"{path}.block_rows: blocks sum to {sum(blocks)} but total_rows is {total}"
        )
    dim = _as_int(_require(raw, "dimension", path), f"{path}.dimension")
    x0 = tuple(
        _as_float(v, f"{path}.x0[{i}]") for i, v in enumerate(_require(raw, "x0", path))
    )
    if len(x0) != dim:
        raise ConfigError(f"{path}.x0: expected {dim} entries, got {len(x0)}")
    hw = _as_float(raw.get("noise_halfwidth", 0.0), f"{path}.noise_halfwidth")
    if hw < 0:
        raise ConfigError(f"{path}.noise_halfwidth: must be >= 0")
    return SynthConfig(seed, total, agents, blocks, dim, x0, hw)


def _parse_problem(raw: dict, path: str = "problem") -> ProblemConfig:
    kind = _require(raw, "kind", path)
    if kind == "lasso_huber":
        lam = _as_float(_require(raw, "lambda", path), f"{path}.lambda")
        if lam <= 0:
            raise ConfigError(f"{path}.lambda: must be > 0")
        synth = None
        data_file = raw.get("data_file")
        if data_file is None:
            synth = _parse_synth(_require(raw, "synth", path), f"{path}.synth")
        return ProblemConfig(kind, lambda_total=lam, synth=synth, data_file=data_file)
    if kind in ("exact_quadratic", "noisy_exact"):
        centers_raw = _require(raw, "centers", path)
        centers = tuple(
            tuple(_as_float(v, f"{path}.centers[{i}]") for v in (c if isinstance(c, list) else [c]))
            for i, c in enumerate(centers_raw)
        )
        curvatures = tuple(
            _as_float(v, f"{path}.curvatures[{i}]")
            for i, v in enumerate(_require(raw, "curvatures", path))
        )
        if len(centers) != len(curvatures):
            raise ConfigError(f"{path}: centers and curvatures must have equal length")
        noise_seed = _as_int(raw.get("seed", 0), f"{path}.seed") if kind == "noisy_exact" else 0
        return ProblemConfig(kind, centers=centers, curvatures=curvatures, noise_seed=noise_seed)
    raise ConfigError(f"{path}.kind: unknown problem kind {kind!r}")


def _parse_graph(raw: dict, path: str = "graph") -> GraphConfig:
    phases_raw = _require(raw, "phases", path)
    if not phases_raw:
        raise ConfigError(f"{path}.phases: at least one phase is required")
    phases = []
    for i, ph in enumerate(phases_raw):
        edges = tuple(
            (int(e[0]), int(e[1])) for e in _require(ph, "edges", f"{path}.phases[{i}]")
        )
        dwell = _as_int(ph.get("dwell", 1), f"{path}.phases[{i}].dwell")
        phases.append(PhaseConfig(edges, dwell))
    weights_raw = _require(raw, "weights", path)
    kind = _require(weights_raw, "kind", f"{path}.weights")
    if kind not in ("metropolis", "randomized"):
        raise ConfigError(f"{path}.weights.kind: unknown constructor {kind!r}")
    eta_floor = _as_float(weights_raw.get("eta_floor", 0.0), f"{path}.weights.eta_floor")
    seed = _as_int(weights_raw.get("seed", 0), f"{path}.weights.seed")
    if kind == "randomized" and eta_floor <= 0:
        raise ConfigError(f"{path}.weights.eta_floor: randomized weights need eta_floor > 0")
    return GraphConfig(
        tuple(phases), bool(raw.get("cycling", True)), WeightsConfig(kind, eta_floor, seed)
    )


def _parse_step(raw: dict, path: str) -> StepSchedule:
    kind = _require(raw, "kind", path)
    try:
        if kind == "harmonic":
            return StepSchedule.harmonic(
                _as_float(_require(raw, "a", path), f"{path}.a"),
                _as_float(raw.get("b", 0.0), f"{path}.b"),
            )
        if kind == "constant":
            return StepSchedule.constant(_as_float(_require(raw, "value", path), f"{path}.value"))
        if kind == "table":
            return StepSchedule.from_table(_require(raw, "values", path))
    except InvalidParameter as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown step schedule {kind!r}")


def _parse_accuracy(raw: dict, path: str) -> AccuracySchedule:
    kind = _require(raw, "kind", path)
    try:
        if kind == "constant":
            return AccuracySchedule.constant(
                _as_float(_require(raw, "value", path), f"{path}.value")
            )
        if kind == "power":
            return AccuracySchedule.power(
                _as_float(_require(raw, "scale", path), f"{path}.scale"),
                _as_float(raw.get("exponent", 1.0), f"{path}.exponent"),
            )
        if kind == "table":
            return AccuracySchedule.from_table(_require(raw, "values", path))
    except InvalidParameter as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown accuracy schedule {kind!r}")


def _parse_init(raw: dict, path: str) -> InitConfig:
    kind = _require(raw, "kind", path)
    if kind == "zeros":
        return InitConfig("zeros")
    if kind == "uniform":
        return InitConfig(
            "uniform",
            low=_as_float(_require(raw, "low", path), f"{path}.low"),
            high=_as_float(_require(raw, "high", path), f"{path}.high"),
            seed=_as_int(_require(raw, "seed", path), f"{path}.seed"),
        )
    if kind == "rows":
        rows = tuple(
            tuple(_as_float(v, f"{path}.values[{i}]") for v in row)
            for i, row in enumerate(_require(raw, "values", path))
        )
        return InitConfig("rows", rows=rows)
    raise ConfigError(f"{path}.kind: unknown initialization {kind!r}")


def parse_config(raw: dict) -> ExperimentConfig:
    """Parse a config document, reporting the JSON path of any defect."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    schema = _as_int(_require(raw, "schema", "config"), "schema")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"schema: unsupported version {schema} (expected {SCHEMA_VERSION})")
    problem = _parse_problem(_require(raw, "problem", "config"))
    graph = _parse_graph(_require(raw, "graph", "config"))
    schedule_raw = _require(raw, "schedule", "config")
    step = _parse_step(_require(schedule_raw, "step", "schedule"), "schedule.step")
    accuracy = _parse_accuracy(
        _require(schedule_raw, "accuracy", "schedule"), "schedule.accuracy"
    )
    run_raw = _require(raw, "run", "config")
    horizon = _as_int(_require(run_raw, "horizon", "run"), "run.horizon")
    if horizon < 1:
        raise ConfigError("run.horizon: must be >= 1")
    x_init = _parse_init(_require(run_raw, "x_init", "run"), "run.x_init")
    record_stride = _as_int(run_raw.get("record_stride", 1), "run.record_stride")
    retention_stride = _as_int(run_raw.get("retention_stride", 0), "run.retention_stride")
    checks_raw = raw.get("checks", {})
    checks = ChecksConfig(
        theorem1_window=_as_float(checks_raw.get("theorem1_window", 0.2), "checks.theorem1_window"),
        theorem2_tol=_as_float(checks_raw.get("theorem2_tol", 1e-2), "checks.theorem2_tol"),
        eq_slack=_as_float(checks_raw.get("eq_slack", 1e-9), "checks.eq_slack"),
    )
    output_raw = _require(raw, "output", "config")
    output = OutputConfig(
        csv=str(_require(output_raw, "csv", "output")),
        reference=bool(output_raw.get("reference", True)),
        trajectory=output_raw.get("trajectory"),
        data_dump=output_raw.get("data_dump"),
        figures=output_raw.get("figures"),
    )
    return ExperimentConfig(
        schema, problem, graph, step, accuracy,
        RunConfig(horizon, x_init, record_stride, retention_stride), checks, output,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(raw)


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Config back to a plain JSON document; parse(serialize(c)) == c."""
    problem: dict[str, Any] = {"kind": cfg.problem.kind}
    if cfg.problem.kind == "lasso_huber":
        problem["lambda"] = cfg.problem.lambda_total
        if cfg.problem.data_file is not None:
            problem["data_file"] = cfg.problem.data_file
        else:
            s = cfg.problem.synth
            problem["synth"] = {
                "seed": s.seed,
                "total_rows": s.total_rows,
                "agents": s.agents,
                "block_rows": list(s.block_rows),
                "dimension": s.dimension,
                "x0": list(s.x0),
                "noise_halfwidth": s.noise_halfwidth,
            }
    else:
        problem["centers"] = [list(c) for c in cfg.problem.centers]
        problem["curvatures"] = list(cfg.problem.curvatures)
        if cfg.problem.kind == "noisy_exact":
            problem["seed"] = cfg.problem.noise_seed

    step: dict[str, Any] = {"kind": cfg.step.kind}
    if cfg.step.kind == "harmonic":
        step.update(a=cfg.step.a, b=cfg.step.b)
    elif cfg.step.kind == "constant":
        step["value"] = cfg.step.value
    else:
        step["values"] = list(cfg.step.table)
    accuracy: dict[str, Any] = {"kind": cfg.accuracy.kind}
    if cfg.accuracy.kind == "constant":
        accuracy["value"] = cfg.accuracy.value
    elif cfg.accuracy.kind == "power":
        accuracy.update(scale=cfg.accuracy.scale, exponent=cfg.accuracy.exponent)
    else:
        accuracy["values"] = list(cfg.accuracy.table)

    init: dict[str, Any] = {"kind": cfg.run.x_init.kind}
    if cfg.run.x_init.kind == "uniform":
        init.update(low=cfg.run.x_init.low, high=cfg.run.x_init.high, seed=cfg.run.x_init.seed)
    elif cfg.run.x_init.kind == "rows":
        init["values"] = [list(r) for r in cfg.run.x_init.rows]

    doc = {
        "schema": cfg.schema,
        "problem": problem,
        "graph": {
            "phases": [
                {"edges": [list(e) for e in p.edges], "dwell": p.dwell}
                for p in cfg.graph.phases
            ],
            "cycling": cfg.graph.cycling,
            "weights": {
                "kind": cfg.graph.weights.kind,
                "eta_floor": cfg.graph.weights.eta_floor,
                "seed": cfg.graph.weights.seed,
            },
        },
        "schedule": {"step": step, "accuracy": accuracy},
        "run": {
            "horizon": cfg.run.horizon,
            "x_init": init,
            "record_stride": cfg.run.record_stride,
            "retention_stride": cfg.run.retention_stride,
        },
        "checks": {
            "theorem1_window": cfg.checks.theorem1_window,
            "theorem2_tol": cfg.checks.theorem2_tol,
            "eq_slack": cfg.checks.eq_slack,
        },
        "output": {
            "csv": cfg.output.csv,
            "reference": cfg.output.reference,
            "trajectory": cfg.output.trajectory,
            "data_dump": cfg.output.data_dump,
            "figures": cfg.output.figures,
        },
    }
    return doc


def derive_seed(master: int, purpose: str) -> int:
    """Purpose-keyed child seed used by --seed-override."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(_SEED_PURPOSES[purpose],))
    return int(ss.generate_state(1, np.uint64)[0])


def apply_seed_override(cfg: ExperimentConfig, master: int) -> ExperimentConfig:
    """Replace every explicit seed in the config with streams from `master`."""
    problem = cfg.problem
    if problem.synth is not None:
        problem = dataclasses.replace(
            problem, synth=dataclasses.replace(problem.synth, seed=derive_seed(master, "data"))
        )
    if problem.kind == "noisy_exact":
        problem = dataclasses.replace(problem, noise_seed=derive_seed(master, "noise"))
    graph = dataclasses.replace(
        cfg.graph,
        weights=dataclasses.replace(cfg.graph.weights, seed=derive_seed(master, "weights")),
    )
    run_cfg = cfg.run
    if run_cfg.x_init.kind == "uniform":
        run_cfg = dataclasses.replace(
            run_cfg, x_init=dataclasses.replace(run_cfg.x_init, seed=derive_seed(master, "init"))
        )
    return dataclasses.replace(cfg, problem=problem, graph=graph, run=run_cfg)


def synthesize_lasso_data(
    seed: int,
    total_rows: int,
    agents: int,
    block_rows: Sequence[int],
    dimension: int,
    x0: Sequence[float],
    noise_halfwidth: float,
) -> tuple[list[Array], list[Array]]:
    """Seeded lasso data: A entries uniform on [0, 1], y = A x0 + noise.

    The noise is uniform on [-noise_halfwidth, +noise_halfwidth].  Rows are
    split into consecutive per-agent blocks.
    """
    block_rows = [int(b) for b in block_rows]
    if len(block_rows) != agents or sum(block_rows) != total_rows:
        raise InvalidParameter(
            f"block rows {block_rows} do not partition {total_rows} rows over {agents} agents"
        )
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (dimension,):
        raise InvalidParameter(f"x0 has shape {x0.shape}, expected ({dimension},)")
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 1.0, size=(total_rows, dimension))
    noise = rng.uniform(-noise_halfwidth, noise_halfwidth, size=total_rows)
    y = a @ x0 + noise
    a_blocks, y_blocks = [], []
    start = 0
    for rows in block_rows:
        a_blocks.append(a[start : start + rows].copy())
        y_blocks.append(y[start : start + rows].copy())
        start += rows
    return a_blocks, y_blocks


def dump_lasso_data(a_blocks: Sequence[Array], y_blocks: Sequence[Array], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {f"a_{i}": a for i, a in enumerate(a_blocks)}
    payload.update({f"y_{i}": y for i, y in enumerate(y_blocks)})
    payload["num_agents"] = np.array(len(a_blocks))
    np.savez(path, **payload)
    return path


def load_lasso_data(path: str | Path) -> tuple[list[Array], list[Array]]:
    with np.load(Path(path)) as data:
        m = int(data["num_agents"])
        a_blocks = [data[f"a_{i}"] for i in range(m)]
        y_blocks = [data[f"y_{i}"] for i in range(m)]
    return a_blocks, y_blocks


@dataclass
class AssembledExperiment:
    """Everything built from a config, ready to run."""

    config: ExperimentConfig
    family: Any
    mixing: MixingSchedule
    x_init: Array
    classification: ScheduleClassification
    data_dump_path: Path | None = None

    @property
    def num_agents(self) -> int:
        return self.family.num_agents


def _build_family(cfg: ExperimentConfig) -> tuple[Any, Path | None]:
    problem = cfg.problem
    if problem.kind == "lasso_huber":
        if problem.data_file is not None:
            a_blocks, y_blocks = load_lasso_data(problem.data_file)
        else:
            s = problem.synth
            a_blocks, y_blocks = synthesize_lasso_data(
                s.seed, s.total_rows, s.agents, s.block_rows, s.dimension, s.x0,
                s.noise_halfwidth,
            )
        dump_path = None
        if cfg.output.data_dump and problem.data_file is None:
            dump_path = dump_lasso_data(a_blocks, y_blocks, cfg.output.data_dump)
        family = LassoHuberOracles(list(zip(a_blocks, y_blocks)), problem.lambda_total)
        return family, dump_path
    centers = np.array([list(c) for c in problem.centers])
    curvatures = np.array(problem.curvatures)
    if problem.kind == "exact_quadratic":
        return ExactQuadraticOracles(centers, curvatures), None
    return NoisyQuadraticOracles(centers, curvatures, problem.noise_seed), None


def _build_x_init(cfg: InitConfig, m: int, n: int) -> Array:
    if cfg.kind == "zeros":
        return np.zeros((m, n))
    if cfg.kind == "uniform":
        rng = np.random.default_rng(cfg.seed)
        return rng.uniform(cfg.low, cfg.high, size=(m, n))
    rows = np.array([list(r) for r in cfg.rows], dtype=float)
    if rows.shape != (m, n):
        raise ConfigError(f"run.x_init.values: shape {rows.shape} does not match ({m}, {n})")
    return rows


def assemble(cfg: ExperimentConfig) -> AssembledExperiment:
    """Build oracles, mixing matrices, and the initial state from a config."""
    family, dump_path = _build_family(cfg)
    schedule = GraphSchedule(
        family.num_agents,
        tuple(GraphPhase(p.edges, p.dwell) for p in cfg.graph.phases),
        cfg.graph.cycling,
    )
    weights = cfg.graph.weights
    mixing = build_mixing(
        schedule, weights.kind,
        eta_floor=weights.eta_floor or None,
        seed=weights.seed,
    )
    x_init = _build_x_init(cfg.run.x_init, family.num_agents, family.dimension)
    classification = classify_schedule(cfg.step, cfg.accuracy)
    return AssembledExperiment(cfg, family, mixing, x_init, classification, dump_path)


def solve_reference(cfg: ExperimentConfig, family) -> ReferenceSolution:
    """Ground truth from an independent centralized solver."""
    if cfg.problem.kind == "lasso_huber":
        a, y = family.stacked_data()
        return solve_lasso_prox(a, y, cfg.problem.lambda_total, tol=1e-10)
    return solve_quadratic_sum(family.centers, family.curvatures)


@dataclass(frozen=True)
class ValidationEntry:
    level: str  # "error" | "warning" | "ok"
    check: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    entries: tuple[ValidationEntry, ...]

    @property
    def errors(self) -> tuple[ValidationEntry, ...]:
        return tuple(e for e in self.entries if e.level == "error")

    @property
    def passed(self) -> bool:
        return not self.errors


def validate_config(cfg: ExperimentConfig) -> ValidationReport:
    """Structural and cross-module checks; reads nothing but the config.

    Dry run: builds everything in memory (including weight matrices, which
    re-validates connectivity and the eta feasibility bound) without touching
    the filesystem, then reports per-check outcomes.
    """
    entries: list[ValidationEntry] = []
    try:
        assemble(dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, data_dump=None)))
        entries.append(ValidationEntry("ok", "assembly", "problem, graph, and weights build cleanly"))
    except AssumptionViolation as exc:
        entries.append(ValidationEntry("error", "assumption", str(exc)))
    except (ConfigError, InvalidParameter) as exc:
        entries.append(ValidationEntry("error", "structure", str(exc)))
    except OSError as exc:
        entries.append(ValidationEntry("error", "data", f"referenced data file unavailable: {exc}"))

    classification = classify_schedule(cfg.step, cfg.accuracy)
    if classification.regime == "neither":
        entries.append(
            ValidationEntry(
                "warning", "schedule",
                "regime: neither (step conditions fail; no convergence guarantee applies)",
            )
        )
    elif classification.regime == "unclassifiable":
        entries.append(
            ValidationEntry("warning", "schedule", "schedule tables cannot be classified analytically")
        )
    else:
        entries.append(ValidationEntry("ok", "schedule", f"regime: {classification.regime}"))

    if cfg.problem.kind == "lasso_huber" and cfg.accuracy.kind == "constant" and cfg.accuracy.value == 0:
        entries.append(
            ValidationEntry(
                "warning", "oracle",
                "constant accuracy 0 with the smoothed-l1 oracle degenerates the smoothing width",
            )
        )
    return ValidationReport(tuple(entries))


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    summary: dict
    exit_code: int
    csv_path: Path | None
    trajectory_path: Path | None
    figure_paths: list[Path]
    result: Any
    reference: ReferenceSolution | None


def _check_summary(report) -> dict:
    """Dataclass check report to a JSON-safe dict."""
    out = {}
    for f in dataclasses.fields(report):
        v = getattr(report, f.name)
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        out[f.name] = v
    return out


def run_experiment(
    config: ExperimentConfig | str | Path,
    *,
    csv_override: str | None = None,
    horizon_override: int | None = None,
    seed_override: int | None = None,
    figures_override: str | None = None,
) -> ExperimentOutcome:
    """Reference solve (if toggled), distributed run, CSVs, checks, figures.

    The exit code is 0 when every applicable check passed, 1 when one failed.
    """
    cfg = load_config(config) if not isinstance(config, ExperimentConfig) else config
    if seed_override is not None:
        cfg = apply_seed_override(cfg, seed_override)
    if horizon_override is not None:
        cfg = dataclasses.replace(
            cfg, run=dataclasses.replace(cfg.run, horizon=horizon_override)
        )
    if csv_override is not None:
        cfg = dataclasses.replace(
            cfg, output=dataclasses.replace(cfg.output, csv=csv_override)
        )
    if figures_override is not None:
        cfg = dataclasses.replace(
            cfg, output=dataclasses.replace(cfg.output, figures=figures_override)
        )

    assembled = assemble(cfg)
    family = assembled.family
    reference = solve_reference(cfg, family) if cfg.output.reference else None
    f_star = reference.f_star if reference is not None else None

    result = run(
        family,
        assembled.mixing,
        cfg.step,
        cfg.accuracy,
        assembled.x_init,
        cfg.run.horizon,
        true_objective=family.true_objective,
        f_star=f_star,
        record_stride=cfg.run.record_stride,
        retention_stride=cfg.run.retention_stride,
    )

    csv_path = Path(cfg.output.csv)
    write_records_csv(result.records, csv_path)
    trajectory_path = Path(
        cfg.output.trajectory
        if cfg.output.trajectory
        else csv_path.with_name(csv_path.stem + "_trajectory.csv")
    )
    write_trajectory_csv(result.record_ks, result.record_states, trajectory_path)

    regime = assembled.classification.regime
    checks: dict[str, Any] = {}
    failed_checks: list[str] = []

    average_identity_ok = result.max_average_residual <= 1e-10
    checks["average_identity"] = {
        "max_residual": result.max_average_residual,
        "passed": average_identity_ok,
    }
    if not average_identity_ok:
        failed_checks.append("average_identity")

    if reference is not None:
        delta_sum = family.accuracy_bounds(cfg.accuracy.delta(1)).delta_sum
        t1 = theorem1_window_bound(
            result.records, regime, reference.f_star, delta_sum,
            gap_bound=reference.gap_bound, window_fraction=cfg.checks.theorem1_window,
        )
        checks["theorem1"] = _check_summary(t1)
        if t1.applicable and not t1.passed:
            failed_checks.append("theorem1")
        t2 = theorem2_convergence_check(
            result.final_state, result.record_averages, result.record_ks,
            reference.x_star, cfg.checks.theorem2_tol, regime,
        )
        checks["theorem2"] = _check_summary(t2)
        if t2.applicable and not t2.passed:
            failed_checks.append("theorem2")

        if result.snapshots:
            eq_checks: list[AggregatedOracleCheck] = []
            for snap in result.snapshots:
                bounds = family.accuracy_bounds(snap.delta_k)
                eq_checks.append(
                    aggregated_oracle_check(
                        family, snap, reference.x_star,
                        bounds.lipschitz_max, bounds.delta_max, slack=cfg.checks.eq_slack,
                    )
                )
            eq_ok = all(c.passed for c in eq_checks)
            checks["aggregated_oracle"] = {
                "rounds_checked": len(eq_checks),
                "min_lower_margin": min(c.xi_lower_margin for c in eq_checks),
                "min_upper_margin": min(c.xi_upper_margin for c in eq_checks),
                "passed": eq_ok,
            }
            if not eq_ok:
                failed_checks.append("aggregated_oracle")

    figure_paths: list[Path] = []
    if cfg.output.figures:
        from .plots import render_run_figures

        figure_paths = render_run_figures(
            csv_path,
            trajectory_path,
            cfg.output.figures,
            f_star=f_star,
            x_star=None if reference is None else reference.x_star,
        )

    first = result.records[0]
    final_state_consensus = metrics.consensus_error(result.final_state)
    summary = {
        "regime": regime,
        "classification": _check_summary(assembled.classification),
        "horizon": cfg.run.horizon,
        "initial_consensus_error": first.consensus_error,
        "final_consensus_error": final_state_consensus,
        "final_recorded_consensus_error": result.records[-1].consensus_error,
        "final_subopt": result.records[-1].subopt,
        "final_f_av_true": result.records[-1].f_av_true,
        "gradient_bound": result.gradient_bound,
        "gradient_flagged": result.gradient_flagged,
        "max_average_residual": result.max_average_residual,
        "checks": checks,
        "failed_checks": failed_checks,
        "outputs": {
            "csv": str(csv_path),
            "trajectory": str(trajectory_path),
            "data_dump": str(assembled.data_dump_path) if assembled.data_dump_path else None,
            "figures": [str(p) for p in figure_paths],
        },
    }
    if reference is not None:
        summary["reference"] = {
            "x_star": [float(v) for v in reference.x_star],
            "f_star": reference.f_star,
            "gap_bound": reference.gap_bound,
            "iterations_used": reference.iterations_used,
        }

    def _jsonify(obj):
        if isinstance(obj, dict):
            return {key: _jsonify(val) for key, val in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [_jsonify(v) for v in obj]
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, float) and math.isnan(obj):
            return None
        return obj

    summary = _jsonify(summary)
    exit_code = 1 if failed_checks else 0
    return ExperimentOutcome(
        cfg, summary, exit_code, csv_path, trajectory_path, figure_paths, result, reference
    )
