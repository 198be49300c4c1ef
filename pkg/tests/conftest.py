from __future__ import annotations

import dataclasses
from pathlib import Path

import pytest

from disgrad.experiment import ExperimentConfig, load_config, run_experiment

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def redirect_outputs(cfg: ExperimentConfig, out_dir: Path, dump: bool = False) -> ExperimentConfig:
    """Point every output path of a config into a scratch directory."""
    output = dataclasses.replace(
        cfg.output,
        csv=str(out_dir / "metrics.csv"),
        trajectory=str(out_dir / "trajectory.csv"),
        data_dump=str(out_dir / "data.npz") if dump else None,
        figures=None,
    )
    return dataclasses.replace(cfg, output=output)


def run_shipped(name: str, out_dir: Path, **overrides):
    cfg = redirect_outputs(load_config(CONFIG_DIR / name), out_dir)
    if overrides:
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, **overrides))
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def out_root(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("runs")


@pytest.fixture(scope="session")
def fig3_outcome(out_root):
    return run_shipped("paper_fig3.json", out_root / "fig3")


@pytest.fixture(scope="session")
def fig3_outcome_repeat(out_root):
    return run_shipped("paper_fig3.json", out_root / "fig3_repeat")


@pytest.fixture(scope="session")
def fig4_outcome(out_root):
    return run_shipped("paper_fig4.json", out_root / "fig4")


@pytest.fixture(scope="session")
def toy_outcome(out_root):
    return run_shipped("quadratic_toy.json", out_root / "toy")


@pytest.fixture(scope="session")
def negative_outcome(out_root):
    return run_shipped("constant_step.json", out_root / "negative")
