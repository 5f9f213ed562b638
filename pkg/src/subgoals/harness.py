"""Experiment runner: seeded multi-run batches, metrics CSV and exports.

A bundle for one condition contains trials.csv, per-run goal graphs
(json + dot), region snapshots, optional iteration traces and summary.json.
Identical config and seed give a byte-identical bundle.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

from .loop import CONDITIONS, CognitiveRun, RunParams
from .ltm import dump_graph_json

CSV_HEADER = ("run", "trial", "phase", "iterations", "achieved_final",
              "goals_total", "links_topdown", "links_bottomup", "pnodes_learned")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    condition: str = "twopronged"
    runs: int = 10
    trials: int = 750
    max_iterations: int = 20
    seed: int = 1
    confidence_window: int = 20
    theta_contain: float = 0.95
    attenuation: float = 0.8
    epsilon_explore: float = 0.05
    mlp_hidden: tuple[int, ...] = (128, 64, 32)
    out_dir: str = "out"
    trace: bool = False
    jobs: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.condition not in CONDITIONS:
            raise ConfigError(f"unknown condition {self.condition!r}")
        if self.runs < 1 or self.trials < 1:
            raise ConfigError("runs and trials must be >= 1")
        for name in ("theta_contain", "attenuation", "epsilon_explore"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must be in (0,1), got {v}")
        if self.confidence_window < 1:
            raise ConfigError("confidence_window must be >= 1")
        return self


@dataclass
class TrialRecord:
    run: int
    trial: int
    phase: int
    iterations: int
    achieved_final: int
    goals_total: int
    links_topdown: int
    links_bottomup: int
    pnodes_learned: int


def parse_config_file(path: str) -> dict:
    """Flat key=value configuration lines; '#' starts a comment."""
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            overrides[key] = value
    return overrides


def coerce_config(base: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    valid = {f.name: f.type for f in fields(ExperimentConfig)}
    for key, raw in overrides.items():
        if key not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(base, key)
        if key == "mlp_hidden":
            try:
                value = tuple(int(x) for x in str(raw).replace(" ", "").split(",") if x)
            except ValueError:
                raise ConfigError(f"mlp_hidden must be comma-separated ints, got {raw!r}")
        elif isinstance(current, bool):
            value = str(raw).lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            try:
                value = int(raw)
            except ValueError:
                raise ConfigError(f"{key} must be an integer, got {raw!r}")
        elif isinstance(current, float):
            try:
                value = float(raw)
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {raw!r}")
        else:
            value = str(raw)
        setattr(base, key, value)
    return base


def _run_params(config: ExperimentConfig, run_index: int) -> RunParams:
    # Per-run seed: base seed plus run index, one counter-based stream each.
    return RunParams(
        condition=config.condition,
        seed=config.seed + run_index,
        trials=config.trials,
        max_iterations=config.max_iterations,
        confidence_window=config.confidence_window,
        theta_contain=config.theta_contain,
        attenuation=config.attenuation,
        epsilon_explore=config.epsilon_explore,
        mlp_hidden=config.mlp_hidden,
    )


def execute_run(config: ExperimentConfig, run_index: int) -> dict:
    """One full lifetime; returns records plus export documents."""
    run = CognitiveRun(_run_params(config, run_index))
    run.keep_traces = config.trace
    records = []
    for trial in range(1, config.trials + 1):
        outcome = run.run_trial(trial)
        links_td = sum(1 for l in run.ltm.links if l.origin == "topdown")
        links_bu = sum(1 for l in run.ltm.links if l.origin == "bottomup")
        learned = sum(1 for p in run.ltm.pnodes.values() if p.region.is_learned())
        records.append(TrialRecord(
            run=run_index, trial=trial, phase=outcome.phase,
            iterations=outcome.iterations,
            achieved_final=int(outcome.achieved_final),
            goals_total=len(run.ltm.goals),
            links_topdown=links_td, links_bottomup=links_bu,
            pnodes_learned=learned,
        ))
    return {
        "records": records,
        "graph_json": run.ltm.export_graph("json"),
        "graph_dot": run.ltm.export_graph("dot"),
        "snapshots": json.dumps(run.region_snapshots(), sort_keys=True, indent=1) + "\n",
        "traces": [t.to_json() for t in run.traces] if config.trace else [],
    }


def run_experiment(config: ExperimentConfig) -> Path:
    """Execute runs x trials and write the artifact bundle; returns out dir."""
    config.validate()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(execute_run, [config] * config.runs, range(config.runs)))
    else:
        results = [execute_run(config, i) for i in range(config.runs)]

    with open(out / "trials.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for result in results:
            for rec in result["records"]:
                writer.writerow([getattr(rec, name) for name in CSV_HEADER])

    for i, result in enumerate(results):
        run_dir = out / f"run_{i}"
        run_dir.mkdir(exist_ok=True)
        (run_dir / "goal_graph.json").write_text(result["graph_json"], encoding="utf-8")
        (run_dir / "goal_graph.dot").write_text(result["graph_dot"], encoding="utf-8")
        (run_dir / "region_snapshots.json").write_text(result["snapshots"], encoding="utf-8")
        if config.trace:
            with open(run_dir / "trace.ndjson", "w", encoding="utf-8") as fh:
                for line in result["traces"]:
                    fh.write(line + "\n")

    last100 = []
    for i, result in enumerate(results):
        tail = [r.iterations for r in result["records"]][-100:]
        last100.append(sum(tail) / len(tail))
    summary = {
        "condition": config.condition,
        "runs": config.runs,
        "trials": config.trials,
        "seed": config.seed,
        "last100_mean_per_run": last100,
        "last100_mean": sum(last100) / len(last100),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return out


# -- summarize -----------------------------------------------------------------

def moving_average(values: list[float], window: int) -> list[float]:
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def summarize(csv_path: str, window: int = 25) -> dict:
    """Per-run smoothed iteration curves plus cross-run mean/sd and the
    last-100-trials mean."""
    per_run: dict[int, list[int]] = {}
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_HEADER:
            raise ConfigError(f"{csv_path}: unexpected header {reader.fieldnames}")
        for lineno, row in enumerate(reader, 2):
            try:
                run = int(row["run"])
                trial = int(row["trial"])
                iterations = int(row["iterations"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{csv_path}:{lineno}: malformed row ({exc})")
            per_run.setdefault(run, []).append(iterations)
            if trial != len(per_run[run]):
                raise ConfigError(f"{csv_path}:{lineno}: trial index out of order")
    if not per_run:
        raise ConfigError(f"{csv_path}: no data rows")
    runs = sorted(per_run)
    n_trials = len(per_run[runs[0]])
    for r in runs:
        if len(per_run[r]) != n_trials:
            raise ConfigError(f"{csv_path}: run {r} has a different trial count")
    smoothed = {r: moving_average([float(v) for v in per_run[r]], window) for r in runs}
    mean_curve = []
    sd_curve = []
    for t in range(n_trials):
        vals = [smoothed[r][t] for r in runs]
        mu = sum(vals) / len(vals)
        mean_curve.append(mu)
        if len(vals) > 1:
            sd_curve.append(math.sqrt(sum((v - mu) ** 2 for v in vals) / (len(vals) - 1)))
        else:
            sd_curve.append(0.0)
    tail = [v for r in runs for v in per_run[r][-min(100, n_trials):]]
    return {
        "runs": runs,
        "trials": n_trials,
        "window": window,
        "smoothed": smoothed,
        "mean": mean_curve,
        "sd": sd_curve,
        "last100_mean": sum(tail) / len(tail),
    }
