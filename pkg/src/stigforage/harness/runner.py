"""Run controllers over scenario files and record throughput."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..controllers import make_controller
from ..pheromone import NoiseMode, PheromoneField, PheromoneParams
from ..world import step_world
from .scenarios import ScenarioSpec, load_scenario

log = logging.getLogger(__name__)

ALGORITHM_NAMES = ("checkpoint", "csaf11", "cardinality-mr", "gradient", "random", "planner")


@dataclass
class RunOptions:
    ablate_pheromones: bool = False
    noise_mode: str = NoiseMode.NORMAL.value
    checkpoint: str | None = None


@dataclass
class RunRecord:
    scenario: str
    controller: str
    seed: int
    cell: dict
    cumulative: np.ndarray  # deposits after each step
    step_seconds: np.ndarray = field(repr=False)
    centralized: bool = False

    @property
    def total(self) -> int:
        return int(self.cumulative[-1]) if len(self.cumulative) else 0

    def metrics_csv(self) -> str:
        """Per-step cumulative throughput; no wall-clock columns."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("step", "cumulative_deposited"))
        for t, v in enumerate(self.cumulative):
            writer.writerow((t, int(v)))
        return buf.getvalue()

    def timing_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("step", "seconds"))
        for t, s in enumerate(self.step_seconds):
            writer.writerow((t, f"{s:.9f}"))
        return buf.getvalue()


@dataclass
class TimingRecord:
    steps: int
    seconds_per_step: float
    seconds_per_agent_step: float | None  # only for decentralized controllers


def measure_runtime(record: RunRecord) -> TimingRecord:
    per_step = float(np.mean(record.step_seconds)) if len(record.step_seconds) else 0.0
    per_agent = None if record.centralized else per_step / max(record.cell["team"], 1)
    return TimingRecord(len(record.step_seconds), per_step, per_agent)


def _controller(name, seed, options: RunOptions):
    if name not in ALGORITHM_NAMES:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHM_NAMES)}")
    if name == "checkpoint":
        if options.checkpoint is None:
            raise ValueError("the checkpoint controller needs --checkpoint")
        return make_controller(name, random_state=seed, checkpoint=options.checkpoint,
                               ablate_pheromones=options.ablate_pheromones)
    return make_controller(name, random_state=seed)


def run_scenario(spec: ScenarioSpec, algo: str, seed: int = 0, options: RunOptions | None = None,
                 observer=None) -> RunRecord:
    """Play one scenario to its episode length.

    ``observer(step, world, field, controller)`` is called before each step,
    after any scheduled wipeout has fired.
    """
    options = options or RunOptions()
    world = spec.fresh_world()
    params = PheromoneParams(noise_mode=NoiseMode(options.noise_mode))
    field_ = PheromoneField((world.height, world.width), params, seed=seed)
    ctl = _controller(algo, seed, options).fit(world, field_)
    # Scripted controllers lose the trail entirely under ablation; the
    # learned controller blanks its own channel instead.
    sensed = None if options.ablate_pheromones and algo != "checkpoint" else field_
    starts = {s: d for s, d in spec.wipeouts}
    cumulative = np.zeros(spec.episode_length, dtype=np.int64)
    seconds = np.zeros(spec.episode_length)
    for t in range(spec.episode_length):
        if t in starts:
            field_.trigger_wipeout(starts[t])
            ctl.on_wipeout()
        if observer is not None:
            observer(t, world, field_, ctl)
        t0 = time.perf_counter()
        actions = ctl.predict(world, sensed)
        step_world(world, actions, field_)
        seconds[t] = time.perf_counter() - t0
        cumulative[t] = world.nest.total_deposited
    return RunRecord(spec.name, algo, seed, spec.cell, cumulative, seconds, ctl.centralized)


def run_experiment(scenario_paths, algo: str, out_dir, seed: int = 0, options: RunOptions | None = None,
                   resume: bool = True) -> list:
    """Run every scenario and write results as each run finishes.

    Layout under ``out_dir``: ``metrics/<scenario>__<algo>.csv`` (step,
    cumulative_deposited), ``timing/<scenario>__<algo>.csv`` (step, seconds)
    and ``runs/<scenario>__<algo>.json`` (matrix cell, total, timing
    summary). Runs whose metrics file already exists are skipped when
    ``resume`` is set.
    """
    options = options or RunOptions()
    out = Path(out_dir)
    for sub in ("metrics", "timing", "runs"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    tag = algo + ("-ablated" if options.ablate_pheromones else "")
    if options.noise_mode != NoiseMode.NORMAL.value:
        tag += f"-{options.noise_mode}"
    records = []
    for path in scenario_paths:
        spec = load_scenario(path)
        stem = f"{spec.name}__{tag}"
        metrics_path = out / "metrics" / f"{stem}.csv"
        if resume and metrics_path.exists() and (out / "runs" / f"{stem}.json").exists():
            log.info("skip %s (done)", stem)
            continue
        record = run_scenario(spec, algo, seed, options)
        record.controller = tag
        timing = measure_runtime(record)
        (out / "timing" / f"{stem}.csv").write_text(record.timing_csv())
        (out / "runs" / f"{stem}.json").write_text(
            json.dumps(
                {"scenario": spec.name, "controller": tag, "seed": seed, "cell": record.cell, "total": record.total,
                 "timing": asdict(timing), "options": asdict(options)},
                indent=1,
                sort_keys=True,
            )
        )
        metrics_path.write_text(record.metrics_csv())
        log.info("%s: %d deposits", stem, record.total)
        records.append(record)
    return records


def bench(scenario_paths, algo: str, seed: int = 0, options: RunOptions | None = None) -> list:
    """Timing-only runs; nothing is written."""
    out = []
    for path in scenario_paths:
        record = run_scenario(load_scenario(path), algo, seed, options)
        out.append((record.scenario, record.cell["team"], measure_runtime(record)))
    return out
