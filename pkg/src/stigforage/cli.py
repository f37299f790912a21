"""Command line entry point: gen, run, train, bench, plot."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness.config import MatrixConfig, dataclass_kinds, parse_value, read_settings
from .harness.outputs import emit_outputs, load_runs
from .harness.runner import ALGORITHM_NAMES, RunOptions, bench, run_experiment
from .harness.scenarios import gen_scenarios, list_scenarios
from .pheromone import NoiseMode


def parse_network(text: str, fov: int):
    """``conv:32, pool, conv:32, fc:128, lstm:128`` -> NetworkSpec."""
    from .learner.network import NetworkSpec

    body = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        kind, _, width = part.partition(":")
        body.append((kind,) if kind == "pool" else (kind, int(width)))
    return NetworkSpec(fov=fov, body=tuple(body))


def load_train_config(path, seed=None):
    from .learner.network import NetworkSpec
    from .learner.trainer import TrainConfig

    settings = read_settings(path)
    kinds = dataclass_kinds(TrainConfig)
    kinds["non_learning"] = (int,)
    kinds["world_sizes"] = (int,)
    kinds["resource_range"] = (int,)
    kinds["n_steps"] = int
    fov = int(settings.pop("fov", 11))
    network = settings.pop("network", None)
    unknown = set(settings) - set(kinds)
    if unknown:
        raise ValueError(f"unknown training settings: {sorted(unknown)}")
    kwargs = {k: parse_value(v, kinds[k]) for k, v in settings.items()}
    kwargs["network"] = parse_network(network, fov) if network else NetworkSpec(fov=fov)
    if seed is not None:
        kwargs["seed"] = seed
    return TrainConfig(**kwargs)


def cmd_gen(args):
    overrides = {} if args.seed is None else {"seed": args.seed}
    matrix = MatrixConfig.from_file(args.matrix, **overrides) if args.matrix else MatrixConfig(**overrides)
    paths = gen_scenarios(matrix, args.out)
    print(f"wrote {len(paths)} scenario files to {args.out}")


def _scenarios(directory):
    paths = list_scenarios(directory)
    if not paths:
        raise SystemExit(f"no scenario files in {directory}")
    return paths


def _options(args):
    return RunOptions(ablate_pheromones=args.ablate_pheromones, noise_mode=args.noise_mode, checkpoint=args.checkpoint)


def cmd_run(args):
    records = run_experiment(_scenarios(args.scenarios), args.algo, args.out, args.seed or 0, _options(args),
                             resume=not args.no_resume)
    print(f"finished {len(records)} runs; results in {args.out}")


def cmd_bench(args):
    print("scenario,team,seconds_per_step,seconds_per_agent_step")
    for name, team, timing in bench(_scenarios(args.scenarios), args.algo, args.seed or 0, _options(args)):
        per_agent = "" if timing.seconds_per_agent_step is None else f"{timing.seconds_per_agent_step:.9f}"
        print(f"{name},{team},{timing.seconds_per_step:.9f},{per_agent}")


def cmd_train(args):
    from .learner.checkpoint import save_checkpoint
    from .learner.trainer import run_training

    config = load_train_config(args.config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_training(config)
    (out / "training_log.csv").write_text(result.log_csv())
    save_checkpoint(out / "checkpoint.npz", result.params, config.network, episodes=config.episodes, seed=config.seed)
    print(f"trained {config.episodes} episodes; checkpoint at {out / 'checkpoint.npz'}")


def cmd_plot(args):
    written = emit_outputs(load_runs(args.input), args.out, plots=not args.no_plots)
    print(f"wrote {len(written)} files to {args.out}")


def build_parser():
    parser = argparse.ArgumentParser(prog="stigforage", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="seed for every random choice in the command")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write the scenario matrix")
    p.add_argument("--matrix", help="key = value matrix file (defaults to the full benchmark matrix)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    for name, func, text in (("run", cmd_run, "run a controller over scenarios"),
                             ("bench", cmd_bench, "timing-only runs")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--algo", required=True, choices=ALGORITHM_NAMES)
        p.add_argument("--scenarios", required=True)
        p.add_argument("--ablate-pheromones", action="store_true")
        p.add_argument("--noise-mode", default=NoiseMode.NORMAL.value, choices=[m.value for m in NoiseMode])
        p.add_argument("--checkpoint")
        if name == "run":
            p.add_argument("--out", required=True)
            p.add_argument("--no-resume", action="store_true", help="rerun scenarios that already have results")
        p.set_defaults(func=func)

    p = sub.add_parser("train", help="train the actor-critic policy")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("plot", help="aggregate run results into CSVs and SVG plots")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
