"""Line-oriented text format for worlds and their event schedules.

Grammar (one record per line, fields separated by single spaces)::

    stigforage-world <version>
    size <width> <height>
    seed <int>
    rates <gather> <dropoff>
    capacity infinite | <units>
    respawn 0 | 1
    density <obstacle density>
    clock <step>
    nest <row> <col>
    resource <row> <col> <id> <remaining|inf> <entry-row> <entry-col>
    obstacle <row> <col>
    agent <row> <col> <id> <load>
    episode <steps>                       (optional schedule section)
    scenario infinite | depleting | wipeout
    wipeout <start> <duration>            (zero or more)

Rates and densities use Python's shortest float repr; loads and remaining
units are exact fractions such as ``1`` or ``3/4``. Only free agents are
representable, so worlds are saved between episodes, not mid-queue.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .world import CellKind, GridWorld, WorldConfig

FORMAT_VERSION = 1
MAGIC = "stigforage-world"


class FormatError(ValueError):
    pass


def _frac(x) -> str:
    return str(Fraction(x))


def emit_world(world: GridWorld, schedule: dict | None = None) -> str:
    cfg = world.config
    if any(not a.is_free for a in world.agents):
        raise FormatError("cannot serialize a world with queued agents")
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"size {world.width} {world.height}",
        f"seed {cfg.rng_seed}",
        f"rates {cfg.gather_rate!r} {cfg.dropoff_rate!r}",
        "capacity infinite" if cfg.resource_capacity is None else f"capacity {cfg.resource_capacity}",
        f"respawn {int(cfg.respawn_on_depletion)}",
        f"density {cfg.obstacle_density!r}",
        f"clock {world.clock}",
        f"nest {world.nest.origin[0]} {world.nest.origin[1]}",
    ]
    for rid in sorted(world.resources):
        node = world.resources[rid]
        rem = "inf" if node.remaining is None else _frac(node.remaining)
        lines.append(
            f"resource {node.body_cell[0]} {node.body_cell[1]} {rid} {rem} {node.entry_cell[0]} {node.entry_cell[1]}"
        )
    for r, c in np.argwhere(world.kind == CellKind.OBSTACLE):
        lines.append(f"obstacle {r} {c}")
    for agent in world.agents:
        lines.append(f"agent {agent.pos[0]} {agent.pos[1]} {agent.id} {_frac(agent.load)}")
    if schedule:
        lines.append(f"episode {schedule['episode_length']}")
        lines.append(f"scenario {schedule['scenario_type']}")
        for start, duration in schedule.get("wipeouts", []):
            lines.append(f"wipeout {start} {duration}")
    return "\n".join(lines) + "\n"


def parse_world(text: str):
    """Parse a world file; returns ``(world, schedule)``.

    ``schedule`` is None when the file carries no episode section.
    """
    header = {}
    resources, obstacles, agents = [], [], []
    schedule = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *vals = line.split()
        try:
            if key == MAGIC:
                if int(vals[0]) != FORMAT_VERSION:
                    raise FormatError(f"unsupported format version {vals[0]}")
                header["version"] = int(vals[0])
            elif key in ("size", "rates", "nest"):
                header[key] = vals
            elif key in ("seed", "capacity", "respawn", "density", "clock"):
                header[key] = vals[0]
            elif key == "resource":
                resources.append(vals)
            elif key == "obstacle":
                obstacles.append((int(vals[0]), int(vals[1])))
            elif key == "agent":
                agents.append(vals)
            elif key == "episode":
                schedule = schedule or {"wipeouts": []}
                schedule["episode_length"] = int(vals[0])
            elif key == "scenario":
                schedule = schedule or {"wipeouts": []}
                schedule["scenario_type"] = vals[0]
            elif key == "wipeout":
                schedule = schedule or {"wipeouts": []}
                schedule["wipeouts"].append((int(vals[0]), int(vals[1])))
            else:
                raise FormatError(f"unknown record {key!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {lineno}: malformed record {line!r}") from exc

    missing = {"version", "size", "seed", "rates", "capacity", "respawn", "nest"} - header.keys()
    if missing:
        raise FormatError(f"missing header records: {sorted(missing)}")

    width, height = (int(v) for v in header["size"])
    cap = header["capacity"]
    config = WorldConfig(
        width=width,
        height=height,
        obstacle_density=float(header.get("density", 0.0)),
        num_resources=len(resources),
        resource_capacity=None if cap == "infinite" else int(cap),
        gather_rate=float(header["rates"][0]),
        dropoff_rate=float(header["rates"][1]),
        respawn_on_depletion=header["respawn"] == "1",
        rng_seed=int(header["seed"]),
        num_agents=len(agents),
    )
    world = GridWorld(config)
    world._set_nest(tuple(int(v) for v in header["nest"]))
    for r, c, rid, rem, er, ec in resources:
        remaining = None if rem == "inf" else Fraction(rem)
        world.add_resource((int(r), int(c)), (int(er), int(ec)), remaining=remaining, rid=int(rid))
    for cell in obstacles:
        world.kind[cell] = CellKind.OBSTACLE
    for r, c, aid, load in sorted(agents, key=lambda a: int(a[2])):
        if int(aid) != len(world.agents):
            raise FormatError("agent ids must be contiguous from 0")
        agent = world.add_agent((int(r), int(c)), Fraction(load))
    world.clock = int(header.get("clock", 0))
    for agent in world.agents:
        if agent.load == 1:
            agent.harvest_step = world.clock
    return world, schedule


def save_world(path, world, schedule=None):
    with open(path, "w") as fh:
        fh.write(emit_world(world, schedule))


def load_world(path):
    with open(path) as fh:
        return parse_world(fh.read())
