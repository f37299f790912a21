"""Aggregate per-run metrics into per-cell CSVs and SVG throughput plots.

Aggregate CSV schema (one file per controller and matrix cell)::

    step,mean,std,n

``mean`` and ``std`` are over replicates at each step; ``std`` is the
population standard deviation, so a single replicate gives zeros.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

AGGREGATE_COLUMNS = ("step", "mean", "std", "n")


def read_metrics(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([int(r["cumulative_deposited"]) for r in rows], dtype=np.int64)


def load_runs(in_dir) -> list:
    """Every finished run under ``in_dir`` as a dict with its series."""
    in_dir = Path(in_dir)
    runs = []
    for meta_path in sorted((in_dir / "runs").glob("*.json")):
        meta = json.loads(meta_path.read_text())
        metrics = in_dir / "metrics" / f"{meta_path.stem}.csv"
        if metrics.exists():
            meta["series"] = read_metrics(metrics)
            runs.append(meta)
    return runs


def cell_key(cell: dict) -> tuple:
    return (cell["type"], cell["size"], cell["team"], float(cell["density"]))


def cell_label(key) -> str:
    kind, size, team, density = key
    return f"{kind}_w{size}_n{team}_d{density:.2f}"


def aggregate(series_list) -> np.ndarray:
    """Rows of (step, mean, std, n) over equally long replicate series."""
    if not series_list:
        raise ValueError("nothing to aggregate")
    lengths = {len(s) for s in series_list}
    if len(lengths) != 1:
        raise ValueError(f"replicates have different lengths: {sorted(lengths)}")
    stack = np.vstack(series_list).astype(np.float64)
    steps = np.arange(stack.shape[1])
    return np.column_stack([steps, stack.mean(axis=0), stack.std(axis=0), np.full(len(steps), len(stack))])


def aggregate_csv(rows: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for step, mean, std, n in rows:
        writer.writerow((int(step), f"{mean:.6f}", f"{std:.6f}", int(n)))
    return buf.getvalue()


def group_runs(runs) -> dict:
    groups = {}
    for run in runs:
        groups.setdefault((run["controller"], cell_key(run["cell"])), []).append(run["series"])
    return groups


def emit_outputs(runs, out_dir, plots: bool = True) -> list:
    """Write aggregate CSVs (and plots); returns the written paths."""
    if not runs:
        raise ValueError("no finished runs to summarize")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    groups = group_runs(runs)
    for (controller, key), series in sorted(groups.items()):
        path = out / f"{cell_label(key)}__{controller}.csv"
        path.write_text(aggregate_csv(aggregate(series)))
        written.append(path)
    if plots:
        written += plot_cells(groups, out)
    return written


def plot_cells(groups: dict, out: Path) -> list:
    """One SVG per (size, team, density); wipeout runs drawn dashed."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "stigforage"
    panels = {}
    for (controller, key), series in groups.items():
        panels.setdefault(key[1:], []).append((controller, key[0], aggregate(series)))
    paths = []
    for (size, team, density), curves in sorted(panels.items()):
        fig, ax = plt.subplots(figsize=(6, 4))
        colors = {}
        for controller, kind, rows in sorted(curves, key=lambda c: (c[0], c[1])):
            color = colors.setdefault(controller, f"C{len(colors) % 10}")
            style = "--" if kind == "wipeout" else "-"
            label = controller if kind != "wipeout" else f"{controller} (wipeout)"
            if kind == "depleting":
                style, label = ":", f"{controller} (depleting)"
            ax.plot(rows[:, 0], rows[:, 1], style, color=color, label=label)
            ax.fill_between(rows[:, 0], rows[:, 1] - rows[:, 2], rows[:, 1] + rows[:, 2], color=color, alpha=0.15)
        ax.set_xlabel("time step")
        ax.set_ylabel("food deposited (mean ± std)")
        ax.set_title(f"{size}x{size}, {team} agents, obstacle density {density:.2f}")
        ax.legend(fontsize="small")
        fig.tight_layout()
        path = out / f"w{size}_n{team}_d{density:.2f}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
