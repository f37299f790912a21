"""Versioned parameter files: an ``.npz`` archive plus a JSON header entry."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..observation import CHANNEL_LAYOUT
from .network import NetworkSpec, _shapes

FORMAT = "stigforage-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, params: dict, spec: NetworkSpec, **meta) -> Path:
    path = Path(path)
    header = {"format": FORMAT, "version": VERSION, "layout": CHANNEL_LAYOUT, "network": spec.to_dict(), "meta": meta}
    arrays = {f"param:{k}": v for k, v in params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)
    return path


def load_checkpoint(path, fov=None):
    """Return (params, spec, header); checks the layout and optional fov."""
    with np.load(path, allow_pickle=False) as data:
        if "header" not in data:
            raise CheckpointError(f"{path} has no header")
        header = json.loads(str(data["header"]))
        params = {k.split(":", 1)[1]: data[k].astype(np.float64) for k in data.files if k.startswith("param:")}
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise CheckpointError(f"unsupported checkpoint format {header.get('format')} v{header.get('version')}")
    if header.get("layout") != CHANNEL_LAYOUT:
        raise CheckpointError(f"channel layout {header.get('layout')!r} does not match {CHANNEL_LAYOUT!r}")
    spec = NetworkSpec.from_dict(header["network"])
    if fov is not None and spec.fov != fov:
        raise CheckpointError(f"checkpoint fov {spec.fov} does not match requested fov {fov}")
    expected = _shapes(spec)
    if set(expected) != set(params) or any(params[k].shape != s for k, s in expected.items()):
        raise CheckpointError("parameter arrays do not match the network header")
    return {k: params[k] for k in expected}, spec, header
