"""Convolutional actor-critic with one LSTM cell, written against numpy.

Parameters live in an ordered ``dict`` of float64 arrays. The forward pass
over a whole episode keeps the caches that ``sequence_backward`` needs, so
gradients are exact backpropagation through time over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..observation import N_CHANNELS
from ..world import N_ACTIONS


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkSpec:
    """Layer stack; ``body`` entries are ("conv", filters), ("pool",),
    ("fc", width) or ("lstm", width). The LSTM must come last."""

    fov: int = 11
    channels: int = N_CHANNELS
    body: tuple = (("conv", 32), ("pool",), ("conv", 32), ("fc", 128), ("lstm", 128))

    def __post_init__(self):
        body = tuple(tuple(layer) for layer in self.body)
        object.__setattr__(self, "body", body)
        kinds = [layer[0] for layer in body]
        if kinds.count("lstm") != 1 or kinds[-1] != "lstm":
            raise ValueError("body needs exactly one lstm layer, placed last")
        if any(k not in ("conv", "pool", "fc", "lstm") for k in kinds):
            raise ValueError(f"unknown layer kind in {kinds}")
        seen_fc = False
        for k in kinds:
            if k == "fc":
                seen_fc = True
            elif k in ("conv", "pool") and seen_fc:
                raise ValueError("spatial layers must precede fully connected ones")

    @property
    def hidden(self) -> int:
        return self.body[-1][1]

    def to_dict(self):
        return {"fov": self.fov, "channels": self.channels, "body": [list(layer) for layer in self.body]}

    @classmethod
    def from_dict(cls, d):
        return cls(fov=d["fov"], channels=d["channels"], body=tuple(tuple(layer) for layer in d["body"]))


def _shapes(spec: NetworkSpec):
    """Parameter shapes in order, plus the flattened width feeding dense layers."""
    shapes = {}
    c, s = spec.channels, spec.fov
    width = None
    for i, layer in enumerate(spec.body):
        kind = layer[0]
        if kind == "conv":
            shapes[f"conv{i}.W"] = (layer[1], c, 3, 3)
            shapes[f"conv{i}.b"] = (layer[1],)
            c = layer[1]
        elif kind == "pool":
            s = s // 2
            if s < 1:
                raise ValueError("too many pooling layers for this fov")
        else:
            if width is None:
                width = c * s * s
            if kind == "fc":
                shapes[f"fc{i}.W"] = (width, layer[1])
                shapes[f"fc{i}.b"] = (layer[1],)
                width = layer[1]
            else:
                h = layer[1]
                shapes["lstm.Wx"] = (width, 4 * h)
                shapes["lstm.Wh"] = (h, 4 * h)
                shapes["lstm.b"] = (4 * h,)
    h = spec.hidden
    shapes["policy.W"] = (h, N_ACTIONS)
    shapes["policy.b"] = (N_ACTIONS,)
    shapes["value.W"] = (h, 1)
    shapes["value.b"] = (1,)
    return shapes


def init_params(spec: NetworkSpec, rng=None, zero_heads=True) -> dict:
    rng = np.random.default_rng(rng)
    params = {}
    for name, shape in _shapes(spec).items():
        if name.endswith(".b"):
            arr = np.zeros(shape)
            if name == "lstm.b":
                h = shape[0] // 4
                arr[h : 2 * h] = 1.0  # forget gate
        elif name.startswith(("policy", "value")):
            arr = np.zeros(shape) if zero_heads else rng.normal(0, 0.1, shape)
        elif name.startswith("conv"):
            fan_in = shape[1] * 9
            arr = rng.normal(0, np.sqrt(2.0 / fan_in), shape)
        else:
            arr = rng.normal(0, np.sqrt(1.0 / shape[0]), shape)
        params[name] = arr
    return params


def zeros_like(params) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


def flatten(params) -> np.ndarray:
    return np.concatenate([v.ravel() for v in params.values()])


def unflatten(vector, template) -> dict:
    out, i = {}, 0
    for k, v in template.items():
        out[k] = vector[i : i + v.size].reshape(v.shape).copy()
        i += v.size
    if i != len(vector):
        raise ShapeError("flat vector does not match parameter template")
    return out


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _conv_forward(x, W, b):
    n, c, s, _ = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = sliding_window_view(xp, (3, 3), axis=(2, 3))  # n, c, s, s, 3, 3
    cols = cols.transpose(0, 2, 3, 1, 4, 5).reshape(n * s * s, c * 9)
    out = cols @ W.reshape(W.shape[0], -1).T + b
    return out.reshape(n, s, s, -1).transpose(0, 3, 1, 2), cols


def _conv_backward(dout, cols, x_shape, W):
    n, c, s, _ = x_shape
    f = W.shape[0]
    d2 = dout.transpose(0, 2, 3, 1).reshape(n * s * s, f)
    dW = (d2.T @ cols).reshape(W.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ W.reshape(f, -1)).reshape(n, s, s, c, 3, 3)
    dxp = np.zeros((n, c, s + 2, s + 2))
    for k in range(3):
        for l in range(3):
            dxp[:, :, k : k + s, l : l + s] += dcols[:, :, :, :, k, l].transpose(0, 3, 1, 2)
    return dxp[:, :, 1:-1, 1:-1], dW, db


def _pool_forward(x):
    n, c, s, _ = x.shape
    h = s // 2
    blocks = x[:, :, : 2 * h, : 2 * h].reshape(n, c, h, 2, h, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, h, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, arg


def _pool_backward(dout, arg, x_shape):
    n, c, s, _ = x_shape
    h = s // 2
    dblocks = np.zeros((n, c, h, h, 4))
    np.put_along_axis(dblocks, arg[..., None], dout[..., None], axis=-1)
    dx = np.zeros(x_shape)
    dx[:, :, : 2 * h, : 2 * h] = dblocks.reshape(n, c, h, h, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * h, 2 * h)
    return dx


def _encode(params, spec, x):
    """Spatial and dense layers below the LSTM, for any leading batch size."""
    caches = []
    for i, layer in enumerate(spec.body[:-1]):
        kind = layer[0]
        if kind == "conv":
            pre, cols = _conv_forward(x, params[f"conv{i}.W"], params[f"conv{i}.b"])
            caches.append(("conv", i, cols, x.shape, pre))
            x = np.maximum(pre, 0.0)
        elif kind == "pool":
            out, arg = _pool_forward(x)
            caches.append(("pool", i, arg, x.shape))
            x = out
        else:
            if x.ndim > 2:
                caches.append(("flatten", i, x.shape))
                x = x.reshape(x.shape[0], -1)
            pre = x @ params[f"fc{i}.W"] + params[f"fc{i}.b"]
            caches.append(("fc", i, x, pre))
            x = np.maximum(pre, 0.0)
    if x.ndim > 2:
        caches.append(("flatten", None, x.shape))
        x = x.reshape(x.shape[0], -1)
    return x, caches


def _encode_backward(params, dx, caches, grads):
    for cache in reversed(caches):
        kind = cache[0]
        if kind == "flatten":
            dx = dx.reshape(cache[2])
        elif kind == "fc":
            _, i, x, pre = cache
            dpre = dx * (pre > 0)
            grads[f"fc{i}.W"] += x.T @ dpre
            grads[f"fc{i}.b"] += dpre.sum(axis=0)
            dx = dpre @ params[f"fc{i}.W"].T
        elif kind == "pool":
            _, i, arg, shape = cache
            dx = _pool_backward(dx, arg, shape)
        else:
            _, i, cols, shape, pre = cache
            dpre = dx * (pre > 0)
            dx, dW, db = _conv_backward(dpre, cols, shape, params[f"conv{i}.W"])
            grads[f"conv{i}.W"] += dW
            grads[f"conv{i}.b"] += db
    return dx


def _lstm_cell(params, x, h, c):
    H = h.shape[1]
    gates = x @ params["lstm.Wx"] + h @ params["lstm.Wh"] + params["lstm.b"]
    i = sigmoid(gates[:, :H])
    f = sigmoid(gates[:, H : 2 * H])
    o = sigmoid(gates[:, 2 * H : 3 * H])
    g = np.tanh(gates[:, 3 * H :])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, o, g, tc)


def initial_state(spec: NetworkSpec, batch: int = 1):
    return np.zeros((batch, spec.hidden)), np.zeros((batch, spec.hidden))


def _check_obs(spec, obs):
    expected = (spec.channels, spec.fov, spec.fov)
    if tuple(obs.shape[-3:]) != expected:
        raise ShapeError(f"observation shape {obs.shape[-3:]} does not match network input {expected}")


def forward(params, spec: NetworkSpec, obs, state=None):
    """One step for a batch of agents.

    ``obs`` is (C, fov, fov) or (B, C, fov, fov). Returns (probs (B, 5),
    values (B,), new_state).
    """
    obs = np.asarray(obs, dtype=np.float64)
    _check_obs(spec, obs)
    if obs.ndim == 3:
        obs = obs[None]
    if state is None:
        state = initial_state(spec, obs.shape[0])
    x, _ = _encode(params, spec, obs)
    h, c, _ = _lstm_cell(params, x, *state)
    probs = softmax(h @ params["policy.W"] + params["policy.b"])
    values = (h @ params["value.W"] + params["value.b"])[:, 0]
    return probs, values, (h, c)


@dataclass
class SequenceCache:
    shape: tuple
    enc_caches: list
    steps: list = field(default_factory=list)
    hs: np.ndarray = None


def sequence_forward(params, spec: NetworkSpec, obs_seq, state=None):
    """Whole-episode pass; ``obs_seq`` is (T, B, C, fov, fov).

    Returns (logits (T, B, 5), values (T, B), final_state, cache).
    """
    obs_seq = np.asarray(obs_seq, dtype=np.float64)
    _check_obs(spec, obs_seq)
    T, B = obs_seq.shape[:2]
    x, enc = _encode(params, spec, obs_seq.reshape(T * B, *obs_seq.shape[2:]))
    x = x.reshape(T, B, -1)
    h, c = state if state is not None else initial_state(spec, B)
    cache = SequenceCache(shape=(T, B), enc_caches=enc)
    hs = np.empty((T, B, spec.hidden))
    for t in range(T):
        h, c, step = _lstm_cell(params, x[t], h, c)
        cache.steps.append(step)
        hs[t] = h
    cache.hs = hs
    flat = hs.reshape(T * B, -1)
    logits = (flat @ params["policy.W"] + params["policy.b"]).reshape(T, B, N_ACTIONS)
    values = (flat @ params["value.W"] + params["value.b"]).reshape(T, B)
    return logits, values, (h, c), cache


def sequence_backward(params, spec: NetworkSpec, cache: SequenceCache, dlogits, dvalues) -> dict:
    T, B = cache.shape
    grads = zeros_like(params)
    flat = cache.hs.reshape(T * B, -1)
    dl = dlogits.reshape(T * B, N_ACTIONS)
    dv = dvalues.reshape(T * B, 1)
    grads["policy.W"] += flat.T @ dl
    grads["policy.b"] += dl.sum(axis=0)
    grads["value.W"] += flat.T @ dv
    grads["value.b"] += dv.sum(axis=0)
    dhs = (dl @ params["policy.W"].T + dv @ params["value.W"].T).reshape(T, B, -1)

    H = spec.hidden
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    dxs = np.empty((T, B, params["lstm.Wx"].shape[0]))
    for t in reversed(range(T)):
        x, h_prev, c_prev, i, f, o, g, tc = cache.steps[t]
        dh = dhs[t] + dh_next
        do = dh * tc
        dc = dh * o * (1 - tc**2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc_next = dc * f
        dgates = np.concatenate([di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g**2)], axis=1)
        grads["lstm.Wx"] += x.T @ dgates
        grads["lstm.Wh"] += h_prev.T @ dgates
        grads["lstm.b"] += dgates.sum(axis=0)
        dxs[t] = dgates @ params["lstm.Wx"].T
        dh_next = dgates @ params["lstm.Wh"].T
    _encode_backward(params, dxs.reshape(T * B, -1), cache.enc_caches, grads)
    return grads
