from __future__ import annotations

import threading

import numpy as np


class Nadam:
    """Adam with Nesterov momentum (Dozat), without the momentum schedule."""

    def __init__(self, learning_rate=5e-6, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}

    def apply(self, params: dict, grads: dict) -> dict:
        """Update ``params`` in place and return it."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1 - b1**self.t, 1 - b2**self.t
        for name, g in grads.items():
            m = self.m.setdefault(name, np.zeros_like(g))
            v = self.v.setdefault(name, np.zeros_like(g))
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            nesterov = b1 * m / c1 + (1 - b1) * g / c1
            params[name] -= self.learning_rate * nesterov / (np.sqrt(v / c2) + self.eps)
        return params

    def state_dict(self):
        return {"t": self.t, "m": self.m, "v": self.v}


class ParameterStore:
    """Global weights shared by environment workers.

    ``snapshot`` and ``apply`` are atomic, so asynchronous workers may
    interleave their updates in any order.
    """

    def __init__(self, params: dict, optimizer: Nadam):
        self._params = {k: v.copy() for k, v in params.items()}
        self.optimizer = optimizer
        self._lock = threading.Lock()
        self.updates = 0

    def snapshot(self) -> dict:
        with self._lock:
            return {k: v.copy() for k, v in self._params.items()}

    def apply(self, grads: dict):
        with self._lock:
            self.optimizer.apply(self._params, grads)
            self.updates += 1
