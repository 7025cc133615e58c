"""Deterministic random source.

One seed drives every random decision in the package: parameter init,
dropout masks, data shuffling, corpus synthesis. The generator is a
counter-based Philox stream, so its full state is a handful of integers
that can be written into a checkpoint and restored bit-exactly.

Independent substreams are derived by hashing a string name together
with the seed, so e.g. the init stream and the shuffle stream never
interfere no matter how much either one is consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _derive_key(seed: int, stream: str) -> np.ndarray:
    """Map (seed, stream-name) to a 128-bit Philox key."""
    digest = hashlib.sha256(f"{seed}\x1f{stream}".encode("utf-8")).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _unjsonify(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=obj["dtype"])
        return {k: _unjsonify(v) for k, v in obj.items()}
    return obj


class Rng:
    """Seedable, serializable random generator with named substreams."""

    def __init__(self, seed: int, stream: str = "root"):
        self.seed = int(seed)
        self.stream = stream
        self._gen = np.random.Generator(np.random.Philox(key=_derive_key(self.seed, stream)))

    def child(self, name: str) -> "Rng":
        """Independent substream; consuming one never affects another."""
        return Rng(self.seed, f"{self.stream}/{name}")

    # -- draws ---------------------------------------------------------

    def uniform(self, shape=None) -> np.ndarray:
        return self._gen.random(size=shape)

    def normal(self, shape=None, std: float = 1.0) -> np.ndarray:
        return self._gen.standard_normal(size=shape) * std

    def truncated_normal(self, shape, std: float, bound_sigmas: float = 2.0) -> np.ndarray:
        """Normal draws redrawn until all fall within bound_sigmas std devs."""
        out = self._gen.standard_normal(size=shape)
        for _ in range(100):
            bad = np.abs(out) > bound_sigmas
            if not bad.any():
                break
            out[bad] = self._gen.standard_normal(size=int(bad.sum()))
        return out * std

    def integers(self, low: int, high: int, shape=None):
        """Uniform integers in [low, high)."""
        return self._gen.integers(low, high, size=shape)

    def choice(self, seq):
        return seq[int(self._gen.integers(0, len(seq)))]

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    # -- state ---------------------------------------------------------

    def state(self) -> dict:
        """JSON-safe snapshot of the full generator state."""
        return {
            "seed": self.seed,
            "stream": self.stream,
            "bitgen": _jsonify(self._gen.bit_generator.state),
        }

    def set_state(self, snap: dict) -> None:
        self.seed = int(snap["seed"])
        self.stream = snap["stream"]
        self._gen = np.random.Generator(np.random.Philox(key=_derive_key(self.seed, self.stream)))
        self._gen.bit_generator.state = _unjsonify(snap["bitgen"])

    @classmethod
    def from_state(cls, snap: dict) -> "Rng":
        rng = cls(int(snap["seed"]), snap["stream"])
        rng.set_state(snap)
        return rng
