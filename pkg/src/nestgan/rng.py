"""Counter-based random streams with reproducible splitting.

Every stochastic routine in the package takes an RngStream.  A stream is
identified by a 64-bit seed plus a spawn path; the same identity always
replays the same sample sequence, and distinct paths give statistically
independent streams (Philox counter-based generator underneath).  Monte
Carlo estimators that shard work across workers must `split` the stream
and reduce in worker order, never share one stream.
"""

from __future__ import annotations

import numpy as np


class RngStream:
    """Single-owner random stream; split rather than share across workers."""

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] | None = None):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = int(seed)
        self.path = tuple(_path) if _path is not None else (int(stream_id),)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.Philox(seq))

    @property
    def stream_id(self) -> int:
        return self.path[0]

    def child(self, index: int) -> "RngStream":
        """Derive an independent stream; same (stream, index) is replayable."""
        return RngStream(self.seed, _path=self.path + (int(index),))

    def split(self, n: int) -> list["RngStream"]:
        """n independent children, e.g. one per parallel worker."""
        return [self.child(i) for i in range(n)]

    # -- draws ------------------------------------------------------------

    def standard_normal(self, shape) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def normal_matrix(self, d: int) -> np.ndarray:
        return self._gen.standard_normal((d, d))

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers in [low, high] inclusive."""
        return self._gen.integers(low, high, size=size, endpoint=True)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    # -- state ------------------------------------------------------------

    def state(self) -> dict:
        """JSON-serializable generator state (counter position included)."""
        raw = self._gen.bit_generator.state
        return {
            "seed": self.seed,
            "path": list(self.path),
            "counter": [int(v) for v in raw["state"]["counter"]],
            "key": [int(v) for v in raw["state"]["key"]],
            "buffer": [int(v) for v in raw["buffer"]],
            "buffer_pos": int(raw["buffer_pos"]),
            "has_uint32": int(raw["has_uint32"]),
            "uinteger": int(raw["uinteger"]),
        }

    @classmethod
    def from_state(cls, state: dict) -> "RngStream":
        stream = cls(state["seed"], _path=tuple(state["path"]))
        raw = stream._gen.bit_generator.state
        raw["state"]["counter"] = np.array(state["counter"], dtype=np.uint64)
        raw["state"]["key"] = np.array(state["key"], dtype=np.uint64)
        raw["buffer"] = np.array(state["buffer"], dtype=np.uint64)
        raw["buffer_pos"] = state["buffer_pos"]
        raw["has_uint32"] = state["has_uint32"]
        raw["uinteger"] = state["uinteger"]
        stream._gen.bit_generator.state = raw
        return stream

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


def sample_std_normal(rng: RngStream, d: int) -> np.ndarray:
    """One d-dimensional standard normal vector."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return rng.standard_normal(d)
