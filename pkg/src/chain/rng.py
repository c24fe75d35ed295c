"""
Counter-based random streams with hierarchical stream ids

A stream is fully determined by (seed, context, replica, epoch). The Philox key
is derived from (seed, context, epoch); the replica index occupies the third
word of the 256-bit counter, so replicas of one epoch walk disjoint counter
ranges under a shared key.
"""
import zlib
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from src.utils.config import REPLICA_STREAM_CHUNK, STREAM_CHUNK


@dataclass(frozen=True)
class StreamId:
    """Hierarchical stream identifier"""

    context: str
    replica: int = 0
    epoch: int = 0


@lru_cache(maxsize=4096)
def _stream_key(seed: int, context: str, epoch: int) -> tuple:
    """Philox key words for (seed, context, epoch)"""
    tag = zlib.crc32(context.encode('utf-8'))
    sequence = np.random.SeedSequence(int(seed), spawn_key=(tag, int(epoch)))
    return tuple(int(word) for word in sequence.generate_state(2, dtype=np.uint64))


class RngStream:
    """Reproducible uniform stream for one (seed, stream id)"""

    def __init__(self, seed: int, stream_id: StreamId, chunk: int = STREAM_CHUNK):
        """
        Initialize stream

        Args:
            seed: 64-bit master seed
            stream_id: Hierarchical stream identifier
            chunk: Number of uniforms fetched per buffer refill
        """
        if stream_id.replica < 0 or stream_id.epoch < 0:
            raise ValueError(f"Stream indices must be nonnegative: {stream_id}")

        self.seed = int(seed)
        self.stream_id = stream_id
        self.chunk = int(chunk)

        key = np.array(_stream_key(self.seed, stream_id.context, stream_id.epoch), dtype=np.uint64)
        counter = np.array([0, 0, stream_id.replica, 0], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(counter=counter, key=key))

        self._buffer = np.empty(0)
        self._cursor = 0

    @classmethod
    def create(cls, seed: int, context: str, replica: int = 0, epoch: int = 0) -> 'RngStream':
        """Shorthand constructor"""
        return cls(seed, StreamId(context, replica, epoch))

    def uniforms(self, size: int) -> np.ndarray:
        """
        Next `size` uniforms in [0, 1)

        The sequence is independent of how requests are split.
        """
        available = len(self._buffer) - self._cursor
        if size <= available:
            out = self._buffer[self._cursor:self._cursor + size]
            self._cursor += size
            return out

        head = self._buffer[self._cursor:]
        fresh = self.generator.random(max(size - available, self.chunk))
        need = size - available
        self._buffer = fresh
        self._cursor = need
        return np.concatenate([head, fresh[:need]])

    def uniform(self) -> float:
        """Next single uniform"""
        if self._cursor >= len(self._buffer):
            self._buffer = self.generator.random(self.chunk)
            self._cursor = 0
        value = self._buffer[self._cursor]
        self._cursor += 1
        return float(value)

    def integers(self, high: int, size: int) -> np.ndarray:
        """Uniform integers in [0, high), one uniform consumed per draw"""
        return np.minimum((self.uniforms(size) * high).astype(np.int64), high - 1)


class ReplicaStreams:
    """One stream per replica under a shared (seed, context, epoch)"""

    def __init__(self, seed: int, context: str, epoch: int, n_replicas: int, chunk: int = REPLICA_STREAM_CHUNK):
        """
        Initialize replica streams

        Args:
            seed: Master seed
            context: Stream context tag (e.g. 'parallel', 'dephase')
            epoch: Epoch counter of the calling phase
            n_replicas: Number of replicas
            chunk: Buffer refill size of each replica stream
        """
        self.streams: List[RngStream] = [
            RngStream(seed, StreamId(context, replica, epoch), chunk=chunk) for replica in range(n_replicas)
        ]

    def __len__(self) -> int:
        return len(self.streams)

    def take(self, size: int) -> np.ndarray:
        """
        Draw an (N, size) block; row i comes from replica i's stream
        """
        return np.stack([stream.uniforms(size) for stream in self.streams])

    def subset(self, replicas: Sequence[int]) -> List[RngStream]:
        """Streams of selected replicas"""
        return [self.streams[i] for i in replicas]
