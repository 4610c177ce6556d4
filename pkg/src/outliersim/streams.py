"""Counter-based random streams keyed by (master_seed, path).

Every random draw in the suite comes from a stream addressed by a master
seed plus a path of labels, e.g. ``(condition_id, replicate_index, "d")``.
The generator for a given address is a pure function of that address, so
results do not depend on scheduling, worker count, or the order in which
streams are created. Two different paths give statistically independent
Philox keys (derived through SHA-256, which also makes the mapping stable
across platforms and Python versions).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1

PathPart = "int | str"


def _encode_part(part) -> bytes:
    # Tag by type so that 1 and "1" address different streams.
    if isinstance(part, (int, np.integer)):
        return b"i" + str(int(part)).encode("ascii")
    if isinstance(part, str):
        return b"s" + part.encode("utf-8")
    raise TypeError(f"stream path parts must be int or str, got {type(part).__name__}")


def _philox_words(master_seed: int, path: tuple) -> np.ndarray:
    h = hashlib.sha256()
    h.update(str(int(master_seed) & _MASK64).encode("ascii"))
    for part in path:
        h.update(b"/")
        h.update(_encode_part(part))
    return np.frombuffer(h.digest(), dtype="<u8").copy()


@dataclass(frozen=True)
class RngStream:
    """Address of one reproducible random stream."""

    master_seed: int
    path: tuple = field(default_factory=tuple)

    def derive(self, *parts) -> "RngStream":
        """Child stream for the given label(s); same labels, same stream."""
        for p in parts:
            _encode_part(p)  # validate eagerly
        return RngStream(self.master_seed, self.path + tuple(parts))

    def generator(self) -> np.random.Generator:
        """Materialize the numpy generator for this address."""
        words = _philox_words(self.master_seed, self.path)
        # Philox-4x64 takes a 128-bit key and a 256-bit counter; spread
        # the digest over both so distinct paths differ in either.
        bits = np.random.Philox(
            key=words[:2], counter=np.concatenate([words[2:], words[:2]])
        )
        return np.random.Generator(bits)


def derive_stream(parent: RngStream, *parts) -> RngStream:
    """Module-level alias for :meth:`RngStream.derive`."""
    return parent.derive(*parts)
