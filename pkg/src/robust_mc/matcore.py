"""Dense linear-algebra kernels, norms, seeded RNG streams, and matrix text I/O.

Matrices are plain float64 numpy arrays (row-major, 2-D) throughout the
package.  Everything here is deterministic: the RNG streams are
counter-based (Philox) so that a ``(seed, stream_id)`` pair reproduces the
same draw sequence on any platform, independent of execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when matrix dimensions are inconsistent with an operation."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and verify all entries are finite."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _check_nonempty(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected 2-D matrix, got ndim={a.ndim}")
    if a.size == 0:
        raise ValueError("norm of an empty matrix is undefined")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product a @ b with an explicit inner-dimension check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul requires 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def frob_norm(a: np.ndarray) -> float:
    """Frobenius norm sqrt(sum of squared entries)."""
    return float(np.linalg.norm(_check_nonempty(a), "fro"))


def two_inf_norm(a: np.ndarray) -> float:
    """Largest row l2-norm (the 2,inf norm)."""
    a = _check_nonempty(a)
    return float(np.sqrt(np.einsum("ij,ij->i", a, a).max()))


def inf_norm(a: np.ndarray) -> float:
    """Largest entry magnitude."""
    return float(np.abs(_check_nonempty(a)).max())


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value, computed via SVD."""
    return float(np.linalg.norm(_check_nonempty(a), 2))


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Identical ``(seed, stream_id)`` pairs yield bit-identical draw sequences
    across runs and platforms; distinct ``stream_id`` values give
    statistically independent streams.  Built on the counter-based Philox
    generator, so per-trial streams can be created in any order.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for field in ("seed", "stream_id"):
            v = getattr(self, field)
            if not (0 <= int(v) < 2**64):
                raise ValueError(f"{field} must fit in 64 unsigned bits, got {v}")

    def generator(self) -> np.random.Generator:
        """Fresh numpy Generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream (fresh stream) or an already-advanced Generator."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def write_matrix(a: np.ndarray, path) -> None:
    """Write a matrix in the plain text format: 'rows cols' then one row per line.

    Entries are printed with 17 significant digits so the round trip through
    :func:`read_matrix` is loss-free for float64.
    """
    a = as_matrix(a)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: first line must be 'rows cols'")
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (rows, cols):
        raise ShapeError(
            f"{path}: header says {rows}x{cols}, body is {data.shape[0]}x{data.shape[1]}"
        )
    return as_matrix(data, name=str(path))
