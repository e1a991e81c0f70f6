"""Windows, packed set indicators, dense complex functions on Z^2 and their fibers.

Coordinates are 1-indexed: the window ``GridWindow(n1, n2)`` is the box
{1..n1} x {1..n2}.  A :class:`SetIndicator` keeps one packed row of 64-bit
words per x, with bit ``y - 1`` of that row set when ``(x, y)`` is in the set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

logger = logging.getLogger(__name__)

WORD_BITS = 64
BOUND_SLACK = 2.0**-40
MAX_WINDOW_AREA = 2**31


class WindowError(ValueError):
    """A point or box does not fit the window it was given."""


@dataclass(frozen=True)
class GridWindow:
    n1: int
    n2: int

    def __post_init__(self):
        if int(self.n1) != self.n1 or int(self.n2) != self.n2:
            raise WindowError(f"window extents must be integers, got {self.n1}x{self.n2}")
        if self.n1 < 1 or self.n2 < 1:
            raise WindowError(f"window extents must be positive, got {self.n1}x{self.n2}")
        if self.n1 * self.n2 > MAX_WINDOW_AREA:
            raise WindowError(f"window {self.n1}x{self.n2} exceeds the 2^31 cell cap")

    @property
    def area(self) -> int:
        return self.n1 * self.n2

    @property
    def words(self) -> int:
        """Number of 64-bit words per packed row."""
        return (self.n2 + WORD_BITS - 1) // WORD_BITS

    def contains(self, x: int, y: int) -> bool:
        return 1 <= x <= self.n1 and 1 <= y <= self.n2


def popcount(words: np.ndarray) -> int:
    return int(np.bitwise_count(words).sum(dtype=np.int64))


def pack_rows(mask: np.ndarray) -> np.ndarray:
    """Pack a boolean (n1, n2) array into (n1, words) little-endian uint64 rows."""
    n1, n2 = mask.shape
    words = (n2 + WORD_BITS - 1) // WORD_BITS
    padded = np.zeros((n1, words * WORD_BITS), dtype=bool)
    padded[:, :n2] = mask
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view("<u8").astype(np.uint64, copy=False).reshape(n1, words)


def unpack_rows(rows: np.ndarray, n2: int) -> np.ndarray:
    as_bytes = np.ascontiguousarray(rows.astype("<u8")).view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :n2].astype(bool)


class SetIndicator:
    """Immutable subset of a window, stored as packed per-x rows over y."""

    __slots__ = ("window", "rows", "cardinality")

    def __init__(self, window: GridWindow, rows: np.ndarray):
        rows = np.ascontiguousarray(rows, dtype=np.uint64)
        if rows.shape != (window.n1, window.words):
            raise WindowError(f"rows shape {rows.shape} does not match window {window}")
        tail = window.n2 % WORD_BITS
        if tail and rows.size and np.any(rows[:, -1] >> np.uint64(tail)):
            raise WindowError("set bits beyond the window's vertical extent")
        rows.setflags(write=False)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cardinality", popcount(rows))

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "SetIndicator":
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2:
            raise WindowError("mask must be two-dimensional")
        return cls(GridWindow(*mask.shape), pack_rows(mask))

    @classmethod
    def empty(cls, window: GridWindow) -> "SetIndicator":
        return cls(window, np.zeros((window.n1, window.words), dtype=np.uint64))

    @classmethod
    def full(cls, window: GridWindow) -> "SetIndicator":
        return cls.from_mask(np.ones((window.n1, window.n2), dtype=bool))

    def to_mask(self) -> np.ndarray:
        """Dense boolean array; entry [x-1, y-1] is 1_A(x, y)."""
        return unpack_rows(self.rows, self.window.n2)

    def __contains__(self, point) -> bool:
        x, y = point
        if not self.window.contains(x, y):
            return False
        j = y - 1
        return bool((int(self.rows[x - 1, j // WORD_BITS]) >> (j % WORD_BITS)) & 1)

    def points(self) -> Iterator[tuple[int, int]]:
        xs, ys = np.nonzero(self.to_mask())
        for x, y in zip(xs.tolist(), ys.tolist()):
            yield x + 1, y + 1

    def __len__(self) -> int:
        return self.cardinality

    def __eq__(self, other) -> bool:
        if not isinstance(other, SetIndicator):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.rows, other.rows)

    def __hash__(self):
        return hash((self.window, self.rows.tobytes()))

    def __repr__(self) -> str:
        return f"SetIndicator({self.window.n1}x{self.window.n2}, |A|={self.cardinality})"

    def __setattr__(self, name, value):
        raise AttributeError("SetIndicator is immutable")


def indicator_from_points(points: Iterable[tuple[int, int]], window: GridWindow) -> SetIndicator:
    """Build the indicator of ``points``; duplicates collapse, out-of-window points raise."""
    mask = np.zeros((window.n1, window.n2), dtype=bool)
    for x, y in points:
        if not window.contains(x, y):
            raise WindowError(f"point outside window: ({x}, {y}) not in [{window.n1}]x[{window.n2}]")
        mask[x - 1, y - 1] = True
    return SetIndicator(window, pack_rows(mask))


def density(A: SetIndicator) -> float:
    return A.cardinality / A.window.area


@dataclass(frozen=True)
class Fiber:
    """A complex sequence on the integer interval [lo, lo + len(values) - 1], zero elsewhere."""

    lo: int
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(vals)):
            raise ValueError("fiber values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "values", vals)

    @property
    def hi(self) -> int:
        return self.lo + len(self.values) - 1

    def __len__(self) -> int:
        return len(self.values)

    def __call__(self, y: int) -> complex:
        i = y - self.lo
        if 0 <= i < len(self.values):
            return complex(self.values[i])
        return 0j

    def on(self, lo: int, hi: int) -> np.ndarray:
        """Values on [lo, hi], zero-filled outside the stored interval."""
        out = np.zeros(max(hi - lo + 1, 0), dtype=np.complex128)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self.values[a - self.lo:b - self.lo + 1]
        return out

    def conj(self) -> "Fiber":
        return Fiber(self.lo, np.conj(self.values))

    def shifted(self, c: int) -> "Fiber":
        """The fiber y -> f(y + c)."""
        return Fiber(self.lo - c, self.values)

    def total(self) -> complex:
        return complex(self.values.sum())

    @classmethod
    def indicator(cls, lo: int, hi: int) -> "Fiber":
        return cls(lo, np.ones(hi - lo + 1))

    @classmethod
    def point_mass(cls, y: int = 0, value: complex = 1.0) -> "Fiber":
        return cls(y, [value])


@dataclass(frozen=True)
class DenseFunction:
    """Complex function on Z^2 stored over the box [x_lo, x_hi] x [y_lo, y_hi].

    ``values[i, j]`` holds f(x_lo + i, y_lo + j); evaluation off the box is 0.
    """

    x_lo: int
    y_lo: int
    values: np.ndarray
    bounded: bool = field(default=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128)
        if vals.ndim != 2:
            raise ValueError("DenseFunction values must be two-dimensional")
        if not np.all(np.isfinite(vals)):
            raise ValueError("DenseFunction values must be finite")
        if self.bounded and vals.size and np.abs(vals).max() > 1.0 + BOUND_SLACK:
            raise ValueError("bounded flag set but sup-norm exceeds 1")
        vals.setflags(write=False)
        object.__setattr__(self, "x_lo", int(self.x_lo))
        object.__setattr__(self, "y_lo", int(self.y_lo))
        object.__setattr__(self, "values", vals)

    @property
    def x_hi(self) -> int:
        return self.x_lo + self.values.shape[0] - 1

    @property
    def y_hi(self) -> int:
        return self.y_lo + self.values.shape[1] - 1

    @property
    def box(self) -> tuple[int, int, int, int]:
        return self.x_lo, self.x_hi, self.y_lo, self.y_hi

    def __call__(self, x: int, y: int) -> complex:
        i, j = x - self.x_lo, y - self.y_lo
        if 0 <= i < self.values.shape[0] and 0 <= j < self.values.shape[1]:
            return complex(self.values[i, j])
        return 0j

    def sample(self, x_lo: int, x_hi: int, y_lo: int, y_hi: int) -> np.ndarray:
        """Values over an arbitrary box, zero-filled outside the support box."""
        out = np.zeros((max(x_hi - x_lo + 1, 0), max(y_hi - y_lo + 1, 0)), dtype=np.complex128)
        a0, a1 = max(x_lo, self.x_lo), min(x_hi, self.x_hi)
        b0, b1 = max(y_lo, self.y_lo), min(y_hi, self.y_hi)
        if a0 <= a1 and b0 <= b1:
            out[a0 - x_lo:a1 - x_lo + 1, b0 - y_lo:b1 - y_lo + 1] = self.values[
                a0 - self.x_lo:a1 - self.x_lo + 1, b0 - self.y_lo:b1 - self.y_lo + 1
            ]
        return out

    def conj(self) -> "DenseFunction":
        return DenseFunction(self.x_lo, self.y_lo, np.conj(self.values), self.bounded)

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    @classmethod
    def from_indicator(cls, A: SetIndicator) -> "DenseFunction":
        return cls(1, 1, A.to_mask().astype(np.complex128), bounded=True)

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      box: tuple[int, int, int, int], bounded: bool = True) -> "DenseFunction":
        """Tabulate ``fn(X, Y)`` (vectorized over integer grids) on ``box``."""
        x_lo, x_hi, y_lo, y_hi = box
        X, Y = np.meshgrid(np.arange(x_lo, x_hi + 1), np.arange(y_lo, y_hi + 1), indexing="ij")
        vals = np.broadcast_to(np.asarray(fn(X, Y), dtype=np.complex128), X.shape)
        return cls(x_lo, y_lo, vals, bounded)

    @classmethod
    def zeros(cls, box: tuple[int, int, int, int]) -> "DenseFunction":
        x_lo, x_hi, y_lo, y_hi = box
        return cls(x_lo, y_lo, np.zeros((x_hi - x_lo + 1, y_hi - y_lo + 1)), bounded=True)


def fiber(f: DenseFunction, x: int) -> Fiber:
    """The vertical fiber y -> f(x, y) over the support box's y-interval."""
    i = x - f.x_lo
    if 0 <= i < f.values.shape[0]:
        return Fiber(f.y_lo, f.values[i])
    return Fiber(f.y_lo, np.zeros(f.values.shape[1]))


# ---------------------------------------------------------------------------
# text formats


def _data_lines(path: Path) -> Iterator[tuple[int, str]]:
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def read_set_file(path) -> SetIndicator:
    """Parse ``N1 N2`` then one ``x y`` pair per line; '#' lines are comments."""
    lines = _data_lines(Path(path))
    try:
        _, header = next(lines)
    except StopIteration:
        raise ValueError(f"{path}: empty set file") from None
    parts = header.split()
    if len(parts) != 2:
        raise ValueError(f"{path}: header must be 'N1 N2', got {header!r}")
    window = GridWindow(int(parts[0]), int(parts[1]))
    mask = np.zeros((window.n1, window.n2), dtype=bool)
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'x y', got {line!r}")
        x, y = int(parts[0]), int(parts[1])
        if not window.contains(x, y):
            raise WindowError(f"{path}:{lineno}: point outside window: ({x}, {y})")
        if mask[x - 1, y - 1]:
            logger.warning("%s:%d: duplicate point (%d, %d) ignored", path, lineno, x, y)
        mask[x - 1, y - 1] = True
    return SetIndicator(window, pack_rows(mask))


def write_set_file(A: SetIndicator, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{A.window.n1} {A.window.n2}\n")
        for x, y in A.points():
            fh.write(f"{x} {y}\n")


def read_function_file(path, bounded: bool = True) -> DenseFunction:
    """Parse ``x_lo x_hi y_lo y_hi`` then ``x y re im`` lines; unlisted cells are 0."""
    lines = _data_lines(Path(path))
    try:
        _, header = next(lines)
    except StopIteration:
        raise ValueError(f"{path}: empty function file") from None
    x_lo, x_hi, y_lo, y_hi = (int(t) for t in header.split())
    vals = np.zeros((x_hi - x_lo + 1, y_hi - y_lo + 1), dtype=np.complex128)
    for lineno, line in lines:
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'x y re im', got {line!r}")
        x, y = int(parts[0]), int(parts[1])
        if not (x_lo <= x <= x_hi and y_lo <= y <= y_hi):
            raise WindowError(f"{path}:{lineno}: ({x}, {y}) outside the declared box")
        vals[x - x_lo, y - y_lo] = complex(float(parts[2]), float(parts[3]))
    return DenseFunction(x_lo, y_lo, vals, bounded=bounded)


def write_function_file(f: DenseFunction, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{f.x_lo} {f.x_hi} {f.y_lo} {f.y_hi}\n")
        xs, ys = np.nonzero(f.values)
        for i, j in zip(xs.tolist(), ys.tolist()):
            v = complex(f.values[i, j])
            fh.write(f"{f.x_lo + i} {f.y_lo + j} {v.real!r} {v.imag!r}\n")
