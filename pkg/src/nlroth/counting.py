"""The counting operator for (x, y), (x + qd, y), (x, y + q^2 d^2), per-difference
configuration counts, the dual functions F and G, and the Blakley-Roy average.

Normalization: every operator computes the unnormalized sum internally and
divides by the area of the window it is given.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .grid import WORD_BITS, DenseFunction, GridWindow, SetIndicator, popcount
from .kernels import Kernel, fejer


class ContractError(ValueError):
    """An input violates an operation's precondition."""


@dataclass(frozen=True)
class CountingParams:
    N: int
    window: GridWindow
    q: int = 1
    M: int | None = None

    def __post_init__(self):
        if self.N < 1 or self.q < 1:
            raise ContractError("N and q must be positive integers")
        if self.M is None:
            object.__setattr__(self, "M", self.N)
        if self.M < 1:
            raise ContractError("M must be a positive integer")
        if self.localized and self.q * self.M > math.sqrt(self.window.n2):
            raise ContractError(
                f"localized count needs q*M <= sqrt(N2): {self.q}*{self.M} > sqrt({self.window.n2})")

    @property
    def localized(self) -> bool:
        return self.q != 1 or self.M != self.N


def _require_bounded(*fs: DenseFunction) -> None:
    for f in fs:
        if not f.bounded:
            raise ContractError("counting operators need 1-bounded inputs (bounded flag unset)")


def configuration_sum(f0: DenseFunction, f1: DenseFunction, f2: DenseFunction, q: int,
                      kernel: Kernel, box: tuple[int, int, int, int] | None = None) -> complex:
    """sum_{(x,y) in box} sum_d k(d) f0(x,y) f1(x+qd, y) f2(x, y+q^2 d^2).

    ``box`` defaults to f0's support box, which makes this the full Z^2 sum.
    """
    x_lo, x_hi, y_lo, y_hi = f0.box if box is None else box
    base = f0.sample(x_lo, x_hi, y_lo, y_hi)
    total = 0j
    for d, w in kernel.weights.items():
        s = q * q * d * d
        a = f1.sample(x_lo + q * d, x_hi + q * d, y_lo, y_hi)
        b = f2.sample(x_lo, x_hi, y_lo + s, y_hi + s)
        total += float(w) * complex(np.sum(base * a * b))
    return total


def lambda_(f0: DenseFunction, f1: DenseFunction, f2: DenseFunction, p: CountingParams) -> complex:
    """Counting operator, normalized by the window area.

    With q = 1, M = N and window [N] x [N^2] this is
    E_{x in [N]} E_{y in [N^2]} sum_d mu_N(d) f0(x,y) f1(x+d,y) f2(x,y+d^2).
    """
    _require_bounded(f0, f1, f2)
    w = p.window
    total = configuration_sum(f0, f1, f2, p.q, fejer(p.M), (1, w.n1, 1, w.n2))
    return total / w.area


# ---------------------------------------------------------------------------
# set counts


def _shift_down(rows: np.ndarray, s: int) -> np.ndarray:
    """Bit j of the result is bit j + s of the input (row-wise across words)."""
    k, b = divmod(s, WORD_BITS)
    W = rows.shape[1]
    out = np.zeros_like(rows)
    if k >= W:
        return out
    src = rows[:, k:]
    out[:, :W - k] = src >> np.uint64(b)
    if b and W - k > 1:
        out[:, :W - k - 1] |= src[:, 1:] << np.uint64(WORD_BITS - b)
    return out


def _count_bitparallel(A: SetIndicator, d: int) -> int:
    n1, n2 = A.window.n1, A.window.n2
    s = d * d
    if abs(d) >= n1 or s >= n2:
        return 0
    R = A.rows
    r0, r1 = (R[:n1 - d], R[d:]) if d >= 0 else (R[-d:], R[:n1 + d])
    return popcount(r0 & r1 & _shift_down(r0, s))


def _count_naive(A: SetIndicator, d: int) -> int:
    n1, n2 = A.window.n1, A.window.n2
    s = d * d
    if abs(d) >= n1 or s >= n2:
        return 0
    m = A.to_mask()
    m0, m1 = (m[:n1 - d], m[d:]) if d >= 0 else (m[-d:], m[:n1 + d])
    return int(np.count_nonzero(m0[:, :n2 - s] & m1[:, :n2 - s] & m0[:, s:]))


def count_for_difference(A: SetIndicator, d: int, method: str = "bitparallel") -> int:
    """#{(x, y) in A : (x + d, y) in A and (x, y + d^2) in A}."""
    if method == "bitparallel":
        return _count_bitparallel(A, d)
    if method == "naive":
        return _count_naive(A, d)
    raise ValueError(f"unknown counting method {method!r}")


@dataclass(frozen=True)
class CountProfile:
    d_values: tuple[int, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.d_values) != len(self.counts):
            raise ValueError("d_values and counts differ in length")
        if any(c < 0 for c in self.counts):
            raise ValueError("negative configuration count")

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.d_values, self.counts))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["d", "count"])
            w.writerows(zip(self.d_values, self.counts))

    def to_json(self) -> str:
        return json.dumps({"d": list(self.d_values), "count": list(self.counts)})


def count_profile(A: SetIndicator, d_range: tuple[int, int], method: str = "bitparallel",
                  threads: int = 1) -> CountProfile:
    """count_for_difference for every d in the closed interval d_range."""
    d_lo, d_hi = d_range
    ds = list(range(d_lo, d_hi + 1))
    if threads > 1 and len(ds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(lambda d: count_for_difference(A, d, method), ds))
    else:
        counts = [count_for_difference(A, d, method) for d in ds]
    return CountProfile(tuple(ds), tuple(counts))


def weighted_count(A: SetIndicator, q: int, M: int, method: str = "bitparallel") -> Fraction:
    """sum_d mu_M(d) #{(x,y) in A : (x+qd, y), (x, y+q^2 d^2) in A}, exactly."""
    k = fejer(M)
    return sum((w * count_for_difference(A, q * d, method) for d, w in k.weights.items()),
               Fraction(0))


def lambda_indicator(A: SetIndicator, p: CountingParams) -> float:
    """lambda_ on (1_A, 1_A, 1_A), routed through the packed counts."""
    return float(weighted_count(A, p.q, p.M) / p.window.area)


# ---------------------------------------------------------------------------
# dual functions


def dual_F(f0: DenseFunction, f1: DenseFunction, N: int) -> DenseFunction:
    """F(x, y) = sum_d mu_N(d) f0(x, y - d^2) f1(x + d, y - d^2)."""
    _require_bounded(f0, f1)
    k = fejer(N)
    x_lo, x_hi, y_lo, y_hi = f0.box
    reach = k.span ** 2
    out = np.zeros((x_hi - x_lo + 1, y_hi - y_lo + 1 + reach), dtype=np.complex128)
    width = y_hi - y_lo + 1
    for d, w in k.weights.items():
        prod = f0.values * f1.sample(x_lo + d, x_hi + d, y_lo, y_hi)
        out[:, d * d:d * d + width] += float(w) * prod
    return DenseFunction(x_lo, y_lo, out, bounded=True)


def dual_G(f0: DenseFunction, f2: DenseFunction, N: int) -> DenseFunction:
    """G(x, y) = sum_d mu_N(d) f0(x - d, y) f2(x - d, y + d^2)."""
    _require_bounded(f0, f2)
    k = fejer(N)
    x_lo, x_hi, y_lo, y_hi = f0.box
    span = k.span
    height = x_hi - x_lo + 1
    out = np.zeros((height + 2 * span, y_hi - y_lo + 1), dtype=np.complex128)
    for d, w in k.weights.items():
        prod = f0.values * f2.sample(x_lo, x_hi, y_lo + d * d, y_hi + d * d)
        out[span + d:span + d + height] += float(w) * prod
    return DenseFunction(x_lo - span, y_lo, out, bounded=True)


def pairing(f: DenseFunction, g: DenseFunction) -> complex:
    """sum_{x,y} f(x, y) g(x, y) (no conjugation)."""
    return complex(np.sum(f.values * g.sample(*f.box)))


# ---------------------------------------------------------------------------
# Blakley-Roy


def blakley_roy_sum(A: SetIndicator) -> int:
    """sum_{x,y} 1_A(x,y) R(y) C(x), with R the column counts and C the row counts."""
    m = A.to_mask()
    C = m.sum(axis=1, dtype=np.int64)
    R = m.sum(axis=0, dtype=np.int64)
    # terms are at most N1*N2 each and the area is capped at 2^31, so int64 is exact
    return int((C[:, None] * R[None, :])[m].sum(dtype=np.int64))


def blakley_roy_lhs(A: SetIndicator) -> float:
    """E_{x,y,x',y'} 1_A(x,y) 1_A(x',y) 1_A(x,y')."""
    area = A.window.area
    return float(Fraction(blakley_roy_sum(A), area * area))
