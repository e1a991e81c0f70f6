"""Popular differences: the energy-increment pipeline on 1_A, the brute-force
best difference, the 2-D threshold verdict and the lift of 1-D sets to 2-D."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .counting import count_for_difference, weighted_count
from .energy import DomainError, IncrementConfig, IncrementTrace, energy_increment_run
from .grid import DenseFunction, GridWindow, SetIndicator, density


def _order_key(d: int, count: int):
    # larger count first, then smaller |d|, then positive d
    return (-count, abs(d), d < 0)


def brute_force_best_difference(A: SetIndicator, d_range: tuple[int, int] | Iterable[int],
                                method: str = "bitparallel") -> tuple[int, int]:
    """argmax over nonzero d of the configuration count; ties go to smallest |d|, then d > 0."""
    if isinstance(d_range, tuple) and len(d_range) == 2:
        ds = range(d_range[0], d_range[1] + 1)
    else:
        ds = d_range
    ds = [d for d in ds if d != 0]
    if not ds:
        raise DomainError("no nonzero difference in range")
    scored = [(d, count_for_difference(A, d, method)) for d in ds]
    return min(scored, key=lambda dc: _order_key(*dc))


@dataclass
class PopularDifferenceReport:
    delta: float
    epsilon: float
    q: int
    M: int
    weighted_count: float
    threshold: float
    passed: bool
    best_d: int
    best_count: int
    trace: IncrementTrace

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "q": self.q,
            "M": self.M,
            "weighted_count": self.weighted_count,
            "threshold": self.threshold,
            "pass": self.passed,
            "best_d": self.best_d,
            "best_count": self.best_count,
            "termination": self.trace.termination,
            "trace": self.trace.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    CSV_FIELDS = ("delta", "epsilon", "q", "M", "weighted_count", "threshold", "pass",
                  "best_d", "best_count")

    def csv_row(self) -> list:
        d = self.to_dict()
        return [d[k] for k in self.CSV_FIELDS]


def _broad_range(n2: int) -> list[int]:
    # nonzero |d| < sqrt(N2)
    r = math.isqrt(n2 - 1) if n2 > 1 else 0
    return [d for d in range(-r, r + 1) if d != 0]


def popular_difference_search(A: SetIndicator, epsilon: float,
                              cfg: IncrementConfig | None = None) -> PopularDifferenceReport:
    """Run the increment on (1_A, 1_A, 1_A) and measure the resulting popular difference."""
    N1, N2 = A.window.n1, A.window.n2
    if not 0 < epsilon <= 0.5:
        raise DomainError(f"epsilon must lie in (0, 1/2], got {epsilon}")
    if N1 * N1 < N2:
        raise DomainError(f"need N1 >= sqrt(N2), got N1={N1}, N2={N2}")
    cfg = cfg or IncrementConfig(epsilon)
    f = DenseFunction.from_indicator(A)
    trace = energy_increment_run(f, f, f, cfg, A.window)
    delta = density(A)
    threshold = (delta**3 - epsilon) * N1 * N2
    q, M = trace.final.q, trace.final.M
    broad = _broad_range(N2)
    if trace.termination == "irregularity_small":
        wc = float(weighted_count(A, q, M))
        passed = wc >= threshold
        restricted = [q * d for d in range(-(M - 1), M) if d != 0]
        best_d, best_count = (brute_force_best_difference(A, restricted)
                              if restricted else (0, 0))
        if best_count == 0 and broad:
            # fall back so best_d is nonzero whenever some nonzero d has positive count
            alt = brute_force_best_difference(A, broad)
            if alt[1] > 0 or not restricted:
                best_d, best_count = alt
    else:
        wc = float(weighted_count(A, q, M)) if M >= 1 else 0.0
        best_d, best_count = brute_force_best_difference(A, broad) if broad else (0, 0)
        passed = best_count >= threshold
    return PopularDifferenceReport(delta, epsilon, q, M, wc, threshold, passed,
                                   best_d, best_count, trace)


@dataclass(frozen=True)
class ThresholdVerdict:
    holds: bool
    witness_d: int
    count: int
    threshold: float
    margin: float

    def to_dict(self) -> dict:
        return {"holds": self.holds, "witness_d": self.witness_d, "count": self.count,
                "threshold": self.threshold, "margin": self.margin}


def verify_2d_threshold(A: SetIndicator, epsilon: float) -> ThresholdVerdict:
    """Does some nonzero d have count >= (delta^3 - eps) N^2 on the square window [N]^2?"""
    N1, N2 = A.window.n1, A.window.n2
    if N1 != N2:
        raise DomainError(f"2-D threshold needs a square window, got {N1}x{N2}")
    if N1 < 2:
        raise DomainError("window too small for a nonzero difference")
    threshold = (density(A) ** 3 - epsilon) * N1 * N2
    d, c = brute_force_best_difference(A, (-(N1 - 1), N1 - 1))
    return ThresholdVerdict(c >= threshold, d, c, threshold, c - threshold)


# ---------------------------------------------------------------------------
# one-dimensional sets


def lift_1d(A1: Iterable[int], N: int) -> SetIndicator:
    """{(x, y) in [floor(sqrt N)] x [N] : x + y in A1}."""
    elems = sorted(set(A1))
    if any(not 1 <= a <= N for a in elems):
        bad = next(a for a in elems if not 1 <= a <= N)
        raise DomainError(f"element {bad} outside [1, {N}]")
    root = math.isqrt(N)
    member = np.zeros(2 * N + 2, dtype=bool)
    member[elems] = True
    x = np.arange(1, root + 1)[:, None]
    y = np.arange(1, N + 1)[None, :]
    return SetIndicator.from_mask(member[x + y])


def lift_cardinality(A1: Iterable[int], N: int) -> int:
    """|lift| counted from the 1-D side: sum over a of #{x in [sqrt N] : 1 <= a - x <= N}."""
    root = math.isqrt(N)
    return sum(sum(1 for x in range(1, root + 1) if 1 <= a - x <= N) for a in set(A1))


def count_1d(A1: Iterable[int], N: int, d: int) -> int:
    """#{x in A1 : x + d in A1 and x + d^2 in A1}."""
    s = set(A1)
    return sum(1 for x in s if x + d in s and x + d * d in s)


@dataclass(frozen=True)
class Transfer1D:
    d: int
    x0: int
    fiber_count: int
    progression_count: int


def transfer_1d(A1: Iterable[int], N: int, d: int) -> Transfer1D:
    """Pick the row x0 of the lift with the most configurations for d (smallest x0 on ties)
    and count y in [N] with x0+y, x0+y+d, x0+y+d^2 in A1."""
    A1 = set(A1)
    lifted = lift_1d(A1, N)
    m = lifted.to_mask()
    n1, n2 = m.shape
    s = d * d
    best_x, best = 1, -1
    for x in range(1, n1 + 1):
        if not 1 <= x + d <= n1 or s >= n2:
            c = 0
        else:
            c = int(np.count_nonzero(m[x - 1, :n2 - s] & m[x + d - 1, :n2 - s] & m[x - 1, s:]))
        if c > best:
            best_x, best = x, c
    prog = sum(1 for y in range(1, N + 1)
               if best_x + y in A1 and best_x + y + d in A1 and best_x + y + s in A1)
    return Transfer1D(d, best_x, best, prog)


@dataclass(frozen=True)
class OneDimVerdict:
    holds: bool
    witness_d: int
    count: int
    threshold: float
    lifted_threshold: float


def verify_1d_threshold(A1: Iterable[int], N: int, epsilon: float) -> OneDimVerdict:
    """Best nonzero d for #{x in A1 : x+d, x+d^2 in A1} against (delta^3 - 4 eps) N.

    The lifted argument yields ((delta - eps)^3 - eps) N, which dominates the
    reported threshold because (delta - eps)^3 >= delta^3 - 3 eps for delta <= 1.
    """
    A1 = set(A1)
    delta = len(A1) / N
    best_d, best = 1, -1
    for d in sorted(range(-(N - 1), N), key=lambda d: (abs(d), d < 0)):
        if d == 0:
            continue
        c = count_1d(A1, N, d)
        if c > best:
            best_d, best = d, c
    threshold = (delta**3 - 4 * epsilon) * N
    lifted = ((delta - epsilon) ** 3 - epsilon) * N
    return OneDimVerdict(best >= threshold, best_d, max(best, 0), threshold, lifted)
