"""Torus norms, Weyl sums, Fourier coefficients of fibers, major-arc
certificates and frequency clustering.

Frequencies are plain floats reduced into [0, 1).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .grid import DenseFunction, Fiber
from .kernels import fejer

MAX_CONVERGENTS = 64
ARC_STEPS = 2
_SCAN_CHUNK = 1 << 22


def e(theta):
    """e(theta) = exp(2 pi i theta)."""
    return np.exp(2j * np.pi * np.asarray(theta, dtype=float))


def frequency(a: float) -> float:
    """Reduce a real number into [0, 1)."""
    v = float(a) % 1.0
    return 0.0 if v >= 1.0 else v


def torus_norm(a) -> float:
    """Distance from a to the nearest integer."""
    a = np.asarray(a, dtype=float)
    out = np.abs(a - np.round(a))
    return float(out) if out.ndim == 0 else out


def weyl_sum(alpha: float, beta: float, N: int) -> complex:
    """sum_d mu_N(d) e(alpha d^2 + beta d)."""
    if N < 1:
        raise ValueError("N must be positive")
    k = fejer(N)
    d = np.arange(-k.span, k.span + 1)
    phase = (alpha * (d * d).astype(float)) % 1.0 + (beta * d) % 1.0
    return complex(np.dot(k.dense, e(phase)))


def fourier_coefficient(f: Fiber, alpha: float) -> complex:
    """sum_y f(y) e(alpha y)."""
    y = np.arange(f.lo, f.hi + 1)
    return complex(np.dot(f.values, e((alpha * y) % 1.0)))


# ---------------------------------------------------------------------------
# major arcs


def convergents(alpha: float, depth: int = MAX_CONVERGENTS) -> Iterator[tuple[int, int]]:
    """Continued-fraction convergents (p, q) of alpha, at most ``depth`` of them."""
    a0 = math.floor(alpha)
    p_prev, p = 1, a0
    q_prev, q = 0, 1
    yield p, q
    x = alpha - a0
    for _ in range(depth - 1):
        if x < 1e-15:
            return
        x = 1.0 / x
        a = math.floor(x)
        x -= a
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        yield p, q


@dataclass(frozen=True)
class MajorArcCertificate:
    """Verified witness that ||q alpha|| <= Q / S with q <= Q."""

    alpha: float
    q: int
    Q: int
    S: float
    achieved: float = field(init=False)

    def __post_init__(self):
        if not 1 <= self.q <= self.Q:
            raise ValueError(f"certificate q={self.q} outside [1, {self.Q}]")
        achieved = torus_norm(self.q * self.alpha) * self.S
        if achieved > self.Q:
            raise ValueError(f"||{self.q} alpha|| * S = {achieved} exceeds Q = {self.Q}")
        object.__setattr__(self, "achieved", achieved)


def rationalize(alpha: float, Q: int, S: float) -> MajorArcCertificate | None:
    """Smallest q <= Q with ||q alpha||_T <= Q/S, or None.

    Convergent denominators are best approximations, so the first convergent
    meeting the bound is the least such q; a direct scan below it guards
    against floating-point drift in the expansion.
    """
    if Q < 1 or not S > 0:
        raise ValueError("rationalize needs Q >= 1 and S > 0")
    alpha = frequency(alpha)
    bound = Q / S
    found = None
    for _, q in convergents(alpha):
        if q > Q:
            break
        if torus_norm(q * alpha) <= bound:
            found = q
            break
    if found is None:
        return None
    if found > 1:
        qs = np.arange(1, found)
        ok = np.flatnonzero(torus_norm(qs * alpha) <= bound)
        if ok.size:
            found = int(qs[ok[0]])
    return MajorArcCertificate(alpha, found, Q, S)


def _grid_size(Q: int, S: float):
    T = 100 * Q * S
    return int(round(T)) if abs(T - round(T)) < 1e-9 else T


@dataclass(frozen=True)
class FrequencyCluster:
    representative: float
    members: tuple[int, ...]
    T: float
    t: int

    @property
    def size(self) -> int:
        return len(self.members)


def cluster_major_arcs(freqs: Sequence[float], Q: int, S: float) -> list[FrequencyCluster]:
    """Round onto the t/T grid (T = 100 Q S) and group equal roundings.

    Sorted by descending size, then ascending representative.
    """
    T = _grid_size(Q, S)
    groups: dict[int, list[int]] = {}
    for m, a in enumerate(freqs):
        t = int(round(frequency(a) * T))
        if isinstance(T, int):
            t %= T
        groups.setdefault(t, []).append(m)
    clusters = [FrequencyCluster(t / T, tuple(ms), T, t) for t, ms in groups.items()]
    clusters.sort(key=lambda c: (-c.size, c.representative))
    return clusters


def packing_bound(Q: int, S: float) -> float:
    """Volume-packing count of 1/T-separated points in the Q-major arcs."""
    T = 100 * Q * S
    return sum(q * (1 + 4 * Q * T / (q * S)) for q in range(1, Q + 1))


# ---------------------------------------------------------------------------
# fiber correlation scans


@dataclass(frozen=True)
class SpectrumEntry:
    freq: float
    score: float
    num: int | float
    den: int | float


def candidate_frequencies(Q: int, S: float, steps: int = ARC_STEPS) -> list[tuple[float, int | float, int | float]]:
    """Grid {a/q + j/T : q <= Q, gcd(a, q) = 1, |j| <= steps} reduced mod 1.

    Returns (value, numerator, denominator) triples, exact when T is an integer.
    """
    T = _grid_size(Q, S)
    seen: dict = {}
    for q in range(1, Q + 1):
        for a in range(q):
            if math.gcd(a, q) != 1:
                continue
            for j in range(-steps, steps + 1):
                if isinstance(T, int):
                    fr = (Fraction(a, q) + Fraction(j, T)) % 1
                    seen.setdefault(fr, (float(fr), fr.numerator, fr.denominator))
                else:
                    v = frequency(a / q + j / T)
                    seen.setdefault(round(v, 15), (v, v, 1))
    return sorted(seen.values())


def correlation_scores(values: np.ndarray, coords: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """sum over rows of |sum_cols values[row, col] e(freq * coords[col])| for each freq."""
    scores = np.empty(len(freqs))
    chunk = max(1, _SCAN_CHUNK // max(len(coords), 1))
    for s in range(0, len(freqs), chunk):
        fs = freqs[s:s + chunk]
        E = e(np.outer(coords, fs) % 1.0)
        scores[s:s + chunk] = np.abs(values @ E).sum(axis=0)
    return scores


def _rank(entries: list[SpectrumEntry]) -> list[SpectrumEntry]:
    scale = max((en.score for en in entries), default=0.0) or 1.0
    return sorted(entries, key=lambda en: (-round(en.score / scale, 12), en.freq))


def fiber_correlation_scan(f: DenseFunction, direction: str, Q: int, S: float,
                           top: int | None = None) -> list[SpectrumEntry]:
    """Score major-arc candidate frequencies against the fibers of f.

    vertical:   score(alpha) = sum_x |sum_y f(x, y) e(alpha y)|
    horizontal: score(beta)  = sum_y |sum_x f(x, y) e(beta x)|
    """
    if direction == "vertical":
        values = f.values
        coords = np.arange(f.y_lo, f.y_hi + 1)
    elif direction == "horizontal":
        values = f.values.T
        coords = np.arange(f.x_lo, f.x_hi + 1)
    else:
        raise ValueError(f"direction must be 'vertical' or 'horizontal', got {direction!r}")
    cands = candidate_frequencies(Q, S)
    freqs = np.array([c[0] for c in cands])
    scores = correlation_scores(values, coords, freqs)
    entries = _rank([SpectrumEntry(v, float(sc), n, d) for (v, n, d), sc in zip(cands, scores)])
    return entries if top is None else entries[:top]


def write_spectrum_csv(entries: Sequence[SpectrumEntry], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["freq_num", "freq_den_or_grid", "score"])
        for en in entries:
            w.writerow([_fmt(en.num), _fmt(en.den), f"{en.score:.12g}"])


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else f"{v:.12g}"
