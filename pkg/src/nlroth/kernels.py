"""Fejer kernels, their stretched versions on q*Z, and 1-D convolution against fibers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from functools import cached_property, lru_cache
from typing import Mapping

import numpy as np
from scipy.signal import fftconvolve

from .grid import Fiber

FFT_CROSSOVER = 2**15


class KernelError(ValueError):
    pass


@dataclass(frozen=True)
class Kernel:
    """Nonnegative, symmetric, unit-mass weights on Z, supported on stride*Z.

    ``weights`` maps offsets to exact fractions; ``dense`` is the float mirror
    indexed from ``-span`` to ``span``.
    """

    stride: int
    halfwidth: float
    weights: Mapping[int, Fraction]

    def __post_init__(self):
        if self.stride < 1:
            raise KernelError(f"stride must be positive, got {self.stride}")
        w = {int(h): Fraction(v) for h, v in self.weights.items() if v != 0}
        if any(v < 0 for v in w.values()):
            raise KernelError("kernel weights must be nonnegative")
        if sum(w.values()) != 1:
            raise KernelError(f"kernel mass is {sum(w.values())}, not 1")
        if any(w.get(-h) != v for h, v in w.items()):
            raise KernelError("kernel weights are not symmetric")
        reach = math.floor(self.halfwidth) * self.stride
        if any(h % self.stride or abs(h) >= reach for h in w):
            raise KernelError("kernel support escapes {q*k : |k| < floor(H)}")
        object.__setattr__(self, "weights", MappingProxyType(dict(sorted(w.items()))))

    @cached_property
    def span(self) -> int:
        """Largest offset carrying weight."""
        return max(self.weights)

    @property
    def support_size(self) -> int:
        return len(self.weights)

    @cached_property
    def dense(self) -> np.ndarray:
        span = self.span
        out = np.zeros(2 * span + 1)
        for h, v in self.weights.items():
            out[h + span] = float(v)
        out.setflags(write=False)
        return out

    def mass(self) -> Fraction:
        return sum(self.weights.values(), Fraction(0))

    def is_symmetric(self) -> bool:
        return all(self.weights.get(-h) == v for h, v in self.weights.items())

    def __call__(self, h: int) -> Fraction:
        return self.weights.get(h, Fraction(0))

    def to_text(self) -> str:
        return "\n".join(f"{h} {v.numerator}/{v.denominator}" for h, v in self.weights.items())


@lru_cache(maxsize=256)
def fejer(H: float) -> Kernel:
    """mu_H(h) = (1/floor(H)) * (1 - |h|/floor(H))_+ on Z."""
    if not H >= 1:
        raise KernelError(f"Fejer kernel needs H >= 1, got {H}")
    n = math.floor(H)
    weights = {h: Fraction(n - abs(h), n * n) for h in range(-n + 1, n)}
    return Kernel(1, H, weights)


def stretch(k: Kernel, q: int) -> Kernel:
    """Move k onto q*Z: w'(q*h) = w(h)."""
    if q <= 0:
        raise KernelError(f"stretch factor must be positive, got {q}")
    if k.stride != 1:
        raise KernelError("only stride-1 kernels can be stretched")
    return Kernel(q, k.halfwidth, {q * h: v for h, v in k.weights.items()})


@lru_cache(maxsize=256)
def stretched_fejer(q: int, H: float) -> Kernel:
    """mu_{q,H}(y) = 1_{qZ}(y) mu_H(y/q)."""
    return stretch(fejer(H), q)


def compose(k1: Kernel, k2: Kernel) -> Kernel:
    """Exact convolution of two weight tables (k1 * k2)."""
    out: dict[int, Fraction] = {}
    for h1, v1 in k1.weights.items():
        for h2, v2 in k2.weights.items():
            out[h1 + h2] = out.get(h1 + h2, Fraction(0)) + v1 * v2
    stride = math.gcd(k1.stride, k2.stride)
    return Kernel(stride, (k1.span + k2.span) // stride + 1, out)


def _convolve_direct(values: np.ndarray, k: Kernel) -> np.ndarray:
    span = k.span
    out = np.zeros(len(values) + 2 * span, dtype=np.complex128)
    n = len(values)
    for h, v in k.weights.items():
        out[span + h:span + h + n] += float(v) * values
    return out


def convolve(f: Fiber, k: Kernel, method: str = "auto", crossover: int | None = None) -> Fiber:
    """(f * k)(y) = sum_h f(y - h) k(h) on [f.lo - span, f.hi + span]."""
    if method not in ("auto", "direct", "fft"):
        raise ValueError(f"unknown convolution method {method!r}")
    span = k.span
    if len(f) == 0:
        return Fiber(f.lo - span, np.zeros(2 * span))
    if method == "auto":
        limit = FFT_CROSSOVER if crossover is None else crossover
        method = "fft" if len(f) * k.support_size > limit else "direct"
    if method == "direct":
        vals = _convolve_direct(f.values, k)
    else:
        vals = fftconvolve(f.values, k.dense.astype(np.complex128), mode="full")
    return Fiber(f.lo - span, vals)


def convolve_rows(values: np.ndarray, k: Kernel) -> np.ndarray:
    """Convolve every row of a 2-D array along axis 1 (full output, width grows by 2*span)."""
    if values.shape[1] * k.support_size <= FFT_CROSSOVER:
        span = k.span
        n = values.shape[1]
        out = np.zeros((values.shape[0], n + 2 * span), dtype=np.complex128)
        for h, v in k.weights.items():
            out[:, span + h:span + h + n] += float(v) * values
        return out
    return fftconvolve(values, k.dense[None, :].astype(np.complex128), mode="full", axes=1)
