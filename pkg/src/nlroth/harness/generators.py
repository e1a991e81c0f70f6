"""Seeded set and function generators.

All randomness comes from numpy's counter-based Philox bit generator keyed by
the user seed, so streams are identical across platforms and runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import DenseFunction, GridWindow, SetIndicator, indicator_from_points, read_set_file

KINDS = ("random_density", "product", "stripe", "random_phase_triple", "from_file")
RANDOM_KINDS = ("random_density", "random_phase_triple")


class GeneratorError(ValueError):
    pass


def rng_for(seed: int) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise GeneratorError("a nonnegative integer seed is required")
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    n1: int | None = None
    n2: int | None = None
    density: float | None = None
    seed: int | None = None
    stride: int | None = None
    b: tuple[int, ...] = field(default_factory=tuple)
    c: tuple[int, ...] = field(default_factory=tuple)
    n: int | None = None
    path: str | None = None

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown generator kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.kind in RANDOM_KINDS and self.seed is None:
            raise GeneratorError(f"{self.kind} requires a seed")
        if self.kind in ("random_density", "product", "stripe"):
            if not self.n1 or not self.n2 or self.n1 < 1 or self.n2 < 1:
                raise GeneratorError(f"{self.kind} requires positive n1 and n2")
        if self.kind == "random_density":
            if self.density is None or not 0 <= self.density <= 1:
                raise GeneratorError("random_density requires a density in [0, 1]")
        if self.kind == "stripe" and (self.stride is None or self.stride < 1):
            raise GeneratorError("stripe requires a positive stride")
        if self.kind == "product":
            if any(not 1 <= x <= self.n1 for x in self.b) or any(not 1 <= y <= self.n2 for y in self.c):
                raise GeneratorError("product factor sets must lie inside the window")
        if self.kind == "random_phase_triple" and (self.n is None or self.n < 1):
            raise GeneratorError("random_phase_triple requires a positive n")
        if self.kind == "from_file" and not self.path:
            raise GeneratorError("from_file requires a path")


def random_density(n1: int, n2: int, delta: float, seed: int) -> SetIndicator:
    """Each cell of [n1] x [n2] kept independently with probability delta."""
    rng = rng_for(seed)
    return SetIndicator.from_mask(rng.random((n1, n2)) < delta)


def product(b, c, window: GridWindow) -> SetIndicator:
    return indicator_from_points([(x, y) for x in sorted(set(b)) for y in sorted(set(c))], window)


def stripe(n1: int, n2: int, r: int, offset: int = 0) -> SetIndicator:
    """[n1] x {y in [n2] : y = offset mod r}."""
    mask = np.zeros((n1, n2), dtype=bool)
    ys = np.arange(1, n2 + 1)
    mask[:, (ys - offset) % r == 0] = True
    return SetIndicator.from_mask(mask)


def random_phase_triple(N: int, seed: int) -> tuple[DenseFunction, DenseFunction, DenseFunction]:
    """phi : [N^2] -> {+1, -1} uniform; on [N] x [N^2]

        f0 = phi(x) phi(y) (-1)^(x+y),  f1 = (-1)^x phi(y),  f2 = phi(x) (-1)^y.

    Every product f0(x,y) f1(x+d,y) f2(x,y+d^2) on the common support is
    (-1)^(d + d^2) = 1, yet the fibers of f1 and f2 carry the random phi.
    """
    rng = rng_for(seed)
    phi = np.where(rng.random(N * N) < 0.5, 1.0, -1.0)
    x = np.arange(1, N + 1)[:, None]
    y = np.arange(1, N * N + 1)[None, :]
    px, py = phi[x - 1], phi[y - 1]
    sx, sy = (-1.0) ** x, (-1.0) ** y
    f0 = DenseFunction(1, 1, px * py * sx * sy, bounded=True)
    f1 = DenseFunction(1, 1, np.broadcast_to(sx * py, (N, N * N)), bounded=True)
    f2 = DenseFunction(1, 1, np.broadcast_to(px * sy, (N, N * N)), bounded=True)
    return f0, f1, f2


def generate(spec: GeneratorSpec):
    """SetIndicator for set kinds, a triple of DenseFunction for random_phase_triple."""
    spec.validate()
    if spec.kind == "random_density":
        return random_density(spec.n1, spec.n2, spec.density, spec.seed)
    if spec.kind == "product":
        return product(spec.b, spec.c, GridWindow(spec.n1, spec.n2))
    if spec.kind == "stripe":
        return stripe(spec.n1, spec.n2, spec.stride)
    if spec.kind == "random_phase_triple":
        return random_phase_triple(spec.n, spec.seed)
    return read_set_file(spec.path)
