"""Energy, irregularity, and the iterative energy increment.

The existential inverse step of the increment is replaced by an explicit
search: scan the fiber spectrum of f2 minus its smoothing, certify the top
frequencies as major arcs, and accept a new stride only when the energy gain
is measured to clear the threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .counting import configuration_sum
from .expsums import fiber_correlation_scan, rationalize
from .grid import DenseFunction, Fiber, GridWindow
from .kernels import Kernel, convolve, convolve_rows, fejer, stretched_fejer

SPECTRAL_TOP = 8

TERMINATIONS = ("irregularity_small", "window_exhausted", "stage_cap")


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class IncrementConfig:
    """Knobs of the increment; unset ones default to eps^4, ceil(eps^-2), eps^2 and ceil(1/eta) + 2."""

    epsilon: float
    eta: float | None = None
    q_tilde_max: int | None = None
    m_shrink: float | None = None
    max_stages: int | None = None

    def __post_init__(self):
        eps = self.epsilon
        if not 0 < eps <= 0.5:
            raise DomainError(f"epsilon must lie in (0, 1/2], got {eps}")
        if self.eta is None:
            object.__setattr__(self, "eta", eps**4)
        if self.q_tilde_max is None:
            object.__setattr__(self, "q_tilde_max", math.ceil(eps**-2))
        if self.m_shrink is None:
            object.__setattr__(self, "m_shrink", eps**2)
        if self.max_stages is None:
            object.__setattr__(self, "max_stages", math.ceil(1 / self.eta) + 2)
        if not self.eta > 0:
            raise DomainError("eta must be positive")
        if self.q_tilde_max < 1:
            raise DomainError("q_tilde_max must be a positive integer")
        if not 0 < self.m_shrink < 1:
            raise DomainError("m_shrink must lie in (0, 1)")
        if self.max_stages < math.ceil(1 + 1 / self.eta):
            raise DomainError(f"max_stages must be at least ceil(1 + 1/eta) = {math.ceil(1 + 1 / self.eta)}")


@dataclass(frozen=True)
class EnergyState:
    stage: int
    q: int
    M: int
    energy: float
    irregularity: float | None = None
    accepted_q_tilde: int | None = None


@dataclass
class IncrementTrace:
    states: list[EnergyState] = field(default_factory=list)
    termination: str = ""
    window: tuple[int, int] = (0, 0)
    epsilon: float = 0.0

    @property
    def final(self) -> EnergyState:
        return self.states[-1]

    def to_dict(self) -> dict:
        return {
            "states": [asdict(s) for s in self.states],
            "termination": self.termination,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def smoothing_kernel(q: int, M: int) -> Kernel:
    """mu_{q^2, M^2}: the Fejer kernel of width M^2 placed on q^2 Z."""
    return stretched_fejer(q * q, M * M)


def smooth(f2: DenseFunction, q: int, M: int) -> DenseFunction:
    """Vertical smoothing y -> sum_t mu_{M^2}(t) f2(x, y + q^2 t), fiber by fiber."""
    k = smoothing_kernel(q, M)
    vals = convolve_rows(f2.values, k)
    return DenseFunction(f2.x_lo, f2.y_lo - k.span, vals, bounded=f2.bounded)


def smoothing_defect(f2: DenseFunction, q: int, M: int) -> DenseFunction:
    """f2 minus its vertical smoothing, on the enlarged box."""
    s = smooth(f2, q, M)
    return DenseFunction(s.x_lo, s.y_lo, f2.sample(*s.box) - s.values)


def energy(f2: DenseFunction, q: int, M: int) -> float:
    """sum_x || f2^x * mu_{q^2, M^2} ||_2^2."""
    s = smooth(f2, q, M)
    per_fiber = np.sum(np.abs(s.values) ** 2, axis=1)
    total = 0.0
    for v in per_fiber.tolist():
        total += v
    return total


def _irregularity(f0, f1, f2, q: int, M: int, short: float) -> float:
    g2 = smoothing_defect(f2, q, M)
    return abs(configuration_sum(f0, f1, g2, q, fejer(short)))


def irregularity(f0: DenseFunction, f1: DenseFunction, f2: DenseFunction,
                 q: int, M: int, epsilon: float) -> float:
    """|sum_{x,y,d} mu_{eps M}(d) f0(x,y) f1(x+qd,y) [f2 - smoothed f2](x, y+q^2 d^2)|."""
    if math.floor(epsilon * M) < 1:
        raise DomainError(f"floor(eps*M) = floor({epsilon}*{M}) < 1: short kernel undefined")
    return _irregularity(f0, f1, f2, q, M, epsilon * M)


def spectral_candidate(f2: DenseFunction, q: int, M: int, cfg: IncrementConfig,
                       top: int = SPECTRAL_TOP) -> list[tuple[int, float]]:
    """Candidate strides q~ <= q_tilde_max, ranked by certified correlation score.

    Scans the vertical spectrum of f2 minus its (q, M) smoothing on the major
    arcs of level q_tilde_max at scale M^2, then certifies the best frequencies.
    """
    g2 = smoothing_defect(f2, q, M)
    S = float(M * M)
    spectrum = fiber_correlation_scan(g2, "vertical", cfg.q_tilde_max, S)
    floor_ = 1e-12 * max(1.0, float(np.abs(g2.values).sum()))
    best: dict[int, float] = {}
    for entry in spectrum[:top]:
        if entry.score <= floor_:
            break
        cert = rationalize(entry.freq, cfg.q_tilde_max, S)
        if cert is None:
            continue
        best[cert.q] = max(best.get(cert.q, 0.0), entry.score)
    return sorted(best.items(), key=lambda kv: (-round(kv[1], 9), kv[0]))


def energy_increment_run(f0: DenseFunction, f1: DenseFunction, f2: DenseFunction,
                         cfg: IncrementConfig, window: GridWindow) -> IncrementTrace:
    """Iterate (q, M) -> (q q~, floor(m_shrink M / q~)) while the count stays irregular.

    The short kernel mu_{eps M} is clamped to a point mass when eps*M < 1, and
    a window with floor(eps sqrt(N2)) = 0 exits at once as window_exhausted.
    """
    N1, N2 = window.n1, window.n2
    if N2 < 4:
        raise DomainError("energy increment needs N2 >= 4")
    eps = cfg.epsilon
    q, M = 1, math.floor(eps * math.sqrt(N2))
    threshold = eps * N1 * N2
    gain_needed = cfg.eta * N1 * N2
    trace = IncrementTrace(window=(N1, N2), epsilon=eps)
    if M < 1:
        # no admissible scale at all: the small-M exit, recorded with unsmoothed energy
        trace.states.append(EnergyState(0, q, M, energy(f2, 1, 1)))
        trace.termination = "window_exhausted"
        return trace
    E = energy(f2, q, M)
    accepted = None
    stage = 0
    while True:
        irr = _irregularity(f0, f1, f2, q, M, max(1.0, eps * M))
        trace.states.append(EnergyState(stage, q, M, E, irr, accepted))
        if irr <= threshold:
            trace.termination = "irregularity_small"
            break
        if stage >= cfg.max_stages:
            trace.termination = "stage_cap"
            break
        choice = None
        for q_tilde, _score in spectral_candidate(f2, q, M, cfg):
            M_tilde = math.floor(cfg.m_shrink * M / q_tilde)
            if M_tilde < 2:
                continue
            E_new = energy(f2, q * q_tilde, M_tilde)
            if choice is None or E_new - E > choice[0]:
                choice = (E_new - E, q_tilde, M_tilde, E_new)
        if choice is None or choice[0] < gain_needed:
            trace.termination = "window_exhausted"
            break
        _, accepted, M, E = choice
        q *= accepted
        stage += 1
    return trace


def orthogonality_defect(f: Fiber, q: int, M: int, q_tilde: int, M_tilde: int) -> float:
    """|<f * mu_{q^2,M^2}, f * (mu_{q^2,M^2} - mu_{(q q~)^2, M~^2})>| / ||f||_2^2."""
    a = convolve(f, smoothing_kernel(q, M))
    b = convolve(f, smoothing_kernel(q * q_tilde, M_tilde))
    lo, hi = min(a.lo, b.lo), max(a.hi, b.hi)
    av, bv = a.on(lo, hi), b.on(lo, hi)
    inner = np.vdot(av - bv, av)
    return float(abs(inner) / np.sum(np.abs(f.values) ** 2))
