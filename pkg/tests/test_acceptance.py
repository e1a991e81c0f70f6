"""Acceptance criteria 1-10.

Each criterion prints one line ``criterion N (<name>): PASS|FAIL in T s [limit L s] ...``
to the terminal, also under ``pytest -q``.  Run the file directly with
``python tests/test_acceptance.py`` to get the same lines without pytest.
"""

import contextlib
import io
import math
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from conftest import philox, random_bounded, random_set  # noqa: E402
from nlroth.counting import (CountingParams, blakley_roy_lhs, count_for_difference, dual_F, dual_G,  # noqa: E402
                             lambda_, lambda_indicator, pairing)
from nlroth.energy import IncrementConfig, energy_increment_run  # noqa: E402
from nlroth.expsums import fourier_coefficient, rationalize, torus_norm  # noqa: E402
from nlroth.gowers import gowers_sum  # noqa: E402
from nlroth.grid import DenseFunction, Fiber, GridWindow, SetIndicator, density, indicator_from_points  # noqa: E402
from nlroth.harness.cli import main as cli_main  # noqa: E402
from nlroth.harness.generators import random_phase_triple, stripe  # noqa: E402
from nlroth.harness.runner import hash_outputs  # noqa: E402
from nlroth.kernels import convolve, fejer, stretched_fejer  # noqa: E402
from nlroth.popular import (brute_force_best_difference, popular_difference_search,  # noqa: E402
                            verify_2d_threshold)

pytestmark = pytest.mark.acceptance


def _emit(line: str, config=None) -> None:
    tr = config.pluginmanager.getplugin("terminalreporter") if config is not None else None
    if tr is not None:
        tr.write_line(line)
    else:
        print(line, flush=True)


def _run(number: int, name: str, limit: float, check, config=None):
    t0 = time.perf_counter()
    try:
        detail = check()
        ok, err = True, None
    except AssertionError as exc:
        detail, ok, err = str(exc).splitlines()[0] if str(exc) else "assertion failed", False, exc
    elapsed = time.perf_counter() - t0
    within = elapsed < limit
    status = "PASS" if ok and within else "FAIL"
    note = detail if within else f"{detail}; runtime over budget"
    _emit(f"criterion {number} ({name}): {status} in {elapsed:.2f} s [limit {limit:g} s] {note}", config)
    if err is not None:
        raise err
    assert within, f"criterion {number} took {elapsed:.2f} s, limit {limit} s"


# ---------------------------------------------------------------------------


def check_counting_oracle():
    rng = philox(1)
    combos = [(n, dl) for n in (8, 16, 32) for dl in (0.1, 0.5, 0.9)]
    compared = 0
    for i in range(200):
        n, delta = combos[i % len(combos)]
        A = random_set(rng, n, n, delta)
        for d in range(-(n - 1), n):
            a, b = count_for_difference(A, d, "bitparallel"), count_for_difference(A, d, "naive")
            assert a == b, f"set {i} d={d}: bitparallel {a} != naive {b}"
            compared += 1
    return f"{compared} (set, d) pairs identical"


def check_dual_identities():
    rng = philox(2)
    worst = 0.0
    for N, trials in ((4, 25), (8, 25)):
        p = CountingParams(N, GridWindow(N, N * N))
        for _ in range(trials):
            f0, f1, f2 = (random_bounded(rng, (1, N, 1, N * N)) for _ in range(3))
            lam = lambda_(f0, f1, f2, p)
            via_F = pairing(dual_F(f0, f1, N), f2) / N**3
            via_G = pairing(dual_G(f0, f2, N), f1) / N**3
            for other in (via_F, via_G):
                rel = abs(lam - other) / abs(lam)
                worst = max(worst, rel)
                assert rel <= 1e-9, f"N={N}: relative gap {rel:.3g}"
    return f"50 triples, worst relative gap {worst:.2e}"


def check_blakley_roy():
    rng = philox(3)
    worst = math.inf
    sets = []
    for _ in range(500):
        n1, n2 = (int(v) for v in rng.integers(1, 48, size=2))
        sets.append(random_set(rng, n1, n2, float(rng.random())))
    for n in (6, 17, 40):
        w = GridWindow(n, n)
        for _ in range(20):
            B = [x for x in range(1, n + 1) if rng.random() < rng.random()]
            C = [y for y in range(1, n + 1) if rng.random() < rng.random()]
            sets.append(indicator_from_points([(b, c) for b in B for c in C], w))
        sets.append(indicator_from_points([(1, y) for y in range(1, n + 1)], w))
        sets.append(indicator_from_points([(x, 1) for x in range(1, n + 1)], w))
        sets.append(indicator_from_points([(x, x) for x in range(1, n + 1)], w))
    for A in sets:
        gap = blakley_roy_lhs(A) - density(A) ** 3
        worst = min(worst, gap)
        assert gap >= -1e-12, f"{A!r}: lhs - density^3 = {gap:.3g}"
    return f"{len(sets)} sets, smallest lhs - density^3 = {worst:.3g}"


def check_kernels():
    built = 0
    for H in range(1, 121):
        for q in (1, 2, 3, 5, 8):
            for frac in (0.0, 0.5):
                k = stretched_fejer(q, H + frac) if q > 1 else fejer(H + frac)
                assert sum(k.weights.values(), Fraction(0)) == 1, f"mass of ({q}, {H})"
                assert all(k.weights.get(-h) == v for h, v in k.weights.items()), f"symmetry of ({q}, {H})"
                built += 1
    rng = philox(4)
    worst = 0.0
    for _ in range(100):
        L = int(rng.integers(1, 4097))
        f = Fiber(0, rng.standard_normal(L) + 1j * rng.standard_normal(L))
        k = stretched_fejer(int(rng.integers(1, 4)), float(rng.integers(1, 33)))
        a, b = convolve(f, k, "direct"), convolve(f, k, "fft")
        gap = float(np.max(np.abs(a.values - b.values)))
        worst = max(worst, gap)
        assert gap <= 1e-9, f"direct vs fft gap {gap:.3g}"
    return f"{built} kernels exact; worst direct/fft gap {worst:.2e}"


def check_gowers():
    pair = Fiber.indicator(1, 2)
    assert gowers_sum(pair, 2, method="direct") == 6 == oracles.gowers_sum([1, 1], 2).real
    assert gowers_sum(pair, 3, method="direct") == 8 == oracles.gowers_sum([1, 1], 3).real
    rng = philox(5)
    worst = 0.0
    for _ in range(20):
        L = int(rng.integers(1, 65))
        f = Fiber(1, rng.standard_normal(L) + 1j * rng.standard_normal(L))
        K = 4 * L
        moment = sum(abs(fourier_coefficient(f, j / K)) ** 4 for j in range(K)) / K
        rel = abs(gowers_sum(f, 2, method="direct") - moment) / moment
        worst = max(worst, rel)
        assert rel <= 1e-6, f"length {L}: relative gap {rel:.3g}"
    return f"U2=6, U3=8 exact; worst fourth-moment gap {worst:.2e}"


def check_major_arcs():
    rng = philox(6)
    S, Q = 1e4, 100
    for i in range(100):
        q0 = int(rng.integers(1, 21))
        a = int(rng.integers(0, q0))
        while math.gcd(a, q0) != 1:
            a = int(rng.integers(0, q0))
        alpha = (a / q0 + float(rng.uniform(-5, 5)) / S) % 1.0
        cert = rationalize(alpha, Q, S)
        assert cert is not None, f"planted {a}/{q0}: no certificate"
        assert cert.q <= Q and torus_norm(cert.q * alpha) * S <= Q, f"planted {a}/{q0}: bad certificate"
    generic = [math.sqrt(p) % 1.0 for p in (2, 3, 5, 6, 7, 8, 10, 11, 12, 13, 14, 15, 17, 18, 19, 20,
                                            21, 22, 23, 24)]
    for alpha in generic:
        assert all(torus_norm(q * alpha) * 1e6 > 5 for q in range(1, 6))
        assert rationalize(alpha, 5, 1e6) is None, f"{alpha}: spurious certificate"
    return "100 planted certified; 20 quadratic irrationals absent"


def check_energy_increment():
    eps = 0.15
    cfg = IncrementConfig(eps, q_tilde_max=4, m_shrink=0.75)
    w = GridWindow(8, 4096)
    out = []
    for r in (2, 3):
        f = DenseFunction.from_indicator(stripe(8, 4096, r))
        tr = energy_increment_run(f, f, f, cfg, w)
        st = tr.states
        assert len(st) == 2 and st[1].accepted_q_tilde == r, f"r={r}: trace {[s.accepted_q_tilde for s in st]}"
        assert tr.termination == "irregularity_small" and st[1].stage == 1, f"r={r}: {tr.termination}"
        assert all(b.energy > a.energy for a, b in zip(st, st[1:])), f"r={r}: energy not increasing"
        assert all(s.q * s.M <= eps * math.sqrt(w.n2) for s in st), f"r={r}: q*M too large"
        out.append(f"r={r}: (q,M) {[(s.q, s.M) for s in st]}")
    return "; ".join(out)


def check_popular():
    for N in (10, 32, 64):
        rep = popular_difference_search(SetIndicator.full(GridWindow(N, N)), 0.25)
        assert (rep.best_d, rep.best_count) == (1, (N - 1) ** 2), f"N={N}: {rep.best_d}, {rep.best_count}"
        for eps in (0.05, 0.1, 0.2, 0.5):
            v = verify_2d_threshold(SetIndicator.full(GridWindow(N, N)), eps)
            closed = (N - 1) ** 2 - (1 - eps) * N * N
            assert abs(v.margin - closed) <= 1e-9 * N * N, f"N={N} eps={eps}: margin {v.margin} vs {closed}"
            assert v.holds == (closed >= 0)
    empty = SetIndicator.empty(GridWindow(10, 10))
    rep = popular_difference_search(empty, 0.3)
    assert rep.passed and rep.weighted_count == 0 and verify_2d_threshold(empty, 0.1).holds
    single = indicator_from_points([(4, 4)], GridWindow(10, 10))
    assert brute_force_best_difference(single, (-9, 9)) == (1, 0)
    v = verify_2d_threshold(single, 0.1)
    assert v.witness_d == 1 and v.count == 0 and v.holds
    return "closed forms at N=10,32,64; margins exact; edge cases hold"


def check_phase_triple():
    worst = 0.0
    for seed in range(20):
        for N in (2, 4, 6, 8):
            f0, f1, f2 = random_phase_triple(N, seed)
            for x in range(1, N + 1):
                for d in range(1 - x, N + 1 - x):
                    for y in range(1, N * N + 1 - d * d):
                        assert f0(x, y) * f1(x + d, y) * f2(x, y + d * d) == 1, f"seed {seed} ({x},{y},{d})"
            w = GridWindow(N, N * N)
            p = CountingParams(N, w)
            plain = lambda_indicator(SetIndicator.full(w), p)
            rel = abs(lambda_(f0, f1, f2, p) - plain) / plain
            worst = max(worst, rel)
            assert rel <= 1e-9, f"seed {seed} N={N}: relative gap {rel:.3g}"
    return f"identity holds; worst lambda gap {worst:.2e}"


CLI_RUNS = {
    "gen": ["--kind", "random_density", "--n1", "12", "--n2", "40", "--density", "0.4"],
    "count": ["--kind", "random_density", "--n1", "24", "--n2", "300", "--density", "0.5"],
    "gowers": ["--kind", "random_density", "--n1", "4", "--n2", "24", "--density", "0.5", "--order", "3"],
    "weyl": ["--alpha", "0.3334", "--beta", "0.25", "--n", "40", "--q-max", "10"],
    "dual": ["--kind", "random_phase_triple", "--n", "6"],
    "energy": ["--kind", "stripe", "--n1", "8", "--n2", "4096", "--stride", "3", "--epsilon", "0.15",
               "--q-max", "4", "--m-shrink", "0.75"],
    "popdiff": ["--kind", "random_density", "--n1", "32", "--n2", "1024", "--density", "0.6",
                "--epsilon", "0.2", "--q-max", "4", "--m-shrink", "0.75"],
    "verify": ["--kind", "random_density", "--n1", "20", "--n2", "20", "--density", "0.7",
               "--epsilon", "0.2"],
}


def check_reproducibility():
    with tempfile.TemporaryDirectory() as tmp:
        for task, args in CLI_RUNS.items():
            hashes = set()
            for threads in (1, 2, 8):
                for rerun in range(2):
                    out = Path(tmp) / f"{task}-{threads}-{rerun}"
                    with contextlib.redirect_stdout(io.StringIO()):
                        code = cli_main([task, *args, "--seed", "20240601", "--threads", str(threads),
                                         "--output", str(out), "--format", "csv"])
                    assert code == 0, f"{task} exited {code}"
                    hashes.add(hash_outputs(out))
            assert len(hashes) == 1, f"{task}: {len(hashes)} distinct hashes"
    return f"{len(CLI_RUNS)} tasks x threads (1, 2, 8) x 2 reruns: one hash each"


CRITERIA = [
    (1, "counting oracle equivalence", 10, check_counting_oracle),
    (2, "dual identities", 5, check_dual_identities),
    (3, "Blakley-Roy", 5, check_blakley_roy),
    (4, "kernel exactness", 5, check_kernels),
    (5, "Gowers cross-checks", 10, check_gowers),
    (6, "major-arc certificates", 2, check_major_arcs),
    (7, "energy increment on stripes", 60, check_energy_increment),
    (8, "popular-difference verdicts", 30, check_popular),
    (9, "random-phase counterexample", 10, check_phase_triple),
    (10, "CLI reproducibility", 60, check_reproducibility),
]


@pytest.mark.parametrize("number,name,limit,check", CRITERIA, ids=[f"c{c[0]}" for c in CRITERIA])
def test_criterion(number, name, limit, check, pytestconfig):
    _run(number, name, limit, check, pytestconfig)


if __name__ == "__main__":
    failed = 0
    for number, name, limit, check in CRITERIA:
        try:
            _run(number, name, limit, check)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
