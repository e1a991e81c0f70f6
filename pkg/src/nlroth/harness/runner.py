"""Experiment runner: one task, one output directory, deterministic bytes.

Every run writes ``report.json`` plus one CSV table named after the task.
Floats are written with 12 significant digits, keys are sorted, and nothing
that varies between runs (timestamps, thread counts, paths) enters a file.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..counting import (CountingParams, blakley_roy_lhs, count_for_difference, count_profile,
                        dual_F, dual_G, lambda_, lambda_indicator, pairing)
from ..energy import IncrementConfig, energy_increment_run
from ..expsums import rationalize, weyl_sum
from ..gowers import gowers_sum, interval_gowers_sum
from ..grid import DenseFunction, GridWindow, SetIndicator, density, fiber, write_function_file, write_set_file
from ..popular import popular_difference_search, verify_2d_threshold
from .generators import GeneratorError, GeneratorSpec, generate

logger = logging.getLogger(__name__)

TASKS = ("gen", "count", "gowers", "weyl", "dual", "energy", "popdiff", "verify")
FORMATS = ("json", "csv")
SIG_DIGITS = 12


class ConfigError(ValueError):
    """The configuration is incomplete or inconsistent (exit code 2)."""


class TaskError(RuntimeError):
    """A stage of the run failed (exit code 3)."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class ExperimentConfig:
    task: str
    generator: GeneratorSpec | None = None
    epsilon: float | None = None
    q_max: int | None = None
    scale: float | None = None
    d_min: int | None = None
    d_max: int | None = None
    order: int = 2
    alpha: float | None = None
    beta: float = 0.0
    weyl_n: int | None = None
    eta: float | None = None
    m_shrink: float | None = None
    max_stages: int | None = None
    output: str = "."
    format: str = "json"
    threads: int = 1
    # not part of the hashed report
    _volatile = ("output", "format", "threads")

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {', '.join(TASKS)}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be json or csv, got {self.format!r}")
        if self.threads < 1:
            raise ConfigError("threads must be a positive integer")
        if self.task == "weyl":
            if self.alpha is None:
                raise ConfigError("weyl requires alpha")
            if self.weyl_n is None or self.weyl_n < 1:
                raise ConfigError("weyl requires a positive n")
            return
        if self.generator is None:
            raise ConfigError(f"{self.task} requires an input set or a generator kind")
        try:
            self.generator.validate()
        except GeneratorError as exc:
            raise ConfigError(str(exc)) from None
        if self.task in ("popdiff", "energy") and self.epsilon is None:
            raise ConfigError(f"{self.task} requires epsilon")
        if self.epsilon is not None and not 0 < self.epsilon <= 0.5:
            raise ConfigError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if (self.d_min is None) != (self.d_max is None):
            raise ConfigError("--d-min and --d-max must be given together")
        if self.d_min is not None and self.d_min > self.d_max:
            raise ConfigError("d-min exceeds d-max")
        if self.task == "gowers" and not 1 <= self.order <= 6:
            raise ConfigError("order must lie in [1, 6]")

    def echo(self) -> dict:
        """The reproducible part of the config, for inclusion in the report."""
        out = {}
        for f in fields(self):
            if f.name in self._volatile:
                continue
            v = getattr(self, f.name)
            if isinstance(v, GeneratorSpec):
                v = {k.name: getattr(v, k.name) for k in fields(v)}
                v["b"], v["c"] = list(v["b"]), list(v["c"])
            out[f.name] = v
        return out


# ---------------------------------------------------------------------------
# key = value config files

_INT_KEYS = {"n1", "n2", "n", "seed", "stride", "q_max", "d_min", "d_max", "order", "weyl_n",
             "max_stages", "threads"}
_FLOAT_KEYS = {"density", "epsilon", "scale", "alpha", "beta", "eta", "m_shrink"}
_LIST_KEYS = {"b", "c"}
_STR_KEYS = {"task", "kind", "input", "output", "format"}
GENERATOR_KEYS = ("kind", "n1", "n2", "n", "density", "seed", "stride", "b", "c", "input")


def parse_int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(t) for t in text.replace(",", " ").split())


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines are skipped."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key in _INT_KEYS:
                values[key] = int(val)
            elif key in _FLOAT_KEYS:
                values[key] = float(val)
            elif key in _LIST_KEYS:
                values[key] = parse_int_list(val)
            elif key in _STR_KEYS:
                values[key] = val
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {val!r}") from None
    return values


def config_from_values(values: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from flat key/value pairs (config file or CLI)."""
    if "task" not in values:
        raise ConfigError("no task given")
    gen = None
    if values.get("input"):
        gen = GeneratorSpec(kind="from_file", path=values["input"])
    elif values.get("kind"):
        gen = GeneratorSpec(kind=values["kind"], n1=values.get("n1"), n2=values.get("n2"),
                            n=values.get("n"), density=values.get("density"),
                            seed=values.get("seed"), stride=values.get("stride"),
                            b=tuple(values.get("b", ())), c=tuple(values.get("c", ())))
    kw = {k: v for k, v in values.items() if k not in GENERATOR_KEYS and v is not None}
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(kw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return ExperimentConfig(generator=gen, **kw)


# ---------------------------------------------------------------------------
# serialization


def _num(v: float) -> float:
    return float(f"{v:.{SIG_DIGITS}g}")


def normalize(obj):
    """Round floats to 12 significant digits; complex -> [re, im]; Fractions -> float."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, Fraction):
        return _num(float(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite value {obj} in report")
        return _num(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return [_num(obj.real), _num(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating, Fraction)):
        return f"{float(v):.{SIG_DIGITS}g}"
    return "" if v is None else str(v)


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(normalize(obj), sort_keys=True, indent=2) + "\n")


def write_csv(header, rows, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def hash_outputs(directory) -> str:
    """sha256 over (name, bytes) of every file in the directory, in name order."""
    h = hashlib.sha256()
    for p in sorted(Path(directory).iterdir()):
        if p.is_file():
            h.update(p.name.encode() + b"\0" + p.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# tasks; each returns (report dict, csv header, csv rows, extra files)


def _require_set(obj, task: str) -> SetIndicator:
    if not isinstance(obj, SetIndicator):
        raise ConfigError(f"{task} needs a set input, not a function triple")
    return obj


def _set_summary(A: SetIndicator) -> dict:
    return {"window": [A.window.n1, A.window.n2], "cardinality": len(A), "density": density(A)}


def _task_gen(cfg, obj):
    extra = {}
    if isinstance(obj, SetIndicator):
        extra["set.txt"] = lambda p: write_set_file(obj, p)
        report = {"kind": cfg.generator.kind, **_set_summary(obj)}
        rows = [(x, y) for x, y in obj.points()]
        return report, ("x", "y"), rows, extra
    for name, f in zip(("f0", "f1", "f2"), obj):
        extra[f"{name}.txt"] = (lambda g: (lambda p: write_function_file(g, p)))(f)
    report = {"kind": cfg.generator.kind, "box": list(obj[0].box)}
    return report, ("function", "x_lo", "x_hi", "y_lo", "y_hi"), \
        [(n, *f.box) for n, f in zip(("f0", "f1", "f2"), obj)], extra


def _task_count(cfg, obj):
    A = _require_set(obj, "count")
    n1 = A.window.n1
    lo, hi = (cfg.d_min, cfg.d_max) if cfg.d_min is not None else (-(n1 - 1), n1 - 1)
    prof = count_profile(A, (lo, hi), threads=cfg.threads)
    report = {**_set_summary(A), "d_range": [lo, hi],
              "profile": {"d": list(prof.d_values), "count": list(prof.counts)}}
    return report, ("d", "count"), list(zip(prof.d_values, prof.counts)), {}


def _task_gowers(cfg, obj):
    if isinstance(obj, SetIndicator):
        f = DenseFunction.from_indicator(obj)
        label = "indicator"
    else:
        f = obj[1]
        label = "f1"
    s = cfg.order
    base = interval_gowers_sum(f.y_hi - f.y_lo + 1, s)
    rows = []
    for x in range(f.x_lo, f.x_hi + 1):
        g = gowers_sum(fiber(f, x), s, threads=cfg.threads)
        rows.append((x, g.real, g.real / base))
    mean = sum(r[1] for r in rows) / len(rows)
    report = {"function": label, "order": s, "fiber_length": f.y_hi - f.y_lo + 1,
              "interval_sum": base, "mean_gowers_sum": mean, "mean_normalized": mean / base}
    return report, ("x", "gowers_sum", "normalized"), rows, {}


def _task_weyl(cfg, obj):
    N = cfg.weyl_n
    Q = cfg.q_max if cfg.q_max is not None else 10
    S = cfg.scale if cfg.scale is not None else float(N * N)
    w = weyl_sum(cfg.alpha, cfg.beta, N)
    cert_a = rationalize(cfg.alpha, Q, S)
    cert_b = rationalize(cfg.beta, Q, float(N))

    def cert(c):
        return None if c is None else {"q": c.q, "achieved": c.achieved}

    report = {"alpha": cfg.alpha, "beta": cfg.beta, "N": N, "Q": Q, "S": S,
              "weyl_sum": w, "abs": abs(w), "alpha_certificate": cert(cert_a),
              "beta_certificate": cert(cert_b)}
    row = (cfg.alpha, cfg.beta, N, w.real, w.imag, abs(w),
           cert_a.q if cert_a else None, cert_b.q if cert_b else None)
    return report, ("alpha", "beta", "N", "re", "im", "abs", "q_alpha", "q_beta"), [row], {}


def _task_dual(cfg, obj):
    if isinstance(obj, SetIndicator):
        f0 = f1 = f2 = DenseFunction.from_indicator(obj)
        window = obj.window
    else:
        f0, f1, f2 = obj
        window = GridWindow(f0.x_hi, f0.y_hi)
    N = window.n1
    lam = lambda_(f0, f1, f2, CountingParams(N, window))
    F = dual_F(f0, f1, N)
    G = dual_G(f0, f2, N)
    via_F = pairing(F, f2) / window.area
    via_G = pairing(G, f1) / window.area
    scale = max(abs(lam), 1e-300)
    report = {"N": N, "window": [window.n1, window.n2], "lambda": lam,
              "lambda_via_F": via_F, "lambda_via_G": via_G,
              "residual_F": abs(lam - via_F) / scale if lam else abs(via_F),
              "residual_G": abs(lam - via_G) / scale if lam else abs(via_G)}
    if isinstance(obj, SetIndicator):
        report["lambda_indicator"] = lambda_indicator(obj, CountingParams(N, window))
    rows = [("lambda", lam.real, lam.imag), ("via_F", via_F.real, via_F.imag),
            ("via_G", via_G.real, via_G.imag)]
    return report, ("quantity", "re", "im"), rows, {}


def _increment_cfg(cfg) -> IncrementConfig:
    return IncrementConfig(cfg.epsilon, eta=cfg.eta, q_tilde_max=cfg.q_max,
                           m_shrink=cfg.m_shrink, max_stages=cfg.max_stages)


def _task_energy(cfg, obj):
    if isinstance(obj, SetIndicator):
        f0 = f1 = f2 = DenseFunction.from_indicator(obj)
        window = obj.window
    else:
        f0, f1, f2 = obj
        window = GridWindow(f0.x_hi, f0.y_hi)
    trace = energy_increment_run(f0, f1, f2, _increment_cfg(cfg), window)
    rows = [(s.stage, s.q, s.M, s.energy, s.irregularity, s.accepted_q_tilde) for s in trace.states]
    report = {"window": [window.n1, window.n2], "epsilon": cfg.epsilon, **trace.to_dict()}
    return report, ("stage", "q", "M", "energy", "irregularity", "accepted_q_tilde"), rows, {}


def _task_popdiff(cfg, obj):
    A = _require_set(obj, "popdiff")
    rep = popular_difference_search(A, cfg.epsilon, _increment_cfg(cfg))
    return rep.to_dict(), rep.CSV_FIELDS, [rep.csv_row()], {}


def _task_verify(cfg, obj):
    A = _require_set(obj, "verify")
    n1, n2 = A.window.n1, A.window.n2
    lo, hi = (cfg.d_min, cfg.d_max) if cfg.d_min is not None else (-(n1 - 1), n1 - 1)
    checks = []
    mismatches = [d for d in range(lo, hi + 1)
                  if count_for_difference(A, d, "bitparallel") != count_for_difference(A, d, "naive")]
    checks.append(("bitparallel_matches_naive", not mismatches, len(mismatches)))
    br, delta = blakley_roy_lhs(A), density(A)
    checks.append(("blakley_roy", br >= delta**3 - 1e-12, br - delta**3))
    if n2 <= 4096 and n1 <= 64:
        f = DenseFunction.from_indicator(A)
        p = CountingParams(n1, A.window)
        direct = lambda_(f, f, f, p).real
        packed = lambda_indicator(A, p)
        checks.append(("lambda_packed_matches_dense", abs(direct - packed) <= 1e-9 * max(1.0, packed),
                       abs(direct - packed)))
    if cfg.epsilon is not None and n1 == n2 and n1 >= 2:
        v = verify_2d_threshold(A, cfg.epsilon)
        checks.append(("threshold_2d", v.holds, v.margin))
    report = {**_set_summary(A), "checks": [{"name": n, "passed": ok, "value": val}
                                            for n, ok, val in checks],
              "all_passed": all(ok for _, ok, _ in checks)}
    return report, ("check", "passed", "value"), checks, {}


_TASKS = {"gen": _task_gen, "count": _task_count, "gowers": _task_gowers, "weyl": _task_weyl,
          "dual": _task_dual, "energy": _task_energy, "popdiff": _task_popdiff,
          "verify": _task_verify}


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Validate, generate, run and write. Returns the normalized report.

    Raises ConfigError for invalid configurations and TaskError naming the
    failing stage otherwise.
    """
    cfg.validate()
    obj = None
    if cfg.generator is not None:
        try:
            obj = generate(cfg.generator)
        except (OSError, ValueError) as exc:
            raise TaskError("generate", exc) from exc
    try:
        report, header, rows, extra = _TASKS[cfg.task](cfg, obj)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, MemoryError) as exc:
        raise TaskError(cfg.task, exc) from exc
    report = normalize({"task": cfg.task, "config": cfg.echo(), "result": report})
    out = Path(cfg.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_json(report, out / "report.json")
        write_csv(header, rows, out / f"{cfg.task}.csv")
        for name, writer in extra.items():
            writer(out / name)
    except OSError as exc:
        raise TaskError("write", exc) from exc
    logger.info("wrote %s task output to %s", cfg.task, out)
    return report


def with_threads(cfg: ExperimentConfig, threads: int, output) -> ExperimentConfig:
    return replace(cfg, threads=threads, output=str(output))
