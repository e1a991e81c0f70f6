import csv
import json
import math
import warnings

import numpy as np
import pytest

from nlroth.grid import read_set_file
from nlroth.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_TASK, main
from nlroth.harness.generators import (GeneratorError, GeneratorSpec, generate, random_density,
                                       random_phase_triple)
from nlroth.harness.runner import (ConfigError, ExperimentConfig, TaskError, config_from_values,
                                   hash_outputs, normalize, read_config_file, run_experiment)

FULL3 = dict(kind="product", n1=3, n2=3, b=(1, 2, 3), c=(1, 2, 3))
FULL10 = GeneratorSpec("product", 10, 10, b=tuple(range(1, 11)), c=tuple(range(1, 11)))


def test_generator_examples():
    assert random_density(16, 16, 0.5, 7) == random_density(16, 16, 0.5, 7)
    assert random_density(16, 16, 0.5, 7) != random_density(16, 16, 0.5, 8)
    A = generate(GeneratorSpec("product", 4, 4, b=(1, 3), c=(2, 4)))
    assert len(A) == 4 and set(A.points()) == {(1, 2), (1, 4), (3, 2), (3, 4)}
    S = generate(GeneratorSpec("stripe", 3, 7, stride=3))
    assert set(S.points()) == {(x, y) for x in (1, 2, 3) for y in (3, 6)}


def test_generator_validation():
    bad = [GeneratorSpec("random_density", 4, 4, density=0.5),
           GeneratorSpec("random_density", 4, 4, density=1.5, seed=1),
           GeneratorSpec("product", 4, 4, b=(5,), c=(1,)),
           GeneratorSpec("stripe", 4, 4),
           GeneratorSpec("random_phase_triple", seed=1),
           GeneratorSpec("from_file"),
           GeneratorSpec("spiral", 4, 4)]
    for spec in bad:
        with pytest.raises(GeneratorError):
            generate(spec)


def test_phase_triple_identity():
    for seed in range(20):
        for N in (2, 5, 8):
            f0, f1, f2 = random_phase_triple(N, seed)
            assert max(f.sup_norm() for f in (f0, f1, f2)) == 1
            for d in range(-(N - 1), N):
                for x in range(1, N + 1):
                    if not 1 <= x + d <= N:
                        continue
                    ys = np.arange(1, N * N + 1 - d * d)
                    prod = (f0.values[x - 1, ys - 1] * f1.values[x + d - 1, ys - 1]
                            * f2.values[x - 1, ys + d * d - 1])
                    assert np.all(prod == 1)


def test_density_concentration():
    n1 = n2 = 32
    flagged = 0
    for delta in (0.1, 0.5, 0.9):
        misses = 0
        for seed in range(100):
            A = random_density(n1, n2, delta, seed)
            if abs(len(A) / (n1 * n2) - delta) > 4 * math.sqrt(delta * (1 - delta) / (n1 * n2)):
                misses += 1
        if misses > 5:
            flagged += 1
            warnings.warn(f"density {delta}: {misses}/100 seeds outside the 4-sigma band")
    assert flagged == 0


def test_run_count_example(tmp_path):
    cfg = config_from_values({"task": "count", **FULL3, "d_min": -2, "d_max": 2,
                              "output": str(tmp_path)})
    report = run_experiment(cfg)
    rows = list(csv.reader((tmp_path / "count.csv").open()))
    assert rows == [["d", "count"], ["-2", "0"], ["-1", "4"], ["0", "9"], ["1", "4"], ["2", "0"]]
    assert report["result"]["profile"]["count"] == [0, 4, 9, 4, 0]


def test_run_popdiff_example(tmp_path):
    run_experiment(ExperimentConfig("popdiff", FULL10, epsilon=0.5, output=str(tmp_path)))
    rep = json.loads((tmp_path / "report.json").read_text())["result"]
    assert rep["pass"] is True and rep["best_d"] == 1 and rep["best_count"] == 81
    rows = list(csv.reader((tmp_path / "popdiff.csv").open()))
    assert rows[0] == ["delta", "epsilon", "q", "M", "weighted_count", "threshold", "pass",
                       "best_d", "best_count"]
    assert rows[1][6] == "true"


def test_missing_epsilon():
    with pytest.raises(ConfigError, match="popdiff requires epsilon"):
        run_experiment(ExperimentConfig("popdiff", FULL10))


def test_cli_exit_codes(tmp_path, capsys):
    ten = ",".join(map(str, range(1, 11)))
    base = ["--kind", "product", "--n1", "10", "--n2", "10", "--b", ten, "--c", ten,
            "--output", str(tmp_path)]
    assert main(["popdiff", *base]) == EXIT_CONFIG
    assert "popdiff requires epsilon" in capsys.readouterr().err
    assert main(["popdiff", *base, "--epsilon", "0.5"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["pass"] is True and out["best_d"] == 1
    assert main(["count", "--input", str(tmp_path / "missing.txt"), "--output", str(tmp_path)]) == EXIT_TASK
    assert "stage 'generate' failed" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["count", "--format", "xml"])
    assert exc.value.code == 2


def test_task_error_names_stage(tmp_path):
    # N1^2 < N2 violates the popular-difference precondition
    spec = GeneratorSpec("stripe", 3, 64, stride=2)
    with pytest.raises(TaskError, match="stage 'popdiff'"):
        run_experiment(ExperimentConfig("popdiff", spec, epsilon=0.2, output=str(tmp_path)))


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# stripes\ntask = count\nkind = stripe\nn1 = 4\nn2 = 20\nstride = 2\n"
                   "d_min = 0\nd_max = 2\nformat = csv\n")
    values = read_config_file(cfg)
    assert values["n2"] == 20 and values["format"] == "csv"
    assert main(["count", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == ["d,count", "0,40", "1,0", "2,16"]
    cfg.write_text("task = count\nbogus = 1\n")
    with pytest.raises(ConfigError, match="unknown key"):
        read_config_file(cfg)


def test_gen_writes_readable_set(tmp_path):
    run_experiment(ExperimentConfig("gen", GeneratorSpec("random_density", 5, 9, density=0.4, seed=3),
                                    output=str(tmp_path)))
    assert read_set_file(tmp_path / "set.txt") == random_density(5, 9, 0.4, 3)


def test_every_task_runs(tmp_path):
    cases = {
        "gen": ExperimentConfig("gen", GeneratorSpec("random_phase_triple", n=3, seed=1)),
        "gowers": ExperimentConfig("gowers", GeneratorSpec("random_density", 3, 20, density=0.5, seed=1),
                                   order=3),
        "weyl": ExperimentConfig("weyl", alpha=1 / 3 + 1e-7, weyl_n=30, q_max=10, scale=1e4),
        "dual": ExperimentConfig("dual", GeneratorSpec("random_phase_triple", n=4, seed=2)),
        "energy": ExperimentConfig("energy", GeneratorSpec("stripe", 8, 4096, stride=2), epsilon=0.15,
                                   q_max=4, m_shrink=0.75),
        "verify": ExperimentConfig("verify", GeneratorSpec("random_density", 12, 12, density=0.6, seed=4),
                                   epsilon=0.1),
    }
    for name, cfg in cases.items():
        cfg.output = str(tmp_path / name)
        rep = run_experiment(cfg)["result"]
        assert (tmp_path / name / "report.json").exists()
        assert (tmp_path / name / f"{name}.csv").exists()
        if name == "weyl":
            assert rep["alpha_certificate"]["q"] == 3
        if name == "dual":
            assert rep["residual_F"] <= 1e-9 and rep["residual_G"] <= 1e-9
        if name == "energy":
            assert rep["termination"] == "irregularity_small" and rep["states"][-1]["q"] == 2
        if name == "verify":
            assert rep["all_passed"]


def test_normalize_rounds_to_twelve_digits():
    assert normalize({"a": 1 / 3, "b": 2 + 1j, "c": [np.int64(4), True]}) == {
        "a": 0.333333333333, "b": [2.0, 1.0], "c": [4, True]}
    with pytest.raises(ValueError):
        normalize(float("nan"))


def test_hash_independent_of_threads(tmp_path):
    spec = GeneratorSpec("random_density", 24, 200, density=0.5, seed=11)
    hashes = set()
    for t in (1, 2, 8):
        out = tmp_path / f"t{t}"
        run_experiment(ExperimentConfig("count", spec, threads=t, output=str(out)))
        hashes.add(hash_outputs(out))
    assert len(hashes) == 1
