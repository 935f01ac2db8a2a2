import csv
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from asyncnewton.cli import main, parse_config, ConfigError, default_config


def write_config(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def sphere_config(out, **extra):
    return {
        "objective": {"name": "sphere", "dimension": 2, "start": [5, 5]},
        "algorithm": "anm",
        "backend": "direct",
        "seeds": [1, 2, 3],
        "output_dir": str(out),
        "anm": {"m_regress": 30, "m_line": 30},
        **extra,
    }


def test_run_sphere_three_seeds(tmp_path):
    out = tmp_path / "out"
    assert main(["run", write_config(tmp_path, sphere_config(out))]) == 0
    rows = read_csv(out / "trace.csv")
    assert rows[0] == ["seed", "iteration", "phase", "best_fitness", "avg_fitness", "cumulative_evals", "x0", "x1"]
    by_seed = {}
    for r in rows[1:]:
        by_seed.setdefault(r[0], []).append(float(r[3]))
    assert sorted(by_seed) == ["1", "2", "3"]
    for best in by_seed.values():
        assert all(b <= a for a, b in zip(best, best[1:]))
    assert read_csv(out / "linesearch.csv")[0] == ["seed", "iteration", "alpha", "fitness"]
    assert not (out / "events.jsonl").exists()


def test_trace_csv_is_exact(tmp_path):
    from asyncnewton.anm import ANMConfig, run_anm
    from asyncnewton.core import make_benchmark
    out = tmp_path / "out"
    cfg = sphere_config(out, seeds=[7])
    assert main(["run", write_config(tmp_path, cfg)]) == 0
    trace = run_anm(make_benchmark("sphere", 2), ANMConfig(m_regress=30, m_line=30, rng_seed=7), start=[5, 5])
    rows = read_csv(out / "trace.csv")[1:]
    assert len(rows) == trace.iterations
    for r, t in zip(rows, trace.rows):
        assert float(r[3]) == t.best_fitness and float(r[4]) == t.avg_fitness
        assert int(r[5]) == t.cumulative_evals
        assert tuple(map(float, r[6:])) == t.center


def test_rerun_is_byte_identical(tmp_path):
    cfg = {
        "objective": {"name": "sphere", "dimension": 2, "start": [2, -1]},
        "algorithm": "anm", "backend": "grid", "seeds": [4, 5],
        "anm": {"m_regress": 12, "m_line": 12, "max_iterations": 5},
        "grid": {"num_workers": 20, "p_fail": 0.2, "p_malicious": 0.1},
    }
    outs = []
    for k in range(2):
        out = tmp_path / f"out{k}"
        assert main(["run", write_config(tmp_path, {**cfg, "output_dir": str(out)}, f"c{k}.yaml")]) == 0
        outs.append(out)
    for name in ("trace.csv", "linesearch.csv", "events.jsonl", "meta.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    events = [json.loads(line) for line in (outs[0] / "events.jsonl").read_text().splitlines()]
    assert {e["seed"] for e in events} == {4, 5}


def test_grid_large_scale_steps_by_2000(tmp_path):
    out = tmp_path / "out"
    cfg = {
        "objective": {"name": "quadratic_spd", "dimension": 8, "seed": 7, "start": [3] * 8},
        "algorithm": "anm", "backend": "grid", "seeds": [1], "output_dir": str(out),
        "anm": {"m_regress": 1000, "m_line": 1000, "epsilon_rel": 0.0, "max_iterations": 3},
        "grid": {"num_workers": 500, "p_fail": 0.1, "record_events": False},
    }
    assert main(["run", write_config(tmp_path, cfg)]) == 0
    evals = [int(r[5]) for r in read_csv(out / "trace.csv")[1:]]
    assert evals == [2000, 4000, 6000]


def test_missing_objective_exit_2_and_no_files(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = sphere_config(out)
    del cfg["objective"]
    assert main(["run", write_config(tmp_path, cfg)]) == 2
    assert "objective" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize("patch,key", [
    ({"anm": {"m_regres": 10}}, "anm.m_regres"),
    ({"colour": 1}, "colour"),
    ({"objective": {"name": "sphere"}}, "objective.dimension"),
    ({"objective": {"name": "nope", "dimension": 2}}, "objective.name"),
    ({"algorithm": "bfgs"}, "algorithm"),
    ({"backend": "mpi"}, "backend"),
])
def test_malformed_config_names_key(tmp_path, capsys, patch, key):
    cfg = {**sphere_config(tmp_path / "out"), **patch}
    assert main(["run", write_config(tmp_path, cfg)]) == 2
    assert key in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_objective_dimension_mismatch_exit_2(tmp_path):
    cfg = sphere_config(tmp_path / "out")
    cfg["objective"] = {"name": "double_well", "dimension": 2}
    assert main(["run", write_config(tmp_path, cfg)]) == 2
    assert not (tmp_path / "out").exists()


def test_seed_and_output_overrides(tmp_path):
    out = tmp_path / "elsewhere"
    assert main(["run", write_config(tmp_path, sphere_config(tmp_path / "out")), "--seed", "9",
                 "--output-dir", str(out)]) == 0
    assert {r[0] for r in read_csv(out / "trace.csv")[1:]} == {"9"}


def test_max_virtual_time_flag(tmp_path):
    out = tmp_path / "out"
    cfg = {
        "objective": {"name": "sphere", "dimension": 2}, "backend": "grid", "output_dir": str(out),
        "anm": {"m_regress": 12, "m_line": 12}, "grid": {"num_workers": 3, "p_fail": 1.0},
    }
    assert main(["run", write_config(tmp_path, cfg), "--max-virtual-time", "50"]) == 0
    meta = json.loads((out / "meta.json").read_text())
    assert meta["status"]["0"] == "failed"
    assert meta["grid"]["0"]["timed_out"] is True


def test_multiple_algorithms_write_report(tmp_path):
    out = tmp_path / "out"
    cfg = {
        "objective": {"name": "quadratic_spd", "dimension": 8, "seed": 7, "start": [3] * 8},
        "algorithm": ["anm", "cgd"], "seeds": [1], "output_dir": str(out),
        "anm": {"m_regress": 1000, "m_line": 1000, "max_iterations": 6},
        "baseline": {"max_iterations": 30},
    }
    assert main(["run", write_config(tmp_path, cfg)]) == 0
    rows = read_csv(out / "report.csv")
    assert rows[0] == ["seed", "algorithm", "iterations_to_threshold", "evals_to_threshold",
                       "max_concurrency", "iteration_ratio"]
    table = {r[1]: r for r in rows[1:]}
    assert table["anm"][4] == "1000" and table["cgd"][4] == "16"
    assert (out / "anm" / "trace.csv").exists() and (out / "cgd" / "trace.csv").exists()


def run_single(tmp_path, name, algorithm, objective):
    out = tmp_path / name
    cfg = {"objective": objective, "algorithm": algorithm, "seeds": [1], "output_dir": str(out),
           "anm": {"m_regress": 200, "m_line": 200, "max_iterations": 10},
           "baseline": {"max_iterations": 50}}
    assert main(["run", write_config(tmp_path, cfg, f"{name}.yaml")]) == 0
    return out / "trace.csv"


def test_compare_cmd(tmp_path):
    q8 = {"name": "quadratic_spd", "dimension": 8, "seed": 7, "start": [3] * 8}
    anm = run_single(tmp_path, "anm", "anm", q8)
    cgd = run_single(tmp_path, "cgd", "cgd", q8)
    report_dir = tmp_path / "report"
    assert main(["compare", str(anm), str(cgd), "--output-dir", str(report_dir)]) == 0
    rows = read_csv(report_dir / "report.csv")
    assert len(rows) == 3
    assert rows[1][1] == "anm" and rows[1][4] == "200"
    assert rows[2][1] == "cgd" and rows[2][4] == "16"


def test_compare_same_trace_twice(tmp_path):
    anm = run_single(tmp_path, "anm", "anm", {"name": "sphere", "dimension": 2, "start": [5, 5]})
    assert main(["compare", str(anm), str(anm), "--output-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "report.csv")[1:]
    assert [r[5] for r in rows] == ["1.0", "1.0"]


def test_compare_different_objectives(tmp_path, capsys):
    a = run_single(tmp_path, "a", "anm", {"name": "sphere", "dimension": 2, "start": [5, 5]})
    b = run_single(tmp_path, "b", "anm", {"name": "rosenbrock", "dimension": 2, "start": [0, 0]})
    assert main(["compare", str(a), str(b), "--output-dir", str(tmp_path / "r")]) == 2
    assert "rosenbrock" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()


def test_list_objectives(capsys):
    assert main(["list-objectives"]) == 0
    text = capsys.readouterr().out
    for name in ("sphere", "quadratic_spd", "rosenbrock", "rastrigin", "double_well"):
        assert name in text


def test_defaults_round_trip(capsys):
    assert main(["defaults"]) == 0
    cfg = parse_config(yaml.safe_load(capsys.readouterr().out))
    assert cfg.objective["name"] == "sphere"
    assert parse_config(default_config()).backend == "direct"


def test_parse_config_requires_mapping():
    with pytest.raises(ConfigError):
        parse_config([1, 2])


def test_module_entry_point(tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run([sys.executable, "-m", "asyncnewton.cli", "run",
                           write_config(tmp_path, sphere_config(out, seeds=[1]))],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "status=converged" in proc.stdout
    assert np.isfinite(float(read_csv(out / "trace.csv")[-1][3]))


@pytest.mark.parametrize("path", sorted((__import__("pathlib").Path(__file__).parent.parent / "configs").glob("*.yaml")))
def test_shipped_configs_parse(path):
    cfg = parse_config(yaml.safe_load(path.read_text()))
    assert cfg.algorithms
