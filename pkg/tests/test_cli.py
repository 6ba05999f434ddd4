"""End-to-end command-line checks, driving main() in process."""

import json

import pytest

from conftest import make_problem
from mapdse import save_problem
from mapdse.cli import main
from mapdse.model import problem_to_dict


def small_problem():
    return make_problem([[10, 30], [20, 15]],
                        edges=[(0, 1, {"cost_local": 1, "cost_shared": 5})])


def write_problem(tmp_path, name="problem.json"):
    path = tmp_path / name
    save_problem(small_problem(), path)
    return path


def write_experiment(tmp_path, **kw):
    problem = write_problem(tmp_path)
    data = {
        "format": 1,
        "problem": problem.name,
        "repetitions": 1,
        "algorithms": [
            {"name": "ga", "preset": "beg", "pop_size": 4, "max_generations": 1},
            {"name": "greedy", "heuristic": "mct"},
        ],
        "sim": {"frames": 4, "warmup_frames": 0},
        "output": "res",
    }
    data.update(kw)
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_gen_then_validate_round_trip(tmp_path, capsys):
    out = tmp_path / "bench.json"
    assert main(["gen", "mjpeg8", "-o", str(out)]) == 0
    assert out.exists()
    gen_note = capsys.readouterr().out
    assert "8 tasks" in gen_note and "15625 mappings" in gen_note

    assert main(["validate", str(out)]) == 0
    captured = capsys.readouterr()
    assert captured.err == ""  # a clean problem produces no diagnostics
    assert captured.out.startswith("ok: 8 tasks")
    assert "gene order:" in captured.out


def test_gen_seed_override_changes_file(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.json", "b.json", "c.json"))
    main(["--quiet", "gen", "sobel6", "-o", str(a)])
    main(["--quiet", "gen", "sobel6", "-o", str(b)])
    main(["--quiet", "gen", "sobel6", "-o", str(c), "--seed", "31"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_validate_flags_broken_problem(tmp_path, capsys):
    d = problem_to_dict(small_problem())
    d["apps"][0]["channels"][0]["capacity"] = 0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d), encoding="utf-8")
    assert main(["validate", str(bad)]) == 2
    captured = capsys.readouterr()
    assert "error" in captured.err
    assert captured.out.startswith("invalid:")


def test_missing_file_is_io_failure(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "nope.json")]) == 3
    assert "mapdse:" in capsys.readouterr().err


def test_unknown_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as e:
        main(["plot"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["gen", "dctflow", "-o", "x.json"])
    assert e.value.code == 1
    capsys.readouterr()


def test_eval_explicit_mapping(tmp_path, capsys):
    problem = write_problem(tmp_path)
    assert main(["eval", str(problem), "--mapping", "pe0,pe1",
                 "--frames", "4", "--warmup", "0"]) == 0
    out = capsys.readouterr().out
    assert "a.t0 -> pe0" in out and "a.t1 -> pe1" in out
    assert "frame time (steady state):" in out
    assert "usage pe0:" in out and "peak load:" in out and "events:" in out


def test_eval_wrong_length_mapping(tmp_path, capsys):
    problem = write_problem(tmp_path)
    assert main(["eval", str(problem), "--mapping", "pe0"]) == 2
    assert "mapdse:" in capsys.readouterr().err


def test_eval_heuristic_with_trace(tmp_path, capsys):
    problem = write_problem(tmp_path)
    trace = tmp_path / "events.tsv"
    assert main(["eval", str(problem), "--heuristic", "mct",
                 "--trace", str(trace)]) == 0
    capsys.readouterr()
    lines = trace.read_text().splitlines()
    assert lines, "trace file should not be empty"
    assert all(len(line.split("\t")) == 5 for line in lines)
    assert any("compute_start" in line for line in lines)


def test_eval_reports_deadlock(tmp_path, capsys):
    p = make_problem([5, 5], edges=[(0, 1), (1, 0)])
    path = tmp_path / "cycle.json"
    save_problem(p, path)
    assert main(["eval", str(path), "--mapping", "pe0,pe1"]) == 0
    captured = capsys.readouterr()
    assert "deadlock" in captured.out
    assert "W_POSSIBLE_DEADLOCK" in captured.err


def test_run_writes_results(tmp_path, capsys):
    exp = write_experiment(tmp_path)
    assert main(["run", str(exp), "--jobs", "1", "--no-plots"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("algorithm")
    assert "wrote" in out
    res = tmp_path / "res"
    comp = (res / "comparison.csv").read_text().splitlines()
    assert comp[0] == "algorithm,rep,seed,objective,generations,evaluations"
    assert len(comp) == 1 + 2  # one row per algorithm x repetition
    assert (res / "convergence.csv").exists()
    assert (res / "run_meta.json").exists()
    assert not (res / "comparison.png").exists()


def test_run_seed_override_and_out_dir(tmp_path, capsys):
    exp = write_experiment(tmp_path)
    alt = tmp_path / "elsewhere"
    assert main(["--quiet", "run", str(exp), "--jobs", "1", "--no-plots",
                 "--seed", "55", "-o", str(alt)]) == 0
    assert capsys.readouterr().out == ""  # --quiet suppresses the table
    rows = (alt / "comparison.csv").read_text().splitlines()[1:]
    assert all(row.split(",")[2] == "55" for row in rows)


def test_run_is_reproducible_across_invocations(tmp_path):
    exp = write_experiment(tmp_path)
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    main(["--quiet", "run", str(exp), "--jobs", "1", "--no-plots", "-o", str(d1)])
    main(["--quiet", "run", str(exp), "--jobs", "1", "--no-plots", "-o", str(d2)])
    for name in ("comparison.csv", "convergence.csv"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


def test_run_renders_figures(tmp_path, capsys):
    exp = write_experiment(tmp_path)
    out = tmp_path / "figs"
    assert main(["--quiet", "run", str(exp), "--jobs", "1", "-o", str(out)]) == 0
    capsys.readouterr()
    assert (out / "convergence.png").exists()
    assert (out / "comparison.png").exists()
    assert not (out / "correlation.png").exists()


def test_exhaustive_cli(tmp_path, capsys):
    problem = write_problem(tmp_path)
    out = tmp_path / "sweep"
    assert main(["exhaustive", str(problem), "-o", str(out),
                 "--frames", "4", "--warmup", "0", "--no-plots"]) == 0
    text = capsys.readouterr().out
    assert "mappings simulated: 4" in text
    assert "best objective:" in text
    assert "best mapping: a.t0=" in text
    assert "pearson" in text
    rows = (out / "correlation.csv").read_text().splitlines()
    assert rows[0] == "mapping_index,makespan,imbalance,objective"
    assert len(rows) == 1 + 4

    assert main(["exhaustive", str(problem), "-o", str(out), "--cap", "3",
                 "--no-plots"]) == 2
    assert "E_SPACE_TOO_LARGE" in capsys.readouterr().err


def test_experiment_with_invalid_problem_fails_validation(tmp_path, capsys):
    d = problem_to_dict(small_problem())
    d["apps"][0]["channels"][0]["capacity"] = 0
    (tmp_path / "problem.json").write_text(json.dumps(d), encoding="utf-8")
    data = {
        "format": 1,
        "problem": "problem.json",
        "algorithms": [{"name": "greedy", "heuristic": "mct"}],
    }
    exp = tmp_path / "exp.json"
    exp.write_text(json.dumps(data), encoding="utf-8")
    assert main(["run", str(exp), "--no-plots"]) == 2
    assert "E_BAD_CHANNEL_PARAM" in capsys.readouterr().err
