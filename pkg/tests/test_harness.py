"""Benchmark generator, exhaustive sweep, experiment runner and result
serialization."""

import json
import random
from dataclasses import replace
from fractions import Fraction

import pytest

from conftest import make_problem
from mapdse import (
    DseError,
    SimConfig,
    load_experiment,
    mapping_space_size,
    run_experiment,
    save_problem,
    simulate,
    validate_problem,
)
from mapdse.harness import (
    PRESETS,
    AlgorithmSpec,
    ComparisonTable,
    ExperimentResult,
    GenShape,
    RunRecord,
    _fmt_obj,
    emit_results,
    enumerate_mappings,
    exhaustive,
    gen_benchmark,
    parse_algorithm,
    write_benchmark,
)
from mapdse.simulator import objective_time


# -- generator ---------------------------------------------------------------


def test_preset_space_sizes_are_frozen():
    sizes = {
        name: mapping_space_size(gen_benchmark([shape]))
        for name, shape in PRESETS.items()
    }
    assert sizes["tiny8x3"] == 3**8 == 6561
    assert sizes["sobel6"] == 5**4 == 625
    assert sizes["mjpeg8"] == 5**6 == 15625
    assert sizes["mp3like"] == 5**25 == 298023223876953125
    merged = gen_benchmark([PRESETS[n] for n in ("mp3like", "mjpeg8", "sobel6")])
    assert mapping_space_size(merged) == 5**35 == 2910383045673370361328125


def test_generated_benchmarks_validate_clean():
    for name, shape in PRESETS.items():
        p = gen_benchmark([shape])
        assert not [d for d in validate_problem(p) if d.is_error()], name


def test_generator_is_seed_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_benchmark([PRESETS["mjpeg8"]], a)
    write_benchmark([PRESETS["mjpeg8"]], b)
    assert a.read_bytes() == b.read_bytes()
    write_benchmark([replace(PRESETS["mjpeg8"], seed=999)], b)
    assert a.read_bytes() != b.read_bytes()


def test_shape_validation():
    bad = [
        replace(PRESETS["mjpeg8"], tasks=0),
        replace(PRESETS["mjpeg8"], free_processors=0),
        replace(PRESETS["mjpeg8"], processor_types=9),
        replace(PRESETS["mjpeg8"], pinned_tasks=99),
        replace(PRESETS["mjpeg8"], io_processors=0),  # pinned tasks, nowhere to pin
    ]
    for shape in bad:
        with pytest.raises(DseError) as e:
            gen_benchmark([shape])
        assert e.value.code == "E_BAD_SHAPE"
    with pytest.raises(DseError) as e:
        gen_benchmark([])
    assert e.value.code == "E_BAD_SHAPE"


def test_merged_benchmark_requires_matching_platforms():
    with pytest.raises(DseError) as e:
        gen_benchmark([PRESETS["mjpeg8"], PRESETS["tiny8x3"]])
    assert e.value.code == "E_SHAPE_MISMATCH"


def test_custom_shape_round_trip():
    shape = GenShape(name="pair", tasks=2, free_processors=2, processor_types=2,
                     io_processors=0, pinned_tasks=0, seed=7)
    p = gen_benchmark([shape])
    assert p.n_tasks == 2
    assert len(p.proc_ids) == 2
    assert mapping_space_size(p) == 4


# -- exhaustive sweep ----------------------------------------------------------


def tiny2x2():
    return make_problem([[10, 30], [20, 15]],
                        edges=[(0, 1, {"cost_local": 1, "cost_shared": 5})])


def test_enumeration_is_lexicographic_and_complete():
    p = tiny2x2()
    genes = [m.genes for m in enumerate_mappings(p)]
    assert genes == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_enumeration_keeps_pins_fixed():
    from conftest import make_platform

    platform = make_platform(3, pinned_only=[2])
    p = make_problem([1, 1], platform=platform, pins={1: "pe2"})
    genes = [m.genes for m in enumerate_mappings(p)]
    g = p.gene_of_task[1]
    assert len(genes) == 2 == mapping_space_size(p)
    assert all(gs[g] == 2 for gs in genes)


def test_exhaustive_finds_the_true_optimum():
    p = tiny2x2()
    sim = SimConfig(frames=4, warmup_frames=0)
    report = exhaustive(p, sim)
    assert len(report.records) == 4
    objectives = [
        objective_time(p, simulate(p, m, sim)) for m in enumerate_mappings(p)
    ]
    assert report.best_objective == min(objectives)
    assert report.records[report.best_index].objective == report.best_objective
    assert [r.objective for r in report.records] == objectives
    assert -1.0 <= report.pearson_makespan <= 1.0
    assert report.quartile_low_imbalance_mean > 0
    assert report.quartile_high_imbalance_mean > 0


def test_exhaustive_respects_the_cap():
    with pytest.raises(DseError) as e:
        exhaustive(tiny2x2(), SimConfig(frames=2, warmup_frames=0), cap=3)
    assert e.value.code == "E_SPACE_TOO_LARGE"


# -- experiment specs ------------------------------------------------------------


def test_parse_algorithm_shapes():
    ga = parse_algorithm({"name": "beg8", "preset": "beg", "pop_size": 4})
    assert ga.kind == "ga" and ga.config.pop_size == 4
    h = parse_algorithm({"name": "greedy", "heuristic": "mct"})
    assert h.kind == "heuristic" and h.heuristic == "mct"


def test_parse_algorithm_rejects_malformed_entries():
    bad = [
        {"preset": "beg"},  # no name
        {"name": "x"},  # neither preset nor heuristic
        {"name": "x", "preset": "beg", "heuristic": "mct"},  # both
        {"name": "x", "heuristic": "simulated_annealing"},
        {"name": "x", "heuristic": "mct", "pop_size": 4},  # GA keys on a heuristic
        {"name": "x", "preset": "beg", "population": 4},  # unknown GA key
        {"name": "x", "preset": "beg", "pop_size": 1},  # rejected by GaConfig
        {"name": "x", "preset": "annealing"},
    ]
    for entry in bad:
        with pytest.raises(DseError) as e:
            parse_algorithm(entry)
        assert e.value.code == "E_SPEC_INVALID", entry


def write_spec(tmp_path, **kw):
    problem = tmp_path / "problem.json"
    save_problem(tiny2x2(), problem)
    data = {
        "format": 1,
        "problem": "problem.json",
        "algorithms": [{"name": "greedy", "heuristic": "mct"}],
        "sim": {"frames": 4, "warmup_frames": 0},
    }
    data.update(kw)
    spec = tmp_path / "exp.json"
    spec.write_text(json.dumps(data), encoding="utf-8")
    return spec


def test_load_experiment_seed_forms(tmp_path):
    spec = load_experiment(write_spec(tmp_path, repetitions=2, seeds=[5, 6]))
    assert spec.seed_list() == [5, 6]
    spec = load_experiment(write_spec(tmp_path, repetitions=2, seeds={"base": 100}))
    assert spec.seed_list() == [100, 101]
    spec = load_experiment(write_spec(tmp_path, repetitions=3, seeds=7))
    assert spec.seed_list() == [7, 8, 9]
    spec = load_experiment(write_spec(tmp_path, repetitions=2))
    assert spec.seed_list() == [0, 1]
    spec = load_experiment(write_spec(tmp_path, repetitions=3, seeds=[1, 2]))
    with pytest.raises(DseError) as e:
        spec.seed_list()
    assert e.value.code == "E_SPEC_INVALID"


def test_load_experiment_rejects_malformed_files(tmp_path):
    cases = [
        write_spec(tmp_path, format=2),
        write_spec(tmp_path, algorithms=[]),
        write_spec(tmp_path, algorithms=[{"name": "a", "heuristic": "mct"},
                                         {"name": "a", "heuristic": "met"}]),
        write_spec(tmp_path, repetitions=0),
        write_spec(tmp_path, seeds="five"),
        write_spec(tmp_path, sim={"frames": 4, "quantum": 2}),
    ]
    for path in cases:
        with pytest.raises(DseError) as e:
            load_experiment(path)
        assert e.value.code == "E_SPEC_INVALID", path
    broken = tmp_path / "broken.json"
    broken.write_text("{nope", encoding="utf-8")
    with pytest.raises(DseError) as e:
        load_experiment(broken)
    assert e.value.code == "E_SPEC_INVALID"
    with pytest.raises(DseError) as e:
        load_experiment(tmp_path / "missing.json")
    assert e.value.code == "E_IO"


def test_load_experiment_resolves_paths(tmp_path):
    spec_path = write_spec(tmp_path, output="results/out")
    spec = load_experiment(spec_path)
    assert spec.output == tmp_path / "results/out"
    assert spec.problem_path == str((tmp_path / "problem.json").resolve())


# -- running and reporting --------------------------------------------------------


def two_algo_spec(tmp_path):
    path = write_spec(
        tmp_path,
        repetitions=2,
        seeds=[11, 12],
        algorithms=[
            {"name": "ga", "preset": "beg", "pop_size": 4, "max_generations": 2},
            {"name": "greedy", "heuristic": "mct"},
        ],
    )
    return load_experiment(path)


def record_key(r):
    return (r.algorithm, r.rep, r.seed, r.objective, r.generations,
            r.evaluations, r.mapping_ids)


def test_run_experiment_grid(tmp_path):
    spec = two_algo_spec(tmp_path)
    result = run_experiment(spec)
    assert [(r.algorithm, r.rep, r.seed) for r in result.records] == [
        ("ga", 0, 11), ("ga", 1, 12), ("greedy", 0, 11), ("greedy", 1, 12)
    ]
    for r, log in zip(result.records, result.logs):
        assert log.algorithm == r.algorithm
        assert len(r.mapping_ids) == spec.problem.n_tasks
        assert r.seconds >= 0
        if r.algorithm == "greedy":
            assert (r.generations, r.evaluations) == (0, 1)
            assert log.termination == "constructive"
        else:
            assert r.generations <= 2
            # distinct chromosomes only: the space holds just 4 mappings
            assert 1 <= r.evaluations <= 4
    # the two greedy repetitions are the same deterministic construction
    g0, g1 = result.records[2], result.records[3]
    assert g0.objective == g1.objective and g0.mapping_ids == g1.mapping_ids
    assert result.meta["algorithms"] == ["ga", "greedy"]
    assert result.meta["seeds"] == [11, 12]


def test_run_experiment_is_reproducible_and_job_independent(tmp_path):
    spec = two_algo_spec(tmp_path)
    base = [record_key(r) for r in run_experiment(spec).records]
    again = [record_key(r) for r in run_experiment(spec).records]
    parallel = [record_key(r) for r in run_experiment(spec, jobs=2).records]
    assert base == again == parallel


def test_comparison_table_statistics():
    records = [
        RunRecord("ga", 0, 0, Fraction(120), 0.5, 4, 30, ("pe0",)),
        RunRecord("ga", 1, 1, Fraction(100), 0.3, 4, 28, ("pe0",)),
        RunRecord("greedy", 0, 0, Fraction(150), 0.01, 0, 1, ("pe1",)),
    ]
    table = ComparisonTable.from_records(records)
    ga, greedy = table.rows
    assert (ga.runs, ga.best, ga.worst, ga.mean) == (2, 100.0, 120.0, 110.0)
    assert ga.min_seconds <= ga.mean_seconds <= ga.max_seconds
    assert ga.mean_evaluations == 29.0
    assert (greedy.runs, greedy.best) == (1, 150.0)
    text = table.render()
    assert text.splitlines()[0].startswith("algorithm")
    assert "ga" in text and "greedy" in text
    assert "110" in text


def test_emit_results_writes_stable_csvs(tmp_path):
    spec = two_algo_spec(tmp_path)
    result = run_experiment(spec)
    result.correlation = exhaustive(spec.problem, spec.sim)
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    emit_results(result, d1)
    emit_results(run_experiment(spec), d2)

    comp = (d1 / "comparison.csv").read_bytes()
    assert comp == (d2 / "comparison.csv").read_bytes()
    assert (d1 / "convergence.csv").read_bytes() == (d2 / "convergence.csv").read_bytes()
    assert b"\r" not in comp
    lines = comp.decode().splitlines()
    assert lines[0] == "algorithm,rep,seed,objective,generations,evaluations"
    assert len(lines) == 1 + 4
    assert lines[1].startswith("ga,0,11,")

    conv = (d1 / "convergence.csv").read_text().splitlines()
    assert conv[0] == "algorithm,rep,generation,best_so_far"
    assert len(conv) > 1 + 4  # one row per generation record

    corr = (d1 / "correlation.csv").read_text().splitlines()
    assert corr[0] == "mapping_index,makespan,imbalance,objective"
    assert len(corr) == 1 + 4
    assert not (d2 / "correlation.csv").exists()

    meta = json.loads((d1 / "run_meta.json").read_text())
    assert len(meta["run_seconds"]) == 4
    assert {"algorithm", "rep", "seed", "seconds"} <= set(meta["run_seconds"][0])
    assert meta["algorithms"] == ["ga", "greedy"]
    assert meta["package"].startswith("mapdse ")


def test_emit_results_empty_experiment(tmp_path):
    result = ExperimentResult(records=[], logs=[], meta={})
    emit_results(result, tmp_path / "empty")
    comp = (tmp_path / "empty" / "comparison.csv").read_text()
    assert comp == "algorithm,rep,seed,objective,generations,evaluations\n"
    conv = (tmp_path / "empty" / "convergence.csv").read_text()
    assert conv == "algorithm,rep,generation,best_so_far\n"


def test_objective_formatting():
    assert _fmt_obj(Fraction(204)) == "204"
    assert _fmt_obj(Fraction(7, 2)) == "3.5"
    assert _fmt_obj(Fraction(25307, 10)) == "2530.7"
    assert _fmt_obj(77234) == "77234"
    assert _fmt_obj(float("inf")) == "inf"
