import json
import math

import numpy as np
import pytest

from vqcbench.bench import (
    RAW_HEADER,
    Aggregate,
    ConfigError,
    DatasetRef,
    RunResult,
    SweepConfig,
    aggregate,
    auto_select,
    auto_select_stages,
    best_worst_report,
    export_results,
    execution_order,
    load_results_dir,
    read_raw_csv,
    run_seed,
    run_sweep,
    sweep_config_from_dict,
    sweep_jobs,
)
from vqcbench.data import Dataset
from vqcbench.train import TrainConfig

TINY = TrainConfig(epochs=2)


def fixture_agg(encoding, mean, std, layers=10, ru=False, metric="accuracy"):
    m = {k: 0.0 for k in ("accuracy", "balanced_accuracy", "precision", "recall", "f1",
                          "train_seconds", "eval_train_seconds", "eval_test_seconds")}
    s = dict(m)
    m[metric], s[metric] = mean, std
    return Aggregate("fixture", encoding, layers, ru, 10, m, s)


def fake_result(encoding="RY", layers=2, ru=False, rep=0, acc=0.5, seconds=1.0):
    metrics = {k: acc for k in ("accuracy", "balanced_accuracy", "precision", "recall", "f1", "specificity")}
    return RunResult("d", encoding, layers, ru, rep, run_seed(0, encoding, layers, ru, rep), 7,
                     metrics, metrics, [1.0], [0.5], seconds, 0.1, 0.1)


def test_job_count():
    cfg = SweepConfig(DatasetRef("wine"))
    assert len(sweep_jobs(cfg)) == 21 * 5 * 2 * 10
    cfg = SweepConfig(DatasetRef("wine"), encodings=("RY",), layer_grid=(2,), reuploading=(False,), repetitions=1)
    assert len(sweep_jobs(cfg)) == 1


def test_seed_derivation():
    assert run_seed(0, "RY", 2, False, 0) == run_seed(0, "RY", 2, False, 0)
    assert run_seed(0, "RY", 2, False, 0) != run_seed(0, "RY", 2, False, 1)
    assert run_seed(5, "RY", 2, False, 0) == 5 ^ run_seed(0, "RY", 2, False, 0)


def test_config_parsing():
    cfg = sweep_config_from_dict({"version": 1, "dataset": "wine", "layers": [2, 4], "reuploading": [False],
                                  "train": {"epochs": 3, "learning_rate": 0.05}})
    assert cfg.layer_grid == (2, 4) and cfg.train.epochs == 3 and cfg.train.learning_rate == 0.05
    ref = sweep_config_from_dict({"version": 1, "dataset": {"path": "x.csv", "label_column": "y"}}).dataset
    assert ref.path == "x.csv" and ref.name == "x"
    bad = [
        {"dataset": "wine"},
        {"version": 2, "dataset": "wine"},
        {"version": 1, "dataset": "wine", "layerz": [2]},
        {"version": 1, "dataset": "wine", "encodings": ["RQ"]},
        {"version": 1, "dataset": "wine", "repetitions": 0},
        {"version": 1, "dataset": "wine", "layers": [3]},
        {"version": 1, "dataset": "wine", "layers": []},
        {"version": 1, "dataset": "wine", "train": {"momentum": 1}},
        {"version": 1, "dataset": "wine", "reuploading": ["yes"]},
    ]
    for raw in bad:
        with pytest.raises(ConfigError):
            sweep_config_from_dict(raw)


def test_config_hash_ignores_workers():
    a = SweepConfig(DatasetRef("wine"), workers=1)
    b = SweepConfig(DatasetRef("wine"), workers=4)
    assert a.hash == b.hash
    assert a.hash != SweepConfig(DatasetRef("wine"), base_seed=1).hash


def test_aggregate_examples():
    same = aggregate([fake_result(rep=i, acc=0.7) for i in range(3)])
    assert same[0].std["accuracy"] == 0.0 and same[0].mean["accuracy"] == pytest.approx(0.7)
    two = aggregate([fake_result(rep=0, acc=96.0), fake_result(rep=1, acc=98.0)])
    assert two[0].mean["accuracy"] == 97.0
    assert two[0].std["accuracy"] == pytest.approx(math.sqrt(2))
    assert aggregate([fake_result()])[0].std["accuracy"] == 0.0


def test_report_table_fixtures():
    wine = [fixture_agg("RY", 0.975, 0.02432208), fixture_agg("RX-RY-RZ", 0.56388889, 0.05406963),
            fixture_agg("H-RZ", 0.90, 0.03)]
    (r,) = best_worst_report(wine)
    assert (r.best_encoding, r.worst_encoding) == ("RY", "RX-RY-RZ")
    assert r.delta == pytest.approx(41.111111, abs=1e-6)
    assert r.delta_std == pytest.approx(5.928819, abs=1e-6)
    dia = [fixture_agg("RX-RZ-RY", 0.74935065, 0.02471706), fixture_agg("Amplitude", 0.64545455, 0.02582932)]
    (r,) = best_worst_report(dia)
    assert r.delta == pytest.approx(10.389610, abs=1e-6)
    assert r.delta_std == pytest.approx(3.575034, abs=1e-6)


def test_report_properties(rng):
    aggs = [fixture_agg(f"E{i}", float(rng.random()), float(rng.random()), layers=int(rng.integers(1, 4)) * 2,
                        ru=bool(rng.integers(2))) for i in range(40)]
    for r in best_worst_report(aggs):
        assert r.delta >= 0
        assert r.delta_std == math.sqrt(r.best_std**2 + r.worst_std**2)


def test_report_single_and_ties():
    (r,) = best_worst_report([fixture_agg("RY", 0.5, 0.1)])
    assert r.best_encoding == r.worst_encoding == "RY" and r.delta == 0
    (r,) = best_worst_report([fixture_agg("RY", 0.5, 0.1), fixture_agg("RX", 0.5, 0.2)])
    assert r.best_encoding == "RX" and r.worst_encoding == "RX"
    with pytest.raises(ValueError):
        best_worst_report([fixture_agg("RY", 0.5, 0.1)], metric="nope")


def small_config(**kw):
    base = dict(dataset=DatasetRef("wine"), encodings=("RY", "Amplitude"), layer_grid=(2,),
                reuploading=(False,), repetitions=2, train=TINY)
    base.update(kw)
    return SweepConfig(**base)


def test_sweep_resume_and_export(tmp_path):
    cfg = small_config()
    out = run_sweep(cfg, tmp_path)
    assert len(out.results) == 4 and not out.errors
    files = sorted((tmp_path / "runs").glob("*.json"))
    assert len(files) == 4
    export_results(tmp_path, out.results, config=cfg)
    first = (tmp_path / "raw.csv").read_text()
    assert first.splitlines()[0] == ",".join(RAW_HEADER)
    assert len(first.splitlines()) == 5

    victim = tmp_path / "runs" / "RY_L2_RU0_r1.json"
    victim.unlink()
    computed = []
    again = run_sweep(cfg, tmp_path, resume=True, progress=lambda j, r, e: computed.append(j))
    assert [j.filename for j in computed] == ["RY_L2_RU0_r1.json"]
    assert again.skipped == 3
    export_results(tmp_path, again.results, config=cfg)
    masked = lambda text: [row.split(",")[:11] for row in text.splitlines()]
    assert masked((tmp_path / "raw.csv").read_text()) == masked(first)

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config_hash"] == cfg.hash and manifest["runs"] == 4
    assert not list(tmp_path.glob(".*tmp"))


def test_raw_csv_round_trip(tmp_path):
    results = [fake_result(rep=i, acc=a, seconds=s) for i, (a, s) in enumerate([(0.1, 0.3), (0.7, 1 / 3), (0.2, 2.5)])]
    results += [fake_result("RX", rep=i, acc=0.1 * i) for i in range(3)]
    export_results(tmp_path, results, formats=("raw",))
    back = read_raw_csv(tmp_path / "raw.csv")
    assert aggregate(back) == aggregate(results)


def test_one_run_export(tmp_path):
    export_results(tmp_path, [fake_result()], formats=("raw", "report"))
    assert len((tmp_path / "raw.csv").read_text().splitlines()) == 2
    header = (tmp_path / "report_accuracy.csv").read_text().splitlines()[0].split(",")
    assert header[3:] == ["best_encoding", "best_percent", "best_std", "worst_encoding",
                          "worst_percent", "worst_std", "delta", "delta_std"]


def test_load_results_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_results_dir(tmp_path)
    export_results(tmp_path, [fake_result()], formats=("raw",))
    assert len(load_results_dir(tmp_path)) == 1


def test_per_run_errors_do_not_abort(tmp_path):
    # a 1-qubit angle model on 3 classes fails at config time for every Angle run
    cfg = small_config(num_qubits=1, encodings=("RY",))
    out = run_sweep(cfg, tmp_path)
    assert len(out.errors) == 2 and out.results == []


def test_parallel_matches_serial(tmp_path):
    serial = run_sweep(small_config(repetitions=1))
    parallel = run_sweep(small_config(repetitions=1, workers=2))
    for a, b in zip(serial.results, parallel.results):
        assert a.test_metrics == b.test_metrics and a.params == b.params


def separable_dataset(n=60, seed=0):
    """Two tight, far-apart blobs: separable along any principal axis."""
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = np.where(y[:, None] == 1, 0.8, 0.2) + rng.normal(0, 0.05, (n, 2))
    return Dataset(x, y, "separable", 2)


def test_auto_select_threshold_semantics():
    ds = separable_dataset()
    kw = dict(layer_grid=(2,), repetitions=1, train=TrainConfig(epochs=1), num_qubits=2)
    first = auto_select(ds, threshold=0.0, **kw)
    assert len(first.stages) == 1 and first.config.encoding.name in ("RX", "RY")
    assert first.runs_used == 2
    everything = auto_select(ds, threshold=1.01, **kw)
    assert [len(s.encodings) for s in everything.stages] == [2, 6, 8, 4]
    assert not everything.truncated and everything.runs_used == 20
    cut = auto_select(ds, budget=5, threshold=1.01, **kw)
    assert cut.truncated and cut.runs_used == 2 and cut.config is not None
    with pytest.raises(ConfigError):
        auto_select(ds, budget=1, **kw)


def test_auto_select_separable_stage_one():
    res = auto_select(separable_dataset(80), threshold=0.95, layer_grid=(2,), repetitions=1, num_qubits=2)
    assert len(res.stages) == 1 and res.score >= 0.95


def test_stages():
    assert [len(s) for s in auto_select_stages()] == [2, 6, 8, 4]


def test_execution_order_alternates_direction_per_repetition():
    cfg = SweepConfig(DatasetRef("wine"), encodings=("RY", "RX"), layer_grid=(2,), reuploading=(False,), repetitions=3)
    jobs = sweep_jobs(cfg)
    order = execution_order(jobs)
    assert sorted(order, key=jobs.index) == jobs
    assert [(j.encoding, j.repetition) for j in order] == [
        ("RY", 0), ("RX", 0), ("RX", 1), ("RY", 1), ("RY", 2), ("RX", 2)
    ]
