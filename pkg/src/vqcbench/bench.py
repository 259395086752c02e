"""Sweeps over encoding x layers x re-uploading x repetition, aggregation,
best/worst reports, staged auto-selection and result export."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import platform
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import yaml

from . import __version__
from .ansatz import ModelConfig
from .data import (
    QUBITS,
    Dataset,
    PipelineSpec,
    default_qubits,
    load_bundled,
    load_csv_dataset,
    prepare,
    train_test_split,
)
from .encoding import EncodingSpec, canonical_order, default_encodings, enumerate_angle_strategies
from .train import TrainConfig, evaluate_metrics, train_model

log = logging.getLogger(__name__)

CONFIG_VERSION = 1
RAW_HEADER = (
    "dataset",
    "encoding",
    "layers",
    "reuploading",
    "seed",
    "split",
    "accuracy",
    "balanced_accuracy",
    "precision",
    "recall",
    "f1",
    "train_seconds",
    "eval_train_seconds",
    "eval_test_seconds",
)
RAW_METRICS = ("accuracy", "balanced_accuracy", "precision", "recall", "f1")
TIMINGS = ("train_seconds", "eval_train_seconds", "eval_test_seconds")
AGGREGATED = RAW_METRICS + TIMINGS
DEFAULT_LAYERS = (2, 4, 6, 8, 10)
DEFAULT_THRESHOLD = 0.75


class ConfigError(ValueError):
    """Invalid sweep configuration."""


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetRef:
    """A bundled dataset name, or a CSV path with its label column."""

    name: str
    path: str | None = None
    label_column: str | None = None
    delimiter: str = ","

    def load(self) -> Dataset:
        if self.path is None:
            return load_bundled(self.name)
        if not self.label_column:
            raise ConfigError("dataset.label_column is required with dataset.path")
        return load_csv_dataset(self.path, self.label_column, self.delimiter, name=self.name)


@dataclass(frozen=True)
class SweepConfig:
    dataset: DatasetRef
    encodings: tuple[str, ...] = tuple(e.name for e in default_encodings())
    layer_grid: tuple[int, ...] = DEFAULT_LAYERS
    reuploading: tuple[bool, ...] = (False, True)
    repetitions: int = 10
    base_seed: int = 0
    num_qubits: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    split_fraction: float = 0.8
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if not self.encodings or not self.layer_grid or not self.reuploading:
            raise ConfigError("encodings, layer_grid and reuploading must be nonempty")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 < self.split_fraction < 1:
            raise ConfigError("split_fraction must lie in (0, 1)")
        for name in self.encodings:
            try:
                EncodingSpec.parse(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        for layers in self.layer_grid:
            if layers < 0:
                raise ConfigError("layer counts must be >= 0")
            if layers % 2 and True in self.reuploading:
                raise ConfigError(f"re-uploading needs even layer counts, got {layers}")

    def qubits_for(self, dataset: Dataset) -> int:
        if self.num_qubits is not None:
            return self.num_qubits
        return QUBITS.get(dataset.name, default_qubits(dataset))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["version"] = CONFIG_VERSION
        d.pop("output")
        d.pop("workers")  # execution detail, not part of the experiment
        d["train"].pop("repetitions")
        d["train"].pop("seed")
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_CONFIG_KEYS = {
    "version", "dataset", "encodings", "layers", "reuploading", "repetitions",
    "base_seed", "num_qubits", "train", "split_fraction", "workers", "output",
}
_TRAIN_KEYS = {"learning_rate", "epochs", "batch_size"}


def _as_list(value, key):
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, (str, int, bool)):
        return [value]
    raise ConfigError(f"{key} must be a list")


def sweep_config_from_dict(raw: dict) -> SweepConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {raw.get('version')!r}")
    ds = raw.get("dataset")
    if isinstance(ds, str):
        ref = DatasetRef(ds)
    elif isinstance(ds, dict) and "path" in ds:
        ref = DatasetRef(
            name=str(ds.get("name") or Path(ds["path"]).stem),
            path=str(ds["path"]),
            label_column=ds.get("label_column"),
            delimiter=str(ds.get("delimiter", ",")),
        )
    else:
        raise ConfigError("dataset must be a bundled name or a mapping with a path")
    tr = raw.get("train") or {}
    if not isinstance(tr, dict) or set(tr) - _TRAIN_KEYS:
        raise ConfigError(f"train accepts only {sorted(_TRAIN_KEYS)}")
    kwargs = {}
    if "encodings" in raw:
        kwargs["encodings"] = tuple(str(e) for e in _as_list(raw["encodings"], "encodings"))
    if "layers" in raw:
        kwargs["layer_grid"] = tuple(int(x) for x in _as_list(raw["layers"], "layers"))
    if "reuploading" in raw:
        values = _as_list(raw["reuploading"], "reuploading")
        if not all(isinstance(v, bool) for v in values):
            raise ConfigError("reuploading entries must be true/false")
        kwargs["reuploading"] = tuple(values)
    for key in ("repetitions", "base_seed", "workers"):
        if key in raw:
            kwargs[key] = int(raw[key])
    if raw.get("num_qubits") is not None:
        kwargs["num_qubits"] = int(raw["num_qubits"])
    if "split_fraction" in raw:
        kwargs["split_fraction"] = float(raw["split_fraction"])
    if raw.get("output") is not None:
        kwargs["output"] = str(raw["output"])
    try:
        train = TrainConfig(**{k: type(getattr(TrainConfig(), k))(v) for k, v in tr.items()})
        return SweepConfig(dataset=ref, train=train, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_sweep_config(path: str | os.PathLike) -> SweepConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return sweep_config_from_dict(raw)


# --------------------------------------------------------------------------
# runs


def _hash32(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


def run_seed(base_seed: int, encoding: str, layers: int, reuploading: bool, repetition: int) -> int:
    """Training seed: base_seed XOR the first 4 bytes of sha256("enc|L|RU|rep")."""
    return base_seed ^ _hash32(f"{encoding}|{layers}|{int(reuploading)}|{repetition}")


def split_seed(base_seed: int, repetition: int) -> int:
    """Split seed for a repetition, shared by every model so comparisons are paired."""
    return base_seed ^ _hash32(f"split|{repetition}")


@dataclass(frozen=True)
class Job:
    encoding: str
    layers: int
    reuploading: bool
    repetition: int

    @property
    def key(self) -> str:
        return f"{self.encoding}|L{self.layers}|RU{int(self.reuploading)}"

    @property
    def filename(self) -> str:
        return f"{self.encoding}_L{self.layers}_RU{int(self.reuploading)}_r{self.repetition}.json"


@dataclass
class RunResult:
    dataset: str
    encoding: str
    layers: int
    reuploading: bool
    repetition: int
    seed: int
    split: int
    train_metrics: dict[str, float]
    test_metrics: dict[str, float]
    loss_history: list[float]
    accuracy_history: list[float]
    train_seconds: float
    eval_train_seconds: float
    eval_test_seconds: float
    params: list[float] = field(default_factory=list)
    undefined: list[str] = field(default_factory=list)

    @property
    def key(self) -> str:
        return f"{self.encoding}|L{self.layers}|RU{int(self.reuploading)}"

    def value(self, name: str) -> float:
        if name in TIMINGS:
            return getattr(self, name)
        return self.test_metrics[name]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunResult":
        return cls(**d)


def sweep_jobs(config: SweepConfig) -> list[Job]:
    """Jobs in a fixed order: encoding, layers, RU, repetition."""
    jobs = []
    for enc in config.encodings:
        for layers in config.layer_grid:
            for ru in config.reuploading:
                for rep in range(config.repetitions):
                    jobs.append(Job(enc, layers, ru, rep))
    return jobs


def execution_order(jobs: Iterable[Job]) -> list[Job]:
    """Run repetition by repetition, reversing the model order on odd
    repetitions, so slow phases of the machine and linear drift in its speed
    spread evenly over models. Results are still reported in job order."""
    by_rep: dict[int, list[Job]] = {}
    for job in jobs:
        by_rep.setdefault(job.repetition, []).append(job)
    order: list[Job] = []
    for rep in sorted(by_rep):
        order.extend(reversed(by_rep[rep]) if rep % 2 else by_rep[rep])
    return order


@dataclass
class _Context:
    config: SweepConfig
    dataset: Dataset
    prepared: dict = field(default_factory=dict)

    def split(self, repetition: int, family):
        key = (repetition, family)
        if key not in self.prepared:
            seed = split_seed(self.config.base_seed, repetition)
            train, test = train_test_split(self.dataset, self.config.split_fraction, seed)
            qubits = self.config.qubits_for(self.dataset)
            pipe = PipelineSpec(qubits, split_fraction=self.config.split_fraction, seed=seed)
            self.prepared[key] = (seed, prepare(train, test, family, pipe))
        return self.prepared[key]


def execute_job(ctx: _Context, job: Job) -> RunResult:
    spec = EncodingSpec.parse(job.encoding)
    split, data = ctx.split(job.repetition, spec.family)
    seed = run_seed(ctx.config.base_seed, job.encoding, job.layers, job.reuploading, job.repetition)
    model_cfg = ModelConfig(
        spec, data.num_qubits, job.layers, job.reuploading, num_classes=data.num_classes
    )
    tc = TrainConfig(
        learning_rate=ctx.config.train.learning_rate,
        epochs=ctx.config.train.epochs,
        batch_size=ctx.config.train.batch_size,
        repetitions=ctx.config.repetitions,
        seed=seed,
    )
    t0 = time.perf_counter()
    trained = train_model(model_cfg, data.train_x, data.train_y, tc)
    t1 = time.perf_counter()
    ev_train = evaluate_metrics(trained.model, data.train_x, data.train_y)
    t2 = time.perf_counter()
    ev_test = evaluate_metrics(trained.model, data.test_x, data.test_y)
    t3 = time.perf_counter()
    return RunResult(
        dataset=ctx.dataset.name,
        encoding=job.encoding,
        layers=job.layers,
        reuploading=job.reuploading,
        repetition=job.repetition,
        seed=seed,
        split=split,
        train_metrics=ev_train.metrics.as_dict(),
        test_metrics=ev_test.metrics.as_dict(),
        loss_history=[float(x) for x in trained.loss_history],
        accuracy_history=[float(x) for x in trained.accuracy_history],
        train_seconds=t1 - t0,
        eval_train_seconds=t2 - t1,
        eval_test_seconds=t3 - t2,
        params=[float(x) for x in trained.model.params],
        undefined=sorted(set(ev_test.metrics.undefined)),
    )


_WORKER: _Context | None = None


def _init_worker(config: SweepConfig, dataset: Dataset) -> None:
    global _WORKER
    _WORKER = _Context(config, dataset)


def _worker_run(job: Job):
    try:
        return job, execute_job(_WORKER, job), None
    except Exception as exc:  # reported per run, the sweep continues
        return job, None, f"{type(exc).__name__}: {exc}"


@dataclass
class SweepOutcome:
    results: list[RunResult]
    errors: list[tuple[Job, str]]
    skipped: int = 0


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_existing(path: Path, job: Job, seed: int) -> RunResult | None:
    try:
        result = RunResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except (OSError, ValueError, TypeError) as exc:
        log.warning("ignoring unreadable run file %s: %s", path, exc)
        return None
    if result.seed != seed or result.key != job.key or result.repetition != job.repetition:
        log.warning("run file %s does not match this sweep, recomputing", path)
        return None
    return result


def run_sweep(
    config: SweepConfig,
    out_dir: str | os.PathLike | None = None,
    resume: bool = False,
    progress: Callable[[Job, RunResult | None, str | None], None] | None = None,
) -> SweepOutcome:
    """Train and evaluate every job; each finished run is written to
    ``out_dir/runs/<job>.json`` by this process alone. With ``resume``
    existing run files are reused instead of recomputed."""
    dataset = config.dataset.load()
    jobs = sweep_jobs(config)
    runs_dir = Path(out_dir) / "runs" if out_dir is not None else None
    done: dict[Job, RunResult] = {}
    if resume and runs_dir is not None:
        for job in jobs:
            path = runs_dir / job.filename
            if path.exists():
                seed = run_seed(config.base_seed, job.encoding, job.layers, job.reuploading, job.repetition)
                existing = _load_existing(path, job, seed)
                if existing is not None:
                    done[job] = existing
    pending = execution_order(j for j in jobs if j not in done)
    errors: list[tuple[Job, str]] = []

    def sink(job: Job, result: RunResult | None, err: str | None) -> None:
        if result is not None and runs_dir is not None:
            try:
                _write_atomic(runs_dir / job.filename, result.to_json())
            except OSError as exc:
                err = f"write failed: {exc}"
        if err is not None:
            errors.append((job, err))
            log.error("run %s r%d failed: %s", job.key, job.repetition, err)
        else:
            done[job] = result
        if progress is not None:
            progress(job, result, err)

    if config.workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(
            max_workers=config.workers, initializer=_init_worker, initargs=(config, dataset)
        ) as pool:
            for job, result, err in pool.map(_worker_run, pending):
                sink(job, result, err)
    else:
        ctx = _Context(config, dataset)
        for job in pending:
            try:
                sink(job, execute_job(ctx, job), None)
            except Exception as exc:
                sink(job, None, f"{type(exc).__name__}: {exc}")
    results = [done[j] for j in jobs if j in done]
    return SweepOutcome(results, errors, skipped=len(jobs) - len(pending))


# --------------------------------------------------------------------------
# aggregation and reports


@dataclass(frozen=True)
class Aggregate:
    dataset: str
    encoding: str
    layers: int
    reuploading: bool
    runs: int
    mean: dict[str, float]
    std: dict[str, float]


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if np.all(arr == arr[0]):
        return float(arr[0]), 0.0  # exact, free of summation rounding
    mean = float(np.mean(arr))
    std = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
    return mean, std


def aggregate(results: Iterable[RunResult]) -> list[Aggregate]:
    """Mean and sample std (n-1) of every raw metric and timing per model.
    Models come out in first-seen order; runs keep their input order."""
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        groups.setdefault((r.dataset, r.encoding, r.layers, r.reuploading), []).append(r)
    out = []
    for (ds, enc, layers, ru), runs in groups.items():
        mean, std = {}, {}
        for name in AGGREGATED:
            mean[name], std[name] = _mean_std([r.value(name) for r in runs])
        out.append(Aggregate(ds, enc, layers, ru, len(runs), mean, std))
    return out


@dataclass(frozen=True)
class GroupReport:
    layers: int
    reuploading: bool
    metric: str
    best_encoding: str
    best_mean: float
    best_std: float
    worst_encoding: str
    worst_mean: float
    worst_std: float
    delta: float
    delta_std: float


def best_worst_report(
    aggregates: Iterable[Aggregate], metric: str = "accuracy", percent: bool = True
) -> list[GroupReport]:
    """Best and worst encoding per (layers, RU) group on the mean of
    ``metric``; ties go to the lexicographically smallest encoding name.
    Values are scaled to percent unless ``percent`` is false."""
    if metric not in AGGREGATED:
        raise ValueError(f"unknown metric {metric!r}; choose from {AGGREGATED}")
    scale = 100.0 if percent else 1.0
    groups: dict[tuple[int, bool], list[Aggregate]] = {}
    for a in aggregates:
        groups.setdefault((a.layers, a.reuploading), []).append(a)
    reports = []
    for (layers, ru) in sorted(groups):
        members = groups[(layers, ru)]
        best = min(members, key=lambda a: (-a.mean[metric], a.encoding))
        worst = min(members, key=lambda a: (a.mean[metric], a.encoding))
        b_mean, b_std = best.mean[metric] * scale, best.std[metric] * scale
        w_mean, w_std = worst.mean[metric] * scale, worst.std[metric] * scale
        reports.append(
            GroupReport(
                layers, ru, metric,
                best.encoding, b_mean, b_std,
                worst.encoding, w_mean, w_std,
                b_mean - w_mean, math.sqrt(b_std**2 + w_std**2),
            )
        )
    return reports


def format_report(reports: Sequence[GroupReport]) -> str:
    head = f"{'layers':>6} {'RU':>5}  {'best':<12} {'mean':>10} {'std':>9}  {'worst':<12} {'mean':>10} {'std':>9} {'delta':>10} {'delta_std':>9}"
    lines = [head]
    for r in reports:
        lines.append(
            f"{r.layers:>6} {str(r.reuploading):>5}  {r.best_encoding:<12} {r.best_mean:>10.6f} {r.best_std:>9.6f}"
            f"  {r.worst_encoding:<12} {r.worst_mean:>10.6f} {r.worst_std:>9.6f} {r.delta:>10.6f} {r.delta_std:>9.6f}"
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------
# staged auto-selection


@dataclass
class StageLog:
    stage: int
    encodings: list[str]
    runs: int
    best_key: str | None
    best_score: float | None
    running_best: str | None
    running_score: float | None
    decision: str


@dataclass
class AutoSelectResult:
    config: ModelConfig | None
    score: float | None
    stages: list[StageLog]
    truncated: bool
    runs_used: int


def auto_select_stages() -> list[list[str]]:
    """Angle encodings grouped by gate count: 1, 2, 3 and 4 tags."""
    stages: dict[int, list[str]] = {}
    for spec in enumerate_angle_strategies():
        stages.setdefault(len(spec.gate_tags), []).append(spec.name)
    return [stages[k] for k in sorted(stages)]


def auto_select(
    dataset: DatasetRef | Dataset,
    budget: int | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    layer_grid: Sequence[int] = DEFAULT_LAYERS,
    reuploading: Sequence[bool] = (False,),
    repetitions: int = 3,
    train: TrainConfig | None = None,
    base_seed: int = 0,
    num_qubits: int | None = None,
    metric: str = "accuracy",
) -> AutoSelectResult:
    """Escalate through encoding complexity until the mean test ``metric`` of
    the best model found so far reaches ``threshold``. ``budget`` counts
    training runs; a stage that no longer fits ends the search with the
    truncation flag set."""
    if isinstance(dataset, Dataset):
        ds, ref = dataset, DatasetRef(dataset.name)
    else:
        ds, ref = dataset.load(), dataset
    stages = auto_select_stages()
    base = SweepConfig(
        dataset=ref,
        encodings=tuple(stages[0]),
        layer_grid=tuple(layer_grid),
        reuploading=tuple(reuploading),
        repetitions=repetitions,
        base_seed=base_seed,
        num_qubits=num_qubits,
        train=train or TrainConfig(),
    )
    cost = [len(sweep_jobs(_with_encodings(base, s))) for s in stages]
    if budget is None:
        budget = sum(cost)
    if budget < cost[0]:
        raise ConfigError(f"budget {budget} is below the first-stage cost of {cost[0]} runs")
    ctx = _Context(base, ds)
    logs: list[StageLog] = []
    best_key = best_score = None
    best_cfg = None
    used = 0
    truncated = False
    for i, encodings in enumerate(stages, start=1):
        if used + cost[i - 1] > budget:
            truncated = True
            logs.append(StageLog(i, encodings, 0, None, None, best_key, best_score,
                                 f"stage needs {cost[i - 1]} runs, {budget - used} left; stopping"))
            break
        sweep = _with_encodings(base, encodings)
        results = [execute_job(ctx, job) for job in sweep_jobs(sweep)]
        used += len(results)
        aggs = aggregate(results)
        stage_best = min(aggs, key=lambda a: (-a.mean[metric], a.encoding, a.layers, a.reuploading))
        s_key = f"{stage_best.encoding}|L{stage_best.layers}|RU{int(stage_best.reuploading)}"
        s_score = stage_best.mean[metric]
        if best_score is None or s_score > best_score:
            best_key, best_score = s_key, s_score
            spec = EncodingSpec.parse(stage_best.encoding)
            data = ctx.split(0, spec.family)[1]
            best_cfg = ModelConfig(spec, data.num_qubits, stage_best.layers,
                                   stage_best.reuploading, data.num_classes)
        if best_score >= threshold:
            decision = f"best {best_score:.6f} >= threshold {threshold}; stop"
        elif i == len(stages):
            decision = f"best {best_score:.6f} < threshold {threshold}; no stages left"
        else:
            decision = f"best {best_score:.6f} < threshold {threshold}; escalate"
        logs.append(StageLog(i, encodings, len(results), s_key, s_score, best_key, best_score, decision))
        log.info("stage %d: %s", i, decision)
        if best_score >= threshold:
            break
    return AutoSelectResult(best_cfg, best_score, logs, truncated, used)


def _with_encodings(config: SweepConfig, encodings: Sequence[str]) -> SweepConfig:
    d = {f: getattr(config, f) for f in config.__dataclass_fields__}
    d["encodings"] = tuple(encodings)
    return SweepConfig(**d)


# --------------------------------------------------------------------------
# export


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def raw_rows(results: Iterable[RunResult]) -> list[list]:
    return [
        [r.dataset, r.encoding, r.layers, str(r.reuploading).lower(), r.seed, r.split]
        + [float(r.test_metrics[m]) for m in RAW_METRICS]
        + [float(getattr(r, t)) for t in TIMINGS]
        for r in results
    ]


def raw_csv(results: Iterable[RunResult]) -> str:
    return _csv_text(RAW_HEADER, raw_rows(results))


def read_raw_csv(path: str | os.PathLike) -> list[RunResult]:
    """Rebuild results from a raw CSV (test metrics and timings only)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RAW_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(
                RunResult(
                    dataset=row["dataset"],
                    encoding=row["encoding"],
                    layers=int(row["layers"]),
                    reuploading=row["reuploading"] == "true",
                    repetition=-1,
                    seed=int(row["seed"]),
                    split=int(row["split"]),
                    train_metrics={},
                    test_metrics={m: float(row[m]) for m in RAW_METRICS},
                    loss_history=[],
                    accuracy_history=[],
                    **{t: float(row[t]) for t in TIMINGS},
                )
            )
    return out


def aggregate_csv(aggregates: Iterable[Aggregate]) -> str:
    header = ["dataset", "encoding", "layers", "reuploading", "runs"]
    for name in AGGREGATED:
        header += [f"{name}_mean", f"{name}_std"]
    rows = []
    for a in aggregates:
        row = [a.dataset, a.encoding, a.layers, str(a.reuploading).lower(), a.runs]
        for name in AGGREGATED:
            row += [a.mean[name], a.std[name]]
        rows.append(row)
    return _csv_text(header, rows)


REPORT_HEADER = (
    "layers", "reuploading", "metric",
    "best_encoding", "best_percent", "best_std",
    "worst_encoding", "worst_percent", "worst_std",
    "delta", "delta_std",
)


def report_csv(reports: Iterable[GroupReport]) -> str:
    rows = [
        [r.layers, str(r.reuploading).lower(), r.metric,
         r.best_encoding, r.best_mean, r.best_std,
         r.worst_encoding, r.worst_mean, r.worst_std,
         r.delta, r.delta_std]
        for r in reports
    ]
    return _csv_text(REPORT_HEADER, rows)


def manifest(config: SweepConfig | None, results: Sequence[RunResult], errors=()) -> dict:
    return {
        "format_version": CONFIG_VERSION,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config.as_dict() if config is not None else None,
        "config_hash": config.hash if config is not None else None,
        "runs": len(results),
        "seeds": [
            {"model": r.key, "repetition": r.repetition, "seed": r.seed, "split": r.split}
            for r in results
        ],
        "errors": [{"model": j.key, "repetition": j.repetition, "error": e} for j, e in errors],
        "timings_note": "wall-clock seconds; machine dependent",
    }


def export_results(
    out_dir: str | os.PathLike,
    results: Sequence[RunResult],
    aggregates: Sequence[Aggregate] | None = None,
    reports: Sequence[GroupReport] | None = None,
    config: SweepConfig | None = None,
    errors: Sequence[tuple[Job, str]] = (),
    formats: Sequence[str] = ("raw", "aggregate", "report", "manifest"),
) -> dict[str, Path]:
    """Write the requested files atomically; returns format -> path."""
    out = Path(out_dir)
    if aggregates is None:
        aggregates = aggregate(results)
    if reports is None:
        reports = best_worst_report(aggregates)
    written = {}
    for fmt in formats:
        if fmt == "raw":
            path, text = out / "raw.csv", raw_csv(results)
        elif fmt == "aggregate":
            path, text = out / "aggregate.csv", aggregate_csv(aggregates)
        elif fmt == "report":
            metric = reports[0].metric if reports else "accuracy"
            path, text = out / f"report_{metric}.csv", report_csv(reports)
        elif fmt == "manifest":
            path = out / "manifest.json"
            text = json.dumps(manifest(config, results, errors), indent=2, sort_keys=True) + "\n"
        else:
            raise ValueError(f"unknown export format {fmt!r}")
        _write_atomic(path, text)
        written[fmt] = path
    return written


def load_results_dir(in_dir: str | os.PathLike) -> list[RunResult]:
    """Results from ``runs/*.json`` in a sweep directory, else from raw.csv."""
    d = Path(in_dir)
    files = sorted((d / "runs").glob("*.json")) if (d / "runs").is_dir() else []
    if files:
        results = [RunResult.from_dict(json.loads(f.read_text(encoding="utf-8"))) for f in files]
        results.sort(key=lambda r: (canonical_order(EncodingSpec.parse(r.encoding)), r.layers,
                                    r.reuploading, r.repetition))
        return results
    if (d / "raw.csv").exists():
        return read_raw_csv(d / "raw.csv")
    raise FileNotFoundError(f"{d}: no runs/*.json or raw.csv")
