"""Config-driven experiment runner writing per-seed metrics CSVs and a summary.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment. Recognised keys (defaults in brackets):

``dataset`` [checkers], ``data_file`` [unset; CSV dataset overriding the
generator], ``dataset_seed`` [0], ``data.<arg>`` [generator keyword
arguments, e.g. ``data.radius = 0.8``], ``qubits`` [4], ``layers`` [5],
``iterations`` [500], ``batch_size`` [8], ``learning_rate`` [0.1],
``gradient_method`` [parameter_shift], ``seeds`` [0..9, comma list or
``a-b`` range], ``method`` [standard], ``landmarks`` [8], ``noise`` [none],
``noise_levels`` [0], ``perturb_encoding`` [false], ``svm_c`` [1.0],
``svm_tol`` [1e-6], ``snapshot_every`` [25], ``record_wall_time`` [false].
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .ansatz import init_params
from .datasets import Dataset, load_csv, make_dataset
from .estimator import seed_streams
from .kernel import ExecutionLedger, QuantumKernel
from .noise import NOISE_KINDS, NoiseConfig
from .nystrom import executions_nystrom, executions_standard, select_landmarks
from .pipeline import METHODS, evaluate
from .trainer import GRADIENT_METHODS, TrainConfig, train

CSV_COLUMNS = ["seed", "iteration", "kta_full", "train_acc", "test_acc",
               "circuit_executions", "wall_time_ms"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: str = "checkers"
    data_file: Optional[str] = None
    dataset_seed: int = 0
    data_params: Dict[str, float] = field(default_factory=dict)
    qubits: int = 4
    layers: int = 5
    iterations: int = 500
    batch_size: int = 8
    learning_rate: float = 0.1
    gradient_method: str = "parameter_shift"
    seeds: List[int] = field(default_factory=lambda: list(range(10)))
    method: str = "standard"
    landmarks: int = 8
    noise: str = "none"
    noise_levels: List[float] = field(default_factory=lambda: [0.0])
    perturb_encoding: bool = False
    svm_c: float = 1.0
    svm_tol: float = 1e-6
    snapshot_every: int = 25
    record_wall_time: bool = False

    def validate(self, n_train: Optional[int] = None):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {NOISE_KINDS}, got {self.noise!r}")
        if self.gradient_method not in GRADIENT_METHODS:
            raise ConfigError(f"gradient_method must be one of {GRADIENT_METHODS}")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if not self.noise_levels:
            raise ConfigError("noise_levels is empty")
        if self.qubits < 1 or self.layers < 1:
            raise ConfigError("qubits and layers must be positive")
        if self.iterations < 0 or self.snapshot_every < 1:
            raise ConfigError("iterations must be >= 0 and snapshot_every >= 1")
        if self.landmarks < 1:
            raise ConfigError("landmarks must be at least 1")
        for lvl in self.noise_levels:
            try:
                NoiseConfig.from_level(self.noise, lvl)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if n_train is not None:
            if self.method == "nystrom" and self.landmarks > n_train:
                raise ConfigError(f"landmarks={self.landmarks} exceeds training size {n_train}")
            if self.batch_size > n_train:
                raise ConfigError(f"batch_size={self.batch_size} exceeds training size {n_train}")
        return self


_INT = {"dataset_seed", "qubits", "layers", "iterations", "batch_size", "landmarks",
        "snapshot_every"}
_FLOAT = {"learning_rate", "svm_c", "svm_tol"}
_BOOL = {"perturb_encoding", "record_wall_time"}
_STR = {"dataset", "data_file", "gradient_method", "method", "noise"}


def _parse_seeds(text: str) -> List[int]:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else (part, part)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return seeds


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string("[experiment]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    cfg = ExperimentConfig()
    for key, raw in parser["experiment"].items():
        value = raw.strip()
        try:
            if key in _INT:
                setattr(cfg, key, int(value))
            elif key in _FLOAT:
                setattr(cfg, key, float(value))
            elif key in _BOOL:
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"not a boolean: {value!r}")
                setattr(cfg, key, value.lower() in ("true", "1", "yes"))
            elif key in _STR:
                setattr(cfg, key, value)
            elif key == "seeds":
                cfg.seeds = _parse_seeds(value)
            elif key == "noise_levels":
                cfg.noise_levels = [float(v) for v in value.split(",") if v.strip()]
            elif key.startswith("data."):
                cfg.data_params[key[5:]] = float(value)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_file:
        return load_csv(cfg.data_file)
    kw = {k: (int(v) if float(v).is_integer() and k.startswith("n_") else v)
          for k, v in cfg.data_params.items()}
    return make_dataset(cfg.dataset, seed=cfg.dataset_seed, **kw)


def count_executions(N: int, P: int = 0, M: Optional[int] = None, method: str = "standard") -> dict:
    """Closed-form circuit executions for the final train and test matrices."""
    if N < 1 or P < 0:
        raise ValueError(f"invalid sizes N={N}, P={P}")
    if method == "standard":
        tr, te = executions_standard(N, P)
    elif method == "nystrom":
        if M is None:
            raise ValueError("nystrom counts need M")
        tr, te = executions_nystrom(N, M, P)
    else:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    return {"method": method, "N": N, "P": P, "M": M, "train": tr, "test": te}


def training_executions(iterations: int, batch_size: int, layers: int, qubits: int,
                        gradient_method: str = "parameter_shift") -> int:
    """Executions spent by mini-batch training.

    Per iteration the batch kernel costs ``D(D-1)/2``; parameter-shift adds
    two per trainable gate occurrence per entry, each trainable gate
    appearing once in ``U(x)`` and once in ``U(y)^dagger``. Finite
    differences add two full batch kernels per parameter.
    """
    entries = batch_size * (batch_size - 1) // 2
    n_params = 3 * layers * qubits
    if gradient_method == "parameter_shift":
        occurrences = 2 * n_params
        return iterations * entries * (1 + 2 * occurrences)
    return iterations * entries * (1 + 2 * n_params)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def metrics_csv_name(noise: str, level: float, seed: int) -> str:
    return f"metrics_{noise}-{level!r}_seed{seed}.csv"


def run_single(cfg: ExperimentConfig, seed: int, level: float, dataset: Optional[Dataset] = None):
    """Train and evaluate one (seed, noise level); returns rows and counts."""
    ds = dataset if dataset is not None else load_dataset(cfg)
    N, P = len(ds.train_y), len(ds.test_y)
    cfg.validate(N)
    t0 = time.perf_counter()
    s_init, s_batch, s_land, s_train_noise, _ = seed_streams(seed)
    noise = NoiseConfig.from_level(cfg.noise, level, seed=seed,
                                   perturb_encoding=cfg.perturb_encoding)
    ledger = ExecutionLedger()
    landmarks = (select_landmarks(N, cfg.landmarks, s_land) if cfg.method == "nystrom" else None)
    params0 = init_params(cfg.layers, cfg.qubits, s_init)
    rows = []

    def elapsed():
        return int((time.perf_counter() - t0) * 1000) if cfg.record_wall_time else 0

    def eval_rng(it):
        return np.random.default_rng(np.random.SeedSequence([seed, 4, it]))

    def snapshot(it, params):
        if it == cfg.iterations or it % cfg.snapshot_every:
            return
        # metrics kernels are not part of the pipeline cost
        kernel = QuantumKernel(params, ds.train_x.shape[1], noise, ExecutionLedger(), eval_rng(it))
        r = evaluate(kernel, ds.train_x, ds.train_y, ds.test_x, ds.test_y, cfg.method,
                     landmarks, cfg.svm_c, cfg.svm_tol)
        rows.append([seed, it, r.kta_full, r.train_acc, r.test_acc, ledger.count, elapsed()])

    tcfg = TrainConfig(iterations=cfg.iterations, batch_size=cfg.batch_size,
                       learning_rate=cfg.learning_rate, seed=seed,
                       gradient_method=cfg.gradient_method)
    params, _ = train(ds.train_x, ds.train_y, params0, tcfg, noise, ledger, s_batch,
                      s_train_noise, callback=snapshot)
    trained = ledger.count
    kernel = QuantumKernel(params, ds.train_x.shape[1], noise, ledger, eval_rng(cfg.iterations))
    r = evaluate(kernel, ds.train_x, ds.train_y, ds.test_x, ds.test_y, cfg.method,
                 landmarks, cfg.svm_c, cfg.svm_tol)
    rows.append([seed, cfg.iterations, r.kta_full, r.train_acc, r.test_acc, ledger.count, elapsed()])
    measured = {"training": trained, "train_matrix": r.train_executions,
                "test_matrix": r.test_executions, "total": ledger.count}
    pred = count_executions(N, P, cfg.landmarks if cfg.method == "nystrom" else None, cfg.method)
    predicted = {
        "training": training_executions(cfg.iterations, cfg.batch_size, cfg.layers, cfg.qubits,
                                        cfg.gradient_method),
        "train_matrix": pred["train"],
        "test_matrix": pred["test"],
    }
    predicted["total"] = sum(predicted.values())
    return {"seed": seed, "level": level, "rows": rows, "measured": measured,
            "predicted": predicted, "params": params.to_dict()}


def write_metrics_csv(rows, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_metrics_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append({k: (int(v) if k in ("seed", "iteration", "circuit_executions",
                                             "wall_time_ms") else float(v))
                        for k, v in row.items()})
        return out


def _job(args):
    cfg, seed, level, outdir = args
    res = run_single(cfg, seed, level)
    write_metrics_csv(res["rows"], Path(outdir) / metrics_csv_name(cfg.noise, level, seed))
    del res["rows"]
    return res


def summarize(cfg: ExperimentConfig, outdir, seeds, runs) -> dict:
    """Mean and (population) standard deviation across seeds, read back from the CSVs."""
    outdir = Path(outdir)
    levels = []
    for level in cfg.noise_levels:
        per_seed = {s: read_metrics_csv(outdir / metrics_csv_name(cfg.noise, level, s))
                    for s in seeds}
        iters = sorted({r["iteration"] for rows in per_seed.values() for r in rows})
        curves = []
        for it in iters:
            pts = [r for rows in per_seed.values() for r in rows if r["iteration"] == it]
            entry = {"iteration": it, "n_seeds": len(pts)}
            for key in ("kta_full", "train_acc", "test_acc", "circuit_executions"):
                vals = np.array([p[key] for p in pts], dtype=float)
                entry[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
            curves.append(entry)
        level_runs = [r for r in runs if r["level"] == level]
        levels.append({
            "noise": cfg.noise,
            "level": level,
            "final": curves[-1] if curves else None,
            "curves": curves,
            "total_executions": int(sum(r["measured"]["total"] for r in level_runs)),
            "executions_match_prediction": all(r["measured"] == r["predicted"] for r in level_runs),
        })
    return {"config": asdict(cfg), "seeds": list(seeds), "levels": levels, "runs": runs}


def run_experiment(cfg: ExperimentConfig, outdir, seed_offset: int = 0, jobs: int = 1) -> dict:
    """Run every (seed, noise level) job and write CSVs plus ``summary.json``."""
    ds = load_dataset(cfg)
    cfg.validate(len(ds.train_y))
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    seeds = [s + seed_offset for s in cfg.seeds]
    tasks = [(cfg, s, lvl, str(outdir)) for lvl in cfg.noise_levels for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_job, tasks))
    else:
        runs = [_job(t) for t in tasks]
    summary = summarize(cfg, outdir, seeds, runs)
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary
