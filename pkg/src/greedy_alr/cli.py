"""Config-driven experiment runner.

Usage::

    greedy-alr experiment.yaml [--output-dir DIR] [--repetitions N] [--workers N] [-v]

Exit status: 0 on success, 1 for an invalid config, 2 when some
(dataset, strategy) cells failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .dataset import (
    ColumnSpec,
    Dataset,
    PoolSpec,
    budget_k,
    drowsiness_index,
    load_dataset,
    synthetic_linear,
)
from .harness import (
    MEASURES,
    Protocol,
    aggregate,
    make_tasks,
    normalized_run_aucs,
    run_tasks,
    write_curve_csv,
    write_rank_csv,
    write_runs_csv,
)
from .samplers import BL, COMMITTEE, STRATEGIES, StrategyConfig
from .stats import compare, pooled_samples, render_table, write_dunn_csv

log = logging.getLogger("greedy_alr")

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL = 0, 1, 2


@dataclass
class DatasetEntry:
    id: str
    path: str | None = None
    columns: Any = None          # JSON sidecar path or an inline mapping
    synthetic: dict | None = None
    label_transform: dict | None = None


@dataclass
class ExperimentConfig:
    datasets: list[DatasetEntry] = field(default_factory=list)
    strategies: list[dict] = field(default_factory=list)
    lam: float = 0.01
    bias: bool = True
    pool: dict = field(default_factory=dict)
    k0: int | None = None
    repetitions: int = 100
    workers: int = 1
    output_dir: str = "results"
    master_seed: int = 0
    alpha: float = 0.05
    normalize: bool = True
    dunn: bool = True
    stats_scheme: str = "pooled"
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        d = dict(d or {})
        entries = []
        for item in d.get("datasets") or []:
            item = dict(item or {})
            entries.append(DatasetEntry(
                id=str(item.get("id", "")),
                path=item.get("path"),
                columns=item.get("columns"),
                synthetic=item.get("synthetic"),
                label_transform=item.get("label_transform"),
            ))
        strategies = [
            {"kind": s} if isinstance(s, str) else dict(s) for s in d.get("strategies") or []
        ]
        report = d.get("report") or {}
        return cls(
            datasets=entries,
            strategies=strategies,
            lam=d.get("lambda", 0.01),
            bias=d.get("bias", True),
            pool=dict(d.get("pool") or {}),
            k0=d.get("k0"),
            repetitions=d.get("repetitions", 100),
            workers=d.get("workers", 1),
            output_dir=d.get("output_dir", "results"),
            master_seed=d.get("master_seed", 0),
            alpha=report.get("alpha", d.get("alpha", 0.05)),
            normalize=report.get("normalize", True),
            dunn=report.get("dunn", True),
            stats_scheme=report.get("scheme", "pooled"),
            base_dir=Path(base_dir),
        )

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as f:
            return cls.from_dict(yaml.safe_load(f), base_dir=path.parent)

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def pool_spec(self) -> PoolSpec:
        keys = {"fraction": "pool_fraction", "k_min": "k_min", "k_max": "k_max", "k_fraction": "k_fraction"}
        return PoolSpec(**{keys[k]: v for k, v in self.pool.items() if k in keys})

    def strategy_configs(self) -> list[StrategyConfig]:
        out = []
        for s in self.strategies:
            out.append(StrategyConfig(
                kind=s["kind"],
                committee_size=int(s.get("committee_size", 4)),
                first_sample=s.get("first_sample", "mean"),
            ))
        return out

    def canonical(self) -> dict:
        """Everything that determines results (not workers, not output dir)."""
        return {
            "datasets": [
                {"id": e.id, "path": e.path, "columns": e.columns,
                 "synthetic": e.synthetic, "label_transform": e.label_transform}
                for e in self.datasets
            ],
            "strategies": self.strategies,
            "lambda": self.lam,
            "bias": self.bias,
            "pool": self.pool,
            "k0": self.k0,
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "alpha": self.alpha,
            "normalize": self.normalize,
            "dunn": self.dunn,
            "scheme": self.stats_scheme,
        }

    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()


def _is_int(x) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


def validate_config(cfg: ExperimentConfig) -> list[str]:
    """List every problem with the config; an empty list means valid."""
    errs: list[str] = []
    if not cfg.strategies:
        errs.append("strategies empty")
    kinds = []
    for i, s in enumerate(cfg.strategies):
        kind = s.get("kind")
        if kind not in STRATEGIES:
            errs.append(f"strategies[{i}]: unknown kind {kind!r} (expected one of {list(STRATEGIES)})")
            continue
        kinds.append(kind)
        if kind in COMMITTEE:
            p = s.get("committee_size", 4)
            if not _is_int(p) or p < 2:
                errs.append(f"strategies[{i}]: committee_size must be an integer >= 2, got {p!r}")
        if s.get("first_sample", "mean") not in ("mean", "medoid"):
            errs.append(f"strategies[{i}]: first_sample must be 'mean' or 'medoid'")
    dupes = sorted({k for k in kinds if kinds.count(k) > 1})
    if dupes:
        errs.append(f"strategies listed more than once: {dupes}")
    if (cfg.normalize or cfg.dunn) and cfg.strategies and BL not in kinds:
        errs.append("BL is required when normalization or Dunn tables are requested")

    if not cfg.datasets:
        errs.append("datasets empty")
    ids = [e.id for e in cfg.datasets]
    for i, e in enumerate(cfg.datasets):
        where = f"datasets[{i}]"
        if not e.id:
            errs.append(f"{where}: missing id")
        elif any(c in e.id for c in "/\\"):
            errs.append(f"{where}: id {e.id!r} must not contain path separators")
        if (e.path is None) == (e.synthetic is None):
            errs.append(f"{where}: give exactly one of 'path' or 'synthetic'")
        if e.path is not None:
            if not cfg.resolve(e.path).is_file():
                errs.append(f"{where}: file not found: {e.path}")
            if e.columns is None:
                errs.append(f"{where}: 'columns' (column spec) is required with 'path'")
            elif isinstance(e.columns, str):
                if not cfg.resolve(e.columns).is_file():
                    errs.append(f"{where}: column spec not found: {e.columns}")
            elif not (isinstance(e.columns, dict) and "label" in e.columns):
                errs.append(f"{where}: inline column spec needs a 'label'")
        if e.synthetic is not None:
            syn = e.synthetic
            if not isinstance(syn, dict) or not _is_int(syn.get("n")) or not _is_int(syn.get("d")):
                errs.append(f"{where}: synthetic needs integer 'n' and 'd'")
        if e.label_transform is not None:
            lt = e.label_transform
            if not isinstance(lt, dict) or lt.get("kind") != "drowsiness":
                errs.append(f"{where}: label_transform kind must be 'drowsiness'")
            elif not _is_num(lt.get("tau0", 1.0)):
                errs.append(f"{where}: label_transform tau0 must be a number")
    dup_ids = sorted({i for i in ids if ids.count(i) > 1})
    if dup_ids:
        errs.append(f"duplicate dataset ids: {dup_ids}")

    if not _is_num(cfg.lam) or not cfg.lam > 0:
        errs.append(f"lambda must be positive, got {cfg.lam!r}")
    if not isinstance(cfg.bias, bool):
        errs.append("bias must be true or false")
    unknown = set(cfg.pool) - {"fraction", "k_min", "k_max", "k_fraction"}
    if unknown:
        errs.append(f"pool: unknown keys {sorted(unknown)}")
    frac = cfg.pool.get("fraction", 0.8)
    if not _is_num(frac) or not 0 < frac <= 1:
        errs.append(f"pool.fraction must lie in (0, 1], got {frac!r}")
    kmin, kmax = cfg.pool.get("k_min", 20), cfg.pool.get("k_max", 60)
    if not (_is_int(kmin) and _is_int(kmax)):
        errs.append("pool.k_min and pool.k_max must be integers")
    elif kmin > kmax:
        errs.append(f"pool.k_min ({kmin}) > pool.k_max ({kmax})")
    kf = cfg.pool.get("k_fraction", 0.2)
    if not _is_num(kf) or kf <= 0:
        errs.append(f"pool.k_fraction must be positive, got {kf!r}")
    if cfg.k0 is not None and (not _is_int(cfg.k0) or cfg.k0 < 1):
        errs.append(f"k0 must be a positive integer, got {cfg.k0!r}")
    if not _is_int(cfg.repetitions) or cfg.repetitions < 1:
        errs.append(f"repetitions must be a positive integer, got {cfg.repetitions!r}")
    if not _is_int(cfg.workers) or cfg.workers < 1:
        errs.append(f"workers must be a positive integer, got {cfg.workers!r}")
    if not _is_int(cfg.master_seed):
        errs.append(f"master_seed must be an integer, got {cfg.master_seed!r}")
    if not _is_num(cfg.alpha) or not 0 <= cfg.alpha <= 1:
        errs.append(f"alpha must lie in [0, 1], got {cfg.alpha!r}")
    if cfg.stats_scheme not in ("pooled", "per_dataset"):
        errs.append(f"report.scheme must be 'pooled' or 'per_dataset', got {cfg.stats_scheme!r}")
    return errs


def load_entry(cfg: ExperimentConfig, e: DatasetEntry) -> Dataset:
    if e.synthetic is not None:
        syn = e.synthetic
        ds = synthetic_linear(
            int(syn["n"]), int(syn["d"]), float(syn.get("noise", 0.5)), int(syn.get("seed", 0)), name=e.id
        )
    else:
        spec = ColumnSpec.from_dict(e.columns) if isinstance(e.columns, dict) else cfg.resolve(e.columns)
        ds = load_dataset(cfg.resolve(e.path), spec, name=e.id)
    if e.label_transform is not None:
        ds.labels = drowsiness_index(ds.labels, float(e.label_transform.get("tau0", 1.0)))
    return ds


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(float(x)) else float(x)
    return x


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None) -> int:
    """Run every (dataset, strategy, repetition) and write all artifacts.

    Writes ``runs.csv``, ``curves/<dataset>_<strategy>.csv``,
    ``ranks_<measure>.csv``, ``summary.json``, ``dunn_<measure>.csv`` / ``.txt`` and
    ``manifest.txt`` under the output directory.
    """
    problems = validate_config(cfg)
    if problems:
        for p in problems:
            log.error("config: %s", p)
        return EXIT_INVALID

    out = Path(output_dir) if output_dir is not None else cfg.resolve(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    strategies = cfg.strategy_configs()
    kinds = [s.kind for s in strategies]
    pool_spec = cfg.pool_spec()
    protocol = Protocol(pool=pool_spec, lam=float(cfg.lam), bias=cfg.bias, k0=cfg.k0)

    datasets: dict[str, Dataset] = {}
    missing: dict[tuple[str, str], str] = {}
    for e in cfg.datasets:
        try:
            datasets[e.id] = load_entry(cfg, e)
        except Exception as exc:
            log.error("dataset %s failed to load: %s", e.id, exc)
            for k in kinds:
                missing[e.id, k] = f"load failed: {exc}"

    tasks = make_tasks(list(datasets), strategies, cfg.repetitions, cfg.master_seed)
    log.info("running %d tasks on %d worker(s)", len(tasks), cfg.workers)
    records, failures = run_tasks(tasks, datasets, protocol, workers=cfg.workers)
    for task, err in failures:
        missing.setdefault((task.dataset, task.strategy.kind), err)

    complete = [d for d in datasets if not any((d, k) in missing for k in kinds)]
    kept = [r for r in records if r.dataset in complete]
    write_runs_csv(records, out / "runs.csv")
    artifacts = [out / "runs.csv"]

    summary: dict[str, Any] = {
        "version": __version__,
        "config_sha256": cfg.config_hash(),
        "strategies": kinds,
        "datasets": {
            d: {
                "n_samples": datasets[d].n_samples,
                "n_features": datasets[d].n_features,
                "dropped_constant_columns": datasets[d].dropped,
                "K": budget_k(datasets[d].n_samples, pool_spec),
                "K0": datasets[d].n_features if cfg.k0 is None else cfg.k0,
            }
            for d in datasets
        },
        "missing_cells": [
            {"dataset": d, "strategy": s, "error": err} for (d, s), err in sorted(missing.items())
        ],
    }

    if kept:
        agg = aggregate(kept, reference=BL if cfg.normalize else None)
        summary["auc"] = agg.to_dict()
        summary["cc_excluded_runs"] = {
            f"{d}/{s}": agg.cells[d, s].n_cc_excluded for d in agg.datasets for s in agg.strategies
        }
        (out / "curves").mkdir(exist_ok=True)
        for d in agg.datasets:
            for s in agg.strategies:
                path = out / "curves" / f"{d}_{s}.csv"
                write_curve_csv(agg.cells[d, s], path)
                artifacts.append(path)
        for m in MEASURES:
            write_rank_csv(agg, m, out / f"ranks_{m}.csv")
            artifacts.append(out / f"ranks_{m}.csv")

        if cfg.dunn:
            samples = {m: normalized_run_aucs(kept, agg, m) for m in MEASURES}
            if cfg.stats_scheme == "pooled":
                report = compare({m: pooled_samples(samples[m]) for m in MEASURES}, agg.strategies)
                summary["dunn"] = {"scheme": "pooled", **report.to_dict()}
                for m in MEASURES:
                    write_dunn_csv(report, m, out / f"dunn_{m}.csv", cfg.alpha)
                    (out / f"dunn_{m}.txt").write_text(render_table(report, m, cfg.alpha))
                    artifacts += [out / f"dunn_{m}.csv", out / f"dunn_{m}.txt"]
            else:
                summary["dunn"] = {"scheme": "per_dataset", "datasets": {}}
                for d in agg.datasets:
                    report = compare({m: samples[m][d] for m in MEASURES}, agg.strategies)
                    summary["dunn"]["datasets"][d] = report.to_dict()
                    for m in MEASURES:
                        path = out / f"dunn_{m}_{d}.csv"
                        write_dunn_csv(report, m, path, cfg.alpha)
                        artifacts.append(path)

    with open(out / "summary.json", "w") as f:
        json.dump(_jsonable(summary), f, indent=2, sort_keys=True)
        f.write("\n")
    artifacts.append(out / "summary.json")

    chash = cfg.config_hash()
    with open(out / "manifest.txt", "w") as f:
        for path in artifacts:
            rel = path.relative_to(out).as_posix()
            f.write(f"{rel}\tsha256={_sha256(path)}\tconfig={chash}\tversion={__version__}\n")

    if missing:
        log.error("%d cell(s) incomplete", len(missing))
        return EXIT_PARTIAL
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="greedy-alr", description=__doc__.splitlines()[0])
    parser.add_argument("config", help="YAML experiment config")
    parser.add_argument("-o", "--output-dir", help="override output_dir from the config")
    parser.add_argument("-r", "--repetitions", type=int, help="override repetitions")
    parser.add_argument("-w", "--workers", type=int, help="override worker count")
    parser.add_argument("--validate", action="store_true", help="only validate the config")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    args = parser.parse_args(argv)

    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = ExperimentConfig.from_yaml(args.config)
    except (OSError, yaml.YAMLError) as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.repetitions is not None:
        cfg.repetitions = args.repetitions
    if args.workers is not None:
        cfg.workers = args.workers

    problems = validate_config(cfg)
    if problems:
        for p in problems:
            print(f"invalid config: {p}", file=sys.stderr)
        return EXIT_INVALID
    if args.validate:
        print("config ok")
        return EXIT_OK
    return run_experiment(cfg, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
