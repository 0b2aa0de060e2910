"""Evaluation protocol: learning curves over the pool, AUCs and rank tables."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import Dataset, PoolSpec, budget_k, split_pool
from .model import DEFAULT_LAMBDA, predict
from .samplers import (
    BL,
    GREEDY_INIT,
    STRATEGIES,
    PoolState,
    SelectionError,
    StrategyConfig,
    greedy_initial,
    select_next,
)

log = logging.getLogger(__name__)

MEASURES = ("rmse", "cc")


class RunError(RuntimeError):
    pass


class AggregationError(ValueError):
    pass


@dataclass
class RunRecord:
    """Learning curve of one (dataset, strategy, repetition) run.

    ``cc`` holds NaN where the correlation is undefined. ``trace`` lists
    pool positions in the order they were labeled, initial ones included.
    """

    dataset: str
    strategy: str
    seed: int
    ks: np.ndarray
    rmse: np.ndarray
    cc: np.ndarray
    trace: list[int]
    repetition: int = 0

    @property
    def cc_defined(self) -> bool:
        return bool(np.all(np.isfinite(self.cc)))

    @property
    def degenerate(self) -> bool:
        return len(self.ks) < 2

    @property
    def key(self) -> tuple:
        return (self.dataset, self.strategy, self.repetition, self.seed)

    def curve(self, measure: str) -> np.ndarray:
        if measure not in MEASURES:
            raise ValueError(f"unknown measure {measure!r}")
        return self.rmse if measure == "rmse" else self.cc


def rmse(y_true, y_est) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_est = np.asarray(y_est, dtype=float)
    if y_true.shape != y_est.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_est.shape}")
    if y_true.size < 1:
        raise ValueError("empty input")
    return float(np.sqrt(np.mean((y_true - y_est) ** 2)))


def cc(y_true, y_est) -> float:
    """Pearson correlation; NaN when either side has zero variance."""
    a = np.asarray(y_true, dtype=float)
    b = np.asarray(y_est, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size < 2:
        raise ValueError("need at least 2 values")
    a = a - a.mean()
    b = b - b.mean()
    denom = math.sqrt(float(a @ a) * float(b @ b))
    if denom == 0.0:
        return math.nan
    return float(np.clip((a @ b) / denom, -1.0, 1.0))


def trapezoid(ks, values) -> float:
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(ks) < 2:
        return 0.0
    return float(np.sum((values[1:] + values[:-1]) * np.diff(ks)) / 2.0)


def auc(record: RunRecord, measure: str = "rmse") -> float:
    """Trapezoidal area under the measure-vs-k curve, NaN if the curve has
    undefined points. A single-point record has zero area (see
    ``RunRecord.degenerate``)."""
    values = record.curve(measure)
    if not np.all(np.isfinite(values)):
        return math.nan
    return trapezoid(record.ks, values)


def pool_estimates(state: PoolState, model, y_pool: np.ndarray) -> np.ndarray:
    """Model estimates for unlabeled samples, true labels for labeled ones."""
    est = predict(model, state.features)
    idx = state.labeled
    est[idx] = y_pool[idx]
    return est


def run_once(
    ds: Dataset,
    pool: Sequence[int],
    strategy: StrategyConfig,
    lam: float = DEFAULT_LAMBDA,
    K: int | None = None,
    *,
    k0: int | None = None,
    init: Sequence[int] | None = None,
    bias: bool = True,
    repetition: int = 0,
) -> RunRecord:
    """Grow the labeled set from K0 to K and record pool RMSE/CC at each size.

    ``init`` gives the K0 random starting positions (pool positions) for the
    non-greedy strategies; drawn from the strategy seed when omitted. GSx,
    GSy and iGS ignore it and start from the GSx sequence.
    """
    pool = np.asarray(pool, dtype=int)
    X = ds.features[pool]
    y = ds.labels[pool]
    n = len(pool)
    k0 = ds.n_features if k0 is None else int(k0)
    K = budget_k(ds.n_samples, PoolSpec()) if K is None else int(K)
    if not 1 <= k0 <= K:
        raise RunError(f"need 1 <= K0 <= K, got K0={k0}, K={K}")
    if K > n:
        raise RunError(f"budget K={K} exceeds pool size {n}")

    rng = np.random.default_rng(strategy.seed)
    where = f"{ds.name or 'dataset'}/{strategy.kind} rep={repetition} seed={strategy.seed}"

    if strategy.kind in GREEDY_INIT:
        start = greedy_initial(X, k0, strategy.first_sample)
    elif init is not None:
        start = [int(i) for i in init]
        if len(start) != k0 or len(set(start)) != k0:
            raise RunError(f"{where}: init must hold {k0} distinct pool positions")
    else:
        start = [int(i) for i in rng.choice(n, size=k0, replace=False)]

    state = PoolState(X)
    for i in start:
        state.add(i, y[i])

    ks, errs, ccs = [], [], []
    while True:
        model = state.fit(lam, bias)
        est = pool_estimates(state, model, y)
        ks.append(state.n_labeled)
        errs.append(rmse(y, est))
        ccs.append(cc(y, est))
        if state.n_labeled >= K:
            break
        try:
            nxt = select_next(state, strategy, model, rng, lam, bias, k0)
        except SelectionError as e:
            raise RunError(f"{where} k={state.n_labeled}: {e}") from e
        state.add(nxt, y[nxt])

    return RunRecord(
        dataset=ds.name,
        strategy=strategy.kind,
        seed=strategy.seed,
        ks=np.array(ks, dtype=int),
        rmse=np.array(errs),
        cc=np.array(ccs),
        trace=[int(i) for i in state.labeled],
        repetition=repetition,
    )


# -- aggregation -------------------------------------------------------------


@dataclass
class CellSummary:
    """AUC statistics of one (dataset, strategy) cohort."""

    n_runs: int
    n_cc_excluded: int
    ks: np.ndarray
    mean_rmse: np.ndarray
    mean_cc: np.ndarray
    auc: dict[str, float]            # AUC of the mean curve
    mean_run_auc: dict[str, float]   # mean of per-run AUCs
    normalized: dict[str, float] = field(default_factory=dict)
    normalized_run: dict[str, float] = field(default_factory=dict)


@dataclass
class AucSummary:
    datasets: list[str]
    strategies: list[str]
    cells: dict[tuple[str, str], CellSummary]
    ranks: dict[str, dict[str, dict[str, int]]]
    mean_rank: dict[str, dict[str, float]]
    average_rank: dict[str, dict[str, int]]
    reference: str | None

    def normalized_table(self, measure: str) -> dict[str, dict[str, float]]:
        return {
            d: {s: self.cells[d, s].normalized.get(measure, math.nan) for s in self.strategies}
            for d in self.datasets
        }

    def to_dict(self) -> dict:
        out = {
            "reference": self.reference,
            "datasets": list(self.datasets),
            "strategies": list(self.strategies),
            "cells": {},
            "ranks": self.ranks,
            "mean_rank": self.mean_rank,
            "average_rank": self.average_rank,
        }
        for d in self.datasets:
            out["cells"][d] = {}
            for s in self.strategies:
                c = self.cells[d, s]
                out["cells"][d][s] = {
                    "n_runs": c.n_runs,
                    "n_cc_excluded": c.n_cc_excluded,
                    "auc": c.auc,
                    "mean_run_auc": c.mean_run_auc,
                    "normalized_auc": c.normalized,
                    "normalized_mean_run_auc": c.normalized_run,
                }
        return out


def _strategy_order(names: Iterable[str]) -> list[str]:
    names = set(names)
    known = [s for s in STRATEGIES if s in names]
    return known + sorted(names - set(known))


def _rank(values: dict[str, float], order: list[str], larger_better: bool) -> dict[str, int]:
    """Ordinal ranks 1..S; ties and NaNs resolved by strategy order, NaN last."""
    def key(s):
        v = values[s]
        if not np.isfinite(v):
            return (1, 0.0, order.index(s))
        return (0, -v if larger_better else v, order.index(s))

    return {s: r + 1 for r, s in enumerate(sorted(order, key=key))}


def _summarize_cell(runs: list[RunRecord]) -> CellSummary:
    ks = runs[0].ks
    for r in runs:
        if not np.array_equal(r.ks, ks):
            raise AggregationError(
                f"{r.dataset}/{r.strategy}: runs disagree on the k grid"
            )
    rm = np.vstack([r.rmse for r in runs])
    good = [r for r in runs if r.cc_defined]
    mean_rmse = rm.mean(axis=0)
    mean_cc = np.vstack([r.cc for r in good]).mean(axis=0) if good else np.full(len(ks), math.nan)
    cc_aucs = [auc(r, "cc") for r in good]
    return CellSummary(
        n_runs=len(runs),
        n_cc_excluded=len(runs) - len(good),
        ks=ks,
        mean_rmse=mean_rmse,
        mean_cc=mean_cc,
        auc={"rmse": trapezoid(ks, mean_rmse), "cc": trapezoid(ks, mean_cc)},
        mean_run_auc={
            "rmse": float(np.mean([auc(r, "rmse") for r in runs])),
            "cc": float(np.mean(cc_aucs)) if cc_aucs else math.nan,
        },
    )


def group_records(records: Iterable[RunRecord]) -> dict[tuple[str, str], list[RunRecord]]:
    groups: dict[tuple[str, str], list[RunRecord]] = defaultdict(list)
    for r in sorted(records, key=lambda r: r.key):
        groups[r.dataset, r.strategy].append(r)
    return dict(groups)


def aggregate(records: Iterable[RunRecord], reference: str | None = BL) -> AucSummary:
    """Mean-curve AUCs per (dataset, strategy), normalized by the reference
    strategy, with per-dataset rank tables.

    Rank 1 is the smallest RMSE AUC and the largest CC AUC. The average
    row ranks the strategies by their mean per-dataset rank. Pass
    ``reference=None`` to rank raw AUCs without normalizing.
    """
    groups = group_records(records)
    if not groups:
        raise AggregationError("no records")
    datasets = sorted({d for d, _ in groups})
    strategies = _strategy_order(s for _, s in groups)
    for d in datasets:
        missing = [s for s in strategies if (d, s) not in groups]
        if missing:
            raise AggregationError(f"dataset {d!r} is missing strategy cohorts {missing}")
    if reference is not None and reference not in strategies:
        raise AggregationError(f"reference strategy {reference!r} absent")

    cells = {key: _summarize_cell(runs) for key, runs in groups.items()}
    for d in datasets:
        for s in strategies:
            c = cells[d, s]
            if reference is None:
                c.normalized = dict(c.auc)
                c.normalized_run = dict(c.mean_run_auc)
                continue
            ref = cells[d, reference]
            c.normalized = {m: _safe_div(c.auc[m], ref.auc[m]) for m in MEASURES}
            c.normalized_run = {
                m: _safe_div(c.mean_run_auc[m], ref.mean_run_auc[m]) for m in MEASURES
            }

    ranks: dict[str, dict[str, dict[str, int]]] = {m: {} for m in MEASURES}
    mean_rank: dict[str, dict[str, float]] = {}
    average_rank: dict[str, dict[str, int]] = {}
    for m in MEASURES:
        larger = m == "cc"
        for d in datasets:
            ranks[m][d] = _rank({s: cells[d, s].normalized[m] for s in strategies}, strategies, larger)
        mean_rank[m] = {s: float(np.mean([ranks[m][d][s] for d in datasets])) for s in strategies}
        average_rank[m] = average_rank_row(ranks[m], strategies)
    return AucSummary(datasets, strategies, cells, ranks, mean_rank, average_rank, reference)


def average_rank_row(
    ranks: dict[str, dict[str, int]], strategies: Sequence[str] | None = None
) -> dict[str, int]:
    """Rank strategies by mean per-dataset rank (lower mean rank is better)."""
    datasets = list(ranks)
    if strategies is None:
        strategies = _strategy_order(ranks[datasets[0]])
    strategies = list(strategies)
    means = {s: float(np.mean([ranks[d][s] for d in datasets])) for s in strategies}
    return _rank(means, strategies, larger_better=False)


def _safe_div(a: float, b: float) -> float:
    if not (np.isfinite(a) and np.isfinite(b)) or b == 0.0:
        return math.nan
    return a / b


def normalized_run_aucs(
    records: Iterable[RunRecord], summary: AucSummary, measure: str
) -> dict[str, dict[str, list[float]]]:
    """Per-run AUCs divided by the reference strategy's mean-curve AUC of
    the same dataset; runs with an undefined measure are skipped.

    Returned as ``{dataset: {strategy: [values...]}}``.
    """
    out: dict[str, dict[str, list[float]]] = {d: defaultdict(list) for d in summary.datasets}
    for r in sorted(records, key=lambda r: r.key):
        value = auc(r, measure)
        if not np.isfinite(value):
            continue
        ref = summary.cells[r.dataset, summary.reference].auc[measure] if summary.reference else 1.0
        out[r.dataset][r.strategy].append(_safe_div(value, ref))
    return {d: dict(v) for d, v in out.items()}


# -- execution ---------------------------------------------------------------


def derive_seed(master: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and any identifying parts.

    sha256 over ``"master|part1|part2|..."``, first 8 bytes big-endian,
    shifted right by one bit.
    """
    text = "|".join(str(p) for p in (master, *parts))
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


@dataclass(frozen=True)
class RunTask:
    dataset: str
    strategy: StrategyConfig
    repetition: int
    pool_seed: int
    init_seed: int


@dataclass(frozen=True)
class Protocol:
    """Settings shared by every run of an experiment."""

    pool: PoolSpec = PoolSpec()
    lam: float = DEFAULT_LAMBDA
    bias: bool = True
    k0: int | None = None


def make_tasks(
    datasets: Sequence[str], strategies: Sequence[StrategyConfig], repetitions: int, master_seed: int
) -> list[RunTask]:
    """One task per (dataset, strategy, repetition).

    Pool and initial random draw depend only on (dataset, repetition), so
    all strategies of a repetition share them; the strategy's own random
    stream depends on the strategy name too.
    """
    tasks = []
    for d in datasets:
        for rep in range(repetitions):
            pool_seed = derive_seed(master_seed, d, "pool", rep)
            init_seed = derive_seed(master_seed, d, "init", rep)
            for s in strategies:
                seeded = replace(s, seed=derive_seed(master_seed, d, s.kind, rep))
                tasks.append(RunTask(d, seeded, rep, pool_seed, init_seed))
    return tasks


def execute_task(task: RunTask, ds: Dataset, protocol: Protocol) -> RunRecord:
    k0 = ds.n_features if protocol.k0 is None else protocol.k0
    pool, _ = split_pool(ds, replace(protocol.pool, seed=task.pool_seed), k0)
    K = budget_k(ds.n_samples, protocol.pool)
    init = None
    if task.strategy.kind not in GREEDY_INIT:
        init = np.random.default_rng(task.init_seed).choice(len(pool), size=k0, replace=False)
    return run_once(
        ds, pool, task.strategy, protocol.lam, K,
        k0=k0, init=init, bias=protocol.bias, repetition=task.repetition,
    )


_WORKER_DATA: dict = {}


def _init_worker(datasets, protocol):
    _WORKER_DATA["datasets"] = datasets
    _WORKER_DATA["protocol"] = protocol


def _run_task_safely(task: RunTask, datasets=None, protocol=None):
    datasets = datasets if datasets is not None else _WORKER_DATA["datasets"]
    protocol = protocol if protocol is not None else _WORKER_DATA["protocol"]
    try:
        return task, execute_task(task, datasets[task.dataset], protocol), None
    except Exception as e:  # isolate failures to the task's cell
        return task, None, f"{type(e).__name__}: {e}"


def run_tasks(
    tasks: Sequence[RunTask], datasets: dict[str, Dataset], protocol: Protocol, workers: int = 1,
) -> tuple[list[RunRecord], list[tuple[RunTask, str]]]:
    """Run tasks, serially or across processes.

    Results come back in task order whatever the worker count.
    """
    if workers <= 1:
        results = [_run_task_safely(t, datasets, protocol) for t in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(datasets, protocol)
        ) as ex:
            results = list(ex.map(_run_task_safely, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    records, failures = [], []
    for task, rec, err in results:
        if err is None:
            records.append(rec)
        else:
            log.warning("run failed: %s/%s rep %d: %s", task.dataset, task.strategy.kind, task.repetition, err)
            failures.append((task, err))
    return records, failures


# -- export ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else repr(float(x))


def write_runs_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", "strategy", "seed", "repetition", "k", "rmse", "cc"])
        for r in sorted(records, key=lambda r: r.key):
            for k, e, c in zip(r.ks, r.rmse, r.cc):
                w.writerow([r.dataset, r.strategy, r.seed, r.repetition, int(k), _fmt(e), _fmt(c)])


def write_curve_csv(cell: CellSummary, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["k", "mean_rmse", "mean_cc"])
        for k, e, c in zip(cell.ks, cell.mean_rmse, cell.mean_cc):
            w.writerow([int(k), _fmt(e), _fmt(c)])


def write_rank_csv(summary: AucSummary, measure: str, path: str | Path) -> None:
    """Rank table: one row per dataset plus a final ``Average`` row."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["dataset", *summary.strategies])
        for d in summary.datasets:
            w.writerow([d, *(summary.ranks[measure][d][s] for s in summary.strategies)])
        w.writerow(["Average", *(summary.average_rank[measure][s] for s in summary.strategies)])
