"""Dunn's rank-based pairwise comparisons with Benjamini-Hochberg adjustment."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata


def pair_indices(n_groups: int) -> list[tuple[int, int]]:
    """Lower-triangular pairs (i, j), i > j, in row-major order."""
    return [(i, j) for i in range(n_groups) for j in range(i)]


def dunn_statistics(groups: Sequence[Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
    """z statistics and two-sided raw p-values for every pair.

    All values are ranked jointly (midranks for ties). For groups i, j::

        z = (Rbar_i - Rbar_j) / sqrt((N(N+1)/12 - T) * (1/n_i + 1/n_j))
        T = sum(t^3 - t) / (12 (N - 1))

    with t running over tie-group sizes. If the bracketed variance is not
    positive (every value equal), all z are 0 and all p are 1.
    """
    groups = [np.asarray(g, dtype=float).ravel() for g in groups]
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("every group must be nonempty")
    values = np.concatenate(groups)
    n_total = values.size
    ranks = rankdata(values)
    bounds = np.cumsum([0] + [g.size for g in groups])
    mean_ranks = [ranks[bounds[i]:bounds[i + 1]].mean() for i in range(len(groups))]

    _, ties = np.unique(values, return_counts=True)
    tie_term = float(np.sum(ties**3 - ties)) / (12.0 * (n_total - 1)) if n_total > 1 else 0.0
    spread = n_total * (n_total + 1) / 12.0 - tie_term

    pairs = pair_indices(len(groups))
    z = np.zeros(len(pairs))
    if spread > 1e-12 * n_total * (n_total + 1):
        for k, (i, j) in enumerate(pairs):
            se = math.sqrt(spread * (1.0 / groups[i].size + 1.0 / groups[j].size))
            z[k] = (mean_ranks[i] - mean_ranks[j]) / se
    p = np.minimum(1.0, 2.0 * norm.sf(np.abs(z)))
    return z, p


def dunn_pairwise(groups: Sequence[Sequence[float]]) -> np.ndarray:
    """Raw two-sided p-values in :func:`pair_indices` order."""
    return dunn_statistics(groups)[1]


def fdr_adjust(p) -> np.ndarray:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p, dtype=float).ravel()
    m = p.size
    if m == 0:
        return p.copy()
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    order = np.argsort(p, kind="stable")
    # m / rank >= 1, so scaled values never round below the raw p
    scaled = p[order] * (m / np.arange(1, m + 1))
    # enforce monotonicity from the largest p downwards
    stepped = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(stepped, 1.0)
    return out


@dataclass
class StatReport:
    """Pairwise comparison matrices for each measure.

    ``raw[m]`` and ``adjusted[m]`` are G x G with entries only below the
    diagonal (row strategy vs column strategy) and NaN elsewhere.
    ``mean_rank[m][s]`` gives the direction: a lower joint mean rank means
    smaller values.
    """

    strategies: list[str]
    raw: dict[str, np.ndarray] = field(default_factory=dict)
    adjusted: dict[str, np.ndarray] = field(default_factory=dict)
    z: dict[str, np.ndarray] = field(default_factory=dict)
    mean_rank: dict[str, dict[str, float]] = field(default_factory=dict)
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def p(self, measure: str, a: str, b: str, adjusted: bool = True) -> float:
        i, j = self.strategies.index(a), self.strategies.index(b)
        if i < j:
            i, j = j, i
        return float((self.adjusted if adjusted else self.raw)[measure][i, j])

    def to_dict(self) -> dict:
        def tri(mat):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in mat]

        return {
            "strategies": list(self.strategies),
            "measures": {
                m: {
                    "raw_p": tri(self.raw[m]),
                    "adjusted_p": tri(self.adjusted[m]),
                    "mean_rank": self.mean_rank[m],
                    "counts": self.counts[m],
                }
                for m in self.raw
            },
        }


def _to_matrix(values: np.ndarray, n: int) -> np.ndarray:
    mat = np.full((n, n), np.nan)
    for (i, j), v in zip(pair_indices(n), values):
        mat[i, j] = v
    return mat


def compare(
    samples: Mapping[str, Mapping[str, Sequence[float]]], strategies: Sequence[str] | None = None,
) -> StatReport:
    """Dunn + FDR for each measure in ``samples[measure][strategy] -> values``."""
    measures = list(samples)
    if strategies is None:
        strategies = list(samples[measures[0]])
    strategies = list(strategies)
    report = StatReport(strategies)
    for m in measures:
        groups = [samples[m][s] for s in strategies]
        z, p = dunn_statistics(groups)
        report.z[m] = _to_matrix(z, len(strategies))
        report.raw[m] = _to_matrix(p, len(strategies))
        report.adjusted[m] = _to_matrix(fdr_adjust(p), len(strategies))
        ranks = rankdata(np.concatenate([np.asarray(g, dtype=float) for g in groups]))
        bounds = np.cumsum([0] + [len(g) for g in groups])
        report.mean_rank[m] = {
            s: float(ranks[bounds[k]:bounds[k + 1]].mean()) for k, s in enumerate(strategies)
        }
        report.counts[m] = {s: len(samples[m][s]) for s in strategies}
    return report


def pooled_samples(per_dataset: Mapping[str, Mapping[str, Sequence[float]]]) -> dict[str, list[float]]:
    """Concatenate ``{dataset: {strategy: values}}`` across datasets, in
    sorted dataset order."""
    out: dict[str, list[float]] = {}
    for d in sorted(per_dataset):
        for s, vals in per_dataset[d].items():
            out.setdefault(s, []).extend(float(v) for v in vals)
    return out


def significance_table(report: StatReport, alpha: float = 0.05) -> dict[str, np.ndarray]:
    """Boolean matrices, True where the adjusted p-value is below ``alpha``."""
    out = {}
    for m, mat in report.adjusted.items():
        flags = np.zeros(mat.shape, dtype=bool)
        finite = np.isfinite(mat)
        flags[finite] = mat[finite] < alpha
        out[m] = flags
    return out


def render_table(report: StatReport, measure: str, alpha: float = 0.05) -> str:
    """Lower-triangular text table; significant entries carry a trailing '*'."""
    names = report.strategies
    mat = report.adjusted[measure]
    width = max(7, *(len(s) for s in names)) + 1
    lines = [measure.upper().ljust(width) + "".join(s.rjust(width) for s in names[:-1])]
    for i in range(1, len(names)):
        cells = []
        for j in range(len(names) - 1):
            if j < i:
                text = f"{mat[i, j]:.4f}".lstrip("0") + ("*" if mat[i, j] < alpha else " ")
                cells.append(text.rjust(width))
            else:
                cells.append(" " * width)
        lines.append(names[i].ljust(width) + "".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def write_dunn_csv(report: StatReport, measure: str, path: str | Path, alpha: float = 0.05) -> None:
    names = report.strategies
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["row", "column", "z", "raw_p", "adjusted_p", "significant"])
        for i, j in pair_indices(len(names)):
            adj = report.adjusted[measure][i, j]
            w.writerow([
                names[i], names[j], repr(float(report.z[measure][i, j])),
                repr(float(report.raw[measure][i, j])), repr(float(adj)), int(adj < alpha),
            ])
