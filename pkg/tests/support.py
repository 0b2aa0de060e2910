"""Brute-force reference implementations used as test oracles.

Everything here is written with plain Python loops over the definitions,
independent of the vectorized code paths in the package.
"""

import math
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(os.environ.get("ALR_DATA_DIR", ROOT / "data"))


def dist(a, b):
    return math.sqrt(sum((float(u) - float(v)) ** 2 for u, v in zip(a, b)))


def predict_loop(model, x):
    return sum(float(c) * float(v) for c, v in zip(model.coef, x)) + model.bias


def argmax_lowest(indices, scores):
    best_i, best = None, -math.inf
    for i, s in zip(indices, scores):
        if s > best:
            best_i, best = i, s
    return best_i


def oracle_first_gsx(X):
    """Closest sample to the centroid, in exact rational arithmetic."""
    X = [[Fraction(float(v)) for v in row] for row in X]
    d = len(X[0])
    centroid = [sum(row[j] for row in X) / len(X) for j in range(d)]
    best_i, best = None, None
    for i, row in enumerate(X):
        v = sum((a - c) ** 2 for a, c in zip(row, centroid))
        if best is None or v < best:
            best_i, best = i, v
    return best_i


def oracle_gsx(X, labeled):
    cand = [n for n in range(len(X)) if n not in set(labeled)]
    scores = [min(dist(X[n], X[m]) for m in labeled) for n in cand]
    return argmax_lowest(cand, scores)


def oracle_gsy(X, labeled, y_labeled, model):
    cand = [n for n in range(len(X)) if n not in set(labeled)]
    scores = []
    for n in cand:
        f = predict_loop(model, X[n])
        scores.append(min(abs(f - ym) for ym in y_labeled))
    return argmax_lowest(cand, scores)


def oracle_igs(X, labeled, y_labeled, model):
    cand = [n for n in range(len(X)) if n not in set(labeled)]
    scores = []
    for n in cand:
        f = predict_loop(model, X[n])
        scores.append(min(dist(X[n], X[m]) * abs(f - ym) for m, ym in zip(labeled, y_labeled)))
    return argmax_lowest(cand, scores)


def oracle_bootstraps(k, P, rng):
    """Same resampling rule as the library: k draws with replacement,
    redrawn while fewer than two distinct positions are hit (k >= 2)."""
    out = []
    for _ in range(P):
        while True:
            idx = rng.integers(0, k, size=k)
            if k < 2 or len(set(idx.tolist())) >= 2:
                break
        out.append(idx)
    return out


def oracle_qbc(X, labeled, y_labeled, P, seed, fit):
    rng = np.random.default_rng(seed)
    Xl = np.asarray(X)[labeled]
    yl = np.asarray(y_labeled)
    models = [fit(Xl[b], yl[b]) for b in oracle_bootstraps(len(labeled), P, rng)]
    cand = [n for n in range(len(X)) if n not in set(labeled)]
    scores = []
    for n in cand:
        preds = [predict_loop(m, X[n]) for m in models]
        mean = sum(preds) / P
        scores.append(sum((p - mean) ** 2 for p in preds) / P)
    return argmax_lowest(cand, scores)


def oracle_emcm(X, labeled, y_labeled, P, seed, fit):
    rng = np.random.default_rng(seed)
    Xl = np.asarray(X)[labeled]
    yl = np.asarray(y_labeled)
    master = fit(Xl, yl)
    models = [fit(Xl[b], yl[b]) for b in oracle_bootstraps(len(labeled), P, rng)]
    cand = [n for n in range(len(X)) if n not in set(labeled)]
    scores = []
    for n in cand:
        f = predict_loop(master, X[n])
        total = 0.0
        for m in models:
            g = (predict_loop(m, X[n]) - f)
            total += math.sqrt(sum((g * float(v)) ** 2 for v in X[n]))
        scores.append(total / P)
    return argmax_lowest(cand, scores)


def oracle_midranks(values):
    """Midranks by counting: rank = #smaller + (#equal + 1) / 2."""
    return [
        sum(w < v for w in values) + (sum(w == v for w in values) + 1) / 2.0 for v in values
    ]


def gd_ridge(X, y, lam, bias=True, tol=1e-13, max_iter=200_000):
    """Nesterov-accelerated gradient descent on the penalized squared loss."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.hstack([X, np.ones((X.shape[0], 1))]) if bias else X
    pen = np.full(A.shape[1], lam)
    if bias:
        pen[-1] = 0.0
    H = 2 * (A.T @ A + np.diag(pen))
    eig = np.linalg.eigvalsh(H)
    L, mu = eig[-1], max(eig[0], 1e-12)
    momentum = (math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
    w = np.zeros(A.shape[1])
    v = w.copy()
    for _ in range(max_iter):
        grad = 2 * (A.T @ (A @ v - y)) + 2 * pen * v
        w_next = v - grad / L
        v = w_next + momentum * (w_next - w)
        w = w_next
        if np.linalg.norm(grad) < tol:
            break
    return (w[:-1], w[-1]) if bias else (w, 0.0)


def oracle_select(kind, X, labeled, y_labeled, model, P=4, seed=0, fit=None):
    """Brute-force pick for one step of ``kind``; ``seed`` seeds the random
    stream for BL/QBC/EMCM."""
    labeled = list(labeled)
    if kind == "GSx":
        return oracle_gsx(X, labeled)
    if kind == "GSy":
        return oracle_gsy(X, labeled, y_labeled, model)
    if kind == "iGS":
        return oracle_igs(X, labeled, y_labeled, model)
    if kind == "QBC":
        return oracle_qbc(X, labeled, y_labeled, P, seed, fit)
    if kind == "EMCM":
        return oracle_emcm(X, labeled, y_labeled, P, seed, fit)
    if kind == "BL":
        cand = [n for n in range(len(X)) if n not in set(labeled)]
        return cand[int(np.random.default_rng(seed).integers(len(cand)))]
    raise ValueError(kind)


def random_instance(rng, n_max=30, d_max=5, tie_prone=False):
    """Random pool; tie-prone pools use a small integer grid plus duplicates."""
    n = int(rng.integers(8, n_max + 1))
    d = int(rng.integers(1, d_max + 1))
    if tie_prone:
        X = rng.integers(-2, 3, size=(n, d)).astype(float)
        dup = rng.integers(0, n, size=n // 4)
        X[rng.integers(0, n, size=dup.size)] = X[dup]
        y = rng.integers(-3, 4, size=n).astype(float)
    else:
        X = rng.normal(size=(n, d))
        y = X @ rng.normal(size=d) + 0.3 * rng.normal(size=n)
    return X, y
