"""Sequential sample-selection strategies for pool-based regression.

Every ``next_*`` function takes the current :class:`PoolState` and returns
the pool index to label next. Ties always go to the lowest pool index:
candidates are scanned in ascending index order and ``np.argmax`` keeps
the first maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DEFAULT_LAMBDA, RidgeModel, predict, ridge_fit

BL = "BL"
QBC = "QBC"
EMCM = "EMCM"
GSX = "GSx"
GSY = "GSy"
IGS = "iGS"

STRATEGIES = (BL, QBC, EMCM, GSX, GSY, IGS)
# strategies whose first K0 labels come from GSx instead of a random draw
GREEDY_INIT = frozenset({GSX, GSY, IGS})
COMMITTEE = frozenset({QBC, EMCM})
MODEL_BASED = frozenset({GSY, IGS, QBC, EMCM})


class SelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class StrategyConfig:
    kind: str
    committee_size: int = 4
    seed: int = 0
    # "mean": nearest to the feature centroid; "medoid": least total distance
    first_sample: str = "mean"

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        if self.kind in COMMITTEE and self.committee_size < 2:
            raise ValueError(f"{self.kind} needs committee_size >= 2")
        if self.first_sample not in ("mean", "medoid"):
            raise ValueError(f"first_sample must be 'mean' or 'medoid', got {self.first_sample!r}")


class PoolState:
    """Pool features plus the append-only record of labeled samples."""

    def __init__(self, features, labeled=(), labels=()):
        self.features = np.asarray(features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features[:, None]
        self._mask = np.zeros(self.features.shape[0], dtype=bool)
        self._order: list[int] = []
        self._y: list[float] = []
        labeled, labels = list(labeled), list(labels)
        if len(labeled) != len(labels):
            raise ValueError("labeled indices and labels differ in length")
        for i, y in zip(labeled, labels):
            self.add(i, y)

    @property
    def n_pool(self) -> int:
        return self.features.shape[0]

    @property
    def n_labeled(self) -> int:
        return len(self._order)

    @property
    def labeled(self) -> np.ndarray:
        return np.array(self._order, dtype=int)

    @property
    def labels(self) -> np.ndarray:
        return np.array(self._y, dtype=float)

    @property
    def unlabeled(self) -> np.ndarray:
        return np.flatnonzero(~self._mask)

    def is_unlabeled(self, n: int) -> bool:
        return 0 <= n < self.n_pool and not self._mask[n]

    def add(self, n: int, y: float) -> None:
        n = int(n)
        if not self.is_unlabeled(n):
            raise SelectionError(f"pool index {n} is not an unlabeled sample")
        self._mask[n] = True
        self._order.append(n)
        self._y.append(float(y))

    def fit(self, lam: float = DEFAULT_LAMBDA, bias: bool = True) -> RidgeModel:
        return ridge_fit(self.features[self.labeled], self.labels, lam, bias)


def _check_candidate(state: PoolState, n: int) -> None:
    if state.n_labeled == 0:
        raise SelectionError("no labeled samples yet")
    if not state.is_unlabeled(n):
        raise SelectionError(f"pool index {n} is not unlabeled")


def _pairwise_input(state: PoolState, cand: np.ndarray) -> np.ndarray:
    """Euclidean distances, candidates x labeled."""
    diff = state.features[cand][:, None, :] - state.features[state.labeled][None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def _pairwise_output(state: PoolState, model: RidgeModel, cand: np.ndarray) -> np.ndarray:
    pred = predict(model, state.features[cand])
    return np.abs(pred[:, None] - state.labels[None, :])


def min_input_distance(state: PoolState, n: int) -> float:
    _check_candidate(state, n)
    return float(_pairwise_input(state, np.array([n])).min())


def min_output_distance(state: PoolState, model: RidgeModel, n: int) -> float:
    _check_candidate(state, n)
    return float(_pairwise_output(state, model, np.array([n])).min())


def min_product_distance(state: PoolState, model: RidgeModel, n: int) -> float:
    """Minimum over labeled m of the product d_x(n, m) * d_y(n, m).

    This is not the product of the two separate minima.
    """
    _check_candidate(state, n)
    cand = np.array([n])
    return float((_pairwise_input(state, cand) * _pairwise_output(state, model, cand)).min())


def gsx_scores(state: PoolState) -> np.ndarray:
    return _pairwise_input(state, state.unlabeled).min(axis=1)


def gsy_scores(state: PoolState, model: RidgeModel) -> np.ndarray:
    return _pairwise_output(state, model, state.unlabeled).min(axis=1)


def igs_scores(state: PoolState, model: RidgeModel) -> np.ndarray:
    cand = state.unlabeled
    return (_pairwise_input(state, cand) * _pairwise_output(state, model, cand)).min(axis=1)


def _argmax_unlabeled(state: PoolState, scores: np.ndarray) -> int:
    return int(state.unlabeled[int(np.argmax(scores))])


def _require_unlabeled(state: PoolState) -> None:
    if state.n_labeled == state.n_pool:
        raise SelectionError("no unlabeled samples left")


def _require_k0(state: PoolState, k0: int | None) -> None:
    _require_unlabeled(state)
    k0 = state.features.shape[1] if k0 is None else k0
    if state.n_labeled < max(k0, 1):
        raise SelectionError(f"need at least K0={k0} labeled samples, have {state.n_labeled}")


def select_first_gsx(features, method: str = "mean") -> int:
    """Pool index of the sample closest to the centroid.

    ``method="medoid"`` instead picks the sample with the smallest summed
    distance to all others.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < 1:
        raise SelectionError("empty pool")
    if method == "mean":
        # |n x_i - sum x| orders like |x_i - mean| and is exact on integer
        # data, so geometric ties break by index rather than rounding noise
        d = ((X.shape[0] * X - X.sum(axis=0)) ** 2).sum(axis=1)
    elif method == "medoid":
        d = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)).sum(axis=1)
    else:
        raise ValueError(f"unknown centroid method {method!r}")
    return int(np.argmin(d))


def next_gsx(state: PoolState) -> int:
    _require_unlabeled(state)
    if state.n_labeled == 0:
        raise SelectionError("GSx needs a first labeled sample; use select_first_gsx")
    return _argmax_unlabeled(state, gsx_scores(state))


def next_gsy(state: PoolState, model: RidgeModel, k0: int | None = None) -> int:
    _require_k0(state, k0)
    return _argmax_unlabeled(state, gsy_scores(state, model))


def next_igs(state: PoolState, model: RidgeModel, k0: int | None = None) -> int:
    _require_k0(state, k0)
    return _argmax_unlabeled(state, igs_scores(state, model))


def next_random(state: PoolState, rng: np.random.Generator) -> int:
    _require_unlabeled(state)
    cand = state.unlabeled
    return int(cand[rng.integers(len(cand))])


def draw_bootstrap(k: int, rng: np.random.Generator) -> np.ndarray:
    """Resample k positions with replacement.

    A draw that hits a single distinct position (possible once k >= 2) is
    redrawn, since its ridge fit is a constant.
    """
    while True:
        idx = rng.integers(0, k, size=k)
        if k < 2 or np.unique(idx).size >= 2:
            return idx


def fit_committee(
    state: PoolState, size: int, rng: np.random.Generator,
    lam: float = DEFAULT_LAMBDA, bias: bool = True,
) -> list[RidgeModel]:
    X = state.features[state.labeled]
    y = state.labels
    models = []
    for _ in range(size):
        idx = draw_bootstrap(len(y), rng)
        models.append(ridge_fit(X[idx], y[idx], lam, bias))
    return models


def committee_predictions(models: list[RidgeModel], X: np.ndarray) -> np.ndarray:
    """P x n matrix of member predictions."""
    return np.vstack([predict(m, X) for m in models])


def qbc_scores(models: list[RidgeModel], X: np.ndarray) -> np.ndarray:
    return committee_predictions(models, X).var(axis=0)


def emcm_scores(master: RidgeModel, models: list[RidgeModel], X: np.ndarray) -> np.ndarray:
    """Mean gradient norm ``|f_p(x) - f(x)| * |x|`` over committee members."""
    spread = np.abs(committee_predictions(models, X) - predict(master, X)[None, :])
    return spread.mean(axis=0) * np.sqrt((X**2).sum(axis=1))


def next_qbc(
    state: PoolState, config: StrategyConfig, rng: np.random.Generator,
    lam: float = DEFAULT_LAMBDA, bias: bool = True, k0: int | None = None,
) -> int:
    _require_k0(state, k0)
    models = fit_committee(state, config.committee_size, rng, lam, bias)
    return _argmax_unlabeled(state, qbc_scores(models, state.features[state.unlabeled]))


def next_emcm(
    state: PoolState, config: StrategyConfig, rng: np.random.Generator,
    lam: float = DEFAULT_LAMBDA, bias: bool = True, k0: int | None = None,
    master: RidgeModel | None = None,
) -> int:
    _require_k0(state, k0)
    if master is None:
        master = state.fit(lam, bias)
    models = fit_committee(state, config.committee_size, rng, lam, bias)
    X = state.features[state.unlabeled]
    return _argmax_unlabeled(state, emcm_scores(master, models, X))


def select_next(
    state: PoolState,
    config: StrategyConfig,
    model: RidgeModel | None,
    rng: np.random.Generator,
    lam: float = DEFAULT_LAMBDA,
    bias: bool = True,
    k0: int | None = None,
) -> int:
    """Dispatch one acquisition step for ``config.kind``.

    ``model`` must be fitted on the current labeled set for the
    model-based strategies.
    """
    kind = config.kind
    if kind in (GSY, IGS, EMCM) and model is None:
        model = state.fit(lam, bias)
    if kind == BL:
        return next_random(state, rng)
    if kind == GSX:
        return next_gsx(state)
    if kind == GSY:
        return next_gsy(state, model, k0)
    if kind == IGS:
        return next_igs(state, model, k0)
    if kind == QBC:
        return next_qbc(state, config, rng, lam, bias, k0)
    return next_emcm(state, config, rng, lam, bias, k0, master=model)


def greedy_initial(features, k0: int, method: str = "mean") -> list[int]:
    """First ``k0`` pool indices chosen by GSx (centroid seed, then farthest-first)."""
    state = PoolState(features)
    if k0 > state.n_pool:
        raise SelectionError(f"K0={k0} exceeds pool size {state.n_pool}")
    order = [select_first_gsx(state.features, method)]
    state.add(order[0], 0.0)
    while len(order) < k0:
        n = next_gsx(state)
        state.add(n, 0.0)
        order.append(n)
    return order
