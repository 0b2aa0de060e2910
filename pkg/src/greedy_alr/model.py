"""Closed-form ridge regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_LAMBDA = 0.01


@dataclass(frozen=True)
class RidgeModel:
    coef: np.ndarray
    bias: float
    lam: float

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict(self, X)

    @classmethod
    def zero(cls, n_features: int, lam: float = DEFAULT_LAMBDA) -> "RidgeModel":
        return cls(np.zeros(n_features), 0.0, lam)


def ridge_fit(X, y, lam: float = DEFAULT_LAMBDA, bias: bool = True) -> RidgeModel:
    """Minimize ``sum (y - X b - c)^2 + lam * |b|^2``.

    With ``bias`` the intercept ``c`` is fitted but not penalized, which is
    the same as solving the penalized system on centered data and
    recovering ``c = mean(y) - mean(X) @ b``. Without it ``c = 0``.
    Works for k < D because ``lam > 0`` keeps the system positive definite.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if X.shape[0] < 1:
        raise ValueError("need at least one training sample")
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")

    if bias:
        x_mean = X.mean(axis=0)
        y_mean = y.mean()
        Xc = X - x_mean
        yc = y - y_mean
    else:
        Xc, yc = X, y
    gram = Xc.T @ Xc
    gram[np.diag_indices_from(gram)] += lam
    coef = scipy.linalg.solve(gram, Xc.T @ yc, assume_a="pos", check_finite=False)
    intercept = float(y_mean - x_mean @ coef) if bias else 0.0
    return RidgeModel(coef, intercept, float(lam))


def predict(model: RidgeModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"model expects {model.n_features} features, got {X.shape[1]}")
    return X @ model.coef + model.bias
