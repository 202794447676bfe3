"""Binary SVM on precomputed kernels, trained by sequential minimal optimization.

The dual ``max_a  sum(a) - 1/2 a^T Q a`` with ``Q = (y y^T) * K``,
``0 <= a_i <= C`` and ``y^T a = 0`` is solved by pairwise updates. Each
step picks the maximal-violating ``i`` and the second-order-best partner
``j`` (Fan, Chen and Lin, 2005) and moves both analytically, which keeps
``y^T a`` unchanged and never decreases the dual objective.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

TAU = 1e-12


class SvmError(ValueError):
    pass


class SvmConvergenceError(RuntimeError):
    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


@dataclass
class SvmModel:
    alphas: np.ndarray
    bias: float
    labels: np.ndarray
    C: float
    support_indices: np.ndarray = field(default=None)
    train_ids: Optional[list] = None
    dual_history: List[float] = field(default_factory=list)
    kkt_violation: float = 0.0
    n_iter: int = 0

    def __post_init__(self):
        if self.support_indices is None:
            self.support_indices = np.flatnonzero(self.alphas > 0)

    @property
    def n_train(self) -> int:
        return self.alphas.size


def dual_objective(alphas, K, y) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ K @ ay)


def _check_labels(y):
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise SvmError("labels must be -1 or +1")
    if np.unique(y).size < 2:
        raise SvmError("need both classes to fit an SVM")
    return y


def clip_psd(K, floor: float = -1e-6) -> np.ndarray:
    """Zero out negative eigenvalues when the smallest falls below ``floor``."""
    w, V = np.linalg.eigh(K)
    if w.min() >= floor:
        return K
    K = (V * np.clip(w, 0, None)) @ V.T
    return 0.5 * (K + K.T)


def fit(K, y, C: float = 1.0, tol: float = 1e-6, max_iter: int = 1_000_000,
        psd_fix: bool = False, symmetrize: bool = False, train_ids=None) -> SvmModel:
    """Solve the SVM dual on a precomputed kernel matrix.

    Parameters
    ----------
    K : array of shape (N, N)
    y : labels in {-1, +1}
    C : box constraint
    tol : stop once the maximal KKT violation ``m(a) - M(a)`` is at most ``tol``
    max_iter : pairwise updates before giving up
    psd_fix : clip negative eigenvalues of ``K`` when the smallest is below -1e-6
    symmetrize : replace a non-symmetric ``K`` by ``(K + K^T)/2`` with a warning
        instead of raising

    The bias is the mean of ``y_s - sum_i a_i y_i K_is`` over free support
    vectors; without any, the midpoint of the feasible interval is used.
    """
    K = np.asarray(K, dtype=float)
    y = _check_labels(y)
    N = y.size
    if K.shape != (N, N):
        raise SvmError(f"kernel matrix {K.shape} does not match {N} labels")
    if not C > 0:
        raise SvmError("C must be positive")
    asym = np.max(np.abs(K - K.T)) if N else 0.0
    if asym > 1e-6:
        if not symmetrize:
            raise SvmError(f"kernel matrix is not symmetric (max deviation {asym:.3g})")
        warnings.warn(f"symmetrizing kernel matrix (max deviation {asym:.3g})", stacklevel=2)
    K = 0.5 * (K + K.T)
    if psd_fix:
        K = clip_psd(K)

    alpha = np.zeros(N)
    grad = -np.ones(N)  # gradient of 1/2 a^T Q a - sum(a)
    diag = np.diag(K)
    history = [0.0]
    violation = np.inf
    for it in range(max_iter + 1):
        score = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        if not up.any() or not low.any():
            violation = 0.0
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m_up = score[i]
        m_low = score[low].min()
        violation = m_up - m_low
        if violation <= tol:
            break
        if it == max_iter:
            raise SvmConvergenceError(
                f"SMO did not converge in {max_iter} updates (KKT violation {violation:.3g})",
                violation,
            )
        cand = low & (score < m_up)
        b = m_up - score[cand]
        a = diag[i] + diag[cand] - 2.0 * K[i, cand]
        a = np.where(a > 0, a, TAU)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])
        bij = m_up - score[j]
        aij = diag[i] + diag[j] - 2.0 * K[i, j]
        aij = aij if aij > 0 else TAU
        # alpha_i += y_i t, alpha_j -= y_j t with t >= 0
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        t = min(bij / aij, lim_i, lim_j)
        new_i = alpha[i] + y[i] * t
        new_j = alpha[j] - y[j] * t
        if t == lim_i:
            new_i = C if y[i] > 0 else 0.0
        if t == lim_j:
            new_j = 0.0 if y[j] > 0 else C
        di, dj = new_i - alpha[i], new_j - alpha[j]
        alpha[i], alpha[j] = new_i, new_j
        grad += y * (K[:, i] * (y[i] * di) + K[:, j] * (y[j] * dj))
        history.append(float(0.5 * alpha.sum() - 0.5 * alpha @ grad))

    score = -y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        bias = float(score[free].mean())
    else:
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        hi = score[up].max() if up.any() else score[low].min()
        lo = score[low].min() if low.any() else hi
        bias = float(0.5 * (hi + lo))
    return SvmModel(alpha, bias, y, C, train_ids=train_ids, dual_history=history,
                    kkt_violation=float(max(violation, 0.0)), n_iter=len(history) - 1)


def decision_function(model: SvmModel, K_cross) -> np.ndarray:
    K_cross = np.atleast_2d(np.asarray(K_cross, dtype=float))
    if K_cross.shape[1] != model.n_train:
        raise SvmError(
            f"cross kernel has {K_cross.shape[1]} columns, model was fit on {model.n_train} points"
        )
    return K_cross @ (model.alphas * model.labels) + model.bias


def predict(model: SvmModel, K_cross) -> np.ndarray:
    """Labels in {-1, +1}; a decision value of exactly 0 maps to +1."""
    return np.where(decision_function(model, K_cross) >= 0, 1, -1)


def accuracy(pred, y) -> float:
    pred, y = np.asarray(pred).ravel(), np.asarray(y).ravel()
    if pred.shape != y.shape:
        raise ValueError("prediction and label arrays differ in length")
    return float(np.mean(pred == y))


def kkt_violations(model: SvmModel, K, tol: float) -> np.ndarray:
    """Indices violating the KKT conditions at tolerance ``tol``."""
    yf = model.labels * decision_function(model, K)
    a, C = model.alphas, model.C
    bad = ((a == 0) & (yf < 1 - tol)) | ((a > 0) & (a < C) & (np.abs(yf - 1) > tol)) \
        | ((a == C) & (yf > 1 + tol))
    return np.flatnonzero(bad)


class PrecomputedSVC(ClassifierMixin, BaseEstimator):
    """scikit-learn style wrapper: ``fit(K_train, y)``, ``predict(K_cross)``.

    Any two class labels are accepted and mapped to -1/+1 internally.
    """

    def __init__(self, C=1.0, tol=1e-6, max_iter=1_000_000, psd_fix=False):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter
        self.psd_fix = psd_fix

    def fit(self, K, y):
        y = np.asarray(y).ravel()
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise SvmError(f"binary classification only, got {self.classes_.size} classes")
        signed = np.where(y == self.classes_[1], 1.0, -1.0)
        self.model_ = fit(K, signed, self.C, self.tol, self.max_iter, self.psd_fix)
        return self

    def decision_function(self, K_cross):
        check_is_fitted(self, "model_")
        return decision_function(self.model_, K_cross)

    def predict(self, K_cross):
        return self.classes_[(self.decision_function(K_cross) >= 0).astype(int)]
