"""Post-training steps: kernel matrices (exact or Nyström), SVM fit, scoring."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import svm
from .kernel import QuantumKernel
from .nystrom import LandmarkSet, nystrom_test, nystrom_train
from .trainer import kta

METHODS = ("standard", "nystrom")


@dataclass
class TrainKernel:
    values: np.ndarray
    method: str
    landmarks: Optional[LandmarkSet] = None
    K_MM: Optional[np.ndarray] = None
    K_NM: Optional[np.ndarray] = None
    executions: int = 0


@dataclass
class EvalResult:
    kta_full: float
    train_acc: float
    test_acc: float
    train_executions: int
    test_executions: int
    model: svm.SvmModel = None


def _ids(prefix, n):
    return [(prefix, i) for i in range(n)]


def build_train_kernel(kernel: QuantumKernel, X, method: str = "standard",
                       landmarks: Optional[LandmarkSet] = None,
                       patch_exact_rows: bool = False) -> TrainKernel:
    """Training kernel matrix, exactly or from landmark columns."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ids = _ids("train", X.shape[0])
    start = kernel.ledger.count
    if method == "standard":
        K = kernel.matrix(X, ids_a=ids).values
        return TrainKernel(K, method, executions=kernel.ledger.count - start)
    if method != "nystrom":
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    if landmarks is None:
        raise ValueError("the nystrom method needs a landmark set")
    idx = np.asarray(landmarks.indices)
    lm_ids = [ids[i] for i in idx]
    cache = {}
    K_MM = kernel.matrix(X[idx], ids_a=lm_ids, cache=cache).values
    K_NM = kernel.matrix(X, X[idx], ids_a=ids, ids_b=lm_ids, cache=cache).values
    K = nystrom_train(K_NM, K_MM, landmarks=idx, patch_exact_rows=patch_exact_rows)
    return TrainKernel(K, method, landmarks, K_MM, K_NM, kernel.ledger.count - start)


def build_test_kernel(kernel: QuantumKernel, X_test, X_train, train: TrainKernel) -> np.ndarray:
    """Cross kernel of shape (P, N) between test and training points."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    test_ids = _ids("test", X_test.shape[0])
    if train.method == "standard":
        return kernel.matrix(X_test, X_train, ids_a=test_ids,
                             ids_b=_ids("train", X_train.shape[0])).values
    idx = np.asarray(train.landmarks.indices)
    K_PM = kernel.matrix(X_test, X_train[idx], ids_a=test_ids,
                         ids_b=[("train", i) for i in idx]).values
    return nystrom_test(K_PM, train.K_MM, train.K_NM)


def evaluate(kernel: QuantumKernel, X_train, y_train, X_test, y_test, method: str = "standard",
             landmarks: Optional[LandmarkSet] = None, C: float = 1.0, tol: float = 1e-6,
             psd_fix: Optional[bool] = None) -> EvalResult:
    """Full-dataset KTA plus train/test accuracy of an SVM on the kernel.

    ``psd_fix`` defaults to on for Nyström matrices only.
    """
    train = build_train_kernel(kernel, X_train, method, landmarks)
    psd_fix = (method == "nystrom") if psd_fix is None else psd_fix
    model = svm.fit(train.values, y_train, C=C, tol=tol, psd_fix=psd_fix)
    train_acc = svm.accuracy(svm.predict(model, train.values), y_train)
    start = kernel.ledger.count
    K_test = build_test_kernel(kernel, X_test, X_train, train)
    test_exec = kernel.ledger.count - start
    test_acc = svm.accuracy(svm.predict(model, K_test), y_test)
    return EvalResult(kta(train.values, y_train), train_acc, test_acc,
                      train.executions, test_exec, model)
