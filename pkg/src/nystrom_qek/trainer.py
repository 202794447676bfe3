"""Mini-batch kernel-target-alignment training with ADAM."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .ansatz import AnsatzParams
from .kernel import ExecutionLedger, QuantumKernel
from .noise import NOISELESS, NoiseConfig

logger = logging.getLogger(__name__)

GRADIENT_METHODS = ("parameter_shift", "finite_difference")


class TrainingError(RuntimeError):
    pass


class DegenerateKernelError(ValueError):
    pass


class SingleClassBatchWarning(UserWarning):
    pass


@dataclass
class TrainConfig:
    iterations: int = 500
    batch_size: int = 8
    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    gradient_method: str = "parameter_shift"
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.gradient_method not in GRADIENT_METHODS:
            raise ValueError(f"gradient_method must be one of {GRADIENT_METHODS}")


@dataclass
class TrainRecord:
    iteration: int
    kta_batch: float
    executions: int
    single_class: bool = False


@dataclass
class TrainTrace:
    records: List[TrainRecord] = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)


def kta(K, y) -> float:
    """Kernel-target alignment ``y^T K y / (sqrt(tr(K^2)) * N)``."""
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError(f"kernel matrix must be square, got {K.shape}")
    if K.shape[0] != y.size:
        raise ValueError(f"{y.size} labels for a {K.shape[0]}x{K.shape[0]} kernel")
    frob = np.sqrt(np.sum(K * K))
    if frob == 0:
        raise DegenerateKernelError("kernel matrix is all zeros; alignment undefined")
    return float(y @ K @ y / (frob * y.size))


class Adam:
    """ADAM for minimization on a flat parameter vector."""

    def __init__(self, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _batch_matrix(values: np.ndarray, D: int) -> np.ndarray:
    K = np.eye(D)
    iu = np.triu_indices(D, 1)
    K[iu] = values
    K[iu[1], iu[0]] = values
    return K


def _kta_and_entry_weights(values, y):
    """KTA of the batch matrix and d KTA / d (upper-triangle entry)."""
    D = y.size
    K = _batch_matrix(values, D)
    iu = np.triu_indices(D, 1)
    A = float(y @ K @ y)
    F2 = float(np.sum(K * K))
    F = np.sqrt(F2)
    if F == 0:
        raise DegenerateKernelError("kernel matrix is all zeros; alignment undefined")
    yy = y[iu[0]] * y[iu[1]]
    # each off-diagonal entry appears twice in K
    weights = 2.0 * (yy * F2 - A * values) / (F2 * F * D)
    return A / (F * D), weights


def kta_gradient(X_batch, y_batch, params: AnsatzParams, noise: NoiseConfig = NOISELESS,
                 ledger: Optional[ExecutionLedger] = None, method: str = "parameter_shift",
                 rng=None, fd_step: float = 1e-4, kernel: Optional[QuantumKernel] = None):
    """Mini-batch KTA and its gradient over all flat parameters.

    Returns ``(kta, grad)`` where ``grad`` follows :meth:`AnsatzParams.flat`.
    The batch kernel matrix's diagonal is fixed at 1 and not executed.
    """
    X_batch = np.atleast_2d(np.asarray(X_batch, dtype=float))
    y = np.asarray(y_batch, dtype=float).ravel()
    D = y.size
    if D < 2 or X_batch.shape[0] != D:
        raise ValueError("need at least two points with one label each")
    if np.unique(y).size < 2:
        warnings.warn("mini-batch contains a single class; alignment target is degenerate",
                      SingleClassBatchWarning, stacklevel=2)
    if kernel is None:
        kernel = QuantumKernel(params, X_batch.shape[1], noise, ledger, rng)
    iu = np.triu_indices(D, 1)
    Xa, Xb = X_batch[iu[0]], X_batch[iu[1]]
    if method == "parameter_shift":
        values, partials = kernel.pair_values_and_partials(Xa, Xb)
        value, weights = _kta_and_entry_weights(values, y)
        return value, weights @ partials
    if method != "finite_difference":
        raise ValueError(f"unknown gradient method {method!r}")
    value, _ = _kta_and_entry_weights(kernel.pair_values(Xa, Xb), y)
    flat = params.flat()
    grad = np.empty_like(flat)
    L, n = params.n_layers, params.n_qubits
    for k in range(flat.size):
        shifted = []
        for sign in (1.0, -1.0):
            f = flat.copy()
            f[k] += sign * fd_step
            kernel.params = AnsatzParams.from_flat(f, L, n)
            shifted.append(_kta_and_entry_weights(kernel.pair_values(Xa, Xb), y)[0])
        grad[k] = (shifted[0] - shifted[1]) / (2 * fd_step)
    kernel.params = params
    return value, grad


def train(X, y, params0: AnsatzParams, cfg: TrainConfig, noise: NoiseConfig = NOISELESS,
          ledger: Optional[ExecutionLedger] = None, batch_rng=None, noise_rng=None,
          callback: Optional[Callable[[int, AnsatzParams], None]] = None):
    """Maximize mini-batch KTA.

    Each iteration draws ``batch_size`` distinct points, evaluates the batch
    kernel and its gradient, and takes one ADAM step on ``-KTA``.
    ``callback(iteration, params)`` runs before the first step (iteration 0)
    and after every step.

    Returns ``(params, trace)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    N = X.shape[0]
    if cfg.batch_size > N:
        raise ValueError(f"batch size {cfg.batch_size} exceeds dataset size {N}")
    ledger = ledger if ledger is not None else ExecutionLedger()
    batch_rng = np.random.default_rng(cfg.seed if batch_rng is None else batch_rng)
    kernel = QuantumKernel(params0, X.shape[1], noise, ledger,
                           noise.seed if noise_rng is None else noise_rng)
    params = params0.copy()
    L, n = params.n_layers, params.n_qubits
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    trace = TrainTrace()
    if callback is not None:
        callback(0, params)
    for t in range(1, cfg.iterations + 1):
        idx = batch_rng.choice(N, size=cfg.batch_size, replace=False)
        single = np.unique(y[idx]).size < 2
        kernel.params = params
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SingleClassBatchWarning)
            value, grad = kta_gradient(X[idx], y[idx], params, method=cfg.gradient_method,
                                       fd_step=cfg.fd_step, kernel=kernel)
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite gradient at iteration {t} (kta={value!r})")
        params = AnsatzParams.from_flat(opt.step(params.flat(), -grad), L, n)
        trace.records.append(TrainRecord(t, value, ledger.count, single))
        logger.debug("iteration %d kta_batch=%.6f executions=%d", t, value, ledger.count)
        if callback is not None:
            callback(t, params)
    return params, trace
