"""scikit-learn compatible classifier wrapping the full pipeline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import svm
from .ansatz import init_params
from .kernel import ExecutionLedger, QuantumKernel
from .noise import NoiseConfig
from .nystrom import select_landmarks
from .pipeline import build_test_kernel, build_train_kernel
from .trainer import TrainConfig, kta, train


def seed_streams(seed: int, n: int = 5):
    """Independent generators for (init, batches, landmarks, train noise, eval noise)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


class QuantumKernelSVC(ClassifierMixin, BaseEstimator):
    """SVM on a KTA-trained quantum embedding kernel.

    ``fit`` trains the ansatz on random mini-batches, builds the training
    kernel exactly (``method="standard"``) or from ``n_landmarks`` random
    landmarks (``method="nystrom"``), and fits an SMO-trained SVM. Circuit
    executions spent by ``fit`` and ``predict`` accumulate in
    ``ledger_``.

    Parameters
    ----------
    n_qubits, n_layers : int
        Ansatz size.
    method : {"standard", "nystrom"}
    n_landmarks : int
        Landmark count for the Nyström method.
    iterations, batch_size, learning_rate :
        Mini-batch KTA training with ADAM.
    C, tol : float
        SVM box constraint and KKT tolerance.
    noise, noise_level :
        ``"none"``, ``"coherent"`` (level = sigma) or ``"depolarizing"``
        (level = p).
    gradient_method : {"parameter_shift", "finite_difference"}
    random_state : int
    """

    def __init__(self, n_qubits=4, n_layers=5, method="standard", n_landmarks=8,
                 iterations=500, batch_size=8, learning_rate=0.1, C=1.0, tol=1e-6,
                 noise="none", noise_level=0.0, gradient_method="parameter_shift",
                 random_state=0):
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.method = method
        self.n_landmarks = n_landmarks
        self.iterations = iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.C = C
        self.tol = tol
        self.noise = noise
        self.noise_level = noise_level
        self.gradient_method = gradient_method
        self.random_state = random_state

    def _signed(self, y):
        return np.where(y == self.classes_[1], 1.0, -1.0)

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"binary classification only, got {self.classes_.size} classes")
        seed = 0 if self.random_state is None else int(self.random_state)
        s_init, s_batch, s_land, s_train_noise, s_eval_noise = seed_streams(seed)
        self.noise_config_ = NoiseConfig.from_level(self.noise, self.noise_level, seed=seed)
        self.ledger_ = ExecutionLedger()
        signed = self._signed(y)
        cfg = TrainConfig(iterations=self.iterations,
                          batch_size=min(self.batch_size, X.shape[0]),
                          learning_rate=self.learning_rate, seed=seed,
                          gradient_method=self.gradient_method)
        params0 = init_params(self.n_layers, self.n_qubits, s_init)
        self.params_, self.trace_ = train(X, signed, params0, cfg, self.noise_config_,
                                          self.ledger_, s_batch, s_train_noise)
        self.kernel_ = QuantumKernel(self.params_, X.shape[1], self.noise_config_,
                                     self.ledger_, s_eval_noise)
        self.landmarks_ = None
        if self.method == "nystrom":
            self.landmarks_ = select_landmarks(X.shape[0], self.n_landmarks, s_land)
        self.train_kernel_ = build_train_kernel(self.kernel_, X, self.method, self.landmarks_)
        self.model_ = svm.fit(self.train_kernel_.values, signed, self.C, self.tol,
                              psd_fix=self.method == "nystrom")
        self.X_train_ = X
        self.kta_ = kta(self.train_kernel_.values, signed)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        K = build_test_kernel(self.kernel_, X, self.X_train_, self.train_kernel_)
        return svm.decision_function(self.model_, K)

    def predict(self, X):
        return self.classes_[(self.decision_function(X) >= 0).astype(int)]
