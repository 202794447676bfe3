"""Quantum embedding kernels trained by kernel-target alignment, with
Nyström-approximated kernel matrices and an SMO-trained SVM."""

from .ansatz import AnsatzLayout, AnsatzParams, adjoint_circuit, build_circuit, init_params
from .datasets import Dataset, load_csv, make_checkers, make_corners, make_dataset, make_donuts, make_spirals, save_csv
from .estimator import QuantumKernelSVC
from .kernel import ExecutionLedger, KernelMatrix, QuantumKernel, kernel_entry, kernel_matrix
from .noise import NoiseConfig, insert_depolarizing, perturb_coherent
from .nystrom import nystrom_test, nystrom_train, select_landmarks
from .svm import PrecomputedSVC
from .trainer import TrainConfig, kta, kta_gradient, train

__version__ = "0.1.0"
