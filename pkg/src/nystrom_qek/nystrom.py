"""Nyström low-rank reconstruction of training and test kernel matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

PINV_RTOL = 1e-10


class NystromError(ValueError):
    pass


@dataclass(frozen=True)
class LandmarkSet:
    indices: np.ndarray
    selection_seed: Optional[int] = None

    def __len__(self):
        return len(self.indices)


def select_landmarks(N: int, M: int, rng=None) -> LandmarkSet:
    """Draw ``M`` distinct training indices uniformly at random (sorted)."""
    if M < 1:
        raise NystromError("need at least one landmark")
    if M > N:
        raise NystromError(f"cannot pick {M} landmarks from {N} points")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng)
    idx = np.sort(gen.choice(N, size=M, replace=False))
    return LandmarkSet(idx, seed)


def pinv_psd(K, rtol: float = PINV_RTOL) -> np.ndarray:
    """Pseudo-inverse of a symmetric matrix by eigenvalue thresholding.

    Eigenvalues below ``rtol * max_eigenvalue`` (negative ones included)
    are treated as zero.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NystromError(f"expected a square matrix, got {K.shape}")
    w, V = np.linalg.eigh(0.5 * (K + K.T))
    top = w.max() if w.size else 0.0
    if top <= 0:
        return np.zeros_like(K)
    keep = w > rtol * top
    return (V[:, keep] / w[keep]) @ V[:, keep].T


def _check_mm(K_MM):
    K_MM = np.asarray(K_MM, dtype=float)
    if K_MM.ndim != 2 or K_MM.shape[0] != K_MM.shape[1]:
        raise NystromError(f"K_MM must be square, got {K_MM.shape}")
    if not np.allclose(K_MM, K_MM.T, atol=1e-9):
        raise NystromError("K_MM must be symmetric")
    return K_MM


def nystrom_train(K_NM, K_MM, rtol: float = PINV_RTOL, landmarks=None,
                  patch_exact_rows: bool = False) -> np.ndarray:
    """``K_NM pinv(K_MM) K_NM^T``, shape (N, N).

    With ``patch_exact_rows`` the rows and columns at ``landmarks`` are
    overwritten by the exactly computed ``K_NM`` entries.
    """
    K_NM = np.asarray(K_NM, dtype=float)
    K_MM = _check_mm(K_MM)
    if K_NM.ndim != 2 or K_NM.shape[1] != K_MM.shape[0]:
        raise NystromError(f"K_NM {K_NM.shape} does not match K_MM {K_MM.shape}")
    approx = K_NM @ pinv_psd(K_MM, rtol) @ K_NM.T
    approx = 0.5 * (approx + approx.T)
    if patch_exact_rows:
        if landmarks is None:
            raise NystromError("patch_exact_rows needs the landmark indices")
        idx = np.asarray(getattr(landmarks, "indices", landmarks))
        approx[idx, :] = K_NM.T
        approx[:, idx] = K_NM
    return approx


def nystrom_test(K_PM, K_MM, K_NM, rtol: float = PINV_RTOL) -> np.ndarray:
    """``K_PM pinv(K_MM) K_NM^T``, shape (P, N)."""
    K_PM = np.asarray(K_PM, dtype=float)
    K_NM = np.asarray(K_NM, dtype=float)
    K_MM = _check_mm(K_MM)
    M = K_MM.shape[0]
    if K_PM.ndim != 2 or K_PM.shape[1] != M:
        raise NystromError(f"K_PM {K_PM.shape} does not match K_MM {K_MM.shape}")
    if K_NM.ndim != 2 or K_NM.shape[1] != M:
        raise NystromError(f"K_NM {K_NM.shape} does not match K_MM {K_MM.shape}")
    return K_PM @ pinv_psd(K_MM, rtol) @ K_NM.T


def executions_standard(N: int, P: int = 0) -> tuple:
    """Circuit executions (train, test) without approximation."""
    return N * (N - 1) // 2, N * P


def executions_nystrom(N: int, M: int, P: int = 0) -> tuple:
    """Circuit executions (train, test) for ``M`` landmarks.

    Training pays for the upper triangle of ``K_MM`` plus the
    landmark/non-landmark block of ``K_NM``; testing only for ``K_PM``.
    """
    if not 1 <= M <= N:
        raise NystromError(f"need 1 <= M <= N, got M={M}, N={N}")
    return M * (M - 1) // 2 + M * (N - M), M * P
