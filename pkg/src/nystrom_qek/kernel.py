"""Fidelity kernel ``K(x, y) = |<0| U(y)^dagger U(x) |0>|^2`` with execution metering.

Every circuit evaluation (one kernel entry, or one parameter-shifted copy of
it) adds one to an :class:`ExecutionLedger`. Square matrices only evaluate
the strict upper triangle; the diagonal is taken to be 1 unless
``execute_diagonal`` is set. Rectangular blocks can share a cache keyed by
point identifiers, which is how the landmark block inside ``K_NM`` reuses
``K_MM`` without re-executing it.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Optional, Sequence

import numpy as np

from .ansatz import AnsatzLayout, AnsatzParams
from .noise import NOISELESS, NoiseConfig
from .simulator import (
    run_mixed_batch,
    run_pure_batch,
    shifted_probs_mixed,
    shifted_probs_pure,
)

SHIFT = np.pi / 2


class KernelError(ValueError):
    pass


class ExecutionLedger:
    """Monotone counter of quantum-circuit executions."""

    def __init__(self, count: int = 0):
        if count < 0:
            raise ValueError("ledger count must be non-negative")
        self._count = int(count)
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    def add(self, n: int) -> int:
        n = int(n)
        if n < 0:
            raise ValueError("cannot remove executions from a ledger")
        with self._lock:
            self._count += n
            return self._count

    def __repr__(self):
        return f"ExecutionLedger(count={self._count})"


@dataclass
class KernelMatrix:
    values: np.ndarray
    row_ids: list
    col_ids: list
    symmetric: bool = False

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@lru_cache(maxsize=32)
def get_layout(n_layers: int, n_qubits: int, n_features: int) -> AnsatzLayout:
    return AnsatzLayout(n_layers, n_qubits, n_features)


class QuantumKernel:
    """Trainable fidelity kernel bound to one parameter set and noise model.

    Parameters
    ----------
    params : AnsatzParams
    noise : NoiseConfig
    ledger : ExecutionLedger, optional
        Created when omitted; shared ledgers accumulate across kernels.
    rng : numpy Generator or seed, optional
        Stream for coherent-noise draws. Defaults to ``noise.seed``. Draws
        are taken for a whole batch of entries before any simulation, in
        entry order, so results do not depend on how the batch is split.
    execute_diagonal : bool
        Evaluate ``K(x, x)`` instead of setting it to 1.
    engine : {"auto", "statevector", "density"}
        ``"density"`` forces the density-matrix engine even at ``p = 0``.
    """

    def __init__(self, params: AnsatzParams, n_features: int = 2, noise: NoiseConfig = NOISELESS,
                 ledger: Optional[ExecutionLedger] = None, rng=None,
                 execute_diagonal: bool = False, engine: str = "auto"):
        if engine not in ("auto", "statevector", "density"):
            raise KernelError(f"unknown engine {engine!r}")
        if engine == "density" and noise.kind == "coherent":
            raise KernelError("coherent noise runs on the statevector engine")
        self.params = params
        self.layout = get_layout(params.n_layers, params.n_qubits, n_features)
        self.noise = noise
        self.ledger = ledger if ledger is not None else ExecutionLedger()
        self.rng = np.random.default_rng(noise.seed if rng is None else rng)
        self.execute_diagonal = execute_diagonal
        self.engine = engine

    @property
    def _density(self) -> bool:
        if self.engine == "density":
            return True
        if self.engine == "statevector":
            if self.noise.needs_density_matrix:
                raise KernelError("depolarizing noise with p > 0 needs the density engine")
            return False
        return self.noise.needs_density_matrix

    def _coherent_offsets(self, factors: np.ndarray) -> np.ndarray:
        """Angle offsets for one fresh miscalibration draw per row."""
        lay = self.layout
        params = lay.kernel_shift_params
        mask = np.ones(params.size, bool) if self.noise.perturb_encoding else params >= lay.n_lambda
        first = 0 if self.noise.perturb_encoding else lay.n_lambda
        n_pert = lay.n_params - first
        deltas = self.rng.normal(0.0, self.noise.sigma, size=(factors.shape[0], n_pert))
        offsets = np.zeros((factors.shape[0], 2 * len(lay)))
        pos = lay.kernel_shift_positions[mask]
        offsets[:, pos] = factors[:, mask] * deltas[:, params[mask] - first]
        return offsets

    def _run(self, angles: np.ndarray) -> np.ndarray:
        s = self.layout.kernel_structure
        if self._density:
            return run_mixed_batch(s, angles, self.noise.p if self.noise.kind == "depolarizing" else 0.0)
        return run_pure_batch(s, angles)

    def pair_values(self, Xa, Xb) -> np.ndarray:
        """Kernel values for row-aligned point pairs; one execution per pair."""
        lay = self.layout
        Xa, Xb = lay.check_points(Xa), lay.check_points(Xb)
        if Xa.shape[0] != Xb.shape[0]:
            raise KernelError("pair arrays must have the same length")
        if Xa.shape[0] == 0:
            return np.empty(0)
        angles = lay.kernel_angles(lay.angles(Xa, self.params), lay.angles(Xb, self.params))
        if self.noise.is_stochastic:
            angles = angles + self._coherent_offsets(lay.kernel_chain_factors(Xa, Xb))
        out = self._run(angles)
        self.ledger.add(Xa.shape[0])
        return out

    def pair_values_and_partials(self, Xa, Xb):
        """Kernel values and parameter-shift partials for row-aligned pairs.

        Returns ``(values, partials)`` with ``partials`` of shape
        (pairs, n_params). Each pair costs one execution plus two per
        trainable gate occurrence in ``U(x)`` and ``U(y)^dagger``.
        """
        lay = self.layout
        Xa, Xb = lay.check_points(Xa), lay.check_points(Xb)
        E = Xa.shape[0]
        angles = lay.kernel_angles(lay.angles(Xa, self.params), lay.angles(Xb, self.params))
        factors = lay.kernel_chain_factors(Xa, Xb)
        pos = lay.kernel_shift_positions
        S = pos.size
        if self.noise.is_stochastic:
            # every shifted circuit is a distinct parameter set: fresh draws per row
            rows = np.repeat(angles[:, None, None, :], S, axis=1).repeat(2, axis=2)
            j = np.arange(S)
            rows[:, j, 0, pos] += SHIFT
            rows[:, j, 1, pos] -= SHIFT
            allrows = np.concatenate([angles[:, None, :], rows.reshape(E, 2 * S, -1)], axis=1)
            allrows = allrows.reshape(E * (1 + 2 * S), -1)
            rep_factors = np.repeat(factors, 1 + 2 * S, axis=0)
            probs = run_pure_batch(lay.kernel_structure,
                                   allrows + self._coherent_offsets(rep_factors))
            probs = probs.reshape(E, 1 + 2 * S)
            values = probs[:, 0]
            shifted = probs[:, 1:].reshape(E, S, 2)
        elif self._density:
            p = self.noise.p if self.noise.kind == "depolarizing" else 0.0
            values, shifted = shifted_probs_mixed(lay.kernel_structure, angles, pos,
                                                  (SHIFT, -SHIFT), p)
        else:
            values, shifted = shifted_probs_pure(lay.kernel_structure, angles, pos, (SHIFT, -SHIFT))
        site_grads = 0.5 * (shifted[:, :, 0] - shifted[:, :, 1]) * factors
        partials = np.zeros((E, lay.n_params))
        np.add.at(partials.T, lay.kernel_shift_params, site_grads.T)
        self.ledger.add(E * (1 + 2 * S))
        return values, partials

    def entry(self, x, y) -> float:
        return float(self.pair_values(np.atleast_2d(x), np.atleast_2d(y))[0])

    def matrix(self, A, B=None, ids_a: Optional[Sequence[Hashable]] = None,
               ids_b: Optional[Sequence[Hashable]] = None, cache: Optional[dict] = None) -> KernelMatrix:
        """Kernel matrix between point lists ``A`` and ``B``.

        With ``B`` omitted (or identical identifier lists) the result is
        symmetric and only the strict upper triangle is executed. Entries
        whose identifier pair is already in ``cache`` are reused; newly
        executed entries are added to it.
        """
        lay = self.layout
        A = lay.check_points(A)
        if A.shape[0] == 0:
            raise KernelError("empty point list")
        if B is None:
            B = A
            ids_a = list(range(A.shape[0])) if ids_a is None else list(ids_a)
            ids_b = ids_a
        else:
            B = lay.check_points(B)
            if B.shape[0] == 0:
                raise KernelError("empty point list")
            ids_a = [("a", i) for i in range(A.shape[0])] if ids_a is None else list(ids_a)
            ids_b = [("b", j) for j in range(B.shape[0])] if ids_b is None else list(ids_b)
        if len(ids_a) != A.shape[0] or len(ids_b) != B.shape[0]:
            raise KernelError("identifier lists must match the point counts")
        symmetric = ids_a == ids_b
        na, nb = A.shape[0], B.shape[0]
        values = np.empty((na, nb))
        todo_i, todo_j = [], []
        for i in range(na):
            for j in range(i if symmetric else 0, nb):
                a, b = ids_a[i], ids_b[j]
                if a == b and not self.execute_diagonal:
                    values[i, j] = 1.0
                    continue
                key = frozenset((a, b))
                if cache is not None and key in cache:
                    values[i, j] = cache[key]
                    continue
                todo_i.append(i)
                todo_j.append(j)
        if todo_i:
            vals = self.pair_values(A[todo_i], B[todo_j])
            values[todo_i, todo_j] = vals
            if cache is not None:
                for i, j, v in zip(todo_i, todo_j, vals):
                    cache[frozenset((ids_a[i], ids_b[j]))] = v
        if symmetric:
            iu = np.triu_indices(na, 1)
            values[iu[1], iu[0]] = values[iu]
        return KernelMatrix(values, ids_a, ids_b, symmetric)


def kernel_entry(x, y, params: AnsatzParams, noise: NoiseConfig = NOISELESS,
                 ledger: Optional[ExecutionLedger] = None, rng=None) -> float:
    x = np.asarray(x, dtype=float).ravel()
    qk = QuantumKernel(params, x.size, noise, ledger, rng)
    return qk.entry(x, np.asarray(y, dtype=float).ravel())


def kernel_matrix(points_a, points_b, params: AnsatzParams, noise: NoiseConfig = NOISELESS,
                  ledger: Optional[ExecutionLedger] = None, rng=None, **kw) -> KernelMatrix:
    """Functional wrapper over :meth:`QuantumKernel.matrix`; pass
    ``points_b=None`` for a symmetric matrix."""
    A = np.atleast_2d(np.asarray(points_a, dtype=float))
    execute_diagonal = kw.pop("execute_diagonal", False)
    qk = QuantumKernel(params, A.shape[1], noise, ledger, rng, execute_diagonal=execute_diagonal)
    return qk.matrix(A, points_b, **kw)
