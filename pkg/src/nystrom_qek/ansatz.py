"""Layered data re-uploading ansatz and its adjoint.

Each layer ``l`` acting on ``n`` qubits is

1. encoding: ``RY(lam[l, q] * x[q % d])`` on every qubit ``q``;
2. variational: ``RY(theta[l, q, 0])`` then ``RZ(theta[l, q, 1])`` on every qubit;
3. entangling: a ring of CNOTs ``q -> q+1 (mod n)``; a single CNOT for
   ``n = 2`` and none for ``n = 1``.

Trainable parameters are addressed by a flat index: the ``L*n`` input-scaling
weights first (row-major), then the ``2*L*n`` variational angles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Tuple

import numpy as np

from .simulator import Gate, Structure

DEFAULT_QUBITS = 4
DEFAULT_LAYERS = 5


class AnsatzError(ValueError):
    pass


@dataclass
class AnsatzParams:
    """Input-scaling weights ``lam`` (L, n) and variational angles ``theta`` (L, n, 2)."""

    lam: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.lam = np.array(self.lam, dtype=float)
        self.theta = np.array(self.theta, dtype=float)
        if self.lam.ndim != 2:
            raise AnsatzError(f"lam must be 2-D (layers, qubits), got shape {self.lam.shape}")
        L, n = self.lam.shape
        if self.theta.shape != (L, n, 2):
            raise AnsatzError(f"theta must have shape {(L, n, 2)}, got {self.theta.shape}")
        if not (np.all(np.isfinite(self.lam)) and np.all(np.isfinite(self.theta))):
            raise AnsatzError("parameters must be finite")

    @property
    def n_layers(self) -> int:
        return self.lam.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.lam.shape[1]

    @property
    def size(self) -> int:
        return self.lam.size + self.theta.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.lam.ravel(), self.theta.ravel()])

    @classmethod
    def from_flat(cls, values, n_layers: int, n_qubits: int) -> "AnsatzParams":
        values = np.asarray(values, dtype=float)
        n_lam = n_layers * n_qubits
        if values.shape != (3 * n_lam,):
            raise AnsatzError(f"expected {3 * n_lam} values, got {values.shape}")
        return cls(values[:n_lam].reshape(n_layers, n_qubits),
                   values[n_lam:].reshape(n_layers, n_qubits, 2))

    def copy(self) -> "AnsatzParams":
        return AnsatzParams(self.lam.copy(), self.theta.copy())

    def to_dict(self) -> dict:
        return {"lam": self.lam.tolist(), "theta": self.theta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AnsatzParams":
        return cls(d["lam"], d["theta"])


def init_params(n_layers: int, n_qubits: int, rng=None) -> AnsatzParams:
    """Input scaling at 1, variational angles uniform in [-pi, pi)."""
    rng = np.random.default_rng(rng)
    lam = np.ones((n_layers, n_qubits))
    theta = rng.uniform(-np.pi, np.pi, size=(n_layers, n_qubits, 2))
    return AnsatzParams(lam, theta)


@dataclass
class CircuitSpec:
    """Gate list plus, for every trainable parameter, the gate positions it
    drives and the chain-rule factor ``d angle / d parameter`` at each."""

    gates: List[Gate]
    param_sites: Dict[int, List[Tuple[int, float]]] = field(default_factory=dict)
    n_qubits: int = 1

    def angles(self) -> np.ndarray:
        return np.array([g.angle for g in self.gates])

    def structure(self) -> Structure:
        return Structure.from_gates(self.gates, self.n_qubits)

    def __add__(self, other: "CircuitSpec") -> "CircuitSpec":
        if other.n_qubits != self.n_qubits:
            raise AnsatzError("cannot compose circuits on different qubit counts")
        off = len(self.gates)
        sites = {k: list(v) for k, v in self.param_sites.items()}
        for k, v in other.param_sites.items():
            sites.setdefault(k, []).extend((pos + off, f) for pos, f in v)
        return CircuitSpec(self.gates + other.gates, sites, self.n_qubits)


def ring_pairs(n_qubits: int) -> List[Tuple[int, int]]:
    if n_qubits == 1:
        return []
    if n_qubits == 2:
        return [(0, 1)]
    return [(q, (q + 1) % n_qubits) for q in range(n_qubits)]


class AnsatzLayout:
    """Gate structure of ``U(x)`` for fixed (layers, qubits, features).

    The layout is angle-free; :meth:`angles` evaluates every gate angle for
    a batch of points in one vectorized step.
    """

    def __init__(self, n_layers: int = DEFAULT_LAYERS, n_qubits: int = DEFAULT_QUBITS,
                 n_features: int = 2):
        if n_layers < 1 or n_qubits < 1:
            raise AnsatzError("n_layers and n_qubits must be positive")
        if n_features < 1:
            raise AnsatzError("need at least one feature")
        self.n_layers = n_layers
        self.n_qubits = n_qubits
        self.n_features = n_features
        kinds, targets, controls, pidx, feat = [], [], [], [], []
        n_lam = n_layers * n_qubits
        for l in range(n_layers):
            for q in range(n_qubits):
                kinds.append("RY"); targets.append(q); controls.append(-1)
                pidx.append(l * n_qubits + q); feat.append(q % n_features)
            for q in range(n_qubits):
                for r, kind in enumerate(("RY", "RZ")):
                    kinds.append(kind); targets.append(q); controls.append(-1)
                    pidx.append(n_lam + (l * n_qubits + q) * 2 + r); feat.append(-1)
            for c, t in ring_pairs(n_qubits):
                kinds.append("CNOT"); targets.append(t); controls.append(c)
                pidx.append(-1); feat.append(-1)
        self.structure = Structure(tuple(kinds), tuple(targets), tuple(controls), n_qubits)
        self.param_index = np.array(pidx)
        self.feature_index = np.array(feat)
        self.is_encoding = self.feature_index >= 0
        self.is_variational = (self.param_index >= 0) & ~self.is_encoding
        self.n_params = 3 * n_lam
        self.n_lambda = n_lam

    def __len__(self):
        return len(self.structure)

    @cached_property
    def kernel_structure(self) -> Structure:
        """Structure of ``U(x)`` followed by ``U(y)^dagger``."""
        s = self.structure
        return Structure(s.kinds + s.kinds[::-1], s.targets + s.targets[::-1],
                         s.controls + s.controls[::-1], s.n_qubits)

    @cached_property
    def kernel_shift_positions(self) -> np.ndarray:
        """Positions of trainable rotations inside the kernel circuit."""
        G = len(self)
        first = np.flatnonzero(self.param_index >= 0)
        second = (2 * G - 1 - first)[::-1]
        return np.concatenate([first, second])

    def check_points(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] == 0:
            raise AnsatzError("empty feature vector")
        if X.shape[1] != self.n_features:
            raise AnsatzError(f"expected {self.n_features} features, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise AnsatzError("non-finite feature values")
        return X

    def check_params(self, params: AnsatzParams):
        if (params.n_layers, params.n_qubits) != (self.n_layers, self.n_qubits):
            raise AnsatzError(
                f"parameters are for {params.n_layers} layers x {params.n_qubits} qubits, "
                f"layout has {self.n_layers} x {self.n_qubits}"
            )

    def angles(self, X, params: AnsatzParams) -> np.ndarray:
        """Gate angles of ``U(x)`` for every row of ``X``; shape (P, n_gates)."""
        X = self.check_points(X)
        self.check_params(params)
        flat = params.flat()
        out = np.zeros((X.shape[0], len(self)))
        enc = self.is_encoding
        out[:, enc] = flat[self.param_index[enc]] * X[:, self.feature_index[enc]]
        var = self.is_variational
        out[:, var] = flat[self.param_index[var]]
        return out

    def kernel_angles(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Angles of ``U(a) U(b)^dagger`` for row-aligned angle arrays."""
        return np.concatenate([A, -B[:, ::-1]], axis=1)

    def kernel_chain_factors(self, Xa: np.ndarray, Xb: np.ndarray) -> np.ndarray:
        """d angle / d parameter at each kernel shift position, per pair.

        Shape (pairs, len(kernel_shift_positions)). Encoding sites carry the
        feature value, variational sites 1; sites in the adjoint half are
        negated.
        """
        idx = np.flatnonzero(self.param_index >= 0)
        enc = self.is_encoding[idx]
        feat = self.feature_index[idx]
        fa = np.where(enc, Xa[:, np.maximum(feat, 0)], 1.0)
        fb = np.where(enc, Xb[:, np.maximum(feat, 0)], 1.0)
        return np.concatenate([fa, -fb[:, ::-1]], axis=1)

    @cached_property
    def kernel_shift_params(self) -> np.ndarray:
        """Flat parameter index driven by each kernel shift position."""
        idx = np.flatnonzero(self.param_index >= 0)
        p = self.param_index[idx]
        return np.concatenate([p, p[::-1]])


def build_circuit(x, params: AnsatzParams) -> CircuitSpec:
    """``U(x)`` as an explicit gate list with parameter sites."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise AnsatzError("empty feature vector")
    layout = AnsatzLayout(params.n_layers, params.n_qubits, x.size)
    angles = layout.angles(x[None, :], params)[0]
    s = layout.structure
    gates, sites = [], {}
    for k, kind in enumerate(s.kinds):
        p = int(layout.param_index[k])
        if kind == "CNOT":
            gates.append(Gate("CNOT", s.targets[k], s.controls[k]))
            continue
        gates.append(Gate(kind, s.targets[k], None, float(angles[k]), shiftable=True))
        f = layout.feature_index[k]
        factor = float(x[f]) if f >= 0 else 1.0
        sites.setdefault(p, []).append((k, factor))
    return CircuitSpec(gates, sites, params.n_qubits)


def adjoint_circuit(c: CircuitSpec) -> CircuitSpec:
    """Reverse the gate list and negate every rotation angle."""
    G = len(c.gates)
    gates = [g.adjoint() for g in reversed(c.gates)]
    sites = {
        k: sorted((G - 1 - pos, -f) for pos, f in v)
        for k, v in c.param_sites.items()
    }
    return CircuitSpec(gates, sites, c.n_qubits)
