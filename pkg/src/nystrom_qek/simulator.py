"""Dense statevector and density-matrix simulation of small circuits.

Qubit ordering is big-endian: qubit 0 is the most significant bit of the
basis index, so ``|q0 q1 ... q_{n-1}>`` maps to index ``q0 * 2**(n-1) + ...``.

Two layers live here. The scalar API (:func:`apply_gate`,
:func:`apply_gate_mixed`, :func:`apply_depolarizing`,
:func:`prob_all_zeros`) acts on one :class:`PureState` or
:class:`MixedState`. The batched API (:func:`run_pure_batch`,
:func:`run_mixed_batch`, :func:`shifted_probs_pure`,
:func:`shifted_probs_mixed`) runs many circuits sharing one gate structure
but carrying per-row angles, which is what kernel matrices and
parameter-shift gradients need.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

ROTATIONS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATIONS + ("CNOT",)

NORM_ATOL = 1e-10
DEFAULT_N_MAX_MIXED = 8


class SimulationError(ValueError):
    """Raised on invalid states, gates or channel parameters."""


@dataclass(frozen=True)
class Gate:
    """One gate of the fixed gate set ``{RX, RY, RZ, CNOT}``.

    ``shiftable`` marks trainable rotations, i.e. the gates a
    parameter-shift gradient differentiates through.
    """

    kind: str
    target: int
    control: Optional[int] = None
    angle: float = 0.0
    shiftable: bool = False

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise SimulationError(f"unknown gate kind {self.kind!r}")
        if self.target < 0:
            raise SimulationError("negative target index")
        if self.kind == "CNOT":
            if self.control is None or self.control < 0:
                raise SimulationError("CNOT needs a non-negative control")
            if self.control == self.target:
                raise SimulationError("CNOT control equals target")
        elif self.control is not None:
            raise SimulationError(f"{self.kind} takes no control qubit")

    @property
    def qubits(self) -> tuple:
        if self.kind == "CNOT":
            return (self.control, self.target)
        return (self.target,)

    def adjoint(self) -> "Gate":
        if self.kind == "CNOT":
            return self
        return Gate(self.kind, self.target, None, -self.angle, self.shiftable)

    def matrix(self) -> np.ndarray:
        """Unitary on the qubits the gate touches (control first for CNOT)."""
        if self.kind == "CNOT":
            return np.array(
                [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
                dtype=complex,
            )
        return rotation_matrix(self.kind, self.angle)


@dataclass
class PureState:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.n_qubits < 1:
            raise SimulationError("n_qubits must be positive")
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise SimulationError(
                f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    @classmethod
    def zeros(cls, n_qubits: int) -> "PureState":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_mixed(self) -> "MixedState":
        return MixedState(np.outer(self.amplitudes, self.amplitudes.conj()), self.n_qubits)


@dataclass
class MixedState:
    rho: np.ndarray
    n_qubits: int
    n_max: int = field(default=DEFAULT_N_MAX_MIXED, repr=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SimulationError("n_qubits must be positive")
        if self.n_qubits > self.n_max:
            raise SimulationError(
                f"density matrices are capped at {self.n_max} qubits, got {self.n_qubits}"
            )
        self.rho = np.asarray(self.rho, dtype=complex)
        dim = 2**self.n_qubits
        if self.rho.shape != (dim, dim):
            raise SimulationError(f"expected ({dim}, {dim}) density matrix, got {self.rho.shape}")

    @classmethod
    def zeros(cls, n_qubits: int) -> "MixedState":
        rho = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
        rho[0, 0] = 1.0
        return cls(rho, n_qubits)

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "MixedState":
        dim = 2**n_qubits
        return cls(np.eye(dim, dtype=complex) / dim, n_qubits)

    def trace(self) -> float:
        return float(np.trace(self.rho).real)


def rotation_matrix(kind: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)
    raise SimulationError(f"{kind!r} is not a rotation")


def _check_gate(g: Gate, n_qubits: int):
    for q in g.qubits:
        if q >= n_qubits:
            raise SimulationError(f"qubit index {q} out of range for {n_qubits} qubits")


def apply_gate(state: PureState, g: Gate) -> PureState:
    """Return ``U_g |psi>`` as a new state."""
    _check_gate(g, state.n_qubits)
    if abs(state.norm() - 1.0) > NORM_ATOL:
        raise SimulationError(f"state is not normalized (norm={state.norm()!r})")
    batch = state.amplitudes[None, :]
    out = _apply_structure(batch, state.n_qubits, g.kind, g.target, g.control,
                           np.array([g.angle]), conj=False)
    return PureState(out[0], state.n_qubits)


def apply_gate_mixed(state: MixedState, g: Gate) -> MixedState:
    """Return ``U rho U^dagger`` as a new state."""
    _check_gate(g, state.n_qubits)
    if abs(state.trace() - 1.0) > NORM_ATOL:
        raise SimulationError(f"density matrix has trace {state.trace()!r}, expected 1")
    rho = _conjugate_by_gate(state.rho[None], state.n_qubits, g.kind, g.target,
                             g.control, np.array([g.angle]))
    return MixedState(rho[0], state.n_qubits, state.n_max)


def apply_depolarizing(state: MixedState, qubit: int, p: float) -> MixedState:
    """Single-qubit depolarizing channel.

    ``rho -> (1-p) rho + p/3 (X rho X + Y rho Y + Z rho Z)``; ``p = 3/4``
    maps the qubit to the maximally mixed state.
    """
    if not 0.0 <= p <= 1.0:
        raise SimulationError(f"depolarizing probability must lie in [0, 1], got {p}")
    if not 0 <= qubit < state.n_qubits:
        raise SimulationError(f"qubit index {qubit} out of range for {state.n_qubits} qubits")
    rho = _depolarize(state.rho[None], state.n_qubits, qubit, p)
    return MixedState(rho[0], state.n_qubits, state.n_max)


def prob_all_zeros(state) -> float:
    """Probability of measuring ``|0...0>``."""
    if isinstance(state, PureState):
        return float(abs(state.amplitudes[0]) ** 2)
    if isinstance(state, MixedState):
        return float(state.rho[0, 0].real)
    raise TypeError(f"expected PureState or MixedState, got {type(state).__name__}")


# --------------------------------------------------------------------------
# batched kernels
#
# A "structure" is the gate sequence without angles: parallel arrays of
# kinds, targets and controls (control -1 for rotations). Angles come as an
# array of shape (batch, n_gates).
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Structure:
    kinds: tuple
    targets: tuple
    controls: tuple
    n_qubits: int

    @classmethod
    def from_gates(cls, gates: Sequence[Gate], n_qubits: int) -> "Structure":
        for g in gates:
            _check_gate(g, n_qubits)
        return cls(
            tuple(g.kind for g in gates),
            tuple(g.target for g in gates),
            tuple(-1 if g.control is None else g.control for g in gates),
            n_qubits,
        )

    def __len__(self):
        return len(self.kinds)

    def gate_qubits(self, k: int) -> tuple:
        if self.kinds[k] == "CNOT":
            return (self.controls[k], self.targets[k])
        return (self.targets[k],)


def _rotation_batch(kind: str, angles: np.ndarray, conj: bool) -> tuple:
    """Entries (u00, u01, u10, u11) of a batch of rotations, each shape (B,)."""
    half = 0.5 * np.asarray(angles, dtype=float)
    c, s = np.cos(half), np.sin(half)
    if kind == "RY":
        return c, -s, s, c
    if kind == "RX":
        off = (1j if conj else -1j) * s
        return c, off, off, c
    # RZ
    ph = np.exp((0.5j if conj else -0.5j) * angles)
    zero = np.zeros_like(c)
    return ph, zero, zero, ph.conj()


def _apply_structure(arr, n, kind, target, control, angles, conj, axis_offset=0):
    """Apply one gate along the qubit axes of ``arr``.

    ``arr`` has shape (B, ...) where the qubit dimension starts at
    ``1 + axis_offset`` (row index) in a flattened 2**n block; this handles
    both vectors (B, D) and the row or column side of (B, D, D) matrices.
    With ``conj=True`` the complex-conjugated gate is applied, which is how
    the column side of ``U rho U^dagger`` is formed.
    """
    B = arr.shape[0]
    if axis_offset == 0:
        lead, trail = (), arr.shape[2:]
    else:
        lead, trail = arr.shape[1:2], ()
    t = arr.reshape((B,) + lead + (2,) * n + trail)
    base = 1 + len(lead)
    if kind == "CNOT":
        out = t.copy()
        idx = [slice(None)] * t.ndim
        idx[base + control] = 1
        idx = tuple(idx)
        # integer indexing drops the control axis
        tgt = base + target - (1 if target > control else 0)
        out[idx] = np.flip(t[idx], axis=tgt)
        return out.reshape(arr.shape)
    u00, u01, u10, u11 = _rotation_batch(kind, angles, conj)
    ax = base + target
    a0 = np.take(t, 0, axis=ax)
    a1 = np.take(t, 1, axis=ax)
    shape = (B,) + (1,) * (a0.ndim - 1)
    u00, u01, u10, u11 = (u.reshape(shape) for u in (u00, u01, u10, u11))
    out = np.stack((u00 * a0 + u01 * a1, u10 * a0 + u11 * a1), axis=ax)
    return out.reshape(arr.shape)


def _conjugate_by_gate(rho, n, kind, target, control, angles):
    """``U rho U^dagger`` for a batch of density matrices (B, D, D)."""
    left = _apply_structure(rho, n, kind, target, control, angles, conj=False)
    return _apply_structure(left, n, kind, target, control, angles, conj=True, axis_offset=1)


def _depolarize(rho, n, qubit, p):
    """Depolarizing channel on one qubit for a batch (B, D, D)."""
    if p == 0.0:
        return rho
    B = rho.shape[0]
    left, right = 2**qubit, 2 ** (n - qubit - 1)
    t = rho.reshape(B, left, 2, right, left, 2, right)
    out = np.empty_like(t)
    keep, swap, coh = 1.0 - 2.0 * p / 3.0, 2.0 * p / 3.0, 1.0 - 4.0 * p / 3.0
    r00 = t[:, :, 0, :, :, 0, :]
    r11 = t[:, :, 1, :, :, 1, :]
    out[:, :, 0, :, :, 0, :] = keep * r00 + swap * r11
    out[:, :, 1, :, :, 1, :] = keep * r11 + swap * r00
    out[:, :, 0, :, :, 1, :] = coh * t[:, :, 0, :, :, 1, :]
    out[:, :, 1, :, :, 0, :] = coh * t[:, :, 1, :, :, 0, :]
    return out.reshape(rho.shape)


def _check_angles(structure: Structure, angles) -> np.ndarray:
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    if angles.shape[1] != len(structure):
        raise SimulationError(
            f"angle array has {angles.shape[1]} columns, structure has {len(structure)} gates"
        )
    return angles


def run_pure_batch(structure: Structure, angles, chunk: int = 8192) -> np.ndarray:
    """Run every row of ``angles`` on ``|0...0>`` and return P(0...0) per row."""
    angles = _check_angles(structure, angles)
    n = structure.n_qubits
    out = np.empty(angles.shape[0])
    for start in range(0, angles.shape[0], chunk):
        block = angles[start:start + chunk]
        psi = np.zeros((block.shape[0], 2**n), dtype=complex)
        psi[:, 0] = 1.0
        for k, kind in enumerate(structure.kinds):
            psi = _apply_structure(psi, n, kind, structure.targets[k], structure.controls[k],
                                   block[:, k], conj=False)
        out[start:start + chunk] = np.abs(psi[:, 0]) ** 2
    return out


def run_mixed_batch(structure: Structure, angles, p: float, chunk: int = 1024,
                    n_max: int = DEFAULT_N_MAX_MIXED) -> np.ndarray:
    """Density-matrix version of :func:`run_pure_batch`.

    After every gate a depolarizing channel of strength ``p`` acts on each
    qubit the gate touches.
    """
    if not 0.0 <= p <= 1.0:
        raise SimulationError(f"depolarizing probability must lie in [0, 1], got {p}")
    n = structure.n_qubits
    if n > n_max:
        raise SimulationError(f"density matrices are capped at {n_max} qubits, got {n}")
    angles = _check_angles(structure, angles)
    dim = 2**n
    out = np.empty(angles.shape[0])
    for start in range(0, angles.shape[0], chunk):
        block = angles[start:start + chunk]
        rho = np.zeros((block.shape[0], dim, dim), dtype=complex)
        rho[:, 0, 0] = 1.0
        for k, kind in enumerate(structure.kinds):
            rho = _conjugate_by_gate(rho, n, kind, structure.targets[k],
                                     structure.controls[k], block[:, k])
            for q in structure.gate_qubits(k):
                rho = _depolarize(rho, n, q, p)
        out[start:start + chunk] = rho[:, 0, 0].real
    return out


# --------------------------------------------------------------------------
# shifted-circuit evaluation
#
# P(0...0) of the circuit with gate k's angle replaced by angle + s is
# |<chi_k| R_k(angle + s) |psi_{k-1}>|^2, where psi_{k-1} is the state
# before gate k and <chi_k| = <0| G_last ... G_{k+1}. Caching both sweeps
# gives every single-gate-shifted circuit exactly, at the cost of two
# passes instead of one pass per shifted circuit. The mixed version does
# the same with density matrices going forward and measurement effects
# going backward (the depolarizing channel is self-adjoint).
# --------------------------------------------------------------------------


def shifted_probs_pure(structure: Structure, angles, positions: Sequence[int],
                       shifts: Sequence[float]) -> np.ndarray:
    """P(0...0) for every (row, position, shift) single-gate modification.

    Returns ``(base, shifted)``: the unmodified probabilities, shape (B,),
    and the modified ones, shape (B, len(positions), len(shifts)).
    """
    angles = _check_angles(structure, angles)
    n = structure.n_qubits
    B, G = angles.shape
    positions = list(positions)
    want = set(positions)
    before = {}
    psi = np.zeros((B, 2**n), dtype=complex)
    psi[:, 0] = 1.0
    for k in range(G):
        if k in want:
            before[k] = psi
        psi = _apply_structure(psi, n, structure.kinds[k], structure.targets[k],
                               structure.controls[k], angles[:, k], conj=False)
    base = np.abs(psi[:, 0]) ** 2
    # backward sweep on the conjugated bra: chi = (G_last...G_{k+1})^dagger |0>
    chi = np.zeros((B, 2**n), dtype=complex)
    chi[:, 0] = 1.0
    after = {}
    for k in range(G - 1, -1, -1):
        if k in want:
            after[k] = chi
        chi = _apply_structure(chi, n, structure.kinds[k], structure.targets[k],
                               structure.controls[k], -angles[:, k], conj=False)
    out = np.empty((B, len(positions), len(shifts)))
    for j, k in enumerate(positions):
        kind = structure.kinds[k]
        if kind == "CNOT":
            raise SimulationError(f"gate {k} is a CNOT and cannot be shifted")
        for s_idx, s in enumerate(shifts):
            moved = _apply_structure(before[k], n, kind, structure.targets[k], -1,
                                     angles[:, k] + s, conj=False)
            amp = np.einsum("bi,bi->b", after[k].conj(), moved)
            out[:, j, s_idx] = np.abs(amp) ** 2
    return base, out


def shifted_probs_mixed(structure: Structure, angles, positions: Sequence[int],
                        shifts: Sequence[float], p: float,
                        n_max: int = DEFAULT_N_MAX_MIXED) -> np.ndarray:
    """Density-matrix counterpart of :func:`shifted_probs_pure`."""
    if not 0.0 <= p <= 1.0:
        raise SimulationError(f"depolarizing probability must lie in [0, 1], got {p}")
    n = structure.n_qubits
    if n > n_max:
        raise SimulationError(f"density matrices are capped at {n_max} qubits, got {n}")
    angles = _check_angles(structure, angles)
    B, G = angles.shape
    dim = 2**n
    positions = list(positions)
    want = set(positions)
    before = {}
    rho = np.zeros((B, dim, dim), dtype=complex)
    rho[:, 0, 0] = 1.0
    for k in range(G):
        if k in want:
            before[k] = rho
        rho = _conjugate_by_gate(rho, n, structure.kinds[k], structure.targets[k],
                                 structure.controls[k], angles[:, k])
        for q in structure.gate_qubits(k):
            rho = _depolarize(rho, n, q, p)
    base = rho[:, 0, 0].real.copy()
    # effect operator seen right after gate k's unitary, before its channels
    eff = np.zeros((B, dim, dim), dtype=complex)
    eff[:, 0, 0] = 1.0
    after = {}
    for k in range(G - 1, -1, -1):
        for q in structure.gate_qubits(k):
            eff = _depolarize(eff, n, q, p)
        if k in want:
            after[k] = eff
        eff = _conjugate_by_gate(eff, n, structure.kinds[k], structure.targets[k],
                                 structure.controls[k], -angles[:, k])
    out = np.empty((B, len(positions), len(shifts)))
    for j, k in enumerate(positions):
        kind = structure.kinds[k]
        if kind == "CNOT":
            raise SimulationError(f"gate {k} is a CNOT and cannot be shifted")
        for s_idx, s in enumerate(shifts):
            moved = _conjugate_by_gate(before[k], n, kind, structure.targets[k], -1,
                                       angles[:, k] + s)
            # Tr(E rho) with both Hermitian
            out[:, j, s_idx] = np.einsum("bij,bji->b", after[k], moved).real
    return base, out
