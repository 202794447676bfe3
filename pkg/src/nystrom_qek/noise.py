"""Coherent over-rotation and depolarizing noise as circuit transformations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .ansatz import CircuitSpec
from .simulator import (
    MixedState,
    PureState,
    apply_depolarizing,
    apply_gate,
    apply_gate_mixed,
    prob_all_zeros,
)

NOISE_KINDS = ("none", "coherent", "depolarizing")


class NoiseError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseConfig:
    """Noise model for kernel evaluations.

    Only the field belonging to ``kind`` is read: ``sigma`` (radians) for
    coherent noise, ``p`` for depolarizing noise. ``seed`` identifies the
    random stream used for coherent draws.
    """

    kind: str = "none"
    sigma: float = 0.0
    p: float = 0.0
    seed: int = 0
    perturb_encoding: bool = False

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise NoiseError(f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}")
        if self.kind == "coherent" and not self.sigma >= 0:
            raise NoiseError(f"sigma must be non-negative, got {self.sigma}")
        if self.kind == "depolarizing" and not 0.0 <= self.p <= 1.0:
            raise NoiseError(f"p must lie in [0, 1], got {self.p}")

    @property
    def level(self) -> float:
        return {"none": 0.0, "coherent": self.sigma, "depolarizing": self.p}[self.kind]

    @property
    def needs_density_matrix(self) -> bool:
        return self.kind == "depolarizing" and self.p > 0

    @property
    def is_stochastic(self) -> bool:
        return self.kind == "coherent" and self.sigma > 0

    @classmethod
    def from_level(cls, kind: str, level: float, seed: int = 0, **kw) -> "NoiseConfig":
        if kind == "coherent":
            return cls(kind, sigma=level, seed=seed, **kw)
        if kind == "depolarizing":
            return cls(kind, p=level, seed=seed, **kw)
        return cls("none", seed=seed, **kw)


NOISELESS = NoiseConfig()


def perturb_coherent(c: CircuitSpec, sigma: float, rng=None, n_lambda: int = 0,
                     perturb_encoding: bool = False) -> CircuitSpec:
    """Add Gaussian miscalibration to the variational parameters of ``c``.

    One draw ``delta ~ N(0, sigma**2)`` is taken per perturbed parameter and
    shifts that parameter at every site it drives, so a parameter that
    appears in both ``U(x)`` and ``U(y)^dagger`` is miscalibrated
    consistently. Parameters with index below ``n_lambda`` are input-scaling
    weights and are left alone unless ``perturb_encoding`` is set.
    """
    if sigma < 0:
        raise NoiseError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        return CircuitSpec(list(c.gates), dict(c.param_sites), c.n_qubits)
    rng = np.random.default_rng(rng)
    keys = sorted(k for k in c.param_sites if perturb_encoding or k >= n_lambda)
    deltas = rng.normal(0.0, sigma, size=len(keys))
    gates = list(c.gates)
    for k, d in zip(keys, deltas):
        for pos, factor in c.param_sites[k]:
            g = gates[pos]
            gates[pos] = type(g)(g.kind, g.target, g.control, g.angle + factor * d, g.shiftable)
    return CircuitSpec(gates, dict(c.param_sites), c.n_qubits)


@dataclass
class NoisyCircuit:
    circuit: CircuitSpec
    p: float
    # (gate position, qubit) for every channel, in application order
    channels: List[Tuple[int, int]] = field(default_factory=list)

    @property
    def requires_density_matrix(self) -> bool:
        return self.p > 0


def insert_depolarizing(c: CircuitSpec, p: float) -> NoisyCircuit:
    """Place a depolarizing channel on each qubit a gate touches, after the gate."""
    if not 0.0 <= p <= 1.0:
        raise NoiseError(f"p must lie in [0, 1], got {p}")
    channels = [(k, q) for k, g in enumerate(c.gates) for q in g.qubits]
    return NoisyCircuit(c, p, channels)


def simulate(circuit, n_qubits: Optional[int] = None) -> float:
    """Gate-by-gate evaluation of P(0...0) for a circuit or noisy circuit.

    This is the slow reference path; kernel matrices go through the batched
    engines in :mod:`nystrom_qek.simulator`.
    """
    if isinstance(circuit, NoisyCircuit):
        n = n_qubits or circuit.circuit.n_qubits
        if not circuit.requires_density_matrix:
            return simulate(circuit.circuit, n)
        state = MixedState.zeros(n)
        by_gate = {}
        for k, q in circuit.channels:
            by_gate.setdefault(k, []).append(q)
        for k, g in enumerate(circuit.circuit.gates):
            state = apply_gate_mixed(state, g)
            for q in by_gate.get(k, ()):
                state = apply_depolarizing(state, q, circuit.p)
        return prob_all_zeros(state)
    n = n_qubits or circuit.n_qubits
    state = PureState.zeros(n)
    for g in circuit.gates:
        state = apply_gate(state, g)
    return prob_all_zeros(state)
