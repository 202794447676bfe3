import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nystrom_qek.ansatz import (
    AnsatzError,
    AnsatzLayout,
    AnsatzParams,
    adjoint_circuit,
    build_circuit,
    init_params,
    ring_pairs,
)
from nystrom_qek.noise import simulate


def test_smallest_instance_layout():
    params = AnsatzParams([[0.7]], [[[0.1, 0.2]]])
    c = build_circuit([0.5, -0.3], params)
    assert [(g.kind, g.target) for g in c.gates] == [("RY", 0), ("RY", 0), ("RZ", 0)]
    assert [g.angle for g in c.gates] == pytest.approx([0.35, 0.1, 0.2])
    assert c.param_sites == {0: [(0, 0.5)], 1: [(1, 1.0)], 2: [(2, 1.0)]}


@pytest.mark.parametrize("L,n,expected", [(5, 4, 80), (1, 1, 3), (3, 2, 21), (2, 3, 24)])
def test_gate_count(L, n, expected):
    c = build_circuit([0.1, 0.2], init_params(L, n, 0))
    assert len(c.gates) == expected == L * (3 * n + len(ring_pairs(n)))


def test_ring_layout():
    assert ring_pairs(1) == []
    assert ring_pairs(2) == [(0, 1)]
    assert ring_pairs(4) == [(0, 1), (1, 2), (2, 3), (3, 0)]
    c = build_circuit([0.1, 0.2], init_params(1, 4, 0))
    assert [(g.control, g.target) for g in c.gates if g.kind == "CNOT"] == ring_pairs(4)


def test_encoding_uses_features_cyclically():
    params = init_params(2, 4, 3)
    x = np.array([0.3, -0.8])
    c = build_circuit(x, params)
    for l in range(2):
        for q in range(4):
            g = c.gates[l * 16 + q]
            assert g.kind == "RY" and g.target == q
            assert g.angle == params.lam[l, q] * x[q % 2]


def test_every_shiftable_gate_in_exactly_one_site():
    c = build_circuit([0.4, 0.9], init_params(3, 4, 1))
    positions = [pos for sites in c.param_sites.values() for pos, _ in sites]
    shiftable = [k for k, g in enumerate(c.gates) if g.shiftable]
    assert sorted(positions) == shiftable
    assert len(positions) == len(set(positions))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=2),
       st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_exactly_Ln_angles_depend_on_x(x1, x2):
    params = init_params(5, 4, 0)
    a = np.array([g.angle for g in build_circuit(x1, params).gates])
    b = np.array([g.angle for g in build_circuit(x2, params).gates])
    layout = AnsatzLayout(5, 4, 2)
    assert layout.is_encoding.sum() == 20
    np.testing.assert_array_equal(a[~layout.is_encoding], b[~layout.is_encoding])
    if x1[0] != x2[0] and x1[1] != x2[1]:
        assert np.all(a[layout.is_encoding] != b[layout.is_encoding])


def test_encoding_angle_linear_in_lambda():
    params = init_params(2, 2, 0)
    params.lam = np.array([[0.5, 2.0], [-1.0, 3.0]])
    x = np.array([0.25, -0.5])
    c = build_circuit(x, params)
    layout = AnsatzLayout(2, 2, 2)
    for k in np.flatnonzero(layout.is_encoding):
        p = layout.param_index[k]
        assert c.gates[k].angle == params.flat()[p] * x[layout.feature_index[k]]


def test_zero_lambda_makes_kernel_constant(rng):
    params = init_params(3, 4, rng)
    params.lam[:] = 0
    for _ in range(5):
        x, y = rng.uniform(-1, 1, (2, 2))
        k = simulate(build_circuit(x, params) + adjoint_circuit(build_circuit(y, params)))
        assert k == pytest.approx(1.0, abs=1e-12)


def test_adjoint_single_rotation():
    c = build_circuit([0.5], AnsatzParams([[1.0]], [[[0.0, 0.0]]]))
    a = adjoint_circuit(c)
    assert a.gates[-1].kind == "RY" and a.gates[-1].angle == -0.5


def test_adjoint_involution_and_sites():
    c = build_circuit([0.3, 0.6], init_params(2, 4, 5))
    a = adjoint_circuit(c)
    G = len(c.gates)
    for k, sites in c.param_sites.items():
        assert a.param_sites[k] == sorted((G - 1 - pos, -f) for pos, f in sites)
    aa = adjoint_circuit(a)
    assert aa.gates == c.gates
    assert {k: sorted(v) for k, v in aa.param_sites.items()} == \
        {k: sorted(v) for k, v in c.param_sites.items()}


def test_circuit_then_adjoint_is_identity(rng):
    for _ in range(5):
        c = build_circuit(rng.uniform(-1, 1, 2), init_params(5, 4, rng))
        assert simulate(c + adjoint_circuit(c)) == pytest.approx(1.0, abs=1e-9)


class TestParams:
    def test_init(self):
        p = init_params(5, 4, 0)
        assert np.all(p.lam == 1)
        assert p.theta.shape == (5, 4, 2)
        assert np.all((p.theta >= -np.pi) & (p.theta < np.pi))

    def test_flat_round_trip(self):
        p = init_params(3, 2, 0)
        q = AnsatzParams.from_flat(p.flat(), 3, 2)
        np.testing.assert_array_equal(q.lam, p.lam)
        np.testing.assert_array_equal(q.theta, p.theta)
        assert p.size == 18
        assert AnsatzParams.from_dict(p.to_dict()).flat().tolist() == p.flat().tolist()

    def test_validation(self):
        with pytest.raises(AnsatzError, match="shape"):
            AnsatzParams(np.ones((2, 3)), np.zeros((2, 3, 3)))
        with pytest.raises(AnsatzError, match="finite"):
            AnsatzParams([[np.nan]], [[[0, 0]]])
        with pytest.raises(AnsatzError):
            AnsatzParams.from_flat(np.zeros(5), 1, 2)

    def test_bad_inputs(self):
        p = init_params(1, 2, 0)
        with pytest.raises(AnsatzError, match="empty"):
            build_circuit([], p)
        with pytest.raises(AnsatzError, match="non-finite"):
            build_circuit([0.1, np.inf], p)


def test_layout_angles_match_build_circuit(rng):
    params = init_params(5, 4, rng)
    X = rng.uniform(-1, 1, (6, 2))
    layout = AnsatzLayout(5, 4, 2)
    A = layout.angles(X, params)
    for i in range(6):
        assert A[i].tolist() == [g.angle for g in build_circuit(X[i], params).gates]
    with pytest.raises(AnsatzError):
        layout.angles(X, init_params(4, 4, 0))
