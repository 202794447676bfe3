import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.validation import check_is_fitted

from nystrom_qek import QuantumKernelSVC
from nystrom_qek.datasets import make_checkers
from nystrom_qek.estimator import seed_streams


@pytest.fixture(scope="module")
def data():
    return make_checkers(0)


def test_params_and_clone():
    est = QuantumKernelSVC(method="nystrom", n_landmarks=4, iterations=3)
    params = clone(est).get_params()
    assert params["method"] == "nystrom" and params["n_landmarks"] == 4
    assert params["iterations"] == 3 and params["random_state"] == 0


@pytest.mark.parametrize("method", ["standard", "nystrom"])
def test_fit_predict(data, method):
    est = QuantumKernelSVC(n_layers=2, n_qubits=2, iterations=3, method=method, n_landmarks=4)
    labels = np.where(data.train_y > 0, "a", "b")
    est.fit(data.train_x, labels)
    check_is_fitted(est)
    train_cost = 3 * 28 * (1 + 2 * 24) + (435 if method == "standard" else 6 + 4 * 26)
    assert est.ledger_.count == train_cost
    pred = est.predict(data.test_x)
    assert set(pred) <= {"a", "b"} and pred.shape == (30,)
    assert est.ledger_.count == train_cost + 30 * (30 if method == "standard" else 4)
    est.predict(data.test_x)
    assert est.ledger_.count == train_cost + 2 * 30 * (30 if method == "standard" else 4)


def test_deterministic(data):
    a = QuantumKernelSVC(n_layers=1, n_qubits=2, iterations=2).fit(data.train_x, data.train_y)
    b = QuantumKernelSVC(n_layers=1, n_qubits=2, iterations=2).fit(data.train_x, data.train_y)
    np.testing.assert_array_equal(a.decision_function(data.test_x), b.decision_function(data.test_x))


def test_rejects_multiclass():
    with pytest.raises(ValueError, match="binary"):
        QuantumKernelSVC(iterations=0).fit(np.zeros((3, 2)), [0, 1, 2])


def test_seed_streams_independent():
    a = [g.random() for g in seed_streams(0)]
    assert len(set(a)) == 5
    assert a == [g.random() for g in seed_streams(0)]
