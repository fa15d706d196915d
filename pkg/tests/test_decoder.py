"""GRU decoding: closed forms, iteration counting, gradients."""

import numpy as np
import pytest

from anticipation.data.protocol import ProtocolError
from anticipation.decoder import (
    AnticipationResult,
    ClassifierParams,
    GruCellParams,
    anticipate,
)
from anticipation.layers import Linear
from anticipation.numcore import Rng, Tensor, grad_check


def sigmoid(a):
    return 1.0 / (1.0 + np.exp(-a))


def gru_oracle(x, h, p: GruCellParams):
    z = sigmoid(x @ p.wz.data + h @ p.uz.data + p.bz.data)
    r = sigmoid(x @ p.wr.data + h @ p.ur.data + p.br.data)
    hbar = np.tanh(x @ p.wh.data + (r * h) @ p.uh.data + p.bh.data)
    return (1.0 - z) * h + z * hbar


class TestGruStep:
    def test_zero_parameters_halve_hidden(self):
        cell = GruCellParams.zeros(3, 4)
        h = np.random.default_rng(0).standard_normal((2, 4))
        out = cell.step(Tensor(np.zeros((2, 3))), Tensor(h))
        np.testing.assert_allclose(out.data, h / 2.0, atol=1e-15)

    def test_zero_hidden_is_fixed_point(self):
        cell = GruCellParams.zeros(3, 4)
        out = cell.step(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 4))))
        np.testing.assert_array_equal(out.data, np.zeros((2, 4)))

    def test_matches_gate_oracle(self):
        rng = np.random.default_rng(1)
        cell = GruCellParams.init(Rng(2), 3, 3)
        x = rng.standard_normal((4, 3))
        h = rng.standard_normal((4, 3))
        out = cell.step(Tensor(x), Tensor(h))
        np.testing.assert_allclose(out.data, gru_oracle(x, h, cell), atol=1e-12)

    def test_bounded_hidden_state(self):
        rng = np.random.default_rng(2)
        cell = GruCellParams.init(Rng(3), 3, 3)
        h = Tensor(rng.uniform(-5.0, 5.0, size=(4, 3)))
        x = Tensor(rng.standard_normal((4, 3)))
        bound = max(np.abs(h.data).max(), 1.0)
        for _ in range(20):
            h = cell.step(x, h)
            assert np.abs(h.data).max() <= bound + 1e-12


class TestAnticipate:
    def make(self, d=3, n_classes=4, seed=5):
        cell = GruCellParams.init(Rng(seed), d, d)
        clf = ClassifierParams.init(Rng(seed + 1), d, n_classes)
        return cell, clf

    def test_single_iteration_counter(self):
        cell, clf = self.make()
        before = cell.steps_taken
        res = anticipate(cell, clf, Tensor(np.zeros((1, 3))),
                         Tensor(np.zeros((1, 3))), n=1)
        assert res.steps_run == 1
        assert cell.steps_taken - before == 1

    def test_counter_for_every_horizon(self):
        for n in range(1, 9):
            cell, clf = self.make(seed=n)
            before = cell.steps_taken
            res = anticipate(cell, clf, Tensor(np.zeros((2, 3))),
                             Tensor(np.zeros((2, 3))), n=n)
            assert res.steps_run == n
            assert cell.steps_taken - before == n

    @pytest.mark.parametrize("n", [1, 3, 8])
    def test_zero_cell_closed_form(self, n):
        cell = GruCellParams.zeros(3, 3)
        clf = ClassifierParams(Linear(Tensor(np.zeros((3, 2))), Tensor(np.zeros(2))))
        v = np.random.default_rng(6).standard_normal((2, 3))
        res = anticipate(cell, clf, Tensor(v), Tensor(np.zeros((2, 3))), n=n)
        assert np.abs(res.hidden.data - v * 2.0 ** (-n)).max() < 1e-12

    def test_matches_unrolled_composition(self):
        rng = np.random.default_rng(7)
        cell, clf = self.make(seed=8)
        h = rng.standard_normal((2, 3))
        x = rng.standard_normal((2, 3))
        res = anticipate(cell, clf, Tensor(h), Tensor(x), n=8)
        manual = h.copy()
        for _ in range(8):
            manual = gru_oracle(x, manual, cell)
        np.testing.assert_allclose(res.hidden.data, manual, atol=1e-12)
        np.testing.assert_allclose(
            res.scores.data,
            manual @ clf.head.w.data + clf.head.b.data,
            atol=1e-12,
        )

    @pytest.mark.parametrize("n", [0, 9, -1])
    def test_out_of_range(self, n):
        cell, clf = self.make()
        with pytest.raises(ProtocolError):
            anticipate(cell, clf, Tensor(np.zeros((1, 3))),
                       Tensor(np.zeros((1, 3))), n=n)


@pytest.mark.parametrize("n", [1, 8])
def test_gradients_flow_through_all_iterations(n):
    rng = np.random.default_rng(9)
    cell = GruCellParams.init(Rng(10), 3, 3)
    clf = ClassifierParams.init(Rng(11), 3, 2)
    h0 = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    w = Tensor(rng.standard_normal((2, 2)))

    def f():
        return (anticipate(cell, clf, h0, x, n=n).scores * w).sum()

    leaves = {"h0": h0, "x": x}
    leaves.update(cell.params("cell"))
    leaves.update(clf.params("clf"))
    report = grad_check(f, leaves)
    assert report.passed, str(report)
    # every leaf actually received gradient signal
    f().backward()
    assert all(leaf.grad is not None for leaf in leaves.values())
