"""Tensor arithmetic, autodiff and RNG determinism."""

import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anticipation.numcore import (
    GradCheckError,
    Rng,
    ShapeError,
    Tensor,
    concat,
    grad_check,
    gru_cell,
    kernels,
    layernorm,
    no_grad,
    softmax,
    take_along_last,
    take_rows,
)


def triple_loop_matmul(a, b):
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a[i, p] * b[p, j]
    return out


class TestMatmul:
    def test_identity(self):
        b = np.arange(9.0).reshape(3, 3)
        out = Tensor(np.eye(3)) @ Tensor(b)
        np.testing.assert_array_equal(out.data, b)

    def test_zero_annihilator(self):
        out = Tensor([[1.0, 2.0], [3.0, 4.0]]) @ Tensor([[0.0], [0.0]])
        np.testing.assert_array_equal(out.data, [[0.0], [0.0]])

    def test_against_triple_loop(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        out = (Tensor(a) @ Tensor(b)).data
        assert np.abs(out - triple_loop_matmul(a, b)).max() < 1e-12

    @pytest.mark.parametrize("seed", range(20))
    def test_triple_loop_random_shapes(self, seed):
        rng = np.random.default_rng(seed)
        m, k, n = rng.integers(1, 17, size=3)
        a = rng.standard_normal((m, k))
        b = rng.standard_normal((k, n))
        out = (Tensor(a) @ Tensor(b)).data
        assert np.abs(out - triple_loop_matmul(a, b)).max() < 1e-12

    def test_shape_error_reports_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            Tensor(np.zeros((2, 3))) @ Tensor(np.zeros((2, 3)))

    def test_gradient_flows_to_both_inputs(self):
        rng = np.random.default_rng(1)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 2)))
        report = grad_check(lambda: ((a @ b) * w).sum(), {"a": a, "b": b})
        assert report.passed, str(report)

    def test_batched_gradients(self):
        rng = np.random.default_rng(2)
        a = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((2, 3, 5)))
        report = grad_check(lambda: ((a @ b) * w).sum(), {"a": a, "b": b})
        assert report.passed, str(report)


class TestSoftmax:
    def test_equal_logits(self, kernel_backend):
        out = softmax(Tensor([[7.0, 7.0, 7.0, 7.0]]))
        np.testing.assert_allclose(out.data, 0.25, atol=1e-15)

    def test_single_element(self, kernel_backend):
        out = softmax(Tensor([[3.5]]))
        np.testing.assert_allclose(out.data, [[1.0]])

    def test_huge_logits_stabilized(self, kernel_backend):
        out = softmax(Tensor([[1000.0, 1000.0]]))
        assert np.isfinite(out.data).all()
        np.testing.assert_allclose(out.data, [[0.5, 0.5]])

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 6),
        st.integers(1, 6),
        st.floats(-100.0, 100.0),
        st.integers(0, 2**31 - 1),
    )
    def test_rows_sum_to_one(self, rows, cols, scale, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((rows, cols)) * scale
        out = softmax(Tensor(x))
        np.testing.assert_allclose(out.data.sum(axis=1), 1.0, atol=1e-6)
        assert (out.data >= 0).all()

    def test_axis_argument(self, kernel_backend):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((4, 5))
        by_rows = softmax(Tensor(x), axis=0).data
        np.testing.assert_allclose(by_rows.sum(axis=0), 1.0, atol=1e-12)
        np.testing.assert_allclose(by_rows, softmax(Tensor(x.T)).data.T, atol=1e-15)

    def test_gradient(self, kernel_backend):
        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
        w = Tensor(rng.standard_normal((3, 5)))
        report = grad_check(lambda: (softmax(x) * w).sum(), {"x": x})
        assert report.passed, str(report)


class TestLayernorm:
    def unit_affine(self, d):
        return Tensor(np.ones(d)), Tensor(np.zeros(d))

    def test_constant_slice_is_zero(self, kernel_backend):
        g, b = self.unit_affine(4)
        out = layernorm(Tensor([[5.0, 5.0, 5.0, 5.0]]), g, b)
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_two_point_slice_closed_form(self, kernel_backend):
        # mean 0, variance 1; epsilon (1e-5) sits inside the square root
        g, b = self.unit_affine(2)
        out = layernorm(Tensor([[-1.0, 1.0]]), g, b)
        expected = np.array([[-1.0, 1.0]]) / np.sqrt(1.0 + 1e-5)
        np.testing.assert_allclose(out.data, expected, atol=1e-15)

    def test_zero_gain_yields_bias(self, kernel_backend):
        rng = np.random.default_rng(5)
        x = Tensor(rng.standard_normal((3, 4)))
        bias = rng.standard_normal(4)
        out = layernorm(x, Tensor(np.zeros(4)), Tensor(bias))
        np.testing.assert_allclose(out.data, np.broadcast_to(bias, (3, 4)))

    def test_normalizes_mean_and_variance(self, kernel_backend):
        rng = np.random.default_rng(6)
        x = Tensor(rng.standard_normal((8, 16)) * 3 + 2)
        out = layernorm(x, *self.unit_affine(16)).data
        np.testing.assert_allclose(out.mean(axis=1), 0.0, atol=1e-5)
        np.testing.assert_allclose(out.var(axis=1), 1.0, atol=1e-4)

    def test_gradient(self, kernel_backend):
        rng = np.random.default_rng(7)
        x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        g = Tensor(rng.standard_normal(6), requires_grad=True)
        b = Tensor(rng.standard_normal(6), requires_grad=True)
        w = Tensor(rng.standard_normal((4, 6)))
        report = grad_check(
            lambda: (layernorm(x, g, b) * w).sum(), {"x": x, "g": g, "b": b}
        )
        assert report.passed, str(report)


class TestGradCheck:
    def test_constant_function(self):
        x = Tensor(np.ones(3), requires_grad=True)
        report = grad_check(lambda: Tensor(np.array(4.0)) + 0.0 * x.sum(), {"x": x})
        assert report.passed
        assert report.max_error == 0.0

    def test_quadratic_closed_form(self):
        rng = np.random.default_rng(8)
        x = Tensor(rng.standard_normal(5), requires_grad=True)
        report = grad_check(lambda: (x * x).sum(), {"x": x}, tol=1e-6)
        assert report.passed, str(report)
        x.zero_grad()
        (x * x).sum().backward()
        np.testing.assert_allclose(x.grad, 2 * x.data, atol=1e-12)

    @pytest.mark.filterwarnings("ignore:invalid value encountered in log")
    def test_nonfinite_names_parameter(self):
        x = Tensor(np.array([1.0 - 1e-6]), requires_grad=True)
        with pytest.raises(GradCheckError, match="'x'"):
            grad_check(lambda: (1.0 - x).log().sum(), {"x": x})


def _elementwise_cases(rng):
    x = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    y = Tensor(rng.standard_normal((3, 4)) + 3.0, requires_grad=True)
    pos = Tensor(np.abs(rng.standard_normal((3, 4))) + 0.5, requires_grad=True)
    v = Tensor(rng.standard_normal(4), requires_grad=True)
    mask = rng.standard_normal((3, 4)) > 0
    idx = rng.integers(0, 4, size=3)
    rows = rng.integers(0, 3, size=5)
    return {
        "add_broadcast": (lambda: (x + v).sum(), {"x": x, "v": v}),
        "sub": (lambda: (x - y).sum(), {"x": x, "y": y}),
        "mul": (lambda: (x * y).sum(), {"x": x, "y": y}),
        "div": (lambda: (x / y).sum(), {"x": x, "y": y}),
        "neg": (lambda: (-x).sum(), {"x": x}),
        "mean_axis": (lambda: x.mean(axis=1).sum(), {"x": x}),
        "reshape": (lambda: (x.reshape(2, 6) * x.reshape(2, 6)).sum(), {"x": x}),
        "transpose": (lambda: (x.transpose((1, 0)) * v.reshape(4, 1)).sum(), {"x": x, "v": v}),
        "getitem": (lambda: (x[1:, :2] * x[1:, :2]).sum(), {"x": x}),
        "broadcast": (lambda: (v.reshape(1, 4).broadcast_to((3, 4)) * x).sum(), {"x": x, "v": v}),
        "concat": (lambda: (concat([x, y], axis=1) * concat([y, x], axis=1)).sum(), {"x": x, "y": y}),
        "relu": (lambda: (x.relu() * y).sum(), {"x": x}),
        "tanh": (lambda: x.tanh().sum(), {"x": x}),
        "sigmoid": (lambda: x.sigmoid().sum(), {"x": x}),
        "log": (lambda: pos.log().sum(), {"pos": pos}),
        "sqrt": (lambda: pos.sqrt().sum(), {"pos": pos}),
        "clip_min": (lambda: pos.clip_min(1.0).sum(), {"pos": pos}),
        "masked_fill": (lambda: (x.masked_fill(mask, -2.0) * y).sum(), {"x": x}),
        "take_along_last": (lambda: take_along_last(x, idx).sum(), {"x": x}),
        "take_rows": (lambda: (take_rows(x, rows) * take_rows(y, rows)).sum(), {"x": x, "y": y}),
    }


@pytest.mark.parametrize("seed", range(20))
def test_every_op_passes_grad_check(seed):
    rng = np.random.default_rng(100 + seed)
    for name, (f, params) in _elementwise_cases(rng).items():
        report = grad_check(f, params)
        assert report.passed, f"{name} (seed {seed}): {report}"


@pytest.mark.parametrize("seed", range(5))
def test_gru_cell_gradcheck(seed, kernel_backend):
    rng = np.random.default_rng(200 + seed)
    d_in, d_h, b = 4, 3, 2
    x = Tensor(rng.standard_normal((b, d_in)), requires_grad=True)
    h = Tensor(rng.standard_normal((b, d_h)), requires_grad=True)
    names = ("wz", "uz", "bz", "wr", "ur", "br", "wh", "uh", "bh")
    shapes = [
        (d_in, d_h), (d_h, d_h), (d_h,),
        (d_in, d_h), (d_h, d_h), (d_h,),
        (d_in, d_h), (d_h, d_h), (d_h,),
    ]
    params = {
        n: Tensor(rng.standard_normal(s), requires_grad=True)
        for n, s in zip(names, shapes)
    }
    w = Tensor(rng.standard_normal((b, d_h)))

    def f():
        return (gru_cell(x, h, *[params[n] for n in names]) * w).sum()

    report = grad_check(f, {"x": x, "h": h, **params})
    assert report.passed, str(report)


class TestBackends:
    def test_parity_across_backends(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(9)
        x = np.ascontiguousarray(rng.standard_normal((6, 5)))
        gain = rng.standard_normal(5)
        bias = rng.standard_normal(5)
        results = {}
        for name in kernels.available_backends():
            kernels.use_backend(name)
            sm = kernels.softmax_fwd(x)
            ln = kernels.layernorm_fwd(x, gain, bias, 1e-5)[0]
            results[name] = (sm, ln)
        kernels.use_backend("compiled" if "compiled" in kernels.available_backends() else "python")
        a, b = results["python"], results["compiled"]
        np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-15)

    def test_unknown_backend_rejected(self):
        with pytest.raises(kernels.KernelBackendError, match="unknown"):
            kernels.use_backend("fortran")


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(42).normal((4, 4))
        b = Rng(42).normal((4, 4))
        np.testing.assert_array_equal(a, b)

    def test_children_are_independent_and_stable(self):
        root = Rng(7)
        a = root.child("alpha").normal((8,))
        b = root.child("beta").normal((8,))
        assert np.abs(a - b).max() > 1e-9
        np.testing.assert_array_equal(a, Rng(7).child("alpha").normal((8,)))

    def test_bit_identical_across_processes(self):
        snippet = (
            "from anticipation.numcore import Rng; "
            "print(Rng(123).normal((64,)).tobytes().hex())"
        )
        runs = [
            subprocess.run(
                [sys.executable, "-c", snippet], capture_output=True, text=True
            ).stdout
            for _ in range(2)
        ]
        assert runs[0] == runs[1] and len(runs[0].strip()) == 64 * 16


class TestTape:
    def test_no_grad_suppresses_tape(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            out = (x * 2.0).sum()
        assert out._backward is None and not out.requires_grad

    def test_reused_node_accumulates(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        y = x * x  # x appears twice as a parent
        y.backward()
        np.testing.assert_allclose(x.grad, [6.0])

    def test_backward_requires_scalar(self):
        x = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError, match="scalar"):
            (x * 1.0).backward()
