import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import numeric_grad, rel_error
from ascd import tensor as T
from ascd.checkpoint import load_checkpoint, save_checkpoint
from ascd.tensor import Parameter, Tensor


class TestMatmul:
    def test_identity_left_factor(self):
        out = T.matmul(Tensor([[1, 0], [0, 1]]), Tensor([[3, 4], [5, 6]]))
        np.testing.assert_array_equal(out.data, [[3, 4], [5, 6]])

    def test_dot_product(self):
        np.testing.assert_array_equal(T.matmul(Tensor([[1, 2]]), Tensor([[3], [4]])).data, [[11]])

    def test_mismatch_names_both_shapes(self):
        with pytest.raises(T.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_sum_gradient_matches_finite_differences(self, rng):
        a = Parameter(rng.normal(size=(3, 4)))
        b = Parameter(rng.normal(size=(4, 2)))
        T.matmul(a, b).sum().backward()
        np.testing.assert_allclose(a.grad, np.ones((3, 2)) @ b.data.T, rtol=1e-12)
        fd = numeric_grad(lambda: float((a.data @ b.data).sum()), a.data)
        assert rel_error(a.grad, fd) < 1e-8

    def test_batched_weight_gradient_unbroadcasts(self, rng):
        x = Parameter(rng.normal(size=(2, 3, 4)))
        w = Parameter(rng.normal(size=(4, 5)))
        (T.matmul(x, w) * Tensor(rng.normal(size=(2, 3, 5)))).sum().backward()
        assert w.grad.shape == (4, 5)
        assert x.grad.shape == (2, 3, 4)


class TestSoftmaxMasked:
    def test_single_survivor(self):
        out = T.softmax_masked(Tensor([[0.0, 0.0]]), np.array([[False, True]]))
        np.testing.assert_array_equal(out.data, [[1.0, 0.0]])

    def test_uniform(self):
        out = T.softmax_masked(Tensor([[0.0, 0.0, 0.0]]), np.zeros((1, 3), bool))
        np.testing.assert_allclose(out.data, [[1 / 3] * 3], rtol=1e-15)

    def test_hand_computed(self):
        out = T.softmax_masked(Tensor([[0.7071, 0.0]]), np.zeros((1, 2), bool))
        np.testing.assert_allclose(out.data, [[0.6698, 0.3302]], atol=5e-5)

    def test_all_masked_row_is_zero(self):
        out = T.softmax_masked(Tensor([[5.0, 9.0]]), np.ones((1, 2), bool))
        np.testing.assert_array_equal(out.data, [[0.0, 0.0]])
        assert np.isfinite(out.data).all()

    def test_shape_mismatch(self):
        with pytest.raises(T.ShapeError):
            T.softmax_masked(Tensor(np.zeros((2, 3))), np.zeros((2, 2), bool))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_rows_sum_to_one_and_masked_are_exact_zero(self, seed):
        rng = np.random.default_rng(seed)
        q, k = rng.integers(1, 7, size=2)
        scores = rng.normal(scale=5, size=(q, k))
        mask = rng.random((q, k)) < 0.5
        out = T.softmax_masked(Tensor(scores), mask).data
        live = ~mask.all(axis=1)
        np.testing.assert_allclose(out[live].sum(axis=1), 1.0, atol=1e-12)
        assert (out[mask] == 0.0).all()
        assert (out[~live] == 0.0).all()


class TestLayerNorm:
    def test_two_point_row(self):
        out = T.layer_norm(Tensor([[1.0, 3.0]]), Tensor([1.0, 1.0]), Tensor([0.0, 0.0]), eps=1e-12)
        np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-10)

    def test_constant_row_collapses_to_bias(self):
        out = T.layer_norm(Tensor([[5.0, 5.0, 5.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_array_equal(out.data, [[0.0, 0.0, 0.0]])

    def test_gradient(self, rng):
        x = Parameter(rng.normal(size=(2, 8)))
        g = Parameter(rng.normal(size=8))
        b = Parameter(rng.normal(size=8))
        w = rng.normal(size=(2, 8))
        loss = lambda: (T.layer_norm(x, g, b) * Tensor(w)).sum()
        loss().backward()
        for p in (x, g, b):
            fd = numeric_grad(lambda: float(loss().data), p.data)
            assert rel_error(p.grad, fd) < 1e-6


class TestCrossEntropy:
    def test_uniform_logits(self):
        loss = T.cross_entropy(Tensor(np.zeros((1, 4))), [2])
        assert float(loss.data) == pytest.approx(np.log(4), abs=1e-12)
        assert float(loss.data) == pytest.approx(1.3863, abs=5e-5)

    def test_saturated_correct_logit(self):
        logits = np.zeros((1, 4))
        logits[0, 1] = 1e9
        assert float(T.cross_entropy(Tensor(logits), [1]).data) == pytest.approx(0.0, abs=1e-12)

    def test_uniform_gradient_is_softmax_minus_onehot(self):
        n, V = 3, 5
        x = Parameter(np.zeros((n, V)))
        targets = [0, 4, 2]
        T.cross_entropy(x, targets).backward()
        expected = (1 / V - np.eye(V)[targets]) / n
        np.testing.assert_allclose(x.grad, expected, atol=1e-15)

    def test_ignored_rows_get_zero_gradient(self, rng):
        x = Parameter(rng.normal(size=(4, 3)))
        T.cross_entropy(x, [1, 0, 0, 2], ignore_index=0).backward()
        assert (x.grad[1:3] == 0).all()
        assert (x.grad[[0, 3]] != 0).any()

    def test_all_ignored(self):
        x = Parameter(np.ones((2, 3)))
        loss = T.cross_entropy(x, [0, 0], ignore_index=0)
        loss.backward()
        assert float(loss.data) == 0.0
        assert (x.grad == 0).all()


class TestStructuralOps:
    def test_embedding_scatter_adds_repeats(self):
        table = Parameter(np.arange(12.0).reshape(4, 3))
        out = T.embedding(table, [2, 2, 0])
        np.testing.assert_array_equal(out.data[0], out.data[1])
        out.sum().backward()
        np.testing.assert_array_equal(table.grad[:, 0], [1, 0, 2, 0])

    def test_embedding_out_of_range_names_position(self):
        with pytest.raises(IndexError, match=r"position \(1,\)"):
            T.embedding(Tensor(np.zeros((3, 2))), [0, 7])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.integers(0, 1), st.integers(0, 2**31))
    def test_concat_then_slice_round_trip(self, sizes, axis, seed):
        rng = np.random.default_rng(seed)
        parts = []
        for n in sizes:
            shape = [3, 3]
            shape[axis] = n
            parts.append(Tensor(rng.normal(size=shape)))
        joined = T.concat(parts, axis=axis)
        start = 0
        for p in parts:
            stop = start + p.shape[axis]
            np.testing.assert_array_equal(T.slice_axis(joined, start, stop, axis).data, p.data)
            start = stop

    def test_determinism_bit_identical(self, rng):
        x = rng.normal(size=(5, 6))
        w = rng.normal(size=(6, 6))
        mask = rng.random((5, 6)) < 0.3

        def run():
            h = T.layer_norm(Tensor(x) @ Tensor(w), Tensor(np.ones(6)), Tensor(np.zeros(6)))
            return T.softmax_masked(h, mask).data

        assert run().tobytes() == run().tobytes()

    def test_no_grad_builds_no_graph(self):
        p = Parameter(np.ones(3))
        with T.no_grad():
            out = p * 2.0
        assert not out.requires_grad and out._parents == ()


# every exported differentiable op, random small inputs, >= 100 seeds


def _op_cases(rng):
    mask = rng.random((3, 4)) < 0.4
    w = rng.normal(size=(3, 4))
    w6 = Tensor(rng.normal(size=(3, 6)))
    return {
        "add": (lambda a, b: T.add(a, b), [(3, 4), (4,)]),
        "mul": (lambda a, b: T.mul(a, b), [(3, 4), (3, 1)]),
        "matmul": (lambda a, b: T.matmul(a, b), [(3, 2), (2, 4)]),
        "relu": (lambda a: T.relu(a), [(3, 4)]),
        "softmax_masked": (lambda a: T.softmax_masked(a, mask) * Tensor(w), [(3, 4)]),
        "layer_norm": (lambda a, g, b: T.layer_norm(a, g, b) * Tensor(w), [(3, 4), (4,), (4,)]),
        "cross_entropy": (lambda a: T.cross_entropy(a, [1, 0, 3], ignore_index=0), [(3, 4)]),
        "embedding": (lambda t: T.embedding(t, [0, 2, 2, 1]) * Tensor(w.T), [(3, 3)]),
        "concat": (lambda a, b: T.concat([a, b], axis=1) * w6, [(3, 4), (3, 2)]),
        "slice": (lambda a: T.slice_axis(a, 1, 3, axis=0), [(3, 4)]),
        "transpose": (lambda a: T.transpose(a, (1, 0)) * Tensor(w.T), [(3, 4)]),
        "reshape": (lambda a: T.reshape(a, (4, 3)) * Tensor(w.reshape(4, 3)), [(3, 4)]),
    }


@pytest.mark.parametrize(
    "op",
    ["add", "mul", "matmul", "relu", "softmax_masked", "layer_norm", "cross_entropy",
     "embedding", "concat", "slice", "transpose", "reshape"],
)
def test_op_gradients_match_finite_differences(op):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        fn, shapes = _op_cases(rng)[op]
        params = [Parameter(rng.normal(size=s)) for s in shapes]
        if op == "relu":
            # keep away from the kink
            params[0].data += np.sign(params[0].data) * 0.1
        loss = lambda: fn(*params).sum()
        loss().backward()
        for p in params:
            fd = numeric_grad(lambda: float(loss().data), p.data)
            worst = max(worst, rel_error(p.grad, fd))
    assert worst < 1e-4, f"{op}: worst relative error {worst}"


class TestCheckpoint:
    def test_bit_exact_round_trip(self, tmp_path, rng):
        tensors = {"a.w": rng.normal(size=(3, 4)), "b": np.array([np.pi, -0.0, 1e-300]), "s": np.array(2.5)}
        save_checkpoint(tmp_path / "x.ckpt", tensors, {"step": 7})
        loaded, meta = load_checkpoint(tmp_path / "x.ckpt")
        assert meta == {"step": 7}
        assert list(loaded) == list(tensors)
        for k in tensors:
            assert loaded[k].shape == np.shape(tensors[k])
            assert loaded[k].tobytes() == np.asarray(tensors[k], dtype="<f8").tobytes()

    def test_header_layout(self, tmp_path):
        import json
        import struct

        save_checkpoint(tmp_path / "y.ckpt", {"w": np.ones((2, 2)), "b": np.zeros(3)})
        raw = (tmp_path / "y.ckpt").read_bytes()
        (n,) = struct.unpack("<Q", raw[:8])
        header = json.loads(raw[8 : 8 + n])
        assert header == {"w": {"shape": [2, 2], "offset": 0}, "b": {"shape": [3], "offset": 32}}
        assert len(raw) == 8 + n + 7 * 8
