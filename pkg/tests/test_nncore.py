import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medentropy import nncore as nn
from medentropy.nncore import (
    AdamHyper, Matrix, NonFiniteError, Parameter, ShapeError, Tape,
    accumulate_grad, adam_step, backward, grad_check,
)


def fd_check(build_loss, params, h=1e-5):
    return grad_check(build_loss, params, h=h)


class TestMatrix:
    def test_rejects_nan(self):
        with pytest.raises(NonFiniteError):
            Matrix([[1.0, float("nan")]])

    def test_rejects_inf(self):
        with pytest.raises(NonFiniteError):
            Matrix([[float("inf")]])

    def test_rejects_non_2d(self):
        with pytest.raises(ShapeError):
            Matrix([1.0, 2.0])


class TestMatmul:
    def test_identity(self):
        x = Matrix([[3.0, -1.0], [2.0, 5.0]])
        eye = Matrix(np.eye(2))
        assert np.array_equal(nn.matmul(eye, x).value, x.value)

    def test_hand_arithmetic(self):
        out = nn.matmul(Matrix([[1.0, 2.0]]), Matrix([[3.0], [4.0]]))
        assert out.value.tolist() == [[11.0]]

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\) x \(2, 3\)"):
            nn.matmul(Matrix(np.ones((2, 3))), Matrix(np.ones((2, 3))))

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(0)
        a = Parameter("a", rng.normal(size=(3, 4)))
        b = Parameter("b", rng.normal(size=(4, 2)))
        ones_l = Matrix(np.ones((1, 3)))
        ones_r = Matrix(np.ones((2, 1)))

        def loss():
            prod = nn.matmul(a.mat, b.mat)
            return nn.matmul(nn.matmul(ones_l, prod), ones_r)

        assert fd_check(loss, [a, b]) < 1e-8


class TestSoftmax:
    def test_symmetry(self):
        out = nn.softmax_row(Matrix([[0.0, 0.0]]))
        assert out.value.tolist() == [[0.5, 0.5]]

    def test_shift_invariance(self):
        for c in (-7.0, 0.0, 123.0):
            out = nn.softmax_row(Matrix([[c, c, c]]))
            assert out.value[0] == pytest.approx([1 / 3] * 3, abs=1e-15)

    def test_extreme_logits_do_not_overflow(self):
        out = nn.softmax_row(Matrix([[1000.0, 0.0]]))
        assert out.value[0, 0] == pytest.approx(1.0)
        assert out.value[0, 1] == pytest.approx(0.0, abs=1e-300)

    def test_empty_row_errors(self):
        with pytest.raises(ShapeError):
            nn.softmax_row(Matrix(np.zeros((1, 0))))

    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_output_is_distribution(self, logits):
        out = nn.softmax_row(Matrix([logits])).value[0]
        assert abs(out.sum() - 1.0) <= 1e-12
        assert (out >= 0).all() and (out <= 1).all()


class TestCrossEntropy:
    def test_one_hot_loss_near_zero(self):
        dist = Matrix([[0.0, 1.0, 0.0]])
        assert nn.cross_entropy(dist, 1).value[0, 0] == pytest.approx(0.0, abs=1e-10)

    def test_uniform_loss_is_log_k(self):
        k = 7
        dist = Matrix(np.full((1, k), 1 / k))
        assert nn.cross_entropy(dist, 3).value[0, 0] == pytest.approx(math.log(k))

    def test_out_of_range_target_errors(self):
        with pytest.raises(ShapeError):
            nn.cross_entropy(Matrix([[0.5, 0.5]]), 2)

    def test_logit_gradient_is_softmax_minus_onehot(self):
        rng = np.random.default_rng(3)
        logits = Parameter("z", rng.normal(size=(1, 6)))
        target = 2

        def loss():
            return nn.cross_entropy(nn.softmax_row(logits.mat), target)

        with Tape() as tape:
            out = loss()
        backward(tape, out)
        s = nn.softmax_row(logits.mat).value[0]
        expected = s.copy()
        expected[target] -= 1.0
        assert logits.grad[0] == pytest.approx(expected, rel=1e-9, abs=1e-12)
        logits.mat.grad[...] = 0.0
        assert fd_check(loss, [logits]) < 1e-8


class TestBackward:
    def test_square_function(self):
        w = Parameter("w", [[3.0]])
        with Tape() as tape:
            loss = nn.mul(w.mat, w.mat)
        backward(tape, loss)
        assert w.grad[0, 0] == 6.0

    def test_parameter_used_twice_accumulates(self):
        w = Parameter("w", [[4.0]])
        with Tape() as tape:
            loss = nn.add(w.mat, w.mat)
        backward(tape, loss)
        assert w.grad[0, 0] == 2.0

    def test_non_scalar_loss_errors(self):
        w = Parameter("w", [[1.0, 2.0]])
        with Tape() as tape:
            out = nn.affine(w.mat, 2.0, 0.0)
        with pytest.raises(ShapeError):
            backward(tape, out)

    def test_gru_style_cell_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        x = Matrix(rng.normal(size=(1, 3)))
        h0 = Matrix(rng.normal(size=(1, 4)))
        names = ["Wr", "Ur", "br", "Wz", "Uz", "bz", "Wn", "Un", "bn"]
        shapes = {"W": (3, 4), "U": (4, 4), "b": (1, 4)}
        params = [Parameter(n, rng.normal(size=shapes[n[0]]) * 0.5) for n in names]
        p = {q.name: q.mat for q in params}
        ones = Matrix(np.ones((4, 1)))

        def loss():
            r = nn.sigmoid(nn.add(nn.add(nn.matmul(x, p["Wr"]), nn.matmul(h0, p["Ur"])), p["br"]))
            z = nn.sigmoid(nn.add(nn.add(nn.matmul(x, p["Wz"]), nn.matmul(h0, p["Uz"])), p["bz"]))
            n_ = nn.tanh(nn.add(nn.add(nn.matmul(x, p["Wn"]),
                                       nn.mul(r, nn.matmul(h0, p["Un"]))), p["bn"]))
            h1 = nn.add(n_, nn.mul(z, nn.sub(h0, n_)))
            return nn.matmul(h1, ones)

        assert fd_check(loss, params) < 1e-6

    def test_tape_replay_determinism(self):
        rng = np.random.default_rng(9)
        w = Parameter("w", rng.normal(size=(3, 3)))
        x = Matrix(rng.normal(size=(1, 3)))
        ones = Matrix(np.ones((3, 1)))

        def run():
            return nn.matmul(nn.tanh(nn.matmul(x, w.mat)), ones).value[0, 0]

        assert run() == run()


class TestAdam:
    def test_first_step_moves_by_learning_rate(self):
        p = Parameter("w", [[1.0]])
        p.mat.grad[...] = 1.0
        adam_step([p], AdamHyper(learning_rate=1e-3))
        # bias-corrected first step: lr * g / (|g| + eps)
        assert p.value[0, 0] == pytest.approx(1.0 - 1e-3, rel=1e-6)

    def test_zero_gradient_is_identity(self):
        p = Parameter("w", [[2.5, -1.0]])
        before = p.value.copy()
        adam_step([p], AdamHyper())
        assert np.array_equal(p.value, before)

    def test_gradients_zeroed_and_step_counted(self):
        p = Parameter("w", [[1.0]])
        p.mat.grad[...] = 0.7
        adam_step([p], AdamHyper())
        assert p.grad[0, 0] == 0.0
        assert p.step == 1

    def test_determinism_across_runs(self):
        def run():
            rng = np.random.default_rng(11)
            p = Parameter("w", rng.normal(size=(2, 2)))
            hyper = AdamHyper(learning_rate=5e-3)
            for _ in range(10):
                p.mat.grad[...] = np.sin(p.value)
                adam_step([p], hyper)
            return p.value.copy()

        assert np.array_equal(run(), run())

    def test_invalid_hyper_rejected(self):
        with pytest.raises(ValueError):
            AdamHyper(learning_rate=0.0)
        with pytest.raises(ValueError):
            AdamHyper(beta1=1.0)


class TestGradCheck:
    def test_linear_model_is_nearly_exact(self):
        rng = np.random.default_rng(2)
        w = Parameter("w", rng.normal(size=(4, 1)))
        x = Matrix(rng.normal(size=(1, 4)))

        def loss():
            return nn.matmul(x, w.mat)

        assert grad_check(loss, [w]) < 1e-10

    def test_corrupted_backward_is_detected(self):
        """Negative control: a wrong backward rule must trip the checker."""
        w = Parameter("w", [[1.5]])

        def bad_double(a):
            out = Matrix(a.value * 2.0)
            nn._record(lambda: accumulate_grad(a, out.grad * 2.5))  # wrong rule
            return out

        def loss():
            return bad_double(w.mat)

        assert grad_check(loss, [w]) > 1e-2

    def test_subsampling_caps_work(self):
        rng = np.random.default_rng(4)
        w = Parameter("w", rng.normal(size=(30, 30)))
        ones_l = Matrix(np.ones((1, 30)))
        ones_r = Matrix(np.ones((30, 1)))

        def loss():
            return nn.matmul(nn.matmul(ones_l, nn.tanh(w.mat)), ones_r)

        assert grad_check(loss, [w], max_samples=200) < 1e-8

    def test_non_finite_loss_errors(self):
        w = Parameter("w", [[1e308]])

        def loss():
            return nn.matmul(w.mat, w.mat)

        with np.errstate(over="ignore"), pytest.raises(NonFiniteError):
            grad_check(loss, [w])


class TestOps:
    def test_concat_cols(self):
        out = nn.concat_cols(Matrix([[1.0, 2.0]]), Matrix([[3.0]]))
        assert out.value.tolist() == [[1.0, 2.0, 3.0]]

    def test_stack_and_lookup_roundtrip(self):
        rows = [Matrix([[float(i), float(i + 1)]]) for i in range(3)]
        stacked = nn.stack_rows(rows)
        assert stacked.shape == (3, 2)
        looked = nn.row_lookup(stacked, 1)
        assert looked.value.tolist() == [[1.0, 2.0]]

    def test_composite_gradients_match_finite_differences(self):
        rng = np.random.default_rng(8)
        table = Parameter("emb", rng.normal(size=(5, 3)))
        w = Parameter("w", rng.normal(size=(6, 1)))

        def loss():
            a = nn.row_lookup(table.mat, 2)
            b = nn.row_lookup(table.mat, 4)
            cat = nn.concat_cols(nn.sub(a, b), nn.mul(a, b))
            return nn.matmul(nn.sigmoid(cat), w.mat)

        assert fd_check(loss, [table, w]) < 1e-7

    def test_transpose_gradient(self):
        rng = np.random.default_rng(6)
        w = Parameter("w", rng.normal(size=(2, 3)))
        left = Matrix(np.ones((1, 3)))
        right = Matrix(np.ones((2, 1)))

        def loss():
            return nn.matmul(nn.matmul(left, nn.transpose(w.mat)), right)

        assert fd_check(loss, [w]) < 1e-8
