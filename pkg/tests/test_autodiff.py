"""
Unit tests for the autodiff engine

Tests:
- Tensor: backward, tape visit counts, no_grad, broadcasting
- Functional ops: matmul, softmax, log_softmax, KL divergence
- Every differentiable primitive against central differences over 100 seeds
- grad_check: finite-difference oracle and its argument checks
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.autodiff import functional as F
from src.autodiff.gradcheck import MAGNITUDE_FLOOR, check_parameters, grad_check, relative_error
from src.autodiff.tensor import Tensor, no_grad, parameter, unbroadcast
from src.utils.errors import DimensionError, ValidationError


# ============================================================================
# FIXTURES
# ============================================================================


@pytest.fixture
def weights(rng):
    """Fixed projection so vector-valued ops can be checked as scalars."""
    return rng.normal(size=5)


finite = st.floats(min_value=-20.0, max_value=20.0, allow_nan=False, allow_infinity=False)


# ============================================================================
# TEST: Tensor
# ============================================================================


class TestTensor:
    """Test the Tensor class and its backward pass"""

    def test_backward_accumulates_shared_use(self):
        """x used twice gets both contributions: d(x² + x)/dx = 2x + 1"""
        x = parameter([3.0])
        y = (x * x + x).sum()

        y.backward()

        assert x.grad[0] == pytest.approx(7.0)

    def test_tape_visits_each_node_once(self):
        """Diamond-shaped graphs are still walked once per node"""
        x = parameter([0.5, -1.0])
        a = F.tanh(x)
        b = a * a + F.sigmoid(a)
        loss = (b * x).sum()

        tape = loss.backward()

        assert len(tape) == len(tape.visits)
        assert set(tape.visits.values()) == {1}

    def test_backward_needs_seed_for_non_scalar(self):
        """Non-scalar outputs require an explicit seed gradient"""
        x = parameter([1.0, 2.0])
        with pytest.raises(ValidationError):
            (x * 2.0).backward()

    def test_backward_rejects_constant(self):
        """Nothing to differentiate"""
        with pytest.raises(ValidationError):
            Tensor([1.0]).backward()

    def test_no_grad_disables_recording(self):
        """Results computed under no_grad are constants"""
        x = parameter([1.0, 2.0])
        with no_grad():
            y = x * x
        assert not y.requires_grad
        assert y.is_leaf

    def test_zero_grad(self):
        x = parameter([1.0])
        (x * 2.0).sum().backward()
        x.zero_grad()
        assert x.grad is None

    def test_broadcast_add_gradient(self):
        """Bias broadcast over rows receives the row-summed gradient"""
        x = parameter(np.ones((4, 3)))
        b = parameter(np.zeros(3))

        (x + b).sum().backward()

        np.testing.assert_allclose(b.grad, [4.0, 4.0, 4.0])
        np.testing.assert_allclose(x.grad, np.ones((4, 3)))

    def test_unbroadcast_shapes(self):
        grad = np.ones((2, 3))
        np.testing.assert_allclose(unbroadcast(grad, (3,)), [2.0, 2.0, 2.0])
        np.testing.assert_allclose(unbroadcast(grad, (1, 3)), [[2.0, 2.0, 2.0]])
        np.testing.assert_allclose(unbroadcast(grad, (2, 1)), [[3.0], [3.0]])

    def test_float64(self):
        assert Tensor([1, 2, 3]).data.dtype == np.float64


# ============================================================================
# TEST: Functional ops
# ============================================================================


class TestMatmul:
    """Test matrix products"""

    def test_forward(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        b = Tensor([[5.0, 6.0], [7.0, 8.0]])
        np.testing.assert_allclose(F.matmul(a, b).data, [[19.0, 22.0], [43.0, 50.0]])

    def test_backward(self):
        """d sum(AB) / dA = 1 · Bᵀ"""
        a = parameter([[1.0, 2.0], [3.0, 4.0]])
        b = parameter([[5.0, 6.0], [7.0, 8.0]])

        F.matmul(a, b).sum().backward()

        np.testing.assert_allclose(a.grad, [[11.0, 15.0], [11.0, 15.0]])
        np.testing.assert_allclose(b.grad, [[4.0, 4.0], [6.0, 6.0]])

    def test_vector_matrix_gradient(self, rng):
        w = rng.normal(size=(4, 3))
        error = grad_check(lambda v: F.tanh(F.matmul(v, Tensor(w))).sum(), rng.normal(size=4))
        assert error < 1e-6

    def test_inner_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestSoftmax:
    """Test softmax and log_softmax"""

    def test_uniform(self):
        np.testing.assert_allclose(F.softmax(Tensor([0.0, 0.0, 0.0, 0.0])).data, [0.25] * 4)

    def test_large_logits_are_stable(self):
        out = F.softmax(Tensor([1000.0, 1000.0, -1000.0])).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [0.5, 0.5, 0.0], atol=1e-12)

    def test_log_softmax_matches_log_of_softmax(self, rng):
        v = rng.normal(size=(3, 6))
        np.testing.assert_allclose(
            F.log_softmax(Tensor(v)).data, np.log(F.softmax(Tensor(v)).data), atol=1e-12
        )

    def test_gradients(self, weights):
        x = np.array([0.3, -1.2, 2.0, 0.0, 0.7])
        assert grad_check(lambda v: (F.softmax(v) * weights).sum(), x) < 1e-6
        assert grad_check(lambda v: (F.log_softmax(v) * weights).sum(), x) < 1e-6

    def test_empty_axis(self):
        with pytest.raises(DimensionError):
            F.softmax(Tensor(np.zeros((2, 0))))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=8), st.floats(min_value=-100.0, max_value=100.0))
    def test_shift_invariance(self, values, shift):
        """softmax(v + c) = softmax(v)"""
        v = np.array(values)
        np.testing.assert_allclose(
            F.softmax(Tensor(v + shift)).data, F.softmax(Tensor(v)).data, atol=1e-9
        )

    @settings(max_examples=50, deadline=None)
    @given(st.lists(finite, min_size=1, max_size=8))
    def test_sums_to_one(self, values):
        out = F.softmax(Tensor(values)).data
        assert out.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(out >= 0.0)


class TestKLDivergence:
    """Test KL(p ‖ q)"""

    def test_identical_is_zero(self):
        assert F.kl_divergence([0.5, 0.5], [0.5, 0.5]).item() == pytest.approx(0.0)

    def test_point_mass_against_uniform(self):
        """0 · ln 0 terms vanish: KL([1, 0] ‖ [½, ½]) = ln 2"""
        assert F.kl_divergence([1.0, 0.0], [0.5, 0.5]).item() == pytest.approx(np.log(2.0))

    def test_point_mass_against_skewed(self):
        assert F.kl_divergence([1.0, 0.0], [0.6, 0.4]).item() == pytest.approx(0.5108, abs=1e-4)

    def test_half_half_against_skewed(self):
        """½ ln(0.5/0.9) + ½ ln(0.5/0.1)"""
        value = F.kl_divergence([0.5, 0.5], [0.9, 0.1]).item()
        assert value == pytest.approx(0.5108256, abs=1e-6)

    def test_zero_reference_is_floored(self):
        value = F.kl_divergence([0.5, 0.5], [1.0, 0.0]).item()
        assert np.isfinite(value)
        assert value == pytest.approx(0.5 * np.log(0.5) + 0.5 * np.log(0.5 / 1e-8))

    def test_batched(self):
        p = np.array([[1.0, 0.0], [0.5, 0.5]])
        q = np.array([[0.5, 0.5], [0.5, 0.5]])
        np.testing.assert_allclose(F.kl_divergence(p, q).data, [np.log(2.0), 0.0], atol=1e-12)

    def test_gradient_wrt_p(self):
        q = Tensor([0.2, 0.3, 0.5])
        logits = np.array([0.1, -0.4, 0.9])
        assert grad_check(lambda v: F.kl_divergence(F.softmax(v), q).sum(), logits) < 1e-6

    def test_unnormalised_input(self):
        with pytest.raises(ValidationError):
            F.kl_divergence([0.5, 0.6], [0.5, 0.5])
        with pytest.raises(ValidationError):
            F.kl_divergence([0.5, 0.5], [0.2, 0.2])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            F.kl_divergence([0.5, 0.5], [0.2, 0.3, 0.5])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=2, max_size=6),
        st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=6, max_size=6),
    )
    def test_non_negative(self, p_raw, q_raw):
        p = np.array(p_raw)
        q = np.array(q_raw[: len(p_raw)])
        value = F.kl_divergence(p / p.sum(), q / q.sum()).item()
        assert value >= -1e-12


# ============================================================================
# TEST: Primitive gradients
# ============================================================================

LEFT = np.random.default_rng(11).normal(size=(4, 3))
RIGHT = np.random.default_rng(12).normal(size=(5, 2))


def _normal(shape):
    return lambda rng: rng.normal(size=shape)


def _positive(shape):
    return lambda rng: rng.uniform(0.5, 2.0, size=shape)


# name -> (draw inputs, differentiable op); binary ops read both operands from rows of x
PRIMITIVES = {
    "add": (_normal((2, 4)), lambda t: t[0] + t[1]),
    "sub": (_normal((2, 4)), lambda t: t[0] - t[1]),
    "mul": (_normal((2, 4)), lambda t: t[0] * t[1]),
    "div": (_normal((2, 4)), lambda t: F.div(t[0], t[1] * t[1] + 0.5)),
    "neg": (_normal((3, 4)), F.neg),
    "power_cube": (_normal((3, 4)), lambda t: F.power(t, 3.0)),
    "power_fractional": (_positive((3, 4)), lambda t: F.power(t, 1.5)),
    "exp": (_normal((3, 4)), F.exp),
    "log": (_positive((3, 4)), F.log),
    "tanh": (_normal((3, 4)), F.tanh),
    "sigmoid": (_normal((3, 4)), F.sigmoid),
    "log_sigmoid": (_normal((3, 4)), F.log_sigmoid),
    "gelu": (_normal((3, 4)), F.gelu),
    "matmul_left": (_normal((2, 4)), lambda t: F.matmul(t, Tensor(LEFT))),
    "matmul_right": (_normal((2, 5)), lambda t: F.matmul(t, Tensor(RIGHT))),
    "matmul_vector": (_normal((2, 4)), lambda t: F.matmul(t[0], t[1])),
    "sum_axis": (_normal((3, 4)), lambda t: F.sum(t, axis=0)),
    "mean_keepdims": (_normal((3, 4)), lambda t: F.mean(t, axis=-1, keepdims=True)),
    "reshape": (_normal((3, 4)), lambda t: F.reshape(t, (2, 6))),
    "transpose": (_normal((2, 3, 4)), lambda t: F.transpose(t, (2, 0, 1))),
    "broadcast_to": (_normal((1, 4)), lambda t: F.broadcast_to(t, (3, 4))),
    "getitem_repeated": (_normal((3, 4)), lambda t: t[[0, 2, 0]]),
    "getitem_slice": (_normal((3, 4)), lambda t: t[1:, ::2]),
    "stack": (_normal((2, 4)), lambda t: F.stack([t[0], t[1], t[0]], axis=1)),
    "concat": (_normal((3, 4)), lambda t: F.concat([t, t[1:]], axis=0)),
    "softmax": (_normal((3, 4)), lambda t: F.softmax(t, axis=-1)),
    "log_softmax": (_normal((3, 4)), lambda t: F.log_softmax(t, axis=0)),
    "kl_divergence": (
        _normal((2, 5)),
        lambda t: F.kl_divergence(F.softmax(t[0]), F.softmax(t[1])),
    ),
}


class TestPrimitiveGradients:
    """Test every differentiable primitive against central differences"""

    SEEDS = 100
    TOLERANCE = 1e-4

    @pytest.mark.parametrize("name", sorted(PRIMITIVES))
    def test_matches_finite_differences(self, name):
        draw, op = PRIMITIVES[name]
        worst = 0.0
        for seed in range(self.SEEDS):
            rng = np.random.default_rng(seed)
            x = draw(rng)
            weights = rng.normal(size=op(Tensor(x)).shape)
            error = grad_check(lambda t: (op(t) * weights).sum(), x, eps=1e-4)
            worst = max(worst, error)
        assert worst < self.TOLERANCE, f"{name}: max relative error {worst:.2e}"


# ============================================================================
# TEST: grad_check
# ============================================================================


class TestGradCheck:
    """Test the finite-difference oracle itself"""

    def test_polynomial(self):
        assert grad_check(lambda v: (v * v * v).sum(), [0.5, -1.5, 2.0]) < 1e-6

    def test_eps_range(self):
        f = lambda v: (v * v).sum()  # noqa: E731
        with pytest.raises(ValidationError):
            grad_check(f, [1.0], eps=1e-2)
        with pytest.raises(ValidationError):
            grad_check(f, [1.0], eps=1e-8)
        assert grad_check(f, [1.0], eps=1e-6) < 1e-4
        assert grad_check(f, [1.0], eps=1e-3) < 1e-4

    def test_relative_error_above_floor(self):
        assert relative_error(np.array([1.0]), np.array([1.1])) == pytest.approx(0.1 / 1.1)

    def test_relative_error_is_absolute_below_floor(self):
        """Both gradients under the floor: |a - n| / floor"""
        error = relative_error(np.array([1e-6]), np.array([3e-6]))
        assert error == pytest.approx(2e-6 / MAGNITUDE_FLOOR)
        assert relative_error(np.array([0.0]), np.array([0.0])) == 0.0

    def test_non_scalar_function(self):
        with pytest.raises(ValidationError):
            grad_check(lambda v: v * 2.0, [1.0, 2.0])

    def test_check_parameters(self, rng):
        w = parameter(rng.normal(size=(3, 2)))
        b = parameter(rng.normal(size=2))
        x = Tensor(rng.normal(size=(4, 3)))

        errors = check_parameters(lambda: F.tanh(F.matmul(x, w) + b).sum(), {"w": w, "b": b})

        assert set(errors) == {"w", "b"}
        assert max(errors.values()) < 1e-6
        assert w.grad is None

    def test_check_parameters_restores_values(self, rng):
        data = rng.normal(size=(3, 3))
        w = parameter(data.copy())
        check_parameters(lambda: (w * w).sum(), {"w": w}, max_entries=4, rng=rng)
        np.testing.assert_array_equal(w.data, data)

    def test_sampling_needs_rng(self):
        w = parameter([1.0, 2.0])
        with pytest.raises(ValidationError):
            check_parameters(lambda: (w * w).sum(), {"w": w}, max_entries=1)
