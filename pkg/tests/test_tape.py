"""Tape semantics: forward values, hand-derived gradients, buffer rules."""

import numpy as np
import pytest

from gradevo.tape import Tape, softmax_col, softmax_rows


def grad_of(tape, param):
    g = param.raw.grad
    assert g is not None, f"no gradient reached {param.name}"
    return g


def test_exp_of_zeros_is_ones():
    t = Tape()
    y = t.exp(t.constant(np.zeros((2, 3))))
    assert np.array_equal(y.value, np.ones((2, 3)))


def test_sigmoid_at_zero_is_half():
    t = Tape()
    y = t.sigmoid(t.constant([[0.0]]))
    assert y.value[0, 0] == 0.5


def test_min_with_index_tie_takes_lowest_index():
    t = Tape()
    v, idx = t.min_with_index(t.constant([[3.0, 1.0, 1.0, 2.0]]))
    assert idx == 1
    assert v.item() == 1.0


def test_max_with_index():
    t = Tape()
    v, idx = t.max_with_index(t.constant([[3.0, 7.0, 7.0, 2.0]]))
    assert idx == 1
    assert v.item() == 7.0


def test_product_rule_x_sin_x():
    # d/dx x sin x = sin x + x cos x
    t = Tape()
    p = t.param("x", [[0.7, -1.3, 2.0]])
    y = t.sum(t.mul(p.raw, t.sin(p.raw)))
    t.backward(y)
    x = np.array([[0.7, -1.3, 2.0]])
    expect = np.sin(x) + x * np.cos(x)
    np.testing.assert_allclose(grad_of(t, p), expect, rtol=1e-12)


def test_linear_form_gradient_is_coefficients():
    t = Tape()
    c = np.array([[2.0, -3.0, 0.5]])
    p = t.param("x", [[1.0, 1.0, 1.0]])
    y = t.sum(t.mul(t.constant(c), p.raw))
    t.backward(y)
    np.testing.assert_array_equal(grad_of(t, p), c)


def test_clamp_gradient_strictly_inside_only():
    t = Tape()
    p = t.param("x", [[-2.0, -1.0, 0.0, 1.0, 2.0]])
    y = t.sum(t.clamp(p.raw, -1.0, 1.0))
    t.backward(y)
    # endpoints count as outside: only the interior coordinate passes
    np.testing.assert_array_equal(grad_of(t, p), [[0.0, 0.0, 1.0, 0.0, 0.0]])


def test_clamp_forward_values():
    t = Tape()
    y = t.clamp(t.constant([[-5.0, 0.25, 5.0]]), -1.0, 1.0)
    np.testing.assert_array_equal(y.value, [[-1.0, 0.25, 1.0]])


def test_straight_through_forward_is_hard_backward_is_soft():
    t = Tape()
    p = t.param("s", [[0.2, 0.8]])
    soft = t.mul(p.raw, t.constant([[3.0, 5.0]]))
    hard = t.constant([[0.0, 1.0]])
    y = t.straight_through(hard, soft)
    assert np.array_equal(y.value, [[0.0, 1.0]])  # bit-exact hard forward
    t.backward(t.sum(y))
    np.testing.assert_array_equal(grad_of(t, p), [[3.0, 5.0]])


def test_straight_through_shape_mismatch_raises():
    t = Tape()
    with pytest.raises(ValueError):
        t.straight_through(t.constant([[1.0]]), t.constant([[1.0, 2.0]]))


def test_detach_blocks_gradient():
    # y = x * detach(x): dy/dx = detached value, not 2x
    t = Tape()
    p = t.param("x", [[3.0]])
    y = t.mul(p.raw, t.detach(p.raw))
    t.backward(y)
    assert grad_of(t, p)[0, 0] == 3.0


def test_two_backwards_double_the_gradient():
    t = Tape()
    p = t.param("x", [[2.0]])
    y = t.mul(p.raw, p.raw)
    t.backward(y)
    t.backward(y)
    assert grad_of(t, p)[0, 0] == 8.0  # 2 * (2x at x=2)
    t.zero_grad()
    assert p.raw.grad is None


def test_lower_tri_matvec_upper_triangle_gets_no_gradient():
    t = Tape()
    L0 = np.array([[1.0, 9.0], [0.5, 2.0]])  # upper entry present but unused
    p = t.param("L", L0)
    z = t.constant([[0.3], [0.7]])
    y = t.sum(t.lower_tri_matvec(p.raw, z))
    t.backward(y)
    g = grad_of(t, p)
    assert g[0, 1] == 0.0
    assert g[0, 0] != 0.0 and g[1, 1] != 0.0


def test_matmul_gradients():
    # d/dA sum(AB) = ones @ B^T, d/dB = A^T @ ones
    t = Tape()
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    B = np.array([[0.5, -1.0], [2.0, 0.25]])
    pa, pb = t.param("A", A), t.param("B", B)
    y = t.sum(t.matmul(pa.raw, pb.raw))
    t.backward(y)
    ones = np.ones((2, 2))
    np.testing.assert_allclose(grad_of(t, pa), ones @ B.T)
    np.testing.assert_allclose(grad_of(t, pb), A.T @ ones)


def test_scalar_broadcast_only_for_1x1():
    t = Tape()
    a = t.constant([[1.0, 2.0], [3.0, 4.0]])
    s = t.constant([[10.0]])
    y = t.add(a, s)
    np.testing.assert_array_equal(y.value, [[11.0, 12.0], [13.0, 14.0]])
    with pytest.raises(ValueError):
        t.add(a, t.constant([[1.0, 2.0]]))  # row vectors need add_rowvec


def test_rowvec_and_colvec_helpers():
    t = Tape()
    a = t.constant([[1.0, 2.0], [3.0, 4.0]])
    row = t.constant([[10.0, 20.0]])
    col = t.constant([[2.0], [3.0]])
    np.testing.assert_array_equal(t.add_rowvec(a, row).value, [[11.0, 22.0], [13.0, 24.0]])
    np.testing.assert_array_equal(t.mul_rowvec(a, row).value, [[10.0, 40.0], [30.0, 80.0]])
    np.testing.assert_array_equal(t.mul_colvec(a, col).value, [[2.0, 4.0], [9.0, 12.0]])


def test_rowvec_broadcast_gradient_sums_over_rows():
    t = Tape()
    p = t.param("b", [[1.0, -1.0]])
    a = t.constant(np.arange(6, dtype=float).reshape(3, 2))
    y = t.sum(t.add_rowvec(a, p.raw))
    t.backward(y)
    np.testing.assert_array_equal(grad_of(t, p), [[3.0, 3.0]])


def test_div_by_exact_zero_raises():
    t = Tape()
    with pytest.raises(ValueError):
        t.div(t.constant([[1.0]]), t.constant([[0.0]]))


def test_log_requires_positive():
    t = Tape()
    with pytest.raises(ValueError):
        t.log(t.constant([[0.0]]))


def test_sqrt_requires_nonnegative():
    t = Tape()
    with pytest.raises(ValueError):
        t.sqrt(t.constant([[-1.0]]))


def test_backward_rejects_nonscalar_loss():
    t = Tape()
    with pytest.raises(ValueError):
        t.backward(t.constant([[1.0, 2.0]]))


def test_backward_rejects_foreign_tape():
    t1, t2 = Tape(), Tape()
    y = t2.constant([[1.0]])
    with pytest.raises(ValueError):
        t1.backward(y)


def test_reset_keeps_params_and_drops_graph():
    t = Tape()
    p = t.param("x", [[1.0, 2.0]])
    y = t.sum(t.mul(p.raw, p.raw))
    t.backward(y)
    n_before = t.size()
    t.reset()
    assert t.size() < n_before
    assert p.raw.nid == 0
    # param is still usable on the fresh graph
    y2 = t.sum(p.raw)
    t.zero_grad()
    t.backward(y2)
    np.testing.assert_array_equal(grad_of(t, p), [[1.0, 1.0]])


def test_param_set_validates_shape():
    t = Tape()
    p = t.param("x", [[1.0, 2.0]])
    with pytest.raises(ValueError):
        p.set(np.zeros((2, 2)))


def test_exp_transform_param_reads_positive():
    t = Tape()
    p = t.param("s", [[0.0]], transform="exp")
    assert p.read().value[0, 0] == 1.0
    assert p.value()[0, 0] == 1.0
    with pytest.raises(ValueError):
        t.param("bad", [[0.0]], transform="softplus")


def test_softmax_rows_sums_to_one_and_matches_numpy():
    t = Tape()
    s = np.array([[1.0, 2.0, 3.0], [-1.0, 0.0, 1.0]])
    y = softmax_rows(t, t.constant(s))
    e = np.exp(s - s.max(axis=1, keepdims=True))
    np.testing.assert_allclose(y.value, e / e.sum(axis=1, keepdims=True), rtol=1e-14)
    np.testing.assert_allclose(y.value.sum(axis=1), [1.0, 1.0], rtol=1e-14)


def test_softmax_col_requires_column():
    t = Tape()
    with pytest.raises(ValueError):
        softmax_col(t, t.constant([[1.0, 2.0]]))


def test_softmax_gradient_matches_jacobian():
    # for y = softmax(s), d(sum(c*y))/ds = y * (c - c.y)
    t = Tape()
    s0 = np.array([[0.3, -0.6, 1.1]])
    c = np.array([[1.0, 2.0, -0.5]])
    p = t.param("s", s0)
    y = softmax_rows(t, p.raw)
    t.backward(t.sum(t.mul(y, t.constant(c))))
    yv = y.value
    expect = yv * (c - float((c * yv).sum()))
    np.testing.assert_allclose(grad_of(t, p), expect, rtol=1e-12)


def test_item_rejects_nonscalar():
    t = Tape()
    with pytest.raises(ValueError):
        t.constant([[1.0, 2.0]]).item()


def test_operator_sugar_matches_ops():
    t = Tape()
    a = t.constant([[2.0]])
    b = t.constant([[3.0]])
    assert (a + b).item() == 5.0
    assert (a - b).item() == -1.0
    assert (a * b).item() == 6.0
    assert (a / b).item() == 2.0 / 3.0
    assert (-a).item() == -2.0
    assert (a ** 2).item() == 4.0
    assert (1.0 + a).item() == 3.0


def test_powc_handles_negative_base_with_integer_exponent():
    t = Tape()
    p = t.param("x", [[-2.0]])
    y = t.powc(p.raw, 3.0)
    assert y.item() == -8.0
    t.backward(y)
    assert grad_of(t, p)[0, 0] == 12.0  # 3 x^2


def test_slice_and_reshape_roundtrip_gradients():
    t = Tape()
    p = t.param("x", np.arange(6, dtype=float).reshape(2, 3))
    left = t.slice_cols(p.raw, 0, 2)
    y = t.sum(left)
    t.backward(y)
    np.testing.assert_array_equal(grad_of(t, p), [[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]])
    t2 = Tape()
    p2 = t2.param("x", np.arange(6, dtype=float).reshape(2, 3))
    r = t2.reshape(p2.raw, 3, 2)
    assert r.shape == (3, 2)
    t2.backward(t2.sum(t2.mul(r, r)))
    np.testing.assert_allclose(p2.raw.grad, 2 * p2.raw.value)


def test_graph_replay_is_deterministic():
    def run():
        t = Tape()
        p = t.param("x", [[0.4, -0.9]])
        y = t.sum(t.mul(t.sin(p.raw), t.exp(p.raw)))
        t.backward(y)
        return y.item(), p.raw.grad.copy()

    v1, g1 = run()
    v2, g2 = run()
    assert v1 == v2
    np.testing.assert_array_equal(g1, g2)
