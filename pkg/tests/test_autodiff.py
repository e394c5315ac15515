import numpy as np
import pytest

from autodiff import (
    OP_KINDS,
    ComputationRecord,
    Tensor,
    apply,
    finite_diff_gradient,
    gradient,
    no_record,
    precision,
)
from autodiff import ops
from errors import ContractViolation, ShapeMismatch
from nets.toy import QuadraticModel
from noise_synthesis.inversion import inversion_objective


def test_op_vocabulary_is_complete():
    assert set(OP_KINDS) == {
        "add", "sub", "mul", "scale", "matmul", "conv2d", "relu", "sum", "mean",
        "l2_norm", "dot", "softmax_cross_entropy", "reshape", "pad", "embed_lookup",
    }


def test_apply_examples():
    assert apply("dot", [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).item() == 32.0
    np.testing.assert_array_equal(apply("relu", [[-1.0, 0.0, 2.0]]).data, [0.0, 0.0, 2.0])
    assert apply("l2_norm", [[3.0, 4.0]]).item() == pytest.approx(5.0)
    np.testing.assert_array_equal(apply("scale", [[1.0, -2.0]], factor=3.0).data, [3.0, -6.0])


def test_apply_rejects_unknown_kind():
    with pytest.raises(ContractViolation):
        apply("tanh", [[1.0]])


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeMismatch) as info:
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
    assert "[2, 3]" in str(info.value) and "[4]" in str(info.value)
    with pytest.raises(ShapeMismatch):
        ops.matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_gradient_of_sum_of_squares():
    record = ComputationRecord()
    x = record.leaf([1.0, 2.0, 3.0])
    (g,) = gradient(ops.sum(ops.mul(x, x)), [x])
    np.testing.assert_allclose(g.data, [2.0, 4.0, 6.0])


def test_second_order_gradient_through_carried_graph():
    record = ComputationRecord()
    x = record.leaf([1.0, 2.0])
    cube = ops.sum(x * x * x)
    (first,) = gradient(cube, [x], carry_graph=True)
    np.testing.assert_allclose(first.data, [3.0, 12.0])
    (second,) = gradient(ops.sum(first), [x])
    np.testing.assert_allclose(second.data, [6.0, 12.0])


def test_unreachable_target_gets_zero_gradient():
    record = ComputationRecord()
    a = record.leaf([1.0, 2.0])
    b = record.leaf(np.ones((2, 2)))
    ga, gb = gradient(ops.sum(ops.mul(a, a)), [a, b])
    np.testing.assert_allclose(ga.data, [2.0, 4.0])
    np.testing.assert_array_equal(gb.data, np.zeros((2, 2)))


def test_gradient_contract_violations():
    record = ComputationRecord()
    x = record.leaf([1.0, 2.0])
    with pytest.raises(ContractViolation):
        gradient(ops.mul(x, x), [x])
    with pytest.raises(ContractViolation):
        gradient(ops.sum(Tensor([1.0, 2.0])), [x])
    y = ops.mul(x, 2.0)
    with pytest.raises(ContractViolation):
        gradient(ops.sum(y), [y])


def test_mixing_records_is_rejected():
    a = ComputationRecord().leaf([1.0])
    b = ComputationRecord().leaf([2.0])
    with pytest.raises(ContractViolation):
        ops.add(a, b)


def test_no_record_produces_constants():
    record = ComputationRecord()
    x = record.leaf([1.0, 2.0])
    with no_record():
        y = ops.mul(x, x)
    assert not y.is_recorded
    assert x.is_recorded


def test_conv2d_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal((1, 1, 4, 4))
    w = rng.standard_normal((2, 1, 3, 3))
    bias = rng.standard_normal(2)

    def f(x):
        return ops.sum(ops.conv2d(x, w, bias))

    record = ComputationRecord()
    x = record.leaf(x0)
    (g,) = gradient(f(x), [x])
    expected = finite_diff_gradient(f, x0, h=1e-4)
    np.testing.assert_allclose(g.data, expected.data, rtol=1e-6, atol=1e-9)


@pytest.mark.parametrize("padding, out_side", [("valid", 3), ("same", 5)])
def test_conv2d_output_shapes(padding, out_side):
    out = ops.conv2d(np.ones((2, 3, 5, 5)), np.ones((4, 3, 3, 3)), np.zeros(4), padding=padding)
    assert out.shape == (2, 4, out_side, out_side)


def test_conv2d_is_cross_correlation():
    x = np.arange(9.0).reshape(1, 1, 3, 3)
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 0, 0] = 1.0
    assert ops.conv2d(x, w).data.reshape(()) == 0.0


def test_composite_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    x0 = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 2))
    table = rng.standard_normal((5, 3))

    def f(x):
        h = ops.relu(ops.matmul(x, w))
        padded = ops.pad(h, ((1, 0), (0, 1)))
        scores = ops.reshape(padded, (4, 3))
        emb = ops.embed_lookup(table, [1, 4, 1, 0])
        return ops.add(ops.softmax_cross_entropy(ops.add(scores, emb), [0, 2, 1, 1]), ops.l2_norm(x))

    record = ComputationRecord()
    x = record.leaf(x0)
    (g,) = gradient(f(x), [x])
    np.testing.assert_allclose(g.data, finite_diff_gradient(f, x0, h=1e-6).data, rtol=1e-5, atol=1e-7)


def test_mean_and_sum_over_axes():
    record = ComputationRecord()
    x = record.leaf(np.arange(6.0).reshape(2, 3))
    m = ops.mean(x, axis=1)
    np.testing.assert_allclose(m.data, [1.0, 4.0])
    (g,) = gradient(ops.sum(m), [x])
    np.testing.assert_allclose(g.data, np.full((2, 3), 1.0 / 3.0))


def test_softmax_cross_entropy_of_uniform_scores():
    assert ops.softmax_cross_entropy(Tensor([0.0, 0.0]), [1]).item() == pytest.approx(np.log(2.0))


def test_finite_diff_examples():
    g = finite_diff_gradient(lambda x: ops.sum(ops.mul(x, x)), [3.0], h=1e-5)
    assert g.data[0] == pytest.approx(6.0, abs=1e-8)
    zero = finite_diff_gradient(lambda x: 4.0, np.ones((2, 2)))
    np.testing.assert_array_equal(zero.data, np.zeros((2, 2)))


def test_finite_diff_contract_violations():
    with pytest.raises(ContractViolation):
        finite_diff_gradient(lambda x: float("nan"), [1.0])
    with pytest.raises(ContractViolation):
        finite_diff_gradient(lambda x: 1.0, [1.0], h=0.0)


def test_nested_gradient_of_inversion_objective_matches_finite_differences():
    model = QuadraticModel([1.0, 2.0])
    target = np.array([30.0, 40.0])
    x0 = np.array([0.7, -1.3])

    record = ComputationRecord()
    x = record.leaf(x0)
    (g,) = gradient(inversion_objective(model, x, 1, target), [x])
    expected = finite_diff_gradient(lambda t: inversion_objective(model, t, 1, target), x0, h=1e-6)
    np.testing.assert_allclose(g.data, expected.data, rtol=1e-5)


def test_recorded_computation_is_deterministic():
    def run():
        record = ComputationRecord()
        x = record.leaf(np.linspace(-1.0, 1.0, 12).reshape(1, 1, 3, 4))
        w = record.leaf(np.linspace(0.5, -0.5, 4).reshape(1, 1, 2, 2))
        loss = ops.l2_norm(ops.relu(ops.conv2d(x, w)))
        return loss.item(), [g.data for g in gradient(loss, [x, w])]

    (a, ga), (b, gb) = run(), run()
    assert a == b
    for left, right in zip(ga, gb):
        np.testing.assert_array_equal(left, right)


def test_precision_scope_sets_default_dtype():
    with precision("f32"):
        assert Tensor([1.0]).dtype == np.float32
        assert ComputationRecord().leaf([1.0]).dtype == np.float32
    assert Tensor([1.0]).dtype == np.float64
    with pytest.raises(ContractViolation):
        with precision("f16"):
            pass


def _away_from_zero(rng, shape):
    z = rng.standard_normal(shape)
    return np.where(z < 0, z - 0.2, z + 0.2)


def _op_case(kind, rng):
    """Random inputs (every one differentiable) and attributes for one op kind"""
    m, n = (int(d) for d in rng.integers(1, 7, size=2))
    if kind in ("add", "sub", "mul"):
        return [rng.standard_normal((m, n)), rng.standard_normal((m, n))], {}
    if kind == "scale":
        return [rng.standard_normal((m, n))], {"factor": float(rng.uniform(-3.0, 3.0))}
    if kind == "matmul":
        k = int(rng.integers(1, 7))
        return [rng.standard_normal((m, k)), rng.standard_normal((k, n))], {}
    if kind == "conv2d":
        batch, channels, filters = (int(d) for d in rng.integers(1, 3, size=3))
        h, w = (int(d) for d in rng.integers(3, 7, size=2))
        kernel = 3 if rng.random() < 0.5 else 1
        padding = "same" if rng.random() < 0.5 else "valid"
        inputs = [rng.standard_normal((batch, channels, h, w)),
                  rng.standard_normal((filters, channels, kernel, kernel)),
                  rng.standard_normal(filters)]
        return inputs, {"padding": padding}
    if kind == "relu":
        return [_away_from_zero(rng, (m, n))], {}
    if kind in ("sum", "mean"):
        axis = [None, 0, 1, (0, 1)][int(rng.integers(4))]
        return [rng.standard_normal((m, n))], {"axis": axis}
    if kind == "l2_norm":
        return [rng.standard_normal((m, n))], {}
    if kind == "dot":
        return [rng.standard_normal(m), rng.standard_normal(m)], {}
    if kind == "softmax_cross_entropy":
        k = int(rng.integers(2, 7))
        return [rng.standard_normal((m, k))], {"labels": rng.integers(0, k, size=m).tolist()}
    if kind == "reshape":
        return [rng.standard_normal((m, n))], {"shape": (n, m)}
    if kind == "pad":
        widths = [tuple(int(d) for d in rng.integers(0, 3, size=2)) for _ in range(2)]
        return [rng.standard_normal((m, n))], {"widths": widths}
    if kind == "embed_lookup":
        ids = rng.integers(0, m, size=int(rng.integers(1, 7)))
        return [rng.standard_normal((m, n))], {"ids": ids}
    raise AssertionError(f"no case for {kind}")


@pytest.mark.parametrize("trial", range(100))
def test_op_gradients_match_finite_differences(trial):
    rng = np.random.default_rng(trial)
    kind = OP_KINDS[trial % len(OP_KINDS)]
    inputs, attrs = _op_case(kind, rng)
    weights = rng.standard_normal(apply(kind, inputs, **attrs).shape)

    def loss(args):
        return ops.sum(ops.mul(apply(kind, args, **attrs), weights))

    record = ComputationRecord()
    leaves = [record.leaf(value) for value in inputs]
    grads = gradient(loss(leaves), leaves)
    assert len(grads) == len(inputs)
    for position, (value, grad) in enumerate(zip(inputs, grads)):

        def at(t, position=position):
            return loss(inputs[:position] + [t] + inputs[position + 1:])

        expected = finite_diff_gradient(at, value, h=1e-6)
        assert grad.shape == value.shape
        np.testing.assert_allclose(grad.data, expected.data, rtol=1e-5, atol=1e-5,
                                   err_msg=f"{kind} argument {position}")


@pytest.mark.parametrize("seed", range(3))
def test_gradient_is_linear_in_the_objective(seed):
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 2))
    a, b = rng.uniform(-3.0, 3.0, size=2)

    def f(x):
        return ops.sum(ops.relu(ops.matmul(x, w)))

    def g(x):
        return ops.l2_norm(ops.mul(x, x))

    def grad_of(fn):
        record = ComputationRecord()
        x = record.leaf(x0)
        (gx,) = gradient(fn(x), [x])
        return gx.data

    combined = grad_of(lambda x: ops.add(ops.scale(f(x), a), ops.scale(g(x), b)))
    np.testing.assert_allclose(combined, a * grad_of(f) + b * grad_of(g), rtol=0, atol=1e-10)
