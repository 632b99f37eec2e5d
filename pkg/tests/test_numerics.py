import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramp.numerics import (
    Adam,
    ContractError,
    Rng,
    ShapeError,
    Tensor,
    TrainingError,
    concat,
    grad_check,
    layer_norm,
    load_arrays,
    save_arrays,
)


def test_matmul_identity():
    a = Tensor(np.eye(2))
    b = Tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal((a @ b).data, b.data)


def test_matmul_hand():
    a = Tensor([[1.0, 2.0]])
    b = Tensor([[3.0], [4.0]])
    assert (a @ b).data.tolist() == [[11.0]]


def test_matmul_against_triple_loop():
    rng = Rng(0)
    a = rng.normal((3, 4))
    b = rng.normal((4, 2))
    ref = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                ref[i, j] += a[i, k] * b[k, j]
    out = (Tensor(a) @ Tensor(b)).data
    assert np.max(np.abs(out - ref)) == 0.0


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))


def test_backward_sum_of_squares():
    x = Tensor([1.0, 2.0], requires_grad=True)
    x.square().sum().backward()
    assert x.grad.tolist() == [2.0, 4.0]


def test_backward_constant_loss():
    x = Tensor([1.0, 2.0], requires_grad=True)
    (x * 0.0).sum().backward()
    assert np.array_equal(x.grad, np.zeros(2))


def test_backward_accumulates_without_zeroing():
    x = Tensor([3.0], requires_grad=True)
    x.square().sum().backward()
    x.square().sum().backward()
    assert x.grad.tolist() == [12.0]


def test_backward_rejects_nonscalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        x.square().backward()


def test_two_layer_perceptron_gradcheck():
    rng = Rng(7)
    w1 = Tensor(rng.normal((3, 5)) * 0.5, requires_grad=True)
    b1 = Tensor(rng.normal(5) * 0.1, requires_grad=True)
    w2 = Tensor(rng.normal((5, 2)) * 0.5, requires_grad=True)
    b2 = Tensor(rng.normal(2) * 0.1, requires_grad=True)
    x = rng.normal((4, 3))
    y = rng.normal((4, 2))

    def loss():
        h = (Tensor(x) @ w1).add_bias(b1).tanh()
        out = (h @ w2).add_bias(b2)
        return (out - Tensor(y)).square().mean()

    assert grad_check(loss, [w1, b1, w2, b2], h=1e-5) <= 1e-4


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 31 - 1))
def test_random_ops_gradcheck(m, k, seed):
    rng = Rng(seed)
    a = Tensor(rng.normal((m, k)), requires_grad=True)
    b = Tensor(rng.normal((k, m)), requires_grad=True)
    g = Tensor(np.abs(rng.normal(m)) + 0.5, requires_grad=True)
    bt = Tensor(rng.normal(m) * 0.1, requires_grad=True)

    def loss():
        h = (a @ b).tanh()
        h = layer_norm(h, g, bt)
        h = concat([h, h * 0.5], axis=0)
        return (h + 0.3).square().mean()

    assert grad_check(loss, [a, b, g, bt], h=1e-5) <= 1e-4


def test_relu_gradcheck_away_from_kink():
    # relu is checked on data bounded away from 0 where it is differentiable
    x = Tensor([-2.0, -0.7, 0.6, 1.8], requires_grad=True)

    def loss():
        return x.relu().square().mean()

    assert grad_check(loss, [x], h=1e-5) <= 1e-4


def test_exp_log_gradcheck():
    x = Tensor([0.5, 1.5, 2.5], requires_grad=True)

    def loss():
        return (x.exp() + x.log()).square().mean()

    assert grad_check(loss, [x], h=1e-6) <= 1e-4


def test_index_rows_gradients():
    t = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    out = t.index_rows([0, 0, 2])
    out.sum().backward()
    assert t.grad.tolist() == [[2.0, 2.0], [0.0, 0.0], [1.0, 1.0]]


def test_adam_first_step_matches_hand_evaluation():
    # first step with g=1: m_hat=1, v_hat=1, delta = -lr/(1+eps) ~ -lr
    p = Tensor([0.0], requires_grad=True)
    opt = Adam({"p": p}, lr=1e-3)
    p.grad = np.array([1.0])
    opt.step()
    assert p.data[0] == pytest.approx(-1e-3, rel=1e-6)


def test_adam_zero_gradient_leaves_params():
    p = Tensor([1.0, -2.0], requires_grad=True)
    opt = Adam({"p": p}, lr=0.1)
    p.grad = np.zeros(2)
    opt.step()
    assert p.data.tolist() == [1.0, -2.0]


def test_adam_two_constant_steps_match_hand_table():
    # g=2 both steps, lr=0.1, default betas/eps; hand-evaluated update equations
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8
    g = 2.0
    theta, m, v = 0.0, 0.0, 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        theta -= lr * mhat / (np.sqrt(vhat) + eps)
    p = Tensor([0.0], requires_grad=True)
    opt = Adam({"p": p}, lr=lr)
    for _ in range(2):
        p.grad = np.array([g])
        opt.step()
        p.zero_grad()
    assert p.data[0] == pytest.approx(theta, abs=1e-15)


def test_adam_nonfinite_gradient_names_parameter():
    p = Tensor([0.0], requires_grad=True)
    opt = Adam({"weights.w1": p}, lr=0.1)
    p.grad = np.array([np.nan])
    with pytest.raises(TrainingError, match="weights.w1"):
        opt.step()


def test_rng_determinism_and_splits():
    a = Rng(42).normal((10,))
    b = Rng(42).normal((10,))
    assert np.array_equal(a, b)
    c = Rng(42).split("stage1").normal((10,))
    d = Rng(42).split("stage1").normal((10,))
    e = Rng(42).split("stage2").normal((10,))
    assert np.array_equal(c, d)
    assert not np.array_equal(c, e)


def test_rng_gaussian_unit_variance():
    draws = Rng(3).normal((200_000,))
    assert abs(draws.std() - 1.0) <= 0.02
    assert abs(draws.mean()) <= 0.02


def test_checkpoint_roundtrip(tmp_path):
    arrays = {
        "enc.w": Rng(1).normal((3, 4)),
        "scalar": np.array(2.5),
        "head.b": np.zeros(7),
    }
    path = tmp_path / "ck.ramp"
    save_arrays(arrays, path)
    back = load_arrays(path)
    assert set(back) == set(arrays)
    for k in arrays:
        assert np.array_equal(back[k], np.asarray(arrays[k]))


def test_checkpoint_truncated_file_errors(tmp_path):
    path = tmp_path / "ck.ramp"
    save_arrays({"w": np.ones((4, 4))}, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    from ramp.numerics import CheckpointError
    with pytest.raises(CheckpointError):
        load_arrays(path)
