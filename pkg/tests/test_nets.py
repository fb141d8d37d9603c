import numpy as np
import pytest

from odirl.nets import Adam, FlatParams, Mlp, finite_difference_check, load_params, save_params


def test_zero_init_output_layer_gives_zero_output():
    net = Mlp([3, 16, 2], seed=0, zero_init_output=True)
    rng = np.random.default_rng(1)
    for _ in range(5):
        out = net.forward(rng.normal(size=3))
        assert np.all(out == 0.0)


def test_identity_single_layer_passes_input_through():
    net = Mlp([2, 2], activations=["identity"], seed=0)
    net.weights(0)[...] = np.eye(2)
    net.biases(0)[...] = 0.0
    x = np.array([0.3, -1.7])
    assert np.allclose(net.forward(x), x)


def test_forward_is_repeatable():
    net = Mlp([4, 8, 3], seed=3)
    x = np.random.default_rng(0).normal(size=4)
    out1 = net.forward(x).copy()
    out2 = net.forward(x).copy()
    assert np.array_equal(out1, out2)


def test_forward_rejects_dim_mismatch():
    net = Mlp([4, 3], seed=0)
    with pytest.raises(ValueError):
        net.forward(np.zeros(5))


def test_forward_rejects_nonfinite_input():
    net = Mlp([2, 3], seed=0)
    with pytest.raises(ValueError):
        net.forward(np.array([np.nan, 0.0]))


def test_deterministic_init_given_seed():
    a = Mlp([5, 32, 32, 2], seed=11)
    b = Mlp([5, 32, 32, 2], seed=11)
    c = Mlp([5, 32, 32, 2], seed=12)
    assert np.array_equal(a.params, b.params)
    assert not np.array_equal(a.params, c.params)


@pytest.mark.parametrize(
    "sizes,acts",
    [
        ([3, 8, 1], None),
        ([2, 5, 5, 2], None),
        ([4, 6, 3], ["relu", "identity"]),
        ([1, 4, 4, 1], ["tanh", "relu", "identity"]),
        ([5, 2], ["identity"]),
    ],
)
def test_gradients_match_finite_differences_on_small_nets(sizes, acts):
    # Mandatory pre-build check: every parameter against central differences.
    net = Mlp(sizes, activations=acts, seed=7)
    rng = np.random.default_rng(42)
    worst = finite_difference_check(net, rng, n_draws=20)
    assert worst <= 1e-4


def test_backward_zero_upstream_leaves_grad_unchanged():
    net = Mlp([3, 8, 2], seed=0)
    x = np.random.default_rng(0).normal(size=(4, 3))
    net.forward(x)
    net.backward(x, np.ones((4, 2)))
    before = net.grad.copy()
    net.forward(x)
    net.backward(x, np.zeros((4, 2)))
    assert np.array_equal(net.grad, before)


def test_backward_accumulation_is_linear():
    net = Mlp([3, 8, 2], seed=0)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 3))
    g1 = rng.normal(size=(6, 2))
    g2 = rng.normal(size=(6, 2))
    net.forward(x)
    net.backward(x, g1 + g2)
    combined = net.grad.copy()
    net.zero_grad()
    net.forward(x)
    net.backward(x, g1)
    net.forward(x)
    net.backward(x, g2)
    assert np.allclose(net.grad, combined, atol=1e-12)


def test_backward_requires_fresh_forward_cache():
    net = Mlp([3, 8, 2], seed=0)
    rng = np.random.default_rng(5)
    x1 = rng.normal(size=(2, 3))
    x2 = rng.normal(size=(2, 3))
    net.forward(x1)
    with pytest.raises(RuntimeError):
        net.backward(x2, np.ones((2, 2)))
    # a parameter update also invalidates the cache
    net.forward(x1)
    Adam([net], lr=1e-3).step()
    with pytest.raises(RuntimeError):
        net.backward(x1, np.ones((2, 2)))


def test_backward_input_gradient_matches_finite_differences():
    net = Mlp([4, 8, 3], seed=1)
    rng = np.random.default_rng(9)
    x = rng.normal(size=4)
    up = rng.normal(size=3)
    net.forward(x)
    gx = net.backward(x, up)
    eps = 1e-6
    for j in range(4):
        xp, xm = x.copy(), x.copy()
        xp[j] += eps
        xm[j] -= eps
        fd = (net.forward(xp) @ up - net.forward(xm) @ up) / (2 * eps)
        assert abs(fd - gx[j]) < 1e-6


def test_adam_zero_grad_keeps_params():
    net = Mlp([3, 4, 1], seed=0)
    before = net.params.copy()
    Adam([net], lr=0.1).step()
    assert np.array_equal(net.params, before)


def test_adam_minimizes_quadratic():
    # loss = 0.5*(x - 3)^2, closed-form minimizer x* = 3
    x = FlatParams(np.array([-2.0]))
    opt = Adam([x], lr=0.1)
    for _ in range(200):
        x.grad[...] = x.params - 3.0
        opt.step()
    assert abs(x.params[0] - 3.0) < 1e-3


def test_adam_clip_rescales_gradient_norm():
    x = FlatParams(np.zeros(4))
    opt = Adam([x], lr=0.5, clip_norm=1.0)
    x.grad[...] = np.array([10.0, 0.0, 0.0, 0.0])
    opt.step()
    # first Adam step magnitude is lr per coordinate regardless of scale,
    # but the clipped gradient must have been rescaled to norm <= 1
    assert opt.t == 1
    x.grad[...] = np.array([0.3, 0.4, 0.0, 0.0])  # norm < clip: untouched
    g_before = x.grad.copy()
    opt.step()
    assert np.all(x.grad == 0.0)
    assert np.linalg.norm(g_before) < 1.0


def test_adam_raises_on_nonfinite_grad():
    x = FlatParams(np.zeros(2))
    opt = Adam([x])
    x.grad[...] = np.array([np.inf, 0.0])
    with pytest.raises(FloatingPointError):
        opt.step()


def test_checkpoint_roundtrip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {
        "a": rng.normal(size=137),
        "b": rng.normal(size=(3, 5)) * 1e-17,
        "c": np.array([np.pi, -0.0, 1e300]),
    }
    meta = {"layer_shapes": [[3, 5]], "activations": ["tanh"], "seed": 4}
    path = tmp_path / "ckpt.bin"
    save_params(path, arrays, meta)
    loaded, loaded_meta = load_params(path)
    assert loaded_meta == meta
    for k in arrays:
        assert np.array_equal(loaded[k].reshape(arrays[k].shape), arrays[k])
