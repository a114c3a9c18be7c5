import numpy as np
import pytest

from labnet import gradcheck as G
from labnet.errors import InvalidArgument, ShapeMismatch
from labnet.kernels import KernelSpec
from labnet.nn import loss as L
from labnet.nn.layers import BatchNorm, Conv2d, Dense, Flatten, MaxPool
from labnet.nn.model import ActivationFactory, Model, build_model, lenet5, resnet
from labnet.nn.optim import Adam, StepSchedule, lenet_schedule, resnet_schedule


def naive_conv(x, w, b, stride, pad):
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = (h + 2 * pad - k) // stride + 1, (wd + 2 * pad - k) // stride + 1
    out = np.zeros((n, o, ho, wo))
    for i in range(n):
        for f in range(o):
            for a in range(ho):
                for bb in range(wo):
                    patch = xp[i, :, a * stride:a * stride + k, bb * stride:bb * stride + k]
                    out[i, f, a, bb] = (patch * w[f]).sum() + (b[f] if b is not None else 0.0)
    return out


def test_dense_is_affine(rng):
    m = Model([Dense("fc", 4, 3)], (4,), 3, np.float64).init(0)
    x = rng.normal(size=(5, 4))
    y, _ = m.forward(x)
    np.testing.assert_allclose(y, x @ m.params["fc.w"] + m.params["fc.b"], atol=1e-14)


def test_identity_convolution(rng):
    m = Model([Conv2d("c", 1, 1, 1), Flatten("f")], (1, 4, 4), 16, np.float64).init(0)
    m.params["c.w"][:] = 1.0
    m.params["c.b"][:] = 0.0
    x = rng.normal(size=(2, 1, 4, 4))
    np.testing.assert_array_equal(m.forward(x)[0], x.reshape(2, 16))


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 2), (2, 1)])
def test_conv_vs_loop_nest(each_backend, rng, stride, pad):
    c1 = Conv2d("c1", 2, 3, 3, stride, pad)
    shape = c1.out_shape((2, 7, 7))
    c2 = Conv2d("c2", 3, 2, 2, 1, 0)
    out = c2.out_shape(shape)
    m = Model([c1, c2, Flatten("f")], (2, 7, 7), int(np.prod(out)), np.float64).init(3)
    x = rng.normal(size=(2, 2, 7, 7))
    h = naive_conv(x, m.params["c1.w"], m.params["c1.b"], stride, pad)
    ref = naive_conv(h, m.params["c2.w"], m.params["c2.b"], 1, 0).reshape(2, -1)
    assert np.abs(m.forward(x)[0] - ref).max() <= 1e-5


def test_maxpool(each_backend):
    m = Model([MaxPool("p"), Flatten("f")], (1, 4, 4), 4, np.float64).init(0)
    x = np.arange(16, dtype=float).reshape(1, 1, 4, 4)
    assert m.forward(x)[0].tolist() == [[5.0, 7.0, 13.0, 15.0]]


def test_shape_mismatch_names_layer():
    with pytest.raises(ShapeMismatch, match=r"layer 1 \(fc2\)"):
        Model([Dense("fc1", 4, 3), Dense("fc2", 5, 2)], (4,), 2)
    m = Model([Dense("fc1", 4, 2)], (4,), 2).init(0)
    with pytest.raises(ShapeMismatch, match="layer 0"):
        m.forward(np.zeros((1, 5)))


def test_batchnorm_modes(rng):
    m = Model([BatchNorm("bn", 3, affine=False), Flatten("f")], (3, 2, 2), 12, np.float64).init(0)
    x = rng.normal(2.0, 3.0, size=(8, 3, 2, 2))
    y, _ = m.forward(x, train=True)
    np.testing.assert_allclose(y.reshape(8, 3, 4).mean(axis=(0, 2)), 0.0, atol=1e-12)
    np.testing.assert_allclose(m.buffers["bn.mean"], 0.1 * x.mean(axis=(0, 2, 3)), atol=1e-12)
    e1, _ = m.forward(x, train=False)
    e2, _ = m.forward(x, train=False)
    np.testing.assert_array_equal(e1, e2)
    assert "bn.gamma" not in m.params


def test_build_model_errors():
    with pytest.raises(InvalidArgument):
        build_model("vgg16")
    with pytest.raises(InvalidArgument):
        build_model("resnet-9", "cifar10")


def test_lenet_parameter_counts():
    spline = KernelSpec.spline(3)
    relu = build_model("lenet5", "mnist", "relu")
    assert relu.parameter_count() == 61706
    layer = build_model("lenet5", "mnist", "lab", sharing="layer", kernel=spline)
    assert layer.parameter_count() == 61706 + 4 * 8
    glob = build_model("lenet5", "mnist", "lab", sharing="global", kernel=spline)
    assert glob.parameter_count() == 61706 + 8
    chan = build_model("lenet5", "mnist", "lab", sharing="channel", kernel=spline)
    assert chan.parameter_count() == 61706 + 8 * (6 + 16 + 120 + 84)
    assert layer.n_blocks() == 4 and glob.n_blocks() == 1 and chan.n_blocks() == 226


def test_resnet_structure():
    r20 = build_model("resnet-20", "cifar10", "lab", sharing="channel")
    assert abs(r20.parameter_count() - 278_000) / 278_000 < 0.02
    assert not any(n.endswith(".gamma") or n.endswith(".beta") for n in r20.params or r20.specs)
    assert not any(n.endswith(".b") and n.startswith(("conv", "s")) for n in r20.specs)
    for depth in (8, 14, 20, 32, 50):
        m = build_model(f"resnet-{depth}", "cifar100", "relu")
        assert m.specs["fc.w"].shape == (64, 100)


def test_toy_resnet_forward(rng):
    m = resnet(8, (3, 8, 8), 10, ActivationFactory("lab", "channel"), np.float64).init(0)
    y, _ = m.forward(rng.normal(size=(2, 3, 8, 8)), train=True)
    assert y.shape == (2, 10) and np.all(np.isfinite(y))


# ----------------------------------------------------------------- loss

def one_block_model(lams):
    act = ActivationFactory("lab", "channel", KernelSpec.spline(3), len(lams[0]))
    m = Model([Dense("fc", 2, len(lams)), act("act", len(lams)), Dense("out", len(lams), 2)],
              (2,), 2, np.float64).init(0)
    m.params["act.lambdas"][:] = lams
    return m


def test_regulariser_values():
    assert L.lambda_sum_penalty(one_block_model([[1.0, -2.0, 1.0]]), 1.0)[0] == 0.0
    assert L.lambda_sum_penalty(one_block_model([[1.0, 2.0, -1.0]]), 1e-2)[0] == pytest.approx(0.02)
    assert L.lambda_sum_penalty(one_block_model([[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]]), 1.0)[0] == 3.0


def test_regulariser_gradient_only_on_lambdas():
    m = one_block_model([[1.0, 2.0, -1.0], [0.0, 0.0, 0.0]])
    _, g = L.lambda_sum_penalty(m, 0.5)
    assert list(g) == ["act.lambdas"]
    np.testing.assert_array_equal(g["act.lambdas"], [[0.25] * 3, [0.0] * 3])


def test_fresh_network_has_zero_penalty():
    m = build_model("lenet5", "mnist", "lab", sharing="channel").init(0)
    assert L.lambda_sum_penalty(m, 1.0)[0] < 1e-6


def test_uniform_softmax_balanced_labels_zero_bias_grad():
    m = Model([Dense("fc", 3, 4)], (3,), 4, np.float64).init(0)
    m.params["fc.w"][:] = 0.0
    x = np.random.default_rng(0).normal(size=(4, 3))
    logits, caches = m.forward(x, train=True)
    _, g = L.backward_pass(m, logits, caches, np.arange(4))
    assert np.abs(g["fc.b"]).max() <= 1e-10


def test_duplicated_batch_same_gradient(rng):
    m = G.toy_models()["mlp_lab_channel"].init(0)
    x, y = rng.normal(size=(6, 5)), rng.integers(0, 3, 6)
    l1, caches = m.forward(x, train=True)
    _, g1 = L.backward_pass(m, l1, caches, y, 0.1)
    l2, caches = m.forward(np.concatenate([x, x]), train=True)
    _, g2 = L.backward_pass(m, l2, caches, np.concatenate([y, y]), 0.1)
    for n in g1:
        np.testing.assert_allclose(g1[n], g2[n], atol=1e-6)


def test_full_model_gradcheck_mlp():
    r = G.check_model(G.toy_models()["mlp_lab_channel"], "mlp")
    assert r.ok, list(r.lines())


def test_loss_decreases_first_steps(rng):
    from labnet.data import Normalizer
    m = lenet5(dtype=np.float32, act=ActivationFactory("lab", "layer")).init(0)
    # learnable synthetic digits: class k lights up row band k
    n = 50 * 32
    labels = rng.integers(0, 10, n)
    imgs = rng.integers(0, 60, size=(n, 1, 28, 28)).astype(np.uint8)
    for i, k in enumerate(labels):
        imgs[i, 0, 2 + 2 * k:4 + 2 * k, 4:24] = 255
    x = Normalizer.fit(imgs)(imgs)
    opt, losses = Adam(), []
    for step in range(50):
        sl = slice(32 * step, 32 * step + 32)
        logits, caches = m.forward(x[sl], train=True)
        val, g = L.backward_pass(m, logits, caches, labels[sl], 1e-2)
        opt.step(m.params, g, 1e-3, 1e-4, m.decay_mask())
        losses.append(val)
    assert np.mean(losses[-10:]) < np.mean(losses[:10])


# ---------------------------------------------------------------- optim

def test_adam_zero_gradient_fixed_point():
    p = {"w": np.array([1.0, -2.0])}
    Adam().step(p, {"w": np.zeros(2)}, 1e-3)
    assert p["w"].tolist() == [1.0, -2.0]


def test_adam_constant_gradient_step_tends_to_lr():
    p = {"w": np.array([0.0])}
    opt = Adam()
    for _ in range(2000):
        before = p["w"].copy()
        opt.step(p, {"w": np.array([0.3])}, 1e-3)
    assert abs(abs(p["w"][0] - before[0]) - 1e-3) < 1e-6


def test_adam_hand_trace():
    # written out term by term for theta0 = 1, g = 0.5, -0.2, 0.1 and lr = 0.1
    theta, m, v = 1.0, 0.0, 0.0
    for t, g in enumerate([0.5, -0.2, 0.1], start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta -= 0.1 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    p = {"w": np.array([1.0])}
    opt = Adam()
    for g in (0.5, -0.2, 0.1):
        opt.step(p, {"w": np.array([g])}, 0.1)
    assert abs(p["w"][0] - theta) <= 1e-10


def test_weight_decay_skips_rbf_parameters():
    m = G.toy_models()["mlp_lab_channel"].init(0)
    m.params = {n: p + 0.5 for n, p in m.params.items()}
    grads = {n: np.full_like(p, 0.01) for n, p in m.params.items()}
    runs = []
    for wd in (0.0, 1e-4):
        params = {n: p.copy() for n, p in m.params.items()}
        Adam().step(params, grads, 1e-3, wd, m.decay_mask())
        runs.append(params)
    for n in m.params:
        same = runs[0][n].tobytes() == runs[1][n].tobytes()
        assert same == (n.startswith("act1."))


def test_schedules():
    s = lenet_schedule(1e-3, 30)
    assert [s(e) for e in (0, 19, 20, 24, 25, 29)] == [1e-3, 1e-3, 1e-4, 1e-4, 1e-5, 1e-5]
    r = resnet_schedule(1e-3, 200)
    assert [r(e) for e in (0, 99, 100, 130, 150, 175)] == [1e-3, 1e-3, 1e-3, 3e-4, 1e-4, 1e-5]
    assert resnet_schedule(1e-3, 100).drops[0][0] == 50
    assert StepSchedule.parse(1e-3, s.describe()) == s
