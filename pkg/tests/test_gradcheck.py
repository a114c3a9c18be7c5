import numpy as np

from labnet import backend
from labnet import gradcheck as G


def test_kernels_scope():
    r = G.run("kernels")
    assert r.ok and all(n.startswith("kernels/") for n in r.groups)
    assert len(r.groups) == 9


def test_activation_scope():
    r = G.run("activation")
    assert r.ok
    for part in ("input", "centroids", "lambdas", "v0", "v1"):
        assert any(n.endswith("/" + part) for n in r.groups)


def test_every_layer_kind_covered():
    kinds = set()
    for m in G.toy_models().values():
        kinds |= {type(l).__name__ for l in m.all_layers() + m.layers}
    assert kinds >= {"Dense", "Conv2d", "MaxPool", "BatchNorm", "ReLU", "Flatten", "GlobalAvgPool",
                     "LabActivation", "ResidualBlock"}


def test_kink_exclusion():
    # the input sits exactly on a centroid, so sign(x - c) flips under +-h and the entry is skipped
    from labnet.kernels import KernelSpec
    from labnet.nn import loss as L
    from labnet.nn.layers import Dense
    from labnet.nn.model import ActivationFactory, Model
    act = ActivationFactory("lab", "layer", KernelSpec.spline(1), 3)
    m = Model([Dense("fc", 1, 1), act("act", 1), Dense("out", 1, 2)], (1,), 2, np.float64).init(0)
    G._perturb_lab(m, np.random.default_rng(0))
    m.params["fc.w"][:] = 1.0
    m.params["fc.b"][:] = 0.0
    m.params["act.centroids"][0, 1] = 0.0
    x, y = np.zeros((1, 1)), np.array([1])

    def objective(_=None):
        logits, caches = m.forward(x, train=True)
        return L.loss(logits, y, m), m.branches(caches)

    logits, caches = m.forward(x, train=True)
    _, grads = L.backward_pass(m, logits, caches, y)
    r = G.Report()
    G._fd_compare(r.group("c"), m.params["act.centroids"], grads["act.centroids"], objective, objective()[1])
    assert r.groups["c"].excluded == 1 and r.groups["c"].checked == 2
    assert r.ok


class _Corrupt:
    """Backend wrapper whose coefficient gradient is off by 1%."""

    def __init__(self, inner):
        self.inner = inner

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def backward(self, *args):
        dx, dc, dl, d0, d1 = self.inner.backward(*args)
        return dx, dc, dl * 1.01, d0, d1


def test_corrupted_backward_is_caught(monkeypatch):
    monkeypatch.setattr(backend, "impl", _Corrupt(backend.impl))
    r = G.run("activation")
    assert not r.ok
    assert r.failures and all("lambdas" in n for n in r.failures)
