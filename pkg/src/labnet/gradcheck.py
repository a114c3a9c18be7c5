"""Finite-difference verification of every hand-written derivative.

All checks run in float64 with central differences. An entry is skipped
(and counted as excluded) when the +h or -h evaluation lands on a different
side of a kink than the base point: ReLU and clip masks, max-pool winners,
the sign of x - c inside an RBF, and the sign of each block's coefficient sum.
"""
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import activation as lab
from . import kernels as K
from .init import InitStrategy
from .kernels import KernelSpec
from .nn import loss as L
from .nn.layers import BatchNorm, Conv2d, Dense, Flatten, GlobalAvgPool, MaxPool, ReLU, ResidualBlock
from .nn.model import ActivationFactory, Model, resnet

TOLERANCE = 1e-4
FLOOR = 1e-5          # gradients smaller than this are compared in absolute terms
STEP = 1e-6
KERNEL_RADII = (0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


def rel_err(a, b, floor=FLOOR):
    return abs(a - b) / max(abs(a), abs(b), floor)


@dataclass
class Group:
    worst: float = 0.0
    checked: int = 0
    excluded: int = 0

    def add(self, err):
        self.worst = max(self.worst, err)
        self.checked += 1


@dataclass
class Report:
    tolerance: float = TOLERANCE
    groups: "OrderedDict[str, Group]" = field(default_factory=OrderedDict)

    def group(self, name):
        return self.groups.setdefault(name, Group())

    @property
    def failures(self):
        return [n for n, g in self.groups.items() if g.worst > self.tolerance]

    @property
    def ok(self):
        return not self.failures

    def lines(self):
        for name, g in self.groups.items():
            status = "ok" if g.worst <= self.tolerance else "FAIL"
            yield (f"{name:<44s} worst_rel_err={g.worst:.3e} checked={g.checked:<5d} "
                   f"excluded={g.excluded:<3d} {status}")


def all_kernels():
    return [KernelSpec.gaussian(), KernelSpec.multiquadric()] + [KernelSpec.spline(k) for k in range(1, 8)]


# ------------------------------------------------------------------ kernels

def check_kernels(report=None):
    report = report or Report()
    for spec in all_kernels():
        g = report.group(f"kernels/{spec.name}")
        for r in KERNEL_RADII:
            h = STEP * max(1.0, r)
            fd = (K.eval(spec, r + h) - K.eval(spec, r - h)) / (2 * h)
            g.add(rel_err(K.eval_deriv(spec, r), fd, floor=1e-300))
    return report


# --------------------------------------------------------------- activation

def _random_block(rng, kernel, s, channels):
    cen = np.sort(rng.uniform(-2, 2, size=(channels, s)), axis=1)
    lam = rng.normal(0, 0.3, size=(channels, s))
    return cen, lam, rng.normal(1, 0.3, size=channels), rng.normal(0, 0.3, size=channels)


def check_activation(report=None, draws=20, seed=0):
    """Backward of the LAB activation against differences of sum(w * f(x))."""
    report = report or Report()
    rng = np.random.default_rng(seed)
    specs = [KernelSpec.spline(3), KernelSpec.spline(2), KernelSpec.gaussian(), KernelSpec.multiquadric()]
    for spec in specs:
        for d in range(draws):
            channels = 3 if d % 2 else 1
            arrays = list(_random_block(rng, spec, 3, channels))
            x = rng.normal(0, 1.5, size=(2, 3, 3))
            w = rng.normal(size=x.shape)

            def objective(arrs, xx):
                y, mask = lab.lab_forward(xx, *arrs, spec)
                return float((w * y).sum()), _act_branches(xx, arrs[0], mask)

            base, sig = objective(arrays, x)
            _, mask = lab.lab_forward(x, *arrays, spec)
            dx, dc, dl, d0, d1 = lab.lab_backward(x, w, mask, *arrays, spec)
            _fd_compare(report.group(f"activation/{spec.name}/input"), x, dx,
                        lambda xx: objective(arrays, xx), sig)
            for idx, (name, grad) in enumerate(zip(("centroids", "lambdas", "v0", "v1"), (dc, dl, d0, d1))):
                def obj_i(arr, idx=idx):
                    arrs = list(arrays)
                    arrs[idx] = arr
                    return objective(arrs, x)
                _fd_compare(report.group(f"activation/{spec.name}/{name}"), arrays[idx], grad, obj_i, sig)
    return report


def _act_branches(x, cen, mask):
    x3 = x.reshape(x.shape[0], x.shape[1], -1)
    return [mask, np.sign(x3[..., None] - cen[None, :, None, :])]


def _same(a, b):
    return len(a) == len(b) and all(np.array_equal(u, v) for u, v in zip(a, b))


def _fd_compare(group, arr, grad, objective, base_sig, entries=None, h=STEP):
    """Central differences over entries of ``arr`` (mutated in place and restored)."""
    flat = arr.reshape(-1)
    gflat = np.asarray(grad).reshape(-1)
    idxs = range(flat.size) if entries is None else entries
    for i in idxs:
        old = flat[i]
        flat[i] = old + h
        fp, sp = objective(arr)
        flat[i] = old - h
        fm, sm = objective(arr)
        flat[i] = old
        if not (_same(sp, base_sig) and _same(sm, base_sig)):
            group.excluded += 1
            continue
        group.add(rel_err(float(gflat[i]), (fp - fm) / (2 * h)))


# -------------------------------------------------------------------- models

def toy_models():
    """Small float64 models covering every layer kind and sharing mode."""
    spline = KernelSpec.spline(3)
    models = OrderedDict()
    act = ActivationFactory("lab", "channel", spline, 3)
    models["mlp_lab_channel"] = Model([Dense("fc1", 5, 4), act("act1", 4), Dense("fc2", 4, 3)],
                                      (5,), 3, np.float64, "mlp")
    act = ActivationFactory("lab", "global", KernelSpec.gaussian(), 3, InitStrategy.RANDOM_Y)
    models["cnn_lab_global"] = Model([
        Conv2d("conv1", 1, 3, 3, pad=1), act("act1", 3), MaxPool("pool1"),
        Conv2d("conv2", 3, 4, 3, stride=1), act("act2", 4), Flatten("flat"),
        Dense("fc", 4, 3), act("act3", 3), Dense("out", 3, 3)], (1, 6, 6), 3, np.float64, "cnn")
    act = ActivationFactory("lab", "layer", KernelSpec.multiquadric(), 3)
    models["bn_lab_layer"] = Model([
        Conv2d("conv1", 2, 3, 3, stride=2, pad=1), BatchNorm("bn1", 3, affine=True), act("act1", 3),
        Conv2d("conv2", 3, 3, 1), BatchNorm("bn2", 3, affine=False), ReLU("relu"),
        GlobalAvgPool("gap"), Dense("fc", 3, 4), BatchNorm("bn3", 4), act("act2", 4), Dense("out", 4, 3)],
        (2, 6, 6), 3, np.float64, "bn")
    act = ActivationFactory("lab", "channel", KernelSpec.spline(2), 3)
    models["residual_lab_channel"] = Model([
        Conv2d("conv0", 2, 2, 3, pad=1, bias=False), BatchNorm("bn0", 2, affine=False), act("act0", 2),
        ResidualBlock("b0", 2, 2, 1, act, bn_affine=False), ResidualBlock("b1", 2, 4, 2, act, bn_affine=False),
        GlobalAvgPool("gap"), Dense("fc", 4, 3)], (2, 4, 4), 3, np.float64, "residual")
    models["resnet8_lab_channel"] = resnet(8, (3, 8, 8), 3, ActivationFactory("lab", "channel", spline, 3),
                                           np.float64)
    models["resnet8_relu"] = resnet(8, (3, 8, 8), 3, ActivationFactory("relu"), np.float64)
    return models


def _perturb_lab(model, rng):
    """Move LAB blocks off their symmetric initial state so every derivative is exercised."""
    for n in model.rbf_names():
        model.params[n] = model.params[n] + rng.normal(0, 0.05, size=model.params[n].shape)


def check_model(model, name, report=None, seed=0, batch=4, lambda_sum=0.1, max_entries=12):
    report = report or Report()
    rng = np.random.default_rng(seed)
    model.init(seed)
    _perturb_lab(model, rng)
    x = rng.normal(0, 1, size=(batch,) + model.input_shape)
    y = rng.integers(0, model.n_classes, size=batch)

    def objective(_arr=None):
        logits, caches = model.forward(x, train=True, update_stats=False)
        val = L.loss(logits, y, model, lambda_sum)
        sig = model.branches(caches) + [np.sign(L.block_sums(model))]
        return val, sig

    logits, caches = model.forward(x, train=True, update_stats=False)
    _, grads = L.backward_pass(model, logits, caches, y, lambda_sum)
    _, sig = objective()
    for pname, p in model.params.items():
        entries = None
        if p.size > max_entries:
            entries = rng.choice(p.size, size=max_entries, replace=False)
        _fd_compare(report.group(f"model/{name}/{pname}"), p, grads[pname], objective, sig, entries)
    return report


def check_models(report=None, seed=0):
    report = report or Report()
    for name, model in toy_models().items():
        check_model(model, name, report, seed)
    return report


SCOPES = ("kernels", "activation", "full-model")


def run(scope="full-model", seed=0):
    if scope not in SCOPES:
        raise ValueError(f"scope must be one of {SCOPES}")
    report = Report()
    check_kernels(report)
    if scope in ("activation", "full-model"):
        check_activation(report, seed=seed)
    if scope == "full-model":
        check_models(report, seed=seed)
    return report
