"""Sequential model container, parameter store and the architectures we train."""
from collections import OrderedDict

import numpy as np

from .. import activation as lab
from ..errors import InvalidArgument, ShapeMismatch
from ..init import InitStrategy
from ..kernels import KernelSpec
from .layers import (BatchNorm, Conv2d, Dense, Flatten, GlobalAvgPool, LabActivation,
                     MaxPool, ReLU, ResidualBlock)

RESNET_DEPTHS = (8, 14, 20, 32, 50)


class Model:
    def __init__(self, layers, input_shape, n_classes, dtype=np.float32, name="model"):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.n_classes = n_classes
        self.dtype = np.dtype(dtype)
        self.name = name
        self.in_shapes = []
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            self.in_shapes.append(shape)
            try:
                shape = layer.out_shape(shape)
            except ShapeMismatch as exc:
                raise ShapeMismatch(f"layer {i} ({layer.name}): {exc}") from None
        if shape != (n_classes,):
            raise ShapeMismatch(f"model output shape {shape} != ({n_classes},)")
        self.specs = OrderedDict()
        for layer in self.layers:
            for spec in layer.param_specs():
                self.specs.setdefault(spec.name, spec)
        self.params = {}
        self.buffers = {}

    # ---------------------------------------------------------------- setup

    def init(self, seed):
        rng = np.random.default_rng(seed)
        self.params = {n: np.asarray(s.init(rng, s.shape), dtype=self.dtype).reshape(s.shape)
                       for n, s in self.specs.items()}
        self.buffers = {}
        for layer in self.layers:
            for name, shape, fill in layer.buffer_specs():
                self.buffers[name] = np.full(shape, fill, dtype=np.float64)
        return self

    def astype(self, dtype):
        self.dtype = np.dtype(dtype)
        self.params = {k: v.astype(dtype) for k, v in self.params.items()}
        return self

    # ------------------------------------------------------------ bookkeeping

    def all_layers(self):
        return [sub for layer in self.layers for sub in layer.sublayers()]

    def lab_layers(self):
        return [l for l in self.all_layers() if isinstance(l, LabActivation)]

    def kinds(self):
        return {n: s.kind for n, s in self.specs.items()}

    def rbf_names(self):
        return [n for n, s in self.specs.items() if s.kind == "rbf"]

    def lambda_names(self):
        return [n for n in self.rbf_names() if n.endswith(".lambdas")]

    def decay_mask(self):
        """True for parameters that receive L2 weight decay (everything but RBF blocks)."""
        return {n: s.kind != "rbf" for n, s in self.specs.items()}

    def n_blocks(self):
        """Number of distinct LAB parameter blocks after sharing."""
        return sum(self.params[n].shape[0] if n in self.params else self.specs[n].shape[0]
                   for n in self.lambda_names())

    def parameter_count(self):
        return int(sum(int(np.prod(s.shape)) for s in self.specs.values()))

    def lab_blocks(self):
        """(selector, layer, row) for every distinct LAB block, in network order."""
        out, seen = [], set()
        for layer in self.lab_layers():
            if layer.prefix in seen:
                continue
            seen.add(layer.prefix)
            for row in range(layer.blocks):
                sel = layer.prefix if layer.blocks == 1 else f"{layer.prefix}:{row}"
                out.append((sel, layer, row))
        return out

    # ------------------------------------------------------------ compute

    def forward(self, x, train=False, update_stats=None):
        """Logits and per-layer caches. BatchNorm uses batch statistics when ``train``."""
        if update_stats is None:
            update_stats = train
        state = self.buffers if update_stats else (dict(self.buffers) if train else self.buffers)
        x = np.asarray(x, dtype=self.dtype)
        caches = []
        for i, layer in enumerate(self.layers):
            if x.shape[1:] != self.in_shapes[i]:
                raise ShapeMismatch(f"layer {i} ({layer.name}): expected input {self.in_shapes[i]}, "
                                    f"got {x.shape[1:]}")
            x, cache = layer.forward(x, self.params, state, train)
            caches.append(cache)
        return x, caches

    def backward(self, dlogits, caches):
        grads = {}
        d = dlogits
        for i in range(len(self.layers) - 1, -1, -1):
            d = self.layers[i].backward(d, caches[i], self.params, grads, need_dx=i > 0)
        for n, p in self.params.items():
            if n not in grads:
                grads[n] = np.zeros_like(p)
        return grads

    def branches(self, caches):
        out = []
        for layer, c in zip(self.layers, caches):
            out.extend(layer.branches(c))
        return out

    def predict(self, x, batch_size=1000):
        out = []
        for lo in range(0, len(x), batch_size):
            logits, _ = self.forward(x[lo:lo + batch_size], train=False)
            out.append(logits)
        return np.concatenate(out) if out else np.zeros((0, self.n_classes), dtype=self.dtype)


# ------------------------------------------------------------------ builders

class ActivationFactory:
    """Creates the activation at each nonlinearity position of an architecture."""

    def __init__(self, activation="relu", sharing=lab.Sharing.LAYER, kernel=None, s=3,
                 init=InitStrategy.HOCKEY_STICK, r=2.0, clip=lab.DEFAULT_CLIP):
        if activation not in ("relu", "lab"):
            raise InvalidArgument(f"unknown activation {activation!r}")
        self.activation = activation
        self.sharing = lab.Sharing(sharing)
        self.kernel = kernel or KernelSpec.spline(3)
        self.s, self.init, self.r, self.clip = s, InitStrategy(init), r, clip

    @property
    def is_lab(self):
        return self.activation == "lab"

    def __call__(self, name, channels):
        if not self.is_lab:
            return ReLU(name)
        if self.sharing is lab.Sharing.GLOBAL:
            prefix, blocks = "lab_global", 1
        elif self.sharing is lab.Sharing.LAYER:
            prefix, blocks = name, 1
        else:
            prefix, blocks = name, channels
        return LabActivation(name, channels, prefix, blocks, self.kernel, self.s, self.init, self.r, self.clip)


def lenet5(input_shape=(1, 28, 28), n_classes=10, act=None, dtype=np.float32):
    """conv(6, 5x5, same) - act - pool - conv(16, 5x5) - act - pool - 120 - act - 84 - act - classes."""
    act = act or ActivationFactory()
    c, h, w = input_shape
    h2, w2 = ((h // 2) - 4) // 2, ((w // 2) - 4) // 2
    layers = [
        Conv2d("conv1", c, 6, 5, pad=2), act("act1", 6), MaxPool("pool1"),
        Conv2d("conv2", 6, 16, 5), act("act2", 16), MaxPool("pool2"),
        Flatten("flatten"),
        Dense("fc1", 16 * h2 * w2, 120), act("act3", 120),
        Dense("fc2", 120, 84), act("act4", 84),
        Dense("fc3", 84, n_classes),
    ]
    return Model(layers, input_shape, n_classes, dtype, "lenet5")


def resnet(depth, input_shape=(3, 32, 32), n_classes=10, act=None, dtype=np.float32):
    """CIFAR-style ResNet with 3 stages of (depth - 2) / 6 basic blocks (16, 32, 64 filters)."""
    if depth not in RESNET_DEPTHS:
        raise InvalidArgument(f"resnet depth must be one of {RESNET_DEPTHS}, got {depth}")
    act = act or ActivationFactory()
    per_stage = (depth - 2) // 6
    affine = not act.is_lab
    layers = [Conv2d("conv0", input_shape[0], 16, 3, 1, 1, bias=False),
              BatchNorm("bn0", 16, affine), act("act0", 16)]
    c_in = 16
    for stage, width in enumerate((16, 32, 64)):
        for b in range(per_stage):
            stride = 2 if stage > 0 and b == 0 else 1
            layers.append(ResidualBlock(f"s{stage}b{b}", c_in, width, stride, act, False, affine))
            c_in = width
    layers += [GlobalAvgPool("gap"), Dense("fc", 64, n_classes)]
    return Model(layers, input_shape, n_classes, dtype, f"resnet-{depth}")


DATASET_SHAPES = {
    "mnist": ((1, 28, 28), 10),
    "cifar10": ((3, 32, 32), 10),
    "cifar100": ((3, 32, 32), 100),
}


def build_model(name, dataset="mnist", activation="relu", dtype=np.float32, input_shape=None,
                n_classes=None, **act_kwargs):
    """Build an uninitialised model; call ``.init(seed)`` before use."""
    shape, classes = DATASET_SHAPES.get(dataset, (None, None))
    input_shape = tuple(input_shape or shape)
    n_classes = n_classes or classes
    act = ActivationFactory(activation, **act_kwargs)
    if name == "lenet5":
        return lenet5(input_shape, n_classes, act, dtype)
    if name.startswith("resnet"):
        try:
            depth = int(name.split("-", 1)[1])
        except (IndexError, ValueError):
            raise InvalidArgument(f"bad resnet name {name!r}; use resnet-N") from None
        return resnet(depth, input_shape, n_classes, act, dtype)
    raise InvalidArgument(f"unknown model {name!r}")
