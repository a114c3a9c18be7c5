"""Layers with explicit forward and backward passes.

Parameters live in a flat ``dict[str, ndarray]`` owned by the model; a layer
only knows the names it reads. Two layers that name the same parameter share
it, and their gradients add up in the gradient dict. Tensors are NCHW for
images and (N, features) after flattening, so the channel axis is always 1.
"""
import numpy as np

from .. import activation as lab
from .. import backend
from ..errors import ShapeMismatch
from ..init import InitStrategy, init_block


class ParamSpec:
    """Declaration of one parameter: name, shape, kind and an initializer ``init(rng, shape)``."""

    __slots__ = ("name", "shape", "kind", "init")

    def __init__(self, name, shape, kind, init):
        self.name, self.shape, self.kind, self.init = name, tuple(shape), kind, init


def glorot(fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return lambda rng, shape: rng.uniform(-limit, limit, size=shape)


def zeros(rng, shape):
    return np.zeros(shape)


def ones(rng, shape):
    return np.ones(shape)


class Layer:
    kind = "layer"
    name = ""

    def param_specs(self):
        return []

    def buffer_specs(self):
        return []

    def out_shape(self, shape):
        return shape

    def forward(self, x, P, state, train):
        raise NotImplementedError

    def backward(self, dy, cache, P, G, need_dx=True):
        raise NotImplementedError

    def branches(self, cache):
        """Arrays recording which side of every kink each element took (for gradient checks)."""
        return []

    def sublayers(self):
        return [self]


def _acc(G, name, g):
    if name in G:
        G[name] += g
    else:
        G[name] = g


class Dense(Layer):
    kind = "dense"

    def __init__(self, name, n_in, n_out, bias=True):
        self.name, self.n_in, self.n_out, self.bias = name, n_in, n_out, bias

    def param_specs(self):
        specs = [ParamSpec(f"{self.name}.w", (self.n_in, self.n_out), "weight", glorot(self.n_in, self.n_out))]
        if self.bias:
            specs.append(ParamSpec(f"{self.name}.b", (self.n_out,), "bias", zeros))
        return specs

    def out_shape(self, shape):
        if shape != (self.n_in,):
            raise ShapeMismatch(f"{self.name}: expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def forward(self, x, P, state, train):
        y = x @ P[f"{self.name}.w"]
        if self.bias:
            y += P[f"{self.name}.b"]
        return y, x

    def backward(self, dy, x, P, G, need_dx=True):
        _acc(G, f"{self.name}.w", x.T @ dy)
        if self.bias:
            _acc(G, f"{self.name}.b", dy.sum(0))
        return dy @ P[f"{self.name}.w"].T if need_dx else None


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, name, c_in, c_out, size, stride=1, pad=0, bias=True):
        self.name, self.c_in, self.c_out = name, c_in, c_out
        self.size, self.stride, self.pad, self.bias = size, stride, pad, bias

    def param_specs(self):
        k = self.size
        specs = [ParamSpec(f"{self.name}.w", (self.c_out, self.c_in, k, k), "weight",
                           glorot(self.c_in * k * k, self.c_out * k * k))]
        if self.bias:
            specs.append(ParamSpec(f"{self.name}.b", (self.c_out,), "bias", zeros))
        return specs

    def _out_hw(self, h, w):
        k, s, p = self.size, self.stride, self.pad
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def out_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.c_in:
            raise ShapeMismatch(f"{self.name}: expects ({self.c_in}, H, W), got {shape}")
        ho, wo = self._out_hw(shape[1], shape[2])
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"{self.name}: input {shape} too small for a {self.size}x{self.size} filter")
        return (self.c_out, ho, wo)

    def forward(self, x, P, state, train):
        n, c, h, w = x.shape
        ho, wo = self._out_hw(h, w)
        cols = backend.impl.im2col(np.ascontiguousarray(x), self.size, self.stride, self.pad, ho, wo)
        wmat = P[f"{self.name}.w"].reshape(self.c_out, -1)
        y = cols @ wmat.T
        if self.bias:
            y += P[f"{self.name}.b"]
        y = np.ascontiguousarray(y.reshape(n, ho, wo, self.c_out).transpose(0, 3, 1, 2))
        return y, (cols, (n, c, h, w))

    def backward(self, dy, cache, P, G, need_dx=True):
        cols, (n, c, h, w) = cache
        ho, wo = dy.shape[2], dy.shape[3]
        dmat = dy.transpose(0, 2, 3, 1).reshape(-1, self.c_out)
        wshape = P[f"{self.name}.w"].shape
        _acc(G, f"{self.name}.w", (dmat.T @ cols).reshape(wshape))
        if self.bias:
            _acc(G, f"{self.name}.b", dmat.sum(0))
        if not need_dx:
            return None
        dcols = np.ascontiguousarray(dmat @ P[f"{self.name}.w"].reshape(self.c_out, -1))
        return backend.impl.col2im(dcols, n, c, h, w, self.size, self.stride, self.pad, ho, wo)


class MaxPool(Layer):
    """Non-overlapping max pooling; trailing rows/columns that do not fill a window are dropped."""

    kind = "maxpool"

    def __init__(self, name, size=2):
        self.name, self.size = name, size

    def out_shape(self, shape):
        c, h, w = shape
        return (c, h // self.size, w // self.size)

    def forward(self, x, P, state, train):
        y, arg = backend.impl.maxpool_forward(np.ascontiguousarray(x), self.size)
        return y, (arg, x.shape)

    def backward(self, dy, cache, P, G, need_dx=True):
        arg, (n, c, h, w) = cache
        return backend.impl.maxpool_backward(np.ascontiguousarray(dy), arg, self.size, h, w)

    def branches(self, cache):
        return [cache[0]]


class BatchNorm(Layer):
    """Batch normalisation over every axis except the channel axis 1.

    ``affine=False`` drops the scale and offset. Running statistics follow
    ``running = momentum * running + (1 - momentum) * batch``.
    """

    kind = "batchnorm"

    def __init__(self, name, channels, affine=True, momentum=0.9, eps=1e-5):
        self.name, self.channels, self.affine = name, channels, affine
        self.momentum, self.eps = momentum, eps

    def param_specs(self):
        if not self.affine:
            return []
        return [ParamSpec(f"{self.name}.gamma", (self.channels,), "bn", ones),
                ParamSpec(f"{self.name}.beta", (self.channels,), "bn", zeros)]

    def buffer_specs(self):
        return [(f"{self.name}.mean", (self.channels,), 0.0), (f"{self.name}.var", (self.channels,), 1.0)]

    def out_shape(self, shape):
        if shape[0] != self.channels:
            raise ShapeMismatch(f"{self.name}: expects {self.channels} channels, got {shape}")
        return shape

    def _bshape(self, x):
        return (1, self.channels) + (1,) * (x.ndim - 2)

    def forward(self, x, P, state, train):
        axes = (0,) + tuple(range(2, x.ndim))
        bs = self._bshape(x)
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            if state is not None:
                m = self.momentum
                state[f"{self.name}.mean"] = m * state[f"{self.name}.mean"] + (1 - m) * mean
                state[f"{self.name}.var"] = m * state[f"{self.name}.var"] + (1 - m) * var
        else:
            mean = state[f"{self.name}.mean"].astype(x.dtype)
            var = state[f"{self.name}.var"].astype(x.dtype)
        inv = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = (x - mean.reshape(bs)) * inv.reshape(bs)
        y = xhat
        if self.affine:
            y = xhat * P[f"{self.name}.gamma"].reshape(bs) + P[f"{self.name}.beta"].reshape(bs)
        return y, (xhat, inv, train)

    def backward(self, dy, cache, P, G, need_dx=True):
        xhat, inv, train = cache
        axes = (0,) + tuple(range(2, dy.ndim))
        bs = self._bshape(dy)
        if self.affine:
            _acc(G, f"{self.name}.gamma", (dy * xhat).sum(axis=axes))
            _acc(G, f"{self.name}.beta", dy.sum(axis=axes))
            dxhat = dy * P[f"{self.name}.gamma"].reshape(bs)
        else:
            dxhat = dy
        if not need_dx:
            return None
        if not train:
            return dxhat * inv.reshape(bs)
        m = dy.size // self.channels
        s1 = dxhat.sum(axis=axes).reshape(bs)
        s2 = (dxhat * xhat).sum(axis=axes).reshape(bs)
        return (inv.reshape(bs) / m) * (m * dxhat - s1 - xhat * s2)


class ReLU(Layer):
    kind = "relu"

    def __init__(self, name):
        self.name = name

    def forward(self, x, P, state, train):
        mask = x > 0
        return x * mask, mask

    def backward(self, dy, mask, P, G, need_dx=True):
        return dy * mask

    def branches(self, cache):
        return [cache]


class Flatten(Layer):
    kind = "flatten"

    def __init__(self, name):
        self.name = name

    def out_shape(self, shape):
        return (int(np.prod(shape)),)

    def forward(self, x, P, state, train):
        return x.reshape(len(x), -1), x.shape

    def backward(self, dy, shape, P, G, need_dx=True):
        return dy.reshape(shape)


class GlobalAvgPool(Layer):
    kind = "gap"

    def __init__(self, name):
        self.name = name

    def out_shape(self, shape):
        return (shape[0],)

    def forward(self, x, P, state, train):
        return x.mean(axis=(2, 3)), x.shape

    def backward(self, dy, shape, P, G, need_dx=True):
        n, c, h, w = shape
        return np.broadcast_to(dy[:, :, None, None] / (h * w), shape).astype(dy.dtype)


class LabActivation(Layer):
    """Learnable RBF activation. ``prefix`` names the parameter block(s) it reads.

    ``blocks`` is the number of rows in each parameter array: the channel count
    for per-channel sharing, 1 otherwise. Layers given the same prefix share
    one block.
    """

    kind = "lab"

    def __init__(self, name, channels, prefix, blocks, kernel, s, strategy=InitStrategy.HOCKEY_STICK,
                 r=2.0, clip=lab.DEFAULT_CLIP):
        self.name, self.channels, self.prefix, self.blocks = name, channels, prefix, blocks
        self.kernel, self.s, self.strategy, self.r, self.clip = kernel, s, InitStrategy(strategy), r, clip

    def _names(self):
        p = self.prefix
        return f"{p}.centroids", f"{p}.lambdas", f"{p}.v0", f"{p}.v1"

    def param_specs(self):
        rows = []

        def draw(rng):
            if not rows:
                for _ in range(self.blocks):
                    rows.append(init_block(self.strategy, self.s, self.kernel, self.r, rng))
            return rows

        c, l, v0, v1 = self._names()
        B, s = self.blocks, self.s
        return [
            ParamSpec(c, (B, s), "rbf", lambda rng, shape: np.stack([p.centroids for p in draw(rng)])),
            ParamSpec(l, (B, s), "rbf", lambda rng, shape: np.stack([p.lambdas for p in draw(rng)])),
            ParamSpec(v0, (B,), "rbf", lambda rng, shape: np.array([p.v0 for p in draw(rng)])),
            ParamSpec(v1, (B,), "rbf", lambda rng, shape: np.array([p.v1 for p in draw(rng)])),
        ]

    def out_shape(self, shape):
        if self.blocks > 1 and shape[0] != self.blocks:
            raise ShapeMismatch(f"{self.name}: {self.blocks} blocks for {shape[0]} channels")
        return shape

    def forward(self, x, P, state, train):
        c, l, v0, v1 = (P[n] for n in self._names())
        y, mask = lab.lab_forward(x, c, l, v0, v1, self.kernel, self.clip)
        return y, (x, mask, c)

    def backward(self, dy, cache, P, G, need_dx=True):
        x, mask, _ = cache
        names = self._names()
        c, l, v0, v1 = (P[n] for n in names)
        dx, dc, dl, d0, d1 = lab.lab_backward(x, dy, mask, c, l, v0, v1, self.kernel)
        for name, g in zip(names, (dc, dl, d0, d1)):
            _acc(G, name, g.astype(P[name].dtype))
        return dx

    def branches(self, cache):
        x, mask, c = cache
        x3 = x.reshape(x.shape[0], x.shape[1], -1)
        return [mask, np.sign(x3[..., None] - c[None, :, None, :])]

    def params_for(self, P, block=0):
        """The LabParams of one block, for inspection and curve export."""
        c, l, v0, v1 = (P[n] for n in self._names())
        return lab.LabParams(self.kernel, c[block], l[block], v0[block], v1[block])


class ResidualBlock(Layer):
    """Basic two-convolution residual block.

    When the block changes resolution or width the shortcut is a strided 1x1
    convolution followed by batch normalisation; otherwise it is the identity.
    """

    kind = "residual"

    def __init__(self, name, c_in, c_out, stride, make_act, conv_bias=False, bn_affine=True):
        self.name, self.c_in, self.c_out, self.stride = name, c_in, c_out, stride
        self.conv1 = Conv2d(f"{name}.conv1", c_in, c_out, 3, stride, 1, conv_bias)
        self.bn1 = BatchNorm(f"{name}.bn1", c_out, bn_affine)
        self.act1 = make_act(f"{name}.act1", c_out)
        self.conv2 = Conv2d(f"{name}.conv2", c_out, c_out, 3, 1, 1, conv_bias)
        self.bn2 = BatchNorm(f"{name}.bn2", c_out, bn_affine)
        self.act2 = make_act(f"{name}.act2", c_out)
        self.body = [self.conv1, self.bn1, self.act1, self.conv2, self.bn2]
        self.project = stride != 1 or c_in != c_out
        self.short = []
        if self.project:
            self.short = [Conv2d(f"{name}.proj", c_in, c_out, 1, stride, 0, conv_bias),
                          BatchNorm(f"{name}.proj_bn", c_out, bn_affine)]

    def sublayers(self):
        return self.body + self.short + [self.act2]

    def param_specs(self):
        return [p for l in self.sublayers() for p in l.param_specs()]

    def buffer_specs(self):
        return [b for l in self.sublayers() for b in l.buffer_specs()]

    def out_shape(self, shape):
        out = shape
        for l in self.body:
            out = l.out_shape(out)
        sc = shape
        for l in self.short:
            sc = l.out_shape(sc)
        if sc != out:
            raise ShapeMismatch(f"{self.name}: shortcut shape {sc} != body shape {out}")
        return self.act2.out_shape(out)

    @staticmethod
    def _run(layers, h, P, state, train, caches):
        for l in layers:
            h, c = l.forward(h, P, state, train)
            caches.append(c)
        return h

    def forward(self, x, P, state, train):
        body_c, short_c = [], []
        h = self._run(self.body, x, P, state, train, body_c)
        h = h + self._run(self.short, x, P, state, train, short_c)
        y, act_c = self.act2.forward(h, P, state, train)
        return y, (body_c, short_c, act_c)

    def backward(self, dy, cache, P, G, need_dx=True):
        body_c, short_c, act_c = cache
        dh = self.act2.backward(dy, act_c, P, G)
        d = dh
        for l, c in zip(reversed(self.body), reversed(body_c)):
            d = l.backward(d, c, P, G)
        ds = dh
        for l, c in zip(reversed(self.short), reversed(short_c)):
            ds = l.backward(ds, c, P, G)
        return d + ds if need_dx else None

    def branches(self, cache):
        body_c, short_c, act_c = cache
        out = []
        for l, c in zip(self.body + self.short + [self.act2], body_c + short_c + [act_c]):
            out.extend(l.branches(c))
        return out
