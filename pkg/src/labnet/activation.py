"""Learnable activation basis (LAB): a scalar RBF network applied per feature.

Each feature value x is mapped through

    f(x) = clamp(sum_i lam_i * phi(|x - c_i|) + v0 * x + v1, -clip, clip)

with one parameter block per channel, per layer, or per network. The channel
axis of every tensor is axis 1; positions within a channel share a block.

The elementwise kernels come from ``labnet.backend`` (compiled when
available, numpy otherwise).
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import backend as _backend
from . import kernels as K
from .errors import InvalidArgument, ShapeMismatch

DEFAULT_CLIP = 15.0

# re-exported for convenience
available_backends = _backend.available
set_backend = _backend.set_backend
backend = _backend.name


class Sharing(enum.Enum):
    CHANNEL = "channel"
    LAYER = "layer"
    GLOBAL = "global"


@dataclass
class LabParams:
    """One activation's parameter block."""

    kernel: K.KernelSpec
    centroids: np.ndarray
    lambdas: np.ndarray
    v0: float = 1.0
    v1: float = 0.0

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64).reshape(-1)
        self.lambdas = np.asarray(self.lambdas, dtype=np.float64).reshape(-1)
        self.v0 = float(self.v0)
        self.v1 = float(self.v1)
        if self.centroids.size < 1 or self.centroids.shape != self.lambdas.shape:
            raise InvalidArgument("need s >= 1 centroids and as many coefficients")
        if not (np.all(np.isfinite(self.centroids)) and np.all(np.isfinite(self.lambdas))
                and math.isfinite(self.v0) and math.isfinite(self.v1)):
            raise InvalidArgument("LAB parameters must be finite")

    @property
    def s(self):
        return self.centroids.size

    @classmethod
    def identity(cls, kernel, centroids):
        return cls(kernel, centroids, np.zeros(len(centroids)), 1.0, 0.0)

    @property
    def n_params(self):
        return block_parameter_count(self.s)


@dataclass
class LabGrad:
    centroids: np.ndarray
    lambdas: np.ndarray
    v0: float
    v1: float


def block_parameter_count(s):
    """Learnable values in one block: s coefficients, s centroids, slope and bias."""
    return 2 * s + 2


def unclipped_scalar(p, x):
    """Reference scalar evaluation before clipping, via ``kernels.eval``."""
    x = float(x)
    total = p.v0 * x + p.v1
    for c, lam in zip(p.centroids, p.lambdas):
        total += lam * K.eval(p.kernel, abs(x - c))
    return total


def forward_scalar(p, x, clip=DEFAULT_CLIP):
    x = float(x)
    if not math.isfinite(x):
        raise InvalidArgument(f"input must be finite, got {x!r}")
    return float(min(max(unclipped_scalar(p, x), -clip), clip))


# ---------------------------------------------------------------- array level

def _as3d(x):
    x = np.ascontiguousarray(x)
    if x.dtype not in (np.float32, np.float64):
        x = x.astype(np.float64)
    if x.ndim == 0:
        return x.reshape(1, 1, 1)
    if x.ndim == 1:
        return x.reshape(1, -1, 1)
    return x.reshape(x.shape[0], x.shape[1], -1)


def lab_forward(x, centroids, lambdas, v0, v1, kernel, clip=DEFAULT_CLIP):
    """Apply blocks given as arrays (B, s), (B, s), (B,), (B,) to ``x``.

    Returns ``(y, mask)`` where ``mask`` marks elements inside the clip range.
    """
    x3 = _as3d(x)
    B = centroids.shape[0]
    if B not in (1, x3.shape[1]):
        raise ShapeMismatch(f"{B} parameter blocks for {x3.shape[1]} channels")
    impl = _backend.impl
    y, mask = impl.forward(
        x3, _f64(centroids), _f64(lambdas), _f64(v0).reshape(-1), _f64(v1).reshape(-1),
        kernel.code, kernel.degree or 0, float(clip))
    return y.reshape(np.shape(x)), mask


def lab_backward(x, dy, mask, centroids, lambdas, v0, v1, kernel):
    """Gradients for ``lab_forward``: (dx, dcentroids, dlambdas, dv0, dv1)."""
    x3 = _as3d(x)
    dy3 = _as3d(np.asarray(dy, dtype=x3.dtype))
    if dy3.shape != x3.shape:
        raise ShapeMismatch(f"upstream gradient shape {np.shape(dy)} != input shape {np.shape(x)}")
    impl = _backend.impl
    dx, dc, dl, d0, d1 = impl.backward(
        x3, dy3, np.ascontiguousarray(mask, dtype=np.uint8).reshape(x3.shape),
        _f64(centroids), _f64(lambdas), _f64(v0).reshape(-1), _f64(v1).reshape(-1),
        kernel.code, kernel.degree or 0)
    return dx.reshape(np.shape(x)), dc, dl, d0, d1


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


# ------------------------------------------------------------ LabParams level

def stack(pset):
    """Pack a list of LabParams into arrays (centroids, lambdas, v0, v1)."""
    pset = list(pset)
    if not pset:
        raise InvalidArgument("empty parameter set")
    kernel = pset[0].kernel
    if any(p.kernel != kernel or p.s != pset[0].s for p in pset):
        raise InvalidArgument("all blocks of one activation must share kernel and s")
    return (np.stack([p.centroids for p in pset]), np.stack([p.lambdas for p in pset]),
            np.array([p.v0 for p in pset]), np.array([p.v1 for p in pset]))


def _check_pset(pset, sharing, x):
    sharing = Sharing(sharing)
    channels = _as3d(x).shape[1]
    if sharing is Sharing.CHANNEL:
        if len(pset) != channels:
            raise ShapeMismatch(f"channel sharing needs {channels} blocks, got {len(pset)}")
    elif len(pset) != 1:
        raise ShapeMismatch(f"{sharing.value} sharing needs exactly 1 block, got {len(pset)}")


def forward(pset, sharing, x, clip=DEFAULT_CLIP):
    _check_pset(pset, sharing, x)
    c, lam, v0, v1 = stack(pset)
    y, _ = lab_forward(x, c, lam, v0, v1, pset[0].kernel, clip)
    return y


def backward(pset, sharing, x, upstream, clip=DEFAULT_CLIP):
    """Input gradient and one LabGrad per block, summed over every element a block serves."""
    _check_pset(pset, sharing, x)
    c, lam, v0, v1 = stack(pset)
    _, mask = lab_forward(x, c, lam, v0, v1, pset[0].kernel, clip)
    dx, dc, dl, d0, d1 = lab_backward(x, upstream, mask, c, lam, v0, v1, pset[0].kernel)
    grads = [LabGrad(dc[b], dl[b], float(d0[b]), float(d1[b])) for b in range(len(pset))]
    return dx, grads


# ------------------------------------------------------------ curve export

@dataclass
class Curve:
    x: np.ndarray
    y: np.ndarray
    control: list = field(default_factory=list)


def sample_curve(p, lo, hi, n, clip=DEFAULT_CLIP):
    """Sample f on [lo, hi] at ``n`` evenly spaced points plus the (c_i, f(c_i)) control points."""
    xs = np.linspace(lo, hi, int(n))
    ys = np.array([forward_scalar(p, v, clip) for v in xs])
    control = [(float(c), forward_scalar(p, c, clip)) for c in p.centroids]
    return Curve(xs, ys, control)


def write_curve_csv(curve, fh):
    fh.write("x,y\n")
    for a, b in zip(curve.x, curve.y):
        fh.write(f"{a:.10g},{b:.10g}\n")
    fh.write("# control points (c, f(c))\n")
    for a, b in curve.control:
        fh.write(f"# {a:.10g},{b:.10g}\n")
