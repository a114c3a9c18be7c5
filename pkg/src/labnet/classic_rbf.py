"""Single-hidden-layer RBF network (the classical baseline).

Hidden unit p responds with phi(||x - c_p||) (Euclidean distance), outputs are
a linear combination of hidden responses plus a per-output bias. Centroids are
drawn class-wise from the training set and the output layer is fit by linear
least squares.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from . import linalg
from .errors import InvalidArgument, ShapeMismatch


@dataclass
class RbfNetwork:
    centroids: np.ndarray            # (h, m)
    kernel: K.KernelSpec
    output_weights: np.ndarray       # (n, h)
    output_bias: np.ndarray          # (n,)

    def __post_init__(self):
        self.centroids = np.atleast_2d(np.asarray(self.centroids, dtype=np.float64))
        self.output_weights = np.atleast_2d(np.asarray(self.output_weights, dtype=np.float64))
        self.output_bias = np.asarray(self.output_bias, dtype=np.float64).reshape(-1)
        h = self.centroids.shape[0]
        if h < 1 or self.output_weights.shape != (self.output_bias.size, h):
            raise ShapeMismatch("inconsistent RBF network dimensions")

    @property
    def n_hidden(self):
        return self.centroids.shape[0]

    @property
    def n_params(self):
        return self.centroids.size + self.output_weights.size + self.output_bias.size

    @classmethod
    def untrained(cls, centroids, n_outputs, kernel=None):
        centroids = np.atleast_2d(centroids)
        return cls(centroids, kernel or K.KernelSpec.gaussian(),
                   np.zeros((n_outputs, centroids.shape[0])), np.zeros(n_outputs))


def init_centroids(inputs, labels, h, rng):
    """Pick ``h`` training inputs, spread evenly over the classes.

    Each class gets h // n_classes samples; the remaining h % n_classes go to
    the classes in ascending label order, one each. Centroids come out grouped
    by class.
    """
    inputs = np.asarray(inputs)
    labels = np.asarray(labels)
    if h > len(inputs):
        raise InvalidArgument(f"h={h} exceeds the {len(inputs)} training samples")
    classes = np.unique(labels)
    base, extra = divmod(h, len(classes))
    chosen = []
    for j, cls in enumerate(classes):
        want = base + (1 if j < extra else 0)
        idx = np.flatnonzero(labels == cls)
        if len(idx) < want:
            raise InvalidArgument(f"class {cls} has {len(idx)} samples, needs {want}")
        chosen.append(rng.choice(idx, size=want, replace=False))
    sel = np.concatenate(chosen)
    return inputs[sel].reshape(len(sel), -1).astype(np.float64)


def _sq_dist(x, c):
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def hidden(net, inputs, chunk=8192):
    """Hidden-layer responses (N, h)."""
    x = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)
    if x.shape[1] != net.centroids.shape[1]:
        raise ShapeMismatch(f"inputs have {x.shape[1]} features, centroids {net.centroids.shape[1]}")
    out = np.empty((len(x), net.n_hidden))
    for lo in range(0, len(x), chunk):
        out[lo:lo + chunk] = K.phi(net.kernel, np.sqrt(_sq_dist(x[lo:lo + chunk], net.centroids)))
    return out


def fit_output_weights(net, inputs, targets):
    """Least-squares fit of output weights and biases; returns a new network."""
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    if len(inputs) < net.n_hidden + 1:
        raise InvalidArgument(f"need at least h + 1 = {net.n_hidden + 1} samples, got {len(inputs)}")
    H = np.hstack([hidden(net, inputs), np.ones((len(inputs), 1))])
    sol = linalg.lstsq(H, targets)
    return RbfNetwork(net.centroids, net.kernel, sol[:-1].T, sol[-1])


def predict(net, inputs):
    """Class scores for one input (m,) or a batch (N, m)."""
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None]
    y = hidden(net, x) @ net.output_weights.T + net.output_bias
    return y[0] if single else y


def classify(net, inputs):
    return np.argmax(predict(net, inputs), axis=-1)


def one_hot(labels, n_classes):
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def median_nearest_distance(inputs, centroids, sample=5000):
    """Median distance from a training input to its nearest centroid.

    Dividing inputs and centroids by this puts typical distances near 1, where
    the unit-bandwidth Gaussian is neither saturated nor vanishing.
    """
    x = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)[:sample]
    return float(np.median(np.sqrt(_sq_dist(x, centroids).min(axis=1))))


def fit_classifier(inputs, labels, h, rng, n_classes=None, kernel=None):
    """Class-wise centroids plus least-squares readout.

    Returns (net, scale); the network works on ``inputs / scale``.
    """
    x = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)
    labels = np.asarray(labels)
    n_classes = n_classes or int(labels.max()) + 1
    centroids = init_centroids(x, labels, h, rng)
    scale = median_nearest_distance(x, centroids)
    if not scale > 0:
        scale = 1.0
    net = RbfNetwork.untrained(centroids / scale, n_classes, kernel)
    return fit_output_weights(net, x / scale, one_hot(labels, n_classes)), scale
