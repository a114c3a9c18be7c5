"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_lab.py [--repeat N]

Times the LAB activation (forward, backward), im2col/col2im, max pooling and
one LeNet-5 training step at MNIST batch size, for each available backend.
"""
import argparse
import timeit

import numpy as np

from labnet import backend
from labnet.data import Normalizer
from labnet.kernels import KernelSpec
from labnet.nn import loss as L
from labnet.nn.model import build_model
from labnet.nn.optim import Adam


def cases():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(128, 6, 28, 28)).astype(np.float32)
    dy = rng.normal(size=x.shape).astype(np.float32)
    cen = np.tile(np.linspace(-2, 2, 3), (1, 1))
    lam = np.array([[1 / 32, -1 / 16, 1 / 32]])
    v0, v1 = np.array([0.5]), np.array([-0.5])
    spline = KernelSpec.spline(3)
    imgs = rng.normal(size=(128, 6, 14, 14)).astype(np.float32)
    model = build_model("lenet5", "mnist", "lab").init(0)
    batch = rng.integers(0, 256, (128, 1, 28, 28)).astype(np.uint8)
    xb = Normalizer.fit(batch)(batch)
    yb = rng.integers(0, 10, 128)
    opt = Adam()

    def lab_forward():
        backend.impl.forward(x.reshape(128, 6, -1), cen, lam, v0, v1, spline.code, 3, 15.0)

    _, mask = backend.impl.forward(x.reshape(128, 6, -1), cen, lam, v0, v1, spline.code, 3, 15.0)

    def lab_backward():
        backend.impl.backward(x.reshape(128, 6, -1), dy.reshape(128, 6, -1), mask, cen, lam, v0, v1,
                              spline.code, 3)

    def im2col():
        backend.impl.im2col(imgs, 5, 1, 0, 10, 10)

    cols = backend.impl.im2col(imgs, 5, 1, 0, 10, 10)

    def col2im():
        backend.impl.col2im(cols, 128, 6, 14, 14, 5, 1, 0, 10, 10)

    def maxpool():
        backend.impl.maxpool_forward(x, 2)

    def train_step():
        logits, caches = model.forward(xb, train=True)
        _, grads = L.backward_pass(model, logits, caches, yb, 1e-2)
        opt.step(model.params, grads, 1e-3, 1e-4, model.decay_mask())

    return [("lab forward (128x6x28x28)", lab_forward), ("lab backward", lab_backward),
            ("im2col 5x5", im2col), ("col2im 5x5", col2im), ("maxpool 2x2", maxpool),
            ("lenet5 train step (batch 128)", train_step)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = backend.available()
    timings = {}
    for b in names:
        backend.set_backend(b)
        for label, fn in cases():
            fn()
            timings[label, b] = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
    print(f"{'case':34s}" + "".join(f"{b:>12s}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for label, _ in cases():
        row = f"{label:34s}" + "".join(f"{timings[label, b]:10.2f}ms" for b in names)
        if len(names) > 1:
            row += f"{timings[label, 'python'] / timings[label, 'compiled']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
