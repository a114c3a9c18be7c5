"""Pure-numpy versions of the compiled kernels in ``labnet._ext``.

Same signatures and outputs; float reductions may differ in the last bits.
"""
import numpy as np

from .kernels import Family, KernelSpec, dphi, phi


def _spec(fam, degree):
    fam = Family(fam)
    return KernelSpec(fam, degree if fam is Family.SPLINE else None)


def forward(x, cen, lam, v0, v1, fam, degree, clip):
    spec = _spec(fam, degree)
    xd = x.astype(np.float64)[..., None]               # (N, C, M, 1)
    c = cen[None, :, None, :]                          # (1, B, 1, S)
    f = (lam[None, :, None, :] * phi(spec, np.abs(xd - c))).sum(-1)
    f += v0[None, :, None] * xd[..., 0] + v1[None, :, None]
    mask = (np.abs(f) <= clip).astype(np.uint8)
    y = np.clip(f, -clip, clip).astype(x.dtype)
    return y, mask


def backward(x, dy, mask, cen, lam, v0, v1, fam, degree):
    spec = _spec(fam, degree)
    B = cen.shape[0]
    xd = x.astype(np.float64)
    g = dy.astype(np.float64) * mask                   # (N, C, M)
    d = xd[..., None] - cen[None, :, None, :]
    r = np.abs(d)
    dp = dphi(spec, r) * np.sign(d)
    lam_b = lam[None, :, None, :]
    dx = g * ((lam_b * dp).sum(-1) + v0[None, :, None])
    ge = g[..., None]
    # shared blocks (B == 1) broadcast over every channel and sum over it too
    axes = (0, 2) if B > 1 else (0, 1, 2)
    dlam = (ge * phi(spec, r)).sum(axis=axes).reshape(B, -1)
    dcen = -(ge * lam_b * dp).sum(axis=axes).reshape(B, -1)
    dv0 = (g * xd).sum(axis=axes).reshape(B)
    dv1 = g.sum(axis=axes).reshape(B)
    return dx.astype(x.dtype), dcen, dlam, dv0, dv1


def im2col(x, k, stride, pad, ho, wo):
    n, c = x.shape[:2]
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :ho, :wo]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)


def col2im(cols, N, C, H, W, k, stride, pad, ho, wo):
    d = cols.reshape(N, ho, wo, C, k, k).transpose(0, 3, 4, 5, 1, 2)
    out = np.zeros((N, C, H + 2 * pad, W + 2 * pad), dtype=cols.dtype)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += d[:, :, i, j]
    return np.ascontiguousarray(out[:, :, pad:pad + H, pad:pad + W])


def _windows(x, k):
    n, c, h, w = x.shape
    ho, wo = h // k, w // k
    b = x[:, :, :ho * k, :wo * k].reshape(n, c, ho, k, wo, k).transpose(0, 1, 2, 4, 3, 5)
    return b.reshape(n, c, ho, wo, k * k)


def maxpool_forward(x, k):
    blocks = _windows(x, k)
    arg = blocks.argmax(-1)
    y = np.take_along_axis(blocks, arg[..., None], -1)[..., 0]
    return np.ascontiguousarray(y), arg.astype(np.int64)


def maxpool_backward(dy, arg, k, H, W):
    n, c, ho, wo = dy.shape
    d = np.zeros((n, c, ho, wo, k * k), dtype=dy.dtype)
    np.put_along_axis(d, arg[..., None], dy[..., None], -1)
    d = d.reshape(n, c, ho, wo, k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho * k, wo * k)
    dx = np.zeros((n, c, H, W), dtype=dy.dtype)
    dx[:, :, :ho * k, :wo * k] = d
    return dx
