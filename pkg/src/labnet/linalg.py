"""Small dense linear algebra.

Everything here runs in float64 regardless of the input dtype. The systems we
solve are tiny (the (s+2)x(s+2) interpolation system) or modest (the normal
equations of the classic RBF baseline), so plain partial-pivoting elimination
is enough.
"""
import numpy as np

from .errors import InvalidArgument, RankDeficient, ShapeMismatch, SingularMatrix

PIVOT_RTOL = 1e-12


def as_matrix(a, name="a"):
    """Validate and copy ``a`` into a finite 2-D float64 array."""
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidArgument(f"{name} contains non-finite entries")
    return m


def _eliminate(a, b, err):
    """Gaussian elimination with row pivoting, in place on ``a`` (n, n) and ``b`` (n, p)."""
    n = a.shape[0]
    scale = np.abs(a).max() if a.size else 0.0
    tol = PIVOT_RTOL * scale
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if abs(a[p, k]) <= tol or scale == 0.0:
            raise err(f"pivot {k} has magnitude {abs(a[p, k]):.3e} <= {tol:.3e}")
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = a[k + 1:, k] / a[k, k]
        a[k + 1:, k:] -= np.outer(f, a[k, k:])
        b[k + 1:] -= np.outer(f, b[k])
    x = np.empty_like(b)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


def solve(a, b):
    """Solve ``a @ x = b`` for square ``a``.

    ``b`` may be a vector (n,) or a matrix (n, p); the result has the same
    shape. Raises SingularMatrix when a pivot falls below 1e-12 times the
    largest entry of ``a``.
    """
    a = as_matrix(a)
    n, m = a.shape
    if n != m:
        raise ShapeMismatch(f"solve needs a square matrix, got {a.shape}")
    b = np.array(b, dtype=np.float64)
    vector = b.ndim == 1
    b2 = b.reshape(n, -1) if b.shape[:1] == (n,) else None
    if b2 is None or b.ndim > 2:
        raise ShapeMismatch(f"right-hand side shape {b.shape} does not match {a.shape}")
    x = _eliminate(a, b2.copy(), SingularMatrix)
    return x[:, 0] if vector else x


def lstsq(a, b):
    """Least-squares solution of ``a @ x ~= b`` via the normal equations.

    ``a`` is (m, n) with m >= n and full column rank; ``b`` is (m,) or (m, p).
    """
    a = as_matrix(a)
    m, n = a.shape
    if m < n:
        raise ShapeMismatch(f"lstsq needs m >= n, got {a.shape}")
    b = np.array(b, dtype=np.float64)
    if b.shape[:1] != (m,) or b.ndim > 2:
        raise ShapeMismatch(f"right-hand side shape {b.shape} does not match {a.shape}")
    vector = b.ndim == 1
    ata = a.T @ a
    atb = a.T @ b.reshape(m, -1)
    x = _eliminate(ata, atb, RankDeficient)
    return x[:, 0] if vector else x
