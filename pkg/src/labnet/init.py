"""Control-point initialisation of LAB parameter blocks.

Centroids are spread evenly over [-r, r] (endpoints included). Their targets
y_i follow the chosen strategy, and the coefficients come from the augmented
interpolation system

    [ Phi  C ] [lam]   [y]
    [ C^T  0 ] [ v ] = [0],      Phi_ij = phi(|x_i - x_j|),  C = [x 1]

so that f(x_i) = y_i, sum(lam) = 0 and sum(lam * x) = 0.
"""
import enum
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from . import linalg
from .activation import LabParams
from .errors import InvalidArgument

DEFAULT_RANGE = 2.0


class InitStrategy(enum.Enum):
    LINEAR = "linear"
    RANDOM_Y = "random-y"
    HOCKEY_STICK = "hockey-stick"


@dataclass(frozen=True)
class ControlPointSet:
    x: np.ndarray
    y: np.ndarray
    r: float
    strategy: InitStrategy = InitStrategy.HOCKEY_STICK

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if x.shape != y.shape or x.ndim != 1:
            raise InvalidArgument("control point x and y must be 1-D and equally long")
        if np.any(np.diff(x) <= 0):
            raise InvalidArgument("control point x must be strictly increasing")
        if self.r <= 0 or np.any(np.abs(x) > self.r * (1 + 1e-12)):
            raise InvalidArgument(f"control point x must lie in [-{self.r}, {self.r}]")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def points(self):
        return list(zip(self.x.tolist(), self.y.tolist()))


def make_control_points(strategy, s, r=DEFAULT_RANGE, rng=None):
    strategy = InitStrategy(strategy)
    if s < 2:
        raise InvalidArgument(f"need at least 2 control points, got s={s}")
    if not r > 0:
        raise InvalidArgument(f"range must be positive, got r={r}")
    x = np.linspace(-r, r, s)
    if strategy is InitStrategy.LINEAR:
        y = x.copy()
    elif strategy is InitStrategy.HOCKEY_STICK:
        y = np.maximum(0.0, x)
    else:
        if rng is None:
            raise InvalidArgument("random-y initialisation needs a random generator")
        y = rng.uniform(-r, r, size=s)
    return ControlPointSet(x, y, float(r), strategy)


def interpolation_system(x, y, kernel):
    """Assemble the (s+2) x (s+2) matrix and right-hand side."""
    x = np.asarray(x, dtype=np.float64)
    s = x.size
    a = np.zeros((s + 2, s + 2))
    a[:s, :s] = K.phi(kernel, np.abs(x[:, None] - x[None, :]))
    a[:s, s] = x
    a[:s, s + 1] = 1.0
    a[s, :s] = x
    a[s + 1, :s] = 1.0
    b = np.zeros(s + 2)
    b[:s] = y
    return a, b


def solve_init(points, kernel):
    """Coefficients reproducing ``points`` exactly; centroids sit at the control x's.

    The linear strategy skips the solve and returns the identity block.
    """
    if points.strategy is InitStrategy.LINEAR:
        return LabParams.identity(kernel, points.x)
    a, b = interpolation_system(points.x, points.y, kernel)
    sol = linalg.solve(a, b)
    s = points.x.size
    return LabParams(kernel, points.x.copy(), sol[:s], sol[s], sol[s + 1])


def init_block(strategy, s, kernel, r=DEFAULT_RANGE, rng=None):
    return solve_init(make_control_points(strategy, s, r, rng), kernel)
