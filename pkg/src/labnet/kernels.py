"""Radial basis functions phi(r) and their first derivatives.

Three families: Gaussian exp(-r^2), multiquadric sqrt(1 + r^2) and the
polyharmonic spline r^k (odd k) / r^k log r (even k). None of them carries a
shape parameter.
"""
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidArgument


class Family(enum.IntEnum):
    # integer codes are shared with the compiled activation kernels
    GAUSSIAN = 0
    MULTIQUADRIC = 1
    SPLINE = 2


@dataclass(frozen=True)
class KernelSpec:
    family: Family
    degree: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.family is Family.SPLINE:
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise InvalidArgument(f"spline degree must be a positive integer, got {self.degree!r}")
            object.__setattr__(self, "degree", int(self.degree))
        elif self.degree is not None:
            raise InvalidArgument(f"{self.family.name.lower()} kernel takes no degree")

    @classmethod
    def gaussian(cls):
        return cls(Family.GAUSSIAN)

    @classmethod
    def multiquadric(cls):
        return cls(Family.MULTIQUADRIC)

    @classmethod
    def spline(cls, degree=3):
        return cls(Family.SPLINE, degree)

    @classmethod
    def parse(cls, name, degree=3):
        name = name.lower()
        if name == "gaussian":
            return cls.gaussian()
        if name == "multiquadric":
            return cls.multiquadric()
        if name in ("spline", "polyharmonic"):
            return cls.spline(degree)
        raise InvalidArgument(f"unknown kernel {name!r}")

    @property
    def code(self):
        return int(self.family)

    @property
    def name(self):
        if self.family is Family.SPLINE:
            return f"spline{self.degree}"
        return self.family.name.lower()


def _check(r):
    if not (math.isfinite(r) and r >= 0.0):
        raise DomainError(f"radius must be finite and non-negative, got {r!r}")


def eval(spec, r):
    """phi(r) for a single non-negative radius."""
    r = float(r)
    _check(r)
    if spec.family is Family.GAUSSIAN:
        return math.exp(-r * r)
    if spec.family is Family.MULTIQUADRIC:
        return math.sqrt(1.0 + r * r)
    k = spec.degree
    if k % 2:
        return r ** k
    if r == 0.0:
        return 0.0
    return r ** k * math.log(r)


def eval_deriv(spec, r):
    """d phi / dr for a single non-negative radius."""
    r = float(r)
    _check(r)
    if spec.family is Family.GAUSSIAN:
        return -2.0 * r * math.exp(-r * r)
    if spec.family is Family.MULTIQUADRIC:
        return r / math.sqrt(1.0 + r * r)
    k = spec.degree
    if k % 2:
        return k * r ** (k - 1)
    if r == 0.0:
        return 0.0
    return r ** (k - 1) * (k * math.log(r) + 1.0)


def phi(spec, r):
    """Vectorised phi over an array of radii (no domain checks)."""
    r = np.asarray(r)
    if spec.family is Family.GAUSSIAN:
        return np.exp(-r * r)
    if spec.family is Family.MULTIQUADRIC:
        return np.sqrt(1.0 + r * r)
    k = spec.degree
    if k % 2:
        return r ** k
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r ** k * np.log(r)
    return np.where(r == 0, 0.0, out).astype(r.dtype, copy=False)


def dphi(spec, r):
    """Vectorised d phi / dr."""
    r = np.asarray(r)
    if spec.family is Family.GAUSSIAN:
        return -2.0 * r * np.exp(-r * r)
    if spec.family is Family.MULTIQUADRIC:
        return r / np.sqrt(1.0 + r * r)
    k = spec.degree
    if k % 2:
        return k * r ** (k - 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r ** (k - 1) * (k * np.log(r) + 1.0)
    return np.where(r == 0, 0.0, out).astype(r.dtype, copy=False)
