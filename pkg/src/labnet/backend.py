"""Selects the compiled kernels (``_ext``) or the numpy fallback (``_fallback``).

The compiled module is used when it imports. ``LABNET_BACKEND=python`` forces
the fallback; ``set_backend`` switches at runtime (tests, benchmarks).
"""
import os

from . import _fallback
from .errors import InvalidArgument

try:
    from . import _ext
except ImportError:  # extension not built
    _ext = None

_MODULES = {"python": _fallback}
if _ext is not None:
    _MODULES["compiled"] = _ext


def available():
    return sorted(_MODULES)


def _initial():
    want = os.environ.get("LABNET_BACKEND", "auto")
    if want == "auto":
        return "compiled" if "compiled" in _MODULES else "python"
    if want not in _MODULES:
        raise ImportError(f"LABNET_BACKEND={want!r} is not available; have {available()}")
    return want


_name = _initial()
impl = _MODULES[_name]


def name():
    return _name


def set_backend(which):
    """Switch implementation; returns the previous name."""
    global _name, impl
    if which not in _MODULES:
        raise InvalidArgument(f"unknown backend {which!r}; have {available()}")
    prev, _name = _name, which
    impl = _MODULES[which]
    return prev
