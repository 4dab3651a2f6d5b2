"""Kernel lane selection.

The compiled MPFR lane is preferred when its extension imported cleanly;
the pure-Python lane is the fallback and the reference. Both lanes
produce bit-identical results (same MPFR operations in the same order),
so selection affects speed only.

Override with RADMOM_BACKEND=python|compiled|auto (default auto) or
set_backend().
"""

import os

from . import _kernels_py
from .errors import ConfigError

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_active = None


def _resolve(name):
    if name in (None, "", "auto"):
        return _compiled if _compiled is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ConfigError("compiled kernels requested but the extension is not built")
        return _compiled
    raise ConfigError("unknown backend %r" % (name,))


def get_backend():
    global _active
    if _active is None:
        _active = _resolve(os.environ.get("RADMOM_BACKEND", "auto"))
    return _active


def set_backend(name):
    """Force a lane programmatically; returns the module now active."""
    global _active
    _active = _resolve(name)
    return _active


def backend_name():
    return get_backend().BACKEND_NAME


def available_backends():
    names = ["python"]
    if _compiled is not None:
        names.append("compiled")
    return names
