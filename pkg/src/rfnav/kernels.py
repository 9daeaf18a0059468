"""Backend selection for the hot loops.

The compiled Cython module is used when it imports; otherwise the numpy
fallback.  Set ``RFNAV_BACKEND`` to ``python`` or ``cython`` to force one
(``cython`` raises if the extension is missing).
"""

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _pykernels}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled


def available():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module for ``name`` (``None`` -> environment/default)."""
    if name is None:
        name = os.environ.get("RFNAV_BACKEND", "auto").lower()
    if name == "auto":
        return _compiled if _compiled is not None else _pykernels
    try:
        return _BACKENDS[name]
    except KeyError:
        raise RuntimeError(f"kernel backend {name!r} unavailable (have: {', '.join(available())})") from None


def resolve(backend):
    """Accept ``None``, a backend name, or an already-resolved kernel module."""
    if backend is None:
        return active
    if isinstance(backend, str):
        return get_backend(backend)
    return backend


def backend_name(module):
    return "cython" if module is _compiled and _compiled is not None else "python"


active = get_backend()
BACKEND = backend_name(active)
