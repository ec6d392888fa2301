"""Propagation-kernel selection.

The compiled Cython kernel is preferred when it imported cleanly; the numpy
kernel is the fallback.  Set ``ROBINSPEC_BACKEND=python`` (or ``cython``) to
force a choice, e.g. for the backend benchmark.
"""

import os

from . import _riccati_py

_FORCED = os.environ.get("ROBINSPEC_BACKEND", "").strip().lower()

_compiled = None
if _FORCED != "python":
    try:
        from . import _riccati_cy as _compiled
    except ImportError:
        _compiled = None
        if _FORCED == "cython":
            raise ImportError(
                "ROBINSPEC_BACKEND=cython requested but the compiled kernel is not built; "
                "reinstall with `pip install -e . --no-build-isolation`"
            )

_active = _compiled if _compiled is not None else _riccati_py


def active_backend():
    """The module providing ``integrate`` (compiled kernel or numpy fallback)."""
    return _active


def backend_name() -> str:
    return _active.BACKEND_NAME


def available_backends():
    out = {"python": _riccati_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
