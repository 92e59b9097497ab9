"""Backend selection for the numeric hot loops.

The compiled extension ``songtips._core`` is used when it imported cleanly;
otherwise the numpy implementations in ``songtips._pykernels`` take over.
Set ``SONGTIPS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _core
except ImportError:  # extension not built
    _core = None
else:
    BACKENDS["compiled"] = _core

if _core is not None and os.environ.get("SONGTIPS_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"


def get(name=None):
    """Return the kernel module named ``name`` (default: the active one)."""
    name = name or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
