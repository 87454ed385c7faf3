"""Kernel backend selection.

The compiled extension is used when it was built; otherwise, or when
``VULGUARD_PURE_PYTHON=1`` is set, the pure-Python reference is used.
"""

from __future__ import annotations

import os

from . import _pure

STYLE_C = _pure.STYLE_C
STYLE_HASH = _pure.STYLE_HASH

_compiled = None
if os.environ.get("VULGUARD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _speedups as _compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"

_impl = _compiled if _compiled is not None else _pure

strip_comments = _impl.strip_comments
best_split = _impl.best_split


def backends() -> dict[str, object]:
    """Every available backend module, keyed by name."""
    found: dict[str, object] = {"python": _pure}
    try:
        from . import _speedups
    except ImportError:
        return found
    found["compiled"] = _speedups
    return found
