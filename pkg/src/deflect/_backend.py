"""Kernel backend selection: compiled extension when available, pure
Python otherwise. Set DEFLECT_PURE=1 to force the fallback."""

from __future__ import annotations

import logging
import os

log = logging.getLogger(__name__)

if os.environ.get("DEFLECT_PURE"):
    from ._pure import RunCore

    BACKEND_NAME = "pure"
else:
    try:
        from ._speedups import RunCore

        BACKEND_NAME = "compiled"
    except ImportError:
        from ._pure import RunCore

        BACKEND_NAME = "pure"
        log.info("compiled kernels unavailable, using the pure-Python fallback")

__all__ = ["RunCore", "BACKEND_NAME"]
