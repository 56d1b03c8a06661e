"""Per-tick kernels, compiled when available.

Set ``CIDOR_SIM_PURE=1`` to force the numpy fallback.
"""
import os

if os.environ.get("CIDOR_SIM_PURE"):
    from ._kernels_py import contact_changes, positions

    COMPILED = False
else:
    try:
        from ._kernels import contact_changes, positions

        COMPILED = True
    except ImportError:
        from ._kernels_py import contact_changes, positions

        COMPILED = False

__all__ = ["COMPILED", "contact_changes", "positions"]
