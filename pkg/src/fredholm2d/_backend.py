"""Select the compiled core when importable, else the pure-Python one.

Set ``FREDHOLM2D_PURE=1`` to force the fallback.
"""
import os

from . import _pycore

pure = _pycore

if os.environ.get("FREDHOLM2D_PURE") == "1":
    core = _pycore
else:
    try:
        from . import _core as core
    except ImportError:
        core = _pycore

NAME = "cython" if core is not _pycore else "python"
