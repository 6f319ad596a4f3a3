"""Numeric backend selection.

The package ships two interchangeable cores: a Cython extension
(``hofm.backend._fast``) and a pure-Python/numpy twin
(``hofm.backend._python``).  Import-time selection prefers the compiled
module and silently falls back.  Set ``HOFM_BACKEND=python`` (or
``HOFM_BACKEND=c``) to force one side; forcing the compiled core when it
failed to build raises ImportError rather than degrading quietly.
"""

from __future__ import annotations

import os

_PYTHON_NAMES = {"py", "python", "pure"}
_COMPILED_NAMES = {"c", "cython", "compiled", "fast"}


def _select():
    choice = os.environ.get("HOFM_BACKEND", "auto").strip().lower()
    if choice in _PYTHON_NAMES:
        from . import _python
        return _python
    if choice in _COMPILED_NAMES:
        from . import _fast
        return _fast
    if choice not in ("", "auto"):
        raise ValueError(
            "unrecognized HOFM_BACKEND value %r; use 'auto', 'python' or 'c'"
            % choice)
    try:
        from . import _fast
        return _fast
    except ImportError:
        from . import _python
        return _python


impl = _select()
BACKEND = impl.BACKEND_NAME


def load_backend(name: str):
    """Return a specific backend module by name, bypassing the default.

    Parameters
    ----------
    name : str
        'python' (aliases 'py', 'pure') or 'c' (aliases 'cython',
        'compiled', 'fast').

    Returns
    -------
    module
        The backend module; its ``BACKEND_NAME`` says which one.
    """
    key = name.strip().lower()
    if key in _PYTHON_NAMES:
        from . import _python
        return _python
    if key in _COMPILED_NAMES:
        from . import _fast
        return _fast
    raise ValueError("unknown backend %r" % name)
