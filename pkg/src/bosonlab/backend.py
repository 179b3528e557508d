"""Kernel backend selection.

The compiled extension is preferred when present; the numpy fallback is
semantically identical.  ``BOSONLAB_KERNEL=py`` or ``=cy`` forces a
backend (``cy`` raises if the extension was not built).
"""

import os

from . import _kernels_py

_forced = os.environ.get("BOSONLAB_KERNEL", "").strip().lower()

if _forced == "py":
    _impl = _kernels_py
    KERNEL_BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl

        KERNEL_BACKEND = "cython"
    except ImportError:
        if _forced == "cy":
            raise ImportError(
                "BOSONLAB_KERNEL=cy but the compiled kernel is not built; "
                "run `pip install -e . --no-build-isolation` or "
                "`python setup.py build_ext --inplace`"
            )
        _impl = _kernels_py
        KERNEL_BACKEND = "python"

ladder_term_entries = _impl.ladder_term_entries
decode_indices = _impl.decode_indices


def available_backends():
    """Names of importable kernel backends."""
    names = ["python"]
    try:
        from . import _kernels_cy  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the kernel module for an explicit backend name."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels_cy

        return _kernels_cy
    raise ValueError(f"unknown kernel backend {name!r}")
