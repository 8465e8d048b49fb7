"""Backend selection for the accelerated kernels.

Every hot kernel in this package has two interchangeable lanes: a numba
compiled one and a pure numpy/Python one.  The active lane is chosen
once, at import time, from the ``QUASIWORK_BACKEND`` environment
variable:

``QUASIWORK_BACKEND=numba``
    require numba; raise if it cannot be imported.
``QUASIWORK_BACKEND=numpy``
    force the pure numpy lane even when numba is installed.
unset or empty
    use numba when importable, fall back to numpy otherwise.

Kernels that are numerically identical in both lanes (the Jacobi
eigensolver) are written once and wrapped with :func:`njit_or_python`.
Kernels whose fast form needs explicit loops (the tilted chi sweep, the
path accumulation) have a separate numpy implementation next to the
jitted one; tests and the benchmark script compare the lanes.
"""

from __future__ import annotations

import os

_VALID = ("", "numba", "numpy")

_requested = os.environ.get("QUASIWORK_BACKEND", "").strip().lower()
if _requested not in _VALID:
    raise ValueError(
        f"QUASIWORK_BACKEND must be 'numba' or 'numpy' (or unset), got {_requested!r}"
    )

if _requested == "numpy":
    HAS_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAS_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        HAS_NUMBA = False

BACKEND: str = "numba" if HAS_NUMBA else "numpy"


def njit_or_python(*args, **kwargs):
    """Return ``numba.njit`` under the numba lane, a no-op decorator otherwise.

    Usable both bare (``@njit_or_python``) and with options
    (``@njit_or_python(cache=True)``), mirroring ``njit`` itself.
    """
    if args and callable(args[0]) and not kwargs:
        func = args[0]
        if HAS_NUMBA:
            from numba import njit

            return njit(func)
        return func

    def decorate(func):
        if HAS_NUMBA:
            from numba import njit

            return njit(*args, **kwargs)(func)
        return func

    return decorate
