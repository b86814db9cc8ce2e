"""Hot-kernel backend selection.

The compiled Cython extension is preferred when importable; the pure numpy
fallback is always available. Set MRBZ_KERNELS=pure (or =compiled) to force
a lane; the active one is reported in BACKEND.
"""

import os

from . import pure

_requested = os.environ.get("MRBZ_KERNELS", "").strip().lower()

_impl = None
if _requested in ("", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = None
        if _requested == "compiled":
            raise ImportError(
                "MRBZ_KERNELS=compiled but the mrbz._kernels._core extension "
                "is not built; reinstall or use MRBZ_KERNELS=pure"
            )
if _impl is None:
    _impl = pure

BACKEND = _impl.NAME
csr_matvec = _impl.csr_matvec
pcg_jacobi = _impl.pcg_jacobi


def get_backend(name: str):
    """Return a specific kernel module ('pure' or 'compiled') for benchmarks."""
    if name == "pure":
        return pure
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend: {name!r}")
