"""Kernel backend selection.

The compiled extension ``_ckernels`` is preferred. Setting the environment
variable ``HYDROBC_PURE_PYTHON=1`` forces the pure-Python fallback, which is
also used automatically when the extension has not been built.
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("HYDROBC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

gammainc_p = _impl.gammainc_p
gammainc_p_inv = _impl.gammainc_p_inv
digamma = _impl.digamma
trigamma = _impl.trigamma
gamma_cdf_array = _impl.gamma_cdf_array
gamma_ppf_array = _impl.gamma_ppf_array
bucket_run = _impl.bucket_run

__all__ = [
    "BACKEND",
    "gammainc_p",
    "gammainc_p_inv",
    "digamma",
    "trigamma",
    "gamma_cdf_array",
    "gamma_ppf_array",
    "bucket_run",
]
