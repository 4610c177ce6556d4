"""Kernel backend selection.

Two interchangeable implementations of the inner-loop numerics exist: a
compiled Cython extension and a NumPy fallback. The compiled one is used
when importable; set ``OUTLIERSIM_BACKEND=python`` or ``=compiled`` to
force a choice (forcing ``compiled`` raises if the extension is absent).
"""
from __future__ import annotations

import importlib
import os

_ALIASES = {
    "": "auto",
    "auto": "auto",
    "c": "compiled",
    "compiled": "compiled",
    "cython": "compiled",
    "py": "python",
    "python": "python",
    "numpy": "python",
}


def load_backend(name: str):
    """Import one backend module by canonical name."""
    if name == "compiled":
        return importlib.import_module("outliersim.kernels._ckernels")
    if name == "python":
        return importlib.import_module("outliersim.kernels._pykernels")
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    out = []
    try:
        load_backend("compiled")
        out.append("compiled")
    except ImportError:
        pass
    out.append("python")
    return out


def _select():
    requested = _ALIASES.get(os.environ.get("OUTLIERSIM_BACKEND", "").strip().lower())
    if requested is None:
        raise ImportError(
            f"OUTLIERSIM_BACKEND must be one of auto/compiled/python, "
            f"got {os.environ['OUTLIERSIM_BACKEND']!r}"
        )
    if requested == "auto":
        try:
            return load_backend("compiled")
        except ImportError:
            return load_backend("python")
    return load_backend(requested)


_impl = _select()

backend_name: str = _impl.NAME

sigma_mask = _impl.sigma_mask
iqr_mask = _impl.iqr_mask
mad_mask = _impl.mad_mask
grubbs_mask = _impl.grubbs_mask
winsorize_values = _impl.winsorize_values
mw_u1_ties = _impl.mw_u1_ties
perm_abs_hits = _impl.perm_abs_hits
betai = _impl.betai
t_sf_two_sided = _impl.t_sf_two_sided
t_p_array = _impl.t_p_array
normal_sf_two_sided = _impl.normal_sf_two_sided
