"""Univariate outlier detection and correction.

Seven methods share one entry point, :func:`detect_and_correct`. Five of
them remove flagged values (sigma2, sigma3, iqr, mad, grubbs) and two
accommodate them in place (accommodation_sigma2 clamps to the two-STD
bounds, winsorize clips to interior order statistics). A pseudo-method
``none`` flags nothing and exists so pipelines can run an uncorrected
arm through the same code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels

SIGMA2 = "sigma2"
SIGMA3 = "sigma3"
ACCOMMODATION_SIGMA2 = "accommodation_sigma2"
IQR = "iqr"
MAD = "mad"
GRUBBS = "grubbs"
WINSORIZE = "winsorize"
NONE = "none"

#: The seven real methods, in catalog order.
ALL_METHOD_IDS = (SIGMA2, SIGMA3, ACCOMMODATION_SIGMA2, IQR, MAD, GRUBBS, WINSORIZE)

_REMOVAL = frozenset({SIGMA2, SIGMA3, IQR, MAD, GRUBBS})

_DEFAULTS = {
    "mad_threshold": 2.24,
    "winsorize_limit": 0.05,
    "grubbs_alpha": 0.95,
}


@dataclass(frozen=True)
class MethodSpec:
    """One method plus its tunable parameters.

    grubbs_alpha defaults to 0.95 fed into the alpha/(2n) quantile, the
    constant the usual convenience packages plug in there. It makes the
    iterative test markedly more liberal than a textbook 5% Grubbs, which
    is what reproduces the detection curves this suite targets; pass 0.05
    for the textbook behavior.
    """

    id: str
    mad_threshold: float = 2.24
    winsorize_limit: float = 0.05
    grubbs_alpha: float = 0.95
    std_divisor: str = "n-1"

    def __post_init__(self):
        if self.id not in ALL_METHOD_IDS and self.id != NONE:
            raise ValueError(f"unknown method id {self.id!r}")
        if not self.mad_threshold > 0:
            raise ValueError("mad_threshold must be > 0")
        if not 0 <= self.winsorize_limit < 0.5:
            raise ValueError("winsorize_limit must be in [0, 0.5)")
        if not 0 < self.grubbs_alpha < 1:
            raise ValueError("grubbs_alpha must be in (0, 1)")
        if self.std_divisor not in ("n", "n-1"):
            raise ValueError("std_divisor must be 'n' or 'n-1'")

    @property
    def ddof(self) -> int:
        return 1 if self.std_divisor == "n-1" else 0

    def label(self) -> str:
        """Stable display/CSV name; non-default parameters are spelled out."""
        if self.id == MAD and self.mad_threshold != _DEFAULTS["mad_threshold"]:
            return f"mad({self.mad_threshold:g})"
        if self.id == WINSORIZE and self.winsorize_limit != _DEFAULTS["winsorize_limit"]:
            return f"winsorize({self.winsorize_limit:g})"
        if self.id == GRUBBS and self.grubbs_alpha != _DEFAULTS["grubbs_alpha"]:
            return f"grubbs({self.grubbs_alpha:g})"
        return self.id

    def min_length(self) -> int:
        return 3 if self.id == GRUBBS else 2


def default_methods() -> list[MethodSpec]:
    return [MethodSpec(mid) for mid in ALL_METHOD_IDS]


@dataclass(frozen=True)
class CorrectionOutcome:
    """Result of applying one method to one sample."""

    flagged: tuple
    corrected: np.ndarray
    n_removed: int
    n_modified: int

    @property
    def any_flagged(self) -> bool:
        return len(self.flagged) > 0


def grubbs_critical(n: int, alpha: float) -> float:
    """Critical value of the two-sided Grubbs statistic at sample size n.

    G_crit = ((n-1)/sqrt(n)) * sqrt(t^2 / (n-2+t^2)) with t the upper
    alpha/(2n) quantile of Student's t on n-2 degrees of freedom.
    """
    if n < 3:
        raise ValueError("Grubbs critical value requires n >= 3")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    return float(grubbs_critical_table(n, alpha)[n])


@lru_cache(maxsize=64)
def grubbs_critical_table(n_max: int, alpha: float) -> np.ndarray:
    """crit[m] for m in [3, n_max]; positions below 3 are NaN."""
    from scipy.stats import t as student_t

    m = np.arange(3, n_max + 1, dtype=np.float64)
    tq = student_t.isf(alpha / (2.0 * m), m - 2.0)
    crit = np.full(n_max + 1, np.nan)
    crit[3:] = ((m - 1.0) / np.sqrt(m)) * np.sqrt(tq * tq / (m - 2.0 + tq * tq))
    crit.setflags(write=False)
    return crit


def _as_array(sample) -> np.ndarray:
    x = np.ascontiguousarray(sample, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("sample must be one-dimensional")
    return x


def detect_and_correct(sample, method: MethodSpec) -> CorrectionOutcome:
    """Flag outliers per the method and return the corrected sample.

    The input is never modified. Removal methods drop flagged positions
    (order of the survivors preserved); accommodation methods return a
    full-length sample that differs from the input exactly at the
    flagged positions.
    """
    x = _as_array(sample)
    n = x.shape[0]
    if n < method.min_length():
        raise ValueError(f"method {method.id} needs at least {method.min_length()} values")

    if method.id == NONE:
        return CorrectionOutcome((), x.copy(), 0, 0)

    if method.id in (SIGMA2, SIGMA3):
        k = 2.0 if method.id == SIGMA2 else 3.0
        mask = kernels.sigma_mask(x, k, method.ddof)
    elif method.id == IQR:
        mask = kernels.iqr_mask(x)
    elif method.id == MAD:
        mask = kernels.mad_mask(x, method.mad_threshold)
    elif method.id == GRUBBS:
        crit = grubbs_critical_table(n, method.grubbs_alpha)
        mask = kernels.grubbs_mask(x, crit)
    elif method.id == ACCOMMODATION_SIGMA2:
        mask = kernels.sigma_mask(x, 2.0, method.ddof)
        flagged = tuple(int(i) for i in np.flatnonzero(mask))
        if not flagged:
            return CorrectionOutcome((), x.copy(), 0, 0)
        m = float(x.mean())
        s = float(x.std(ddof=method.ddof))
        corrected = x.copy()
        idx = np.asarray(flagged)
        corrected[idx] = np.where(x[idx] > m, m + 2.0 * s, m - 2.0 * s)
        return CorrectionOutcome(flagged, corrected, 0, len(flagged))
    elif method.id == WINSORIZE:
        k = math.floor(method.winsorize_limit * n)
        corrected = kernels.winsorize_values(x, k)
        flagged = tuple(int(i) for i in np.flatnonzero(corrected != x))
        return CorrectionOutcome(flagged, corrected, 0, len(flagged))
    else:  # pragma: no cover
        raise AssertionError(method.id)

    flagged = tuple(int(i) for i in np.flatnonzero(mask))
    corrected = x[mask == 0]
    return CorrectionOutcome(flagged, corrected, len(flagged), 0)


def detection_mask(sample, method: MethodSpec) -> np.ndarray:
    """Just the flag mask (uint8), for pipelines that only need detection."""
    x = _as_array(sample)
    n = x.shape[0]
    if n < method.min_length():
        raise ValueError(f"method {method.id} needs at least {method.min_length()} values")
    if method.id == NONE:
        return np.zeros(n, dtype=np.uint8)
    if method.id in (SIGMA2, SIGMA3):
        return kernels.sigma_mask(x, 2.0 if method.id == SIGMA2 else 3.0, method.ddof)
    if method.id == ACCOMMODATION_SIGMA2:
        return kernels.sigma_mask(x, 2.0, method.ddof)
    if method.id == IQR:
        return kernels.iqr_mask(x)
    if method.id == MAD:
        return kernels.mad_mask(x, method.mad_threshold)
    if method.id == GRUBBS:
        return kernels.grubbs_mask(x, grubbs_critical_table(n, method.grubbs_alpha))
    if method.id == WINSORIZE:
        k = math.floor(method.winsorize_limit * n)
        corrected = kernels.winsorize_values(x, k)
        return (corrected != x).astype(np.uint8)
    raise AssertionError(method.id)  # pragma: no cover
