"""Built-in mu2 lookup: the second population's location that yields a
target power of 50% or 95% at a given sample size.

Normal entries target the t test; log-normal entries (given as the mu of
the underlying normal) target the Mann-Whitney test. These constants are
audited empirically by :func:`outliersim.engine.verify_power` rather than
trusted blindly.
"""
from __future__ import annotations

from .distributions import LOGNORMAL, NORMAL

# (kind, n, power) -> mu2
MU2_TABLE = {
    (NORMAL, 6, 0.5): 1.252,
    (NORMAL, 6, 0.95): 2.3,
    (NORMAL, 10, 0.5): 0.926,
    (NORMAL, 10, 0.95): 1.7,
    (NORMAL, 12, 0.5): 0.837,
    (NORMAL, 12, 0.95): 1.54,
    (NORMAL, 20, 0.5): 0.636,
    (NORMAL, 20, 0.95): 1.17,
    (NORMAL, 30, 0.5): 0.515,
    (NORMAL, 30, 0.95): 0.95,
    (NORMAL, 50, 0.5): 0.396,
    (NORMAL, 50, 0.95): 0.73,
    (NORMAL, 100, 0.5): 0.279,
    (NORMAL, 100, 0.95): 0.51,
    (NORMAL, 500, 0.5): 0.124,
    (NORMAL, 500, 0.95): 0.23,
    (NORMAL, 1000, 0.5): 0.0877,
    (NORMAL, 1000, 0.95): 0.16,
    (LOGNORMAL, 6, 0.5): 1.352,
    (LOGNORMAL, 6, 0.95): 2.49,
    (LOGNORMAL, 10, 0.5): 0.94,
    (LOGNORMAL, 10, 0.95): 1.76,
    (LOGNORMAL, 12, 0.5): 0.85,
    (LOGNORMAL, 12, 0.95): 1.575,
    (LOGNORMAL, 20, 0.5): 0.655,
    (LOGNORMAL, 20, 0.95): 1.195,
    (LOGNORMAL, 30, 0.5): 0.528,
    (LOGNORMAL, 30, 0.95): 0.97,
    (LOGNORMAL, 50, 0.5): 0.405,
    (LOGNORMAL, 50, 0.95): 0.74,
    (LOGNORMAL, 100, 0.5): 0.284,
    (LOGNORMAL, 100, 0.95): 0.525,
    (LOGNORMAL, 500, 0.5): 0.128,
    (LOGNORMAL, 500, 0.95): 0.235,
    (LOGNORMAL, 1000, 0.5): 0.09,
    (LOGNORMAL, 1000, 0.95): 0.164,
}

SAMPLE_SIZES = tuple(sorted({n for (_, n, _) in MU2_TABLE}))
POWER_TARGETS = (0.5, 0.95)


def lookup_mu2(kind: str, n: int, power: float) -> float:
    try:
        return MU2_TABLE[(kind, n, power)]
    except KeyError:
        raise KeyError(
            f"no mu2 entry for ({kind}, n={n}, power={power}); "
            f"tabulated sizes are {SAMPLE_SIZES} at powers {POWER_TARGETS}"
        ) from None
