"""Two-sample hypothesis tests with two-sided p-values.

Student's t (equal-variance), Mann-Whitney U, and a Monte Carlo
permutation test on the difference of means. The t tail probability goes
through the kernel backend's incomplete beta so both backends share the
numerics; Mann-Whitney switches between an exact null enumeration and a
tie-corrected normal approximation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from . import kernels
from .streams import RngStream

TTEST = "ttest"
MANN_WHITNEY = "mann_whitney"
PERMUTATION = "permutation"

ALL_TEST_IDS = (TTEST, MANN_WHITNEY, PERMUTATION)

# Largest pooled size for which the exact Mann-Whitney null is tabulated.
# Keeps the cached dynamic program small; beyond it the approximation is
# indistinguishable at the p resolutions this suite cares about.
_EXACT_MW_MAX_POOLED = 100


class DegenerateSampleError(ValueError):
    """Raised when a test statistic is undefined (zero pooled variance)."""


@dataclass(frozen=True)
class TestSpec:
    __test__ = False  # not a test case, despite the name

    id: str
    n_permutations: int = 600
    exact_mw_max_n: int = 8
    exhaustive: bool = False

    def __post_init__(self):
        if self.id not in ALL_TEST_IDS:
            raise ValueError(f"unknown test id {self.id!r}")
        if self.n_permutations < 1:
            raise ValueError("n_permutations must be >= 1")

    def label(self) -> str:
        return self.id


def default_tests() -> list[TestSpec]:
    return [TestSpec(tid) for tid in ALL_TEST_IDS]


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    p_value: float


def _prep(sample) -> np.ndarray:
    x = np.ascontiguousarray(sample, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("each sample needs at least 2 values")
    return x


def t_test(a, b) -> TestOutcome:
    """Classical equal-variance two-sample t test.

    statistic = (mean(a) - mean(b)) / sqrt(s2p * (1/na + 1/nb)) with the
    pooled variance on na + nb - 2 degrees of freedom; the two-sided p
    comes from the regularized incomplete beta.
    """
    x = _prep(a)
    y = _prep(b)
    na, nb = x.shape[0], y.shape[0]
    df = na + nb - 2
    va = float(x.var(ddof=1))
    vb = float(y.var(ddof=1))
    s2p = ((na - 1) * va + (nb - 1) * vb) / df
    if s2p <= 0.0:
        raise DegenerateSampleError("zero pooled variance")
    se = np.sqrt(s2p * (1.0 / na + 1.0 / nb))
    t = (float(x.mean()) - float(y.mean())) / se
    return TestOutcome(float(t), float(kernels.t_sf_two_sided(float(t), float(df))))


@lru_cache(maxsize=256)
def _mw_u_counts(n1: int, n2: int) -> np.ndarray:
    """Null distribution of U1: counts[u] = #rank subsets with that U.

    Counts subsets of {1..n1+n2} of size n1 by rank sum. int64 is exact
    here because the pooled size is capped at _EXACT_MW_MAX_POOLED.
    """
    n = n1 + n2
    smax = n1 * n - n1 * (n1 - 1) // 2  # sum of the n1 largest ranks
    dp = np.zeros((n1 + 1, smax + 1), dtype=np.int64)
    dp[0, 0] = 1
    for r in range(1, n + 1):
        dp[1:, r:] += dp[:-1, : smax + 1 - r].copy()
    offset = n1 * (n1 + 1) // 2
    return dp[n1, offset : offset + n1 * n2 + 1].copy()


def _mw_exact_p(u: int, n1: int, n2: int) -> float:
    counts = _mw_u_counts(n1, n2)
    le = int(counts[: u + 1].sum())
    ge = int(counts[u:].sum())
    total = int(counts.sum())
    return min(1.0, 2.0 * min(le, ge) / total)


def mann_whitney(a, b, spec: TestSpec | None = None) -> TestOutcome:
    """Mann-Whitney U test; statistic is U of the first sample (midranks).

    Exact enumeration of the null applies when there are no ties, the
    smaller sample is at most spec.exact_mw_max_n, and the pooled size is
    small enough to tabulate. Otherwise: normal approximation with the
    tie-corrected variance and a 0.5 continuity correction.
    """
    if spec is None:
        spec = TestSpec(MANN_WHITNEY)
    x = _prep(a)
    y = _prep(b)
    na, nb = x.shape[0], y.shape[0]
    u1, tie_sum = kernels.mw_u1_ties(x, y)
    exact_ok = (
        tie_sum == 0.0
        and min(na, nb) <= spec.exact_mw_max_n
        and na + nb <= _EXACT_MW_MAX_POOLED
    )
    if exact_ok:
        u_int = int(round(u1))
        return TestOutcome(float(u1), _mw_exact_p(u_int, na, nb))
    n = na + nb
    mu = na * nb / 2.0
    var = (na * nb / 12.0) * ((n + 1.0) - tie_sum / (n * (n - 1.0)))
    if var <= 0.0:
        # every pooled value identical; no evidence either way
        return TestOutcome(float(u1), 1.0)
    z = max(abs(u1 - mu) - 0.5, 0.0) / np.sqrt(var)
    return TestOutcome(float(u1), float(kernels.normal_sf_two_sided(float(z))))


def permutation_test(a, b, rng, spec: TestSpec | None = None) -> TestOutcome:
    """Monte Carlo permutation test on T = mean(a) - mean(b).

    p uses the add-one estimator (1 + hits) / (n_permutations + 1), so it
    is never zero. With spec.exhaustive every split is enumerated instead
    and p is the plain hit fraction.
    """
    if spec is None:
        spec = TestSpec(PERMUTATION)
    x = _prep(a)
    y = _prep(b)
    if spec.exhaustive:
        return permutation_test_exhaustive(x, y)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    pool = np.concatenate([x, y])
    u = gen.random((spec.n_permutations, x.shape[0]))
    hits, t_obs = kernels.perm_abs_hits(pool, x.shape[0], u)
    p = (1.0 + hits) / (spec.n_permutations + 1.0)
    return TestOutcome(float(t_obs), float(p))


def permutation_test_exhaustive(a, b) -> TestOutcome:
    """Enumerate all C(na+nb, na) group assignments; p = hits / total."""
    x = _prep(a)
    y = _prep(b)
    na = x.shape[0]
    pool = np.concatenate([x, y])
    n = pool.shape[0]
    total_sum = float(pool.sum())
    t_obs = float(x.mean() - y.mean())
    thr = abs(t_obs) - 1e-12 * max(abs(t_obs), 1.0)
    nb = n - na
    hits = 0
    for idx in combinations(range(n), na):
        sa = float(pool[list(idx)].sum())
        t = sa / na - (total_sum - sa) / nb
        if abs(t) >= thr:
            hits += 1
    return TestOutcome(t_obs, hits / comb(n, na))


def run_test(spec: TestSpec, a, b, rng=None) -> TestOutcome:
    """Dispatch a configured test; permutation requires rng."""
    if spec.id == TTEST:
        return t_test(a, b)
    if spec.id == MANN_WHITNEY:
        return mann_whitney(a, b, spec)
    if rng is None:
        raise ValueError("permutation test needs a random stream")
    return permutation_test(a, b, rng, spec)
