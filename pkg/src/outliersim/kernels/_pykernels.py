"""NumPy reference implementations of the hot inner-loop kernels.

The compiled backend (`_ckernels`) mirrors every function here with the
same argument conventions and the same arithmetic. Keep the two in sync:
any change to formulas or edge-case policy has to land in both files.

All array arguments are 1-D contiguous float64 unless noted. Masks are
uint8 arrays where 1 marks a flagged (outlying) position.
"""
from __future__ import annotations

import math

import numpy as np

NAME = "python"

# float64 machine constants used by the incomplete beta evaluation
_MACHEP = 1.11022302462515654042e-16
_MAXLOG = 709.782712893383996843
_MINLOG = -708.396418532264106224
_BIG = 4.503599627370496e15
_BIGINV = 2.22044604925031308085e-16


def sigma_mask(x: np.ndarray, k: float, ddof: int) -> np.ndarray:
    """Flag values more than k sample STDs from the sample mean."""
    m = x.mean()
    s = x.std(ddof=ddof)
    return (np.abs(x - m) > k * s).astype(np.uint8)


def _quantile7(xs: np.ndarray, q: float) -> float:
    # xs sorted ascending; linear interpolation between order statistics
    n = xs.shape[0]
    h = (n - 1) * q
    lo = int(h)
    if lo >= n - 1:
        return float(xs[n - 1])
    frac = h - lo
    return float(xs[lo] + frac * (xs[lo + 1] - xs[lo]))


def iqr_mask(x: np.ndarray) -> np.ndarray:
    """Tukey fences: flag values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR]."""
    xs = np.sort(x)
    q1 = _quantile7(xs, 0.25)
    q3 = _quantile7(xs, 0.75)
    w = 1.5 * (q3 - q1)
    return ((x < q1 - w) | (x > q3 + w)).astype(np.uint8)


def _median_sorted(xs: np.ndarray) -> float:
    n = xs.shape[0]
    mid = n // 2
    if n % 2 == 1:
        return float(xs[mid])
    return 0.5 * (float(xs[mid - 1]) + float(xs[mid]))


def mad_mask(x: np.ndarray, threshold: float) -> np.ndarray:
    """Robust z-score against 1.4826 * median absolute deviation.

    A zero MAD (at least half the values equal to the median) makes the
    score infinite for every other value, so those are all flagged.
    """
    med = _median_sorted(np.sort(x))
    ad = np.abs(x - med)
    mad = 1.4826 * _median_sorted(np.sort(ad))
    if mad > 0.0:
        return (ad / mad > threshold).astype(np.uint8)
    return (ad > 0.0).astype(np.uint8)


def grubbs_mask(x: np.ndarray, crit: np.ndarray) -> np.ndarray:
    """Iterative two-sided extreme-value test.

    crit[m] holds the critical value for a sample of size m; entries for
    m in [3, len(x)] must be filled. The farthest value from the current
    mean is removed while its studentized deviation exceeds crit, testing
    again on the reduced sample, until no rejection or fewer than 3 left.
    """
    n = x.shape[0]
    mask = np.zeros(n, dtype=np.uint8)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    lo, hi = 0, n - 1
    cnt = n
    s1 = float(xs.sum())
    s2 = float((xs * xs).sum())
    while cnt >= 3:
        m = s1 / cnt
        var = (s2 - cnt * m * m) / (cnt - 1)
        if var <= 0.0:
            break
        sd = math.sqrt(var)
        d_lo = m - float(xs[lo])
        d_hi = float(xs[hi]) - m
        # the high extreme wins exact ties; continuous data never ties
        if d_hi >= d_lo:
            g, pos = d_hi / sd, hi
        else:
            g, pos = d_lo / sd, lo
        if g > crit[cnt]:
            v = float(xs[pos])
            s1 -= v
            s2 -= v * v
            cnt -= 1
            mask[order[pos]] = 1
            if pos == hi:
                hi -= 1
            else:
                lo += 1
        else:
            break
    return mask


def winsorize_values(x: np.ndarray, k: int) -> np.ndarray:
    """Clip to the (k+1)-th smallest and (k+1)-th largest order statistics."""
    if k <= 0:
        return x.copy()
    xs = np.sort(x)
    return np.clip(x, xs[k], xs[x.shape[0] - 1 - k])


def mw_u1_ties(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """U statistic of the first sample from midranks, plus sum(t^3 - t) over ties."""
    na = a.shape[0]
    allv = np.concatenate([a, b])
    n = allv.shape[0]
    order = np.argsort(allv, kind="stable")
    sv = allv[order]
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], n]
    sizes = ends - starts
    mid = (starts + ends + 1) / 2.0  # midrank of each tie group, 1-based
    ranks = np.empty(n)
    ranks[order] = np.repeat(mid, sizes)
    tie_sum = float(((sizes * sizes * sizes) - sizes).sum())
    r1 = float(ranks[:na].sum())
    u1 = r1 - na * (na + 1) / 2.0
    return u1, tie_sum


def perm_abs_hits(pool: np.ndarray, na: int, u: np.ndarray) -> tuple[int, float]:
    """Count permutations with |mean diff| at least the observed one.

    pool is the two samples concatenated (first na values are group A).
    u supplies the randomness: one row of na uniforms per permutation,
    consumed by a partial Fisher-Yates shuffle, so both backends produce
    identical group assignments from identical input.
    """
    n_perm = u.shape[0]
    n = pool.shape[0]
    nb = n - na
    t_obs = float(pool[:na].mean() - pool[na:].mean())
    thr = abs(t_obs) - 1e-12 * max(abs(t_obs), 1.0)
    mat = np.broadcast_to(pool, (n_perm, n)).copy()
    rows = np.arange(n_perm)
    for i in range(na):
        j = i + (u[:, i] * (n - i)).astype(np.int64)
        vj = mat[rows, j].copy()
        mat[rows, j] = mat[:, i]
        mat[:, i] = vj
    t_perm = mat[:, :na].mean(axis=1) - mat[:, na:].mean(axis=1)
    hits = int((np.abs(t_perm) >= thr).sum())
    return hits, t_obs


def betai(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Continued-fraction evaluation in the Cephes style: a power series
    where it converges fast, otherwise one of two continued fractions,
    assembled through lgamma so the compiled twin can reproduce the
    arithmetic exactly.
    """
    if a <= 0.0 or b <= 0.0:
        raise ValueError("betai requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    if b * x <= 1.0 and x <= 0.95:
        return _beta_pseries(a, b, x)
    w = 1.0 - x
    if x > a / (a + b):
        flag = True
        a, b = b, a
        xc, x = x, w
    else:
        flag = False
        xc = w
    if flag and b * x <= 1.0 and x <= 0.95:
        t = _beta_pseries(a, b, x)
        return 1.0 - _MACHEP if t <= _MACHEP else 1.0 - t
    y = x * (a + b - 2.0) - (a - 1.0)
    if y < 0.0:
        w = _incbcf(a, b, x)
    else:
        w = _incbd(a, b, x) / xc
    y = a * math.log(x) + b * math.log(xc)
    y += math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    y += math.log(w / a)
    t = 0.0 if y < _MINLOG else math.exp(y)
    if flag:
        t = 1.0 - _MACHEP if t <= _MACHEP else 1.0 - t
    return t


def _beta_pseries(a: float, b: float, x: float) -> float:
    ai = 1.0 / a
    u = (1.0 - b) * x
    v = u / (a + 1.0)
    t1 = v
    t = u
    n = 2.0
    s = 0.0
    z = _MACHEP * ai
    while abs(v) > z:
        u = (n - b) * x / n
        t *= u
        v = t / (a + n)
        s += v
        n += 1.0
    s += t1
    s += ai
    u = a * math.log(x)
    t = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + u + math.log(s)
    return 0.0 if t < _MINLOG else math.exp(t)


def _incbcf(a: float, b: float, x: float) -> float:
    k1 = a
    k2 = a + b
    k3 = a
    k4 = a + 1.0
    k5 = 1.0
    k6 = b - 1.0
    k7 = a + 1.0
    k8 = a + 2.0
    pkm2 = 0.0
    qkm2 = 1.0
    pkm1 = 1.0
    qkm1 = 1.0
    ans = 1.0
    r = 1.0
    thresh = 3.0 * _MACHEP
    for _ in range(300):
        xk = -(x * k1 * k2) / (k3 * k4)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2, pkm1 = pkm1, pk
        qkm2, qkm1 = qkm1, qk
        xk = (x * k5 * k6) / (k7 * k8)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2, pkm1 = pkm1, pk
        qkm2, qkm1 = qkm1, qk
        if qk != 0.0:
            r = pk / qk
        if r != 0.0:
            t = abs((ans - r) / r)
            ans = r
        else:
            t = 1.0
        if t < thresh:
            break
        k1 += 1.0
        k2 += 1.0
        k3 += 2.0
        k4 += 2.0
        k5 += 1.0
        k6 -= 1.0
        k7 += 2.0
        k8 += 2.0
        if abs(qk) + abs(pk) > _BIG:
            pkm2 *= _BIGINV
            pkm1 *= _BIGINV
            qkm2 *= _BIGINV
            qkm1 *= _BIGINV
        if abs(qk) < _BIGINV or abs(pk) < _BIGINV:
            pkm2 *= _BIG
            pkm1 *= _BIG
            qkm2 *= _BIG
            qkm1 *= _BIG
    return ans


def _incbd(a: float, b: float, x: float) -> float:
    k1 = a
    k2 = b - 1.0
    k3 = a
    k4 = a + 1.0
    k5 = 1.0
    k6 = a + b
    k7 = a + 1.0
    k8 = a + 2.0
    pkm2 = 0.0
    qkm2 = 1.0
    pkm1 = 1.0
    qkm1 = 1.0
    z = x / (1.0 - x)
    ans = 1.0
    r = 1.0
    thresh = 3.0 * _MACHEP
    for _ in range(300):
        xk = -(z * k1 * k2) / (k3 * k4)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2, pkm1 = pkm1, pk
        qkm2, qkm1 = qkm1, qk
        xk = (z * k5 * k6) / (k7 * k8)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2, pkm1 = pkm1, pk
        qkm2, qkm1 = qkm1, qk
        if qk != 0.0:
            r = pk / qk
        if r != 0.0:
            t = abs((ans - r) / r)
            ans = r
        else:
            t = 1.0
        if t < thresh:
            break
        k1 += 1.0
        k2 -= 1.0
        k3 += 2.0
        k4 += 2.0
        k5 += 1.0
        k6 += 1.0
        k7 += 2.0
        k8 += 2.0
        if abs(qk) + abs(pk) > _BIG:
            pkm2 *= _BIGINV
            pkm1 *= _BIGINV
            qkm2 *= _BIGINV
            qkm1 *= _BIGINV
        if abs(qk) < _BIGINV or abs(pk) < _BIGINV:
            pkm2 *= _BIG
            pkm1 *= _BIG
            qkm2 *= _BIG
            qkm1 *= _BIG
    return ans


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided tail probability of Student's t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if t == 0.0:
        return 1.0
    return betai(0.5 * df, 0.5, df / (df + t * t))


def t_p_array(t: np.ndarray, df: float) -> np.ndarray:
    """Vectorized :func:`t_sf_two_sided` over an array of statistics."""
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = t_sf_two_sided(float(t[i]), df)
    return out


def normal_sf_two_sided(z: float) -> float:
    """Two-sided standard normal tail probability, via erfc."""
    return math.erfc(abs(z) / math.sqrt(2.0))
