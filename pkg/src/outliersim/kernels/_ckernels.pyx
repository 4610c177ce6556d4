# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the kernels in `_pykernels`.

Same functions, same argument conventions, same arithmetic and edge-case
policy. Sorting uses qsort with an index tiebreak where the reference
uses a stable argsort, which yields the same ordering.
"""
from libc.math cimport erfc, exp, fabs, lgamma, log, sqrt
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

import numpy as np

NAME = "compiled"

cdef double _MACHEP = 1.11022302462515654042e-16
cdef double _MAXLOG = 709.782712893383996843
cdef double _MINLOG = -708.396418532264106224
cdef double _BIG = 4.503599627370496e15
cdef double _BIGINV = 2.22044604925031308085e-16


cdef int _cmp_d(const void *pa, const void *pb) noexcept nogil:
    cdef double a = (<const double *> pa)[0]
    cdef double b = (<const double *> pb)[0]
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


ctypedef struct VI:
    double v
    Py_ssize_t i


cdef int _cmp_vi(const void *pa, const void *pb) noexcept nogil:
    cdef const VI *a = <const VI *> pa
    cdef const VI *b = <const VI *> pb
    if a.v < b.v:
        return -1
    if a.v > b.v:
        return 1
    if a.i < b.i:
        return -1
    if a.i > b.i:
        return 1
    return 0


from libc.stdlib cimport qsort


cdef void _sort_doubles(double *buf, Py_ssize_t n) noexcept nogil:
    qsort(buf, n, sizeof(double), _cmp_d)


cdef double _mean(const double[::1] x) noexcept nogil:
    cdef double s = 0.0
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        s += x[i]
    return s / <double> x.shape[0]


def sigma_mask(const double[::1] x, double k, int ddof):
    cdef Py_ssize_t n = x.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] mask = out
    cdef double m = _mean(x)
    cdef double s2 = 0.0, d
    cdef Py_ssize_t i
    for i in range(n):
        d = x[i] - m
        s2 += d * d
    cdef double bound = k * sqrt(s2 / <double> (n - ddof))
    for i in range(n):
        if fabs(x[i] - m) > bound:
            mask[i] = 1
    return out


cdef double _quantile7(const double *xs, Py_ssize_t n, double q) noexcept nogil:
    cdef double h = (<double> (n - 1)) * q
    cdef Py_ssize_t lo = <Py_ssize_t> h
    if lo >= n - 1:
        return xs[n - 1]
    cdef double frac = h - <double> lo
    return xs[lo] + frac * (xs[lo + 1] - xs[lo])


def iqr_mask(const double[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] mask = out
    cdef double *xs = <double *> malloc(n * sizeof(double))
    if xs == NULL:
        raise MemoryError()
    memcpy(xs, &x[0], n * sizeof(double))
    _sort_doubles(xs, n)
    cdef double q1 = _quantile7(xs, n, 0.25)
    cdef double q3 = _quantile7(xs, n, 0.75)
    free(xs)
    cdef double w = 1.5 * (q3 - q1)
    cdef double lo = q1 - w
    cdef double hi = q3 + w
    cdef Py_ssize_t i
    for i in range(n):
        if x[i] < lo or x[i] > hi:
            mask[i] = 1
    return out


cdef double _median_sorted(const double *xs, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t mid = n // 2
    if n % 2 == 1:
        return xs[mid]
    return 0.5 * (xs[mid - 1] + xs[mid])


def mad_mask(const double[::1] x, double threshold):
    cdef Py_ssize_t n = x.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] mask = out
    cdef double *buf = <double *> malloc(n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    memcpy(buf, &x[0], n * sizeof(double))
    _sort_doubles(buf, n)
    cdef double med = _median_sorted(buf, n)
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = fabs(x[i] - med)
    _sort_doubles(buf, n)
    cdef double mad = 1.4826 * _median_sorted(buf, n)
    free(buf)
    if mad > 0.0:
        for i in range(n):
            if fabs(x[i] - med) / mad > threshold:
                mask[i] = 1
    else:
        for i in range(n):
            if fabs(x[i] - med) > 0.0:
                mask[i] = 1
    return out


def grubbs_mask(const double[::1] x, const double[::1] crit):
    cdef Py_ssize_t n = x.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] mask = out
    cdef VI *arr = <VI *> malloc(n * sizeof(VI))
    if arr == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        arr[i].v = x[i]
        arr[i].i = i
    qsort(arr, n, sizeof(VI), _cmp_vi)
    cdef double s1 = 0.0, s2 = 0.0
    for i in range(n):
        s1 += arr[i].v
        s2 += arr[i].v * arr[i].v
    cdef Py_ssize_t lo = 0, hi = n - 1, pos
    cdef Py_ssize_t cnt = n
    cdef double m, var, sd, d_lo, d_hi, g, v
    while cnt >= 3:
        m = s1 / <double> cnt
        var = (s2 - <double> cnt * m * m) / <double> (cnt - 1)
        if var <= 0.0:
            break
        sd = sqrt(var)
        d_lo = m - arr[lo].v
        d_hi = arr[hi].v - m
        if d_hi >= d_lo:
            g = d_hi / sd
            pos = hi
        else:
            g = d_lo / sd
            pos = lo
        if g > crit[cnt]:
            v = arr[pos].v
            s1 -= v
            s2 -= v * v
            cnt -= 1
            mask[arr[pos].i] = 1
            if pos == hi:
                hi -= 1
            else:
                lo += 1
        else:
            break
    free(arr)
    return out


def winsorize_values(const double[::1] x, Py_ssize_t k):
    cdef Py_ssize_t n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    if k <= 0:
        for i in range(n):
            o[i] = x[i]
        return out
    cdef double *xs = <double *> malloc(n * sizeof(double))
    if xs == NULL:
        raise MemoryError()
    memcpy(xs, &x[0], n * sizeof(double))
    _sort_doubles(xs, n)
    cdef double lo = xs[k]
    cdef double hi = xs[n - 1 - k]
    free(xs)
    for i in range(n):
        if x[i] < lo:
            o[i] = lo
        elif x[i] > hi:
            o[i] = hi
        else:
            o[i] = x[i]
    return out


def mw_u1_ties(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t n = na + nb
    cdef VI *arr = <VI *> malloc(n * sizeof(VI))
    if arr == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, j, q
    for i in range(na):
        arr[i].v = a[i]
        arr[i].i = i
    for i in range(nb):
        arr[na + i].v = b[i]
        arr[na + i].i = na + i
    qsort(arr, n, sizeof(VI), _cmp_vi)
    cdef double r1 = 0.0, tie_sum = 0.0, mid, t
    i = 0
    while i < n:
        j = i
        while j + 1 < n and arr[j + 1].v == arr[i].v:
            j += 1
        mid = 0.5 * <double> (i + j) + 1.0
        t = <double> (j - i + 1)
        if t > 1.0:
            tie_sum += t * t * t - t
        for q in range(i, j + 1):
            if arr[q].i < na:
                r1 += mid
        i = j + 1
    free(arr)
    cdef double u1 = r1 - (<double> na) * (<double> (na + 1)) / 2.0
    return u1, tie_sum


def perm_abs_hits(const double[::1] pool, Py_ssize_t na, const double[:, ::1] u):
    cdef Py_ssize_t n_perm = u.shape[0]
    cdef Py_ssize_t n = pool.shape[0]
    cdef Py_ssize_t nb = n - na
    cdef double sa = 0.0, sb = 0.0
    cdef Py_ssize_t i, p, j
    for i in range(na):
        sa += pool[i]
    for i in range(na, n):
        sb += pool[i]
    cdef double t_obs = sa / <double> na - sb / <double> nb
    cdef double abs_obs = fabs(t_obs)
    cdef double scale = abs_obs if abs_obs > 1.0 else 1.0
    cdef double thr = abs_obs - 1e-12 * scale
    cdef double *scratch = <double *> malloc(n * sizeof(double))
    if scratch == NULL:
        raise MemoryError()
    cdef Py_ssize_t hits = 0
    cdef double tmp, t
    for p in range(n_perm):
        memcpy(scratch, &pool[0], n * sizeof(double))
        for i in range(na):
            j = i + <Py_ssize_t> (u[p, i] * <double> (n - i))
            tmp = scratch[i]
            scratch[i] = scratch[j]
            scratch[j] = tmp
        sa = 0.0
        for i in range(na):
            sa += scratch[i]
        sb = 0.0
        for i in range(na, n):
            sb += scratch[i]
        t = sa / <double> na - sb / <double> nb
        if fabs(t) >= thr:
            hits += 1
    free(scratch)
    return hits, t_obs


cdef double _beta_pseries(double a, double b, double x) noexcept nogil:
    cdef double ai = 1.0 / a
    cdef double u = (1.0 - b) * x
    cdef double v = u / (a + 1.0)
    cdef double t1 = v
    cdef double t = u
    cdef double n = 2.0
    cdef double s = 0.0
    cdef double z = _MACHEP * ai
    while fabs(v) > z:
        u = (n - b) * x / n
        t *= u
        v = t / (a + n)
        s += v
        n += 1.0
    s += t1
    s += ai
    u = a * log(x)
    t = lgamma(a + b) - lgamma(a) - lgamma(b) + u + log(s)
    if t < _MINLOG:
        return 0.0
    return exp(t)


cdef double _incbcf(double a, double b, double x) noexcept nogil:
    cdef double k1 = a
    cdef double k2 = a + b
    cdef double k3 = a
    cdef double k4 = a + 1.0
    cdef double k5 = 1.0
    cdef double k6 = b - 1.0
    cdef double k7 = a + 1.0
    cdef double k8 = a + 2.0
    cdef double pkm2 = 0.0
    cdef double qkm2 = 1.0
    cdef double pkm1 = 1.0
    cdef double qkm1 = 1.0
    cdef double ans = 1.0
    cdef double r = 1.0
    cdef double thresh = 3.0 * _MACHEP
    cdef double xk, pk, qk, t
    cdef int it
    for it in range(300):
        xk = -(x * k1 * k2) / (k3 * k4)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2 = pkm1
        pkm1 = pk
        qkm2 = qkm1
        qkm1 = qk
        xk = (x * k5 * k6) / (k7 * k8)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2 = pkm1
        pkm1 = pk
        qkm2 = qkm1
        qkm1 = qk
        if qk != 0.0:
            r = pk / qk
        if r != 0.0:
            t = fabs((ans - r) / r)
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
        if fabs(qk) + fabs(pk) > _BIG:
            pkm2 *= _BIGINV
            pkm1 *= _BIGINV
            qkm2 *= _BIGINV
            qkm1 *= _BIGINV
        if fabs(qk) < _BIGINV or fabs(pk) < _BIGINV:
            pkm2 *= _BIG
            pkm1 *= _BIG
            qkm2 *= _BIG
            qkm1 *= _BIG
    return ans


cdef double _incbd(double a, double b, double x) noexcept nogil:
    cdef double k1 = a
    cdef double k2 = b - 1.0
    cdef double k3 = a
    cdef double k4 = a + 1.0
    cdef double k5 = 1.0
    cdef double k6 = a + b
    cdef double k7 = a + 1.0
    cdef double k8 = a + 2.0
    cdef double pkm2 = 0.0
    cdef double qkm2 = 1.0
    cdef double pkm1 = 1.0
    cdef double qkm1 = 1.0
    cdef double z = x / (1.0 - x)
    cdef double ans = 1.0
    cdef double r = 1.0
    cdef double thresh = 3.0 * _MACHEP
    cdef double xk, pk, qk, t
    cdef int it
    for it in range(300):
        xk = -(z * k1 * k2) / (k3 * k4)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2 = pkm1
        pkm1 = pk
        qkm2 = qkm1
        qkm1 = qk
        xk = (z * k5 * k6) / (k7 * k8)
        pk = pkm1 + pkm2 * xk
        qk = qkm1 + qkm2 * xk
        pkm2 = pkm1
        pkm1 = pk
        qkm2 = qkm1
        qkm1 = qk
        if qk != 0.0:
            r = pk / qk
        if r != 0.0:
            t = fabs((ans - r) / r)
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
        if fabs(qk) + fabs(pk) > _BIG:
            pkm2 *= _BIGINV
            pkm1 *= _BIGINV
            qkm2 *= _BIGINV
            qkm1 *= _BIGINV
        if fabs(qk) < _BIGINV or fabs(pk) < _BIGINV:
            pkm2 *= _BIG
            pkm1 *= _BIG
            qkm2 *= _BIG
            qkm1 *= _BIG
    return ans


cdef double _betai(double a, double b, double x) except -1.0:
    if a <= 0.0 or b <= 0.0:
        raise ValueError("betai requires a > 0 and b > 0")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    cdef bint flag = False
    cdef double w, xc, y, t, tmp
    if b * x <= 1.0 and x <= 0.95:
        return _beta_pseries(a, b, x)
    w = 1.0 - x
    if x > a / (a + b):
        flag = True
        tmp = a
        a = b
        b = tmp
        xc = x
        x = w
    else:
        xc = w
    if flag and b * x <= 1.0 and x <= 0.95:
        t = _beta_pseries(a, b, x)
        if t <= _MACHEP:
            return 1.0 - _MACHEP
        return 1.0 - t
    y = x * (a + b - 2.0) - (a - 1.0)
    if y < 0.0:
        w = _incbcf(a, b, x)
    else:
        w = _incbd(a, b, x) / xc
    y = a * log(x) + b * log(xc)
    y += lgamma(a + b) - lgamma(a) - lgamma(b)
    y += log(w / a)
    t = 0.0 if y < _MINLOG else exp(y)
    if flag:
        if t <= _MACHEP:
            t = 1.0 - _MACHEP
        else:
            t = 1.0 - t
    return t


def betai(double a, double b, double x):
    return _betai(a, b, x)


def t_sf_two_sided(double t, double df):
    if df <= 0:
        raise ValueError("df must be positive")
    if t == 0.0:
        return 1.0
    return _betai(0.5 * df, 0.5, df / (df + t * t))


def t_p_array(const double[::1] t, double df):
    if df <= 0:
        raise ValueError("df must be positive")
    cdef Py_ssize_t n = t.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(n):
        if t[i] == 0.0:
            o[i] = 1.0
        else:
            o[i] = _betai(0.5 * df, 0.5, df / (df + t[i] * t[i]))
    return out


def normal_sf_two_sided(double z):
    return erfc(fabs(z) / sqrt(2.0))
