# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see _pykernels for the reference semantics."""
from libc.math cimport sqrt, fabs, copysign

NAME = "cython"


cdef inline unsigned long long _gcd(unsigned long long a, unsigned long long b) nogil:
    cdef unsigned long long tmp
    while b:
        tmp = a % b
        a = b
        b = tmp
    return a


def jacobi_sweeps(double[:, ::1] a, double[:, ::1] v, double tol, int max_sweeps):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double fro = 0.0, off, apq, theta, t, c, s, x, y
    cdef int result = -1
    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)
    with nogil:
        for sweep in range(max_sweeps + 1):
            off = 0.0
            for p in range(n):
                for q in range(n):
                    if p != q:
                        off += a[p, q] * a[p, q]
            if sqrt(off) <= tol * fro:
                result = sweep
                break
            if sweep == max_sweeps:
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = a[p, q]
                    if apq == 0.0:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    if fabs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = copysign(1.0, theta) / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for k in range(n):
                        x = a[k, p]
                        y = a[k, q]
                        a[k, p] = c * x - s * y
                        a[k, q] = s * x + c * y
                    for k in range(n):
                        x = a[p, k]
                        y = a[q, k]
                        a[p, k] = c * x - s * y
                        a[q, k] = s * x + c * y
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for k in range(n):
                        x = v[k, p]
                        y = v[k, q]
                        v[k, p] = c * x - s * y
                        v[k, q] = s * x + c * y
    return result


def scan_moduli(long long[::1] lc, long long start, long long stop):
    cdef Py_ssize_t m = lc.shape[0], i
    cdef long long S
    cdef long long tries = 0
    cdef unsigned long long g
    S = start | 1
    with nogil:
        while S < stop:
            tries += 1
            g = 0
            for i in range(m):
                g = _gcd(g, <unsigned long long>(lc[i] % S))
                if g == 1:
                    break
            if g > 1:
                break
            S += 2
    if S < stop:
        return int(S), int(g), int(tries)
    return 0, 0, int(tries)


cdef unsigned long long _structured(long long[::1] lc, long long S, long long t) nogil:
    cdef Py_ssize_t m = lc.shape[0], i
    cdef unsigned long long g = 0
    cdef long long r, rem, z
    for i in range(m):
        g = _gcd(g, <unsigned long long>(lc[i] % S))
        if g == 1:
            return 0
    if g == 0:
        return 0
    for i in range(m):
        r = lc[i] // S
        rem = lc[i] % S
        z = rem // <long long>g
        if r < 1 or r > t or z < 1 or z > t:
            return 0
    return g


def scan_differences(long long[::1] lc, long long t):
    cdef Py_ssize_t n = lc.shape[0], i, j
    cdef long long lo = lc[0], hi = lc[0], D, k, k0, k1, S
    cdef long long found_s = 0
    cdef unsigned long long g, found_g = 0
    for i in range(n):
        if lc[i] < lo:
            lo = lc[i]
        if lc[i] > hi:
            hi = lc[i]
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                D = lc[i] - lc[j]
                if D < 0:
                    D = -D
                if D == 0:
                    continue
                k0 = (D + lo - 1) // lo
                if k0 < 1:
                    k0 = 1
                # D * (t + 1) // hi without overflow for the int64 domain
                k1 = <long long>((<double>D) * (t + 1) / hi) + 1
                if k1 > t:
                    k1 = t
                k = k0
                while k <= k1:
                    if D % k == 0:
                        S = D // k
                        if S < 2:
                            break
                        g = _structured(lc, S, t)
                        if g:
                            found_s = S
                            found_g = g
                            break
                    k += 1
                if found_s:
                    break
            if found_s:
                break
    return int(found_s), int(found_g)
