"""Pure-Python reference kernels; same contracts as the compiled ``_speedups``."""
from __future__ import annotations

import math

import numpy as np

NAME = "python"


def jacobi_sweeps(a: np.ndarray, v: np.ndarray, tol: float, max_sweeps: int) -> int:
    """Cyclic-by-row Jacobi rotations applied in place to ``a`` and ``v``.

    Returns the number of sweeps performed before the off-diagonal
    Frobenius norm dropped below ``tol * ||a||_F``, or -1 on non-convergence.
    """
    n = a.shape[0]
    fro = math.sqrt(float(np.sum(a * a)))
    off_diag = ~np.eye(n, dtype=bool)
    with np.errstate(over="ignore"):
        return _sweeps(a, v, tol, max_sweeps, n, fro, off_diag)


def _sweeps(a, v, tol, max_sweeps, n, fro, off_diag) -> int:
    for sweep in range(max_sweeps + 1):
        # summed directly: |a|^2 - |diag|^2 cancels catastrophically
        off = math.sqrt(float(np.sum(a[off_diag] ** 2)))
        if off <= tol * fro:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :]
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return -1


def scan_moduli(lc, start: int, stop: int) -> tuple[int, int, int]:
    """First odd ``S`` in ``[start, stop)`` whose residues share a factor > 1.

    Returns ``(S, gcd, tries)``; ``S == 0`` when the range is exhausted.
    """
    tries = 0
    for S in range(start | 1, stop, 2):
        tries += 1
        g = 0
        for x in lc:
            g = math.gcd(g, x % S)
            if g == 1:
                break
        if g > 1:
            return S, g, tries
    return 0, 0, tries


def _structured(lc, S: int, t: int) -> int:
    g = 0
    for x in lc:
        g = math.gcd(g, x % S)
        if g == 1:
            return 0
    if g == 0:
        return 0
    for x in lc:
        r, rem = divmod(x, S)
        if not (1 <= r <= t and 1 <= rem // g <= t):
            return 0
    return g


def scan_differences(lc, t: int) -> tuple[int, int]:
    """Look for a pairwise difference of the form ``k*S`` with ``1 <= k <= t``.

    Every element must decompose as ``z*g + r*S`` with ``z, r`` in ``[1, t]``
    for a candidate to be accepted.  Returns ``(S, g)`` or ``(0, 0)``.
    """
    lo, hi = min(lc), max(lc)
    n = len(lc)
    for i in range(n):
        for j in range(i + 1, n):
            D = abs(lc[i] - lc[j])
            if D == 0:
                continue
            # S <= min(lc) since r >= 1; S > max(lc)/(t+1) since r <= t
            k0 = max(1, -(-D // lo))
            k1 = min(t, D * (t + 1) // hi)
            for k in range(k0, k1 + 1):
                if D % k:
                    continue
                S = D // k
                if S < 2:
                    break
                g = _structured(lc, S, t)
                if g:
                    return S, g
    return 0, 0
