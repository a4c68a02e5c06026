"""Compiled kernels shared by the empirical-process code.

All counting is done in rank space: ``N(a, b) = #{i : ru_i <= a, rv_i <= b}``
covers both the empirical copula (thresholds ``ceil(n u)``) and the joint
ecdf of the uniforms (thresholds ``#{U_i <= u}``).
"""

import numba
import numpy as np

from pavecop.models import _copula_scalar

# weight slots of a combined 2-d process on the pavement, see _pair_value
W_GSTAR, W_ALPHA, W_ALPHA0, W_GSTAR2, W_ALPHA02 = range(5)


@numba.njit(cache=True, nogil=True)
def dominance_counts(perm, qa, qb):
    """``N(qa[i], qb[i])`` where ``perm[r-1]`` is the second rank of the
    observation with first rank ``r``."""
    n = perm.size
    q = qa.size
    out = np.zeros(q, dtype=np.int64)
    order = np.argsort(qa, kind="mergesort")
    tree = np.zeros(n + 1, dtype=np.int64)
    r = 0
    for k in range(q):
        idx = order[k]
        target = min(qa[idx], n)
        while r < target:
            j = perm[r]
            while j <= n:
                tree[j] += 1
                j += j & (-j)
            r += 1
        j = min(qb[idx], n)
        acc = 0
        while j > 0:
            acc += tree[j]
            j -= j & (-j)
        out[idx] = acc
    return out


@numba.njit(cache=True, nogil=True)
def _pair_value(s, t, na, nb, bs, bt, inv_n, weights, code, theta):
    st = s * t
    val = 0.0
    if weights[0] != 0.0:
        val += weights[0] * (na * inv_n - st)
    if weights[1] != 0.0:
        val += weights[1] * (nb * inv_n - st)
    if weights[2] != 0.0:
        val += weights[2] * (nb * inv_n - st - s * (bt * inv_n - t) - t * (bs * inv_n - s))
    if weights[3] != 0.0 or weights[4] != 0.0:
        c = _copula_scalar(code, theta, s, t, 0)
        if weights[3] != 0.0:
            val += weights[3] * (na * inv_n - c)
        if weights[4] != 0.0:
            cu = _copula_scalar(code, theta, s, t, 1)
            cv = _copula_scalar(code, theta, s, t, 2)
            val += weights[4] * (nb * inv_n - c - cv * (bt * inv_n - t) - cu * (bs * inv_n - s))
    return val


@numba.njit(cache=True, nogil=True)
def sweep_lines(px, pa, pb, lx, la, lb, perm, n, weights, code, theta, swap):
    """Max of ``|f|`` over every (line, probe) pair.

    Probes ``(px, pa, pb)`` run along one axis with ``pa`` and ``pb``
    nondecreasing; each line fixes the other coordinate. Counts along a
    line are accumulated by walking the probe-axis ranks once, so one line
    costs ``O(len(px) + max(pa, pb))``.
    """
    inv_n = 1.0 / n
    best = 0.0
    nprobe = px.size
    for li in range(lx.size):
        y = lx[li]
        ya = la[li]
        yb = lb[li]
        ra = 0
        rb = 0
        ca = 0
        cb = 0
        for p in range(nprobe):
            ta = pa[p]
            while ra < ta:
                if perm[ra] <= ya:
                    ca += 1
                ra += 1
            tb = pb[p]
            while rb < tb:
                if perm[rb] <= yb:
                    cb += 1
                rb += 1
            if swap:
                val = _pair_value(y, px[p], ca, cb, yb, tb, inv_n, weights, code, theta)
            else:
                val = _pair_value(px[p], y, ca, cb, tb, yb, inv_n, weights, code, theta)
            if val < 0.0:
                val = -val
            if val > best:
                best = val
    return best


@numba.njit(cache=True, nogil=True)
def pair_values(s, t, na, nb, bs, bt, n, weights, code, theta):
    out = np.empty(s.size)
    inv_n = 1.0 / n
    for i in range(s.size):
        out[i] = _pair_value(s[i], t[i], na[i], nb[i], bs[i], bt[i], inv_n, weights, code, theta)
    return out
