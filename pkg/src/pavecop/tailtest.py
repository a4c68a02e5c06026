"""Weighted Cramer-von Mises type test of independence on the lower-left pavement.

The statistic is

    Omega = n * int_0^w int_0^w u^(2 nu1) v^(2 nu2) (C_n(u, v) - u v)^2 du dv

computed exactly: ``C_n`` is constant on the cells ``((i-1)/n, i/n] x
((j-1)/n, j/n]`` so each cell contributes closed-form weight moments.
"""

from __future__ import annotations

import argparse
import enum
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from pavecop._rng import derive_rng
from pavecop.empirical import Sample
from pavecop.gaussian import integral_squared_weighted, simulate_tied_down
from pavecop.models import TailContext


class Method(enum.Enum):
    MC = "mc"
    GAUSS = "gauss"


def _moments(n: int, window: float, nu: float, ncell: int) -> np.ndarray:
    """``A[p, i] = int over cell i clipped to [0, window] of x^(2 nu + p)``."""
    lo = np.arange(ncell) / n
    hi = np.minimum(np.arange(1, ncell + 1) / n, window)
    out = np.empty((3, ncell))
    for p in range(3):
        e = 2.0 * nu + p + 1.0
        out[p] = (hi ** e - lo ** e) / e
    return out


@numba.njit(cache=True, nogil=True)
def _omega_sums(perm, k, a0, a1, b0, b1):
    # row update: N(i, j) = N(i-1, j) + [perm[i-1] <= j]
    row = np.zeros(k, dtype=np.int64)
    s2 = 0.0
    s1 = 0.0
    for i in range(k):
        r = perm[i] - 1
        for j in range(r, k):
            row[j] += 1
        q2 = 0.0
        q1 = 0.0
        for j in range(k):
            c = row[j]
            if c:
                q2 += c * c * b0[j]
                q1 += c * b1[j]
        s2 += a0[i] * q2
        s1 += a1[i] * q1
    return s2, s1


def _check_nu(nu1, nu2):
    if nu1 <= -0.5 or nu2 <= -0.5:
        raise ValueError("nu1 and nu2 must exceed -1/2")


def omega_from_ranks(perm: np.ndarray, window: float, nu1: float, nu2: float) -> float:
    """Omega from ``perm[r-1]``, the second rank of the point with first rank ``r``."""
    n = perm.size
    k = min(n, int(math.ceil(n * window - 1e-9 * n * window)))
    k = max(k, 1)
    a = _moments(n, window, nu1, k)
    b = _moments(n, window, nu2, k)
    s2, s1 = _omega_sums(np.ascontiguousarray(perm, dtype=np.int64), k, a[0], a[1], b[0], b[1])
    val = n * (s2 / n ** 2 - 2.0 * s1 / n + a[2].sum() * b[2].sum())
    return max(val, 0.0)


def omega_statistic(sample: Sample, ctx: TailContext, nu1: float = 0.0, nu2: float = 0.0) -> float:
    """Exact weighted integral of ``n (C_n - uv)^2`` over ``[0, k_n/n]^2``."""
    _check_nu(nu1, nu2)
    if not ctx.window > 0:
        raise ValueError("window must be positive")
    return omega_from_ranks(sample.rv_by_ru, ctx.window, nu1, nu2)


def gauss_lattice(window: float) -> int:
    """Lattice resolution for the limit functional: at least 64 cells across
    the window, between 128 and 1024 overall."""
    return int(min(1024, max(128, math.ceil(64.0 / window))))


_GAUSS_BATCH = 64


def null_distribution(n: int, ctx: TailContext, nu1: float = 0.0, nu2: float = 0.0, reps: int = 1000,
                      seed: int = 0, method: Method = Method.MC, workers: int = 1,
                      stream: tuple = ()) -> np.ndarray:
    """Sorted null draws of Omega.

    ``MC`` draws ``reps`` independence samples of size ``n`` (only the rank
    permutation matters, so a uniform random permutation is drawn). ``GAUSS``
    integrates the weighted square of simulated tied-down bridges over the
    window. Draw ``r`` uses stream ``(seed, *stream, r)``, so the result does
    not depend on ``workers``.
    """
    _check_nu(nu1, nu2)
    if reps < 100:
        raise ValueError("reps must be at least 100")
    method = Method(method)
    w = ctx.window
    if method is Method.MC:
        def job(r):
            perm = derive_rng(seed, *stream, r).permutation(n) + 1
            return omega_from_ranks(perm, w, nu1, nu2)

        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                out = np.array(list(ex.map(job, range(reps))))
        else:
            out = np.array([job(r) for r in range(reps)])
    else:
        m = gauss_lattice(w)

        def batch(lo):
            hi = min(lo + _GAUSS_BATCH, reps)
            fields = np.stack([simulate_tied_down(m, 1, seed, *stream, r)[0] for r in range(lo, hi)])
            return np.atleast_1d(integral_squared_weighted(fields, w, nu1, nu2))

        starts = range(0, reps, _GAUSS_BATCH)
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                parts = list(ex.map(batch, starts))
        else:
            parts = [batch(lo) for lo in starts]
        out = np.concatenate(parts)
    return np.sort(out)


@dataclass(frozen=True)
class TestReport:
    """Outcome of a tail-independence test."""

    __test__ = False

    omega: float
    p_value: float
    reject: bool
    level: float
    reps: int
    method: Method
    nu1: float
    nu2: float
    ctx: TailContext

    def to_dict(self) -> dict:
        return {
            "omega": float(self.omega), "p_value": float(self.p_value), "reject": bool(self.reject),
            "level": self.level, "reps": int(self.reps), "method": self.method.value, "nu1": self.nu1, "nu2": self.nu2,
            "n": self.ctx.n, "kn": self.ctx.kn, "window": self.ctx.window,
        }


def p_value(omega: float, null: np.ndarray) -> float:
    """Add-one Monte Carlo p-value ``(1 + #{null >= omega}) / (reps + 1)``."""
    null = np.sort(np.asarray(null))
    exceed = null.size - np.searchsorted(null, omega, side="left")
    return (1.0 + exceed) / (null.size + 1.0)


def tail_independence_test(sample: Sample, ctx: TailContext, nu1: float = 0.0, nu2: float = 0.0,
                           reps: int = 1000, seed: int = 0, level: float = 0.05,
                           method: Method = Method.MC, null: np.ndarray | None = None,
                           workers: int = 1) -> TestReport:
    """Test independence near the origin with the weighted statistic Omega.

    A precomputed ``null`` (as from :func:`null_distribution`) may be passed
    to reuse one calibration across many samples of the same size.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    method = Method(method)
    omega = omega_statistic(sample, ctx, nu1, nu2)
    if null is None:
        null = null_distribution(sample.n, ctx, nu1, nu2, reps, seed, method, workers)
    pv = p_value(omega, null)
    return TestReport(omega, pv, bool(pv <= level), level, len(null), method, nu1, nu2, ctx)


def main(argv=None) -> int:
    from pavecop.dataio import read_sample

    ap = argparse.ArgumentParser(prog="tailtest", description="Weighted test of tail independence.")
    ap.add_argument("--input", required=True, help="delimited file with two numeric columns")
    grp = ap.add_mutually_exclusive_group(required=True)
    grp.add_argument("--window", type=float, help="pavement side k_n/n")
    grp.add_argument("--kn-gamma", type=float, help="k_n = gamma * n")
    ap.add_argument("--nu1", type=float, default=0.0)
    ap.add_argument("--nu2", type=float, default=0.0)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--level", type=float, default=0.05)
    ap.add_argument("--method", choices=[m.value for m in Method], default="mc")
    ap.add_argument("--pseudo", action="store_true", help="rank-transform columns to (i - 0.5)/n")
    ap.add_argument("--null-csv", help="write the sorted null draws here")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)
    try:
        sample = read_sample(args.input, pseudo=args.pseudo)
        window = args.window if args.window is not None else args.kn_gamma
        ctx = TailContext.from_window(sample.n, window)
        null = null_distribution(sample.n, ctx, args.nu1, args.nu2, args.reps, args.seed,
                                 Method(args.method), args.workers)
        rep = tail_independence_test(sample, ctx, args.nu1, args.nu2, args.reps, args.seed, args.level,
                                     Method(args.method), null=null)
        if args.null_csv:
            np.savetxt(args.null_csv, null, fmt="%.17g", header="omega", comments="")
    except (OSError, ValueError) as exc:
        print(f"tailtest: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(rep.to_dict()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
