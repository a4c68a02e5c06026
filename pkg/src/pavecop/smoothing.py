"""Kernel-smoothed joint distribution function and the smoothed tail copula process.

The smoothed estimator is ``T_hat(u, v) = mean_i K((u - U_i)/h, (v - V_i)/h)``
with ``h = a_n ** 0.5`` and product integrated kernel ``K(x, y) = K1(x) K1(y)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from pavecop.empirical import Margin, Sample, _check_unit, _quantile_from_counts, quantile_counts
from pavecop.models import TailContext


class KernelKind(enum.Enum):
    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """Product kernel and bandwidth rule ``a_n = c * n ** -(1/4 + delta)``.

    Parameters
    ----------
    kind : KernelKind
    c, delta : float
        Bandwidth constants, both positive.
    a_n : float, optional
        Fixed ``a_n`` overriding the rule.
    """

    kind: KernelKind = KernelKind.EPANECHNIKOV
    c: float = 1.0
    delta: float = 0.05
    a_n: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if not self.c > 0 or not self.delta > 0:
            raise ValueError("bandwidth constants c and delta must be positive")
        if self.a_n is not None and not self.a_n > 0:
            raise ValueError("a_n must be positive")

    def bandwidth(self, n: int) -> float:
        """``a_n``; the kernel is applied at scale ``a_n ** 0.5``."""
        if self.a_n is not None:
            return float(self.a_n)
        return self.c * float(n) ** -(0.25 + self.delta)

    def scale(self, n: int) -> float:
        return math.sqrt(self.bandwidth(n))


def kernel_cdf(kind: KernelKind, x):
    """Integrated univariate kernel ``K1``."""
    x = np.asarray(x, dtype=float)
    if KernelKind(kind) is KernelKind.GAUSSIAN:
        return ndtr(x)
    xc = np.clip(x, -1.0, 1.0)
    return 0.5 + 0.75 * xc - 0.25 * xc ** 3


def integrated_kernel(spec: KernelSpec, x, y):
    """``K(x, y) = K1(x) K1(y)``."""
    out = kernel_cdf(spec.kind, x) * kernel_cdf(spec.kind, y)
    return float(out) if np.ndim(out) == 0 else out


_CHUNK = 1 << 22


def _smoothed_grid(sample: Sample, spec: KernelSpec, h: float, xs, ys) -> np.ndarray:
    """``T_hat`` on the product grid ``xs x ys`` as a matrix product."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    n = sample.n
    out = np.zeros((xs.size, ys.size))
    step = max(1, _CHUNK // max(xs.size, ys.size))
    for lo in range(0, n, step):
        u = sample.u[lo:lo + step]
        v = sample.v[lo:lo + step]
        a = kernel_cdf(spec.kind, (xs[None, :] - u[:, None]) / h)
        b = kernel_cdf(spec.kind, (ys[None, :] - v[:, None]) / h)
        out += a.T @ b
    return out / n


def _smoothed_points(sample, spec, h, u, v):
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    shape = u.shape
    u = u.ravel()
    v = v.ravel()
    out = np.empty(u.size)
    n = sample.n
    step = max(1, _CHUNK // n)
    for lo in range(0, u.size, step):
        a = kernel_cdf(spec.kind, (u[lo:lo + step, None] - sample.u[None, :]) / h)
        b = kernel_cdf(spec.kind, (v[lo:lo + step, None] - sample.v[None, :]) / h)
        out[lo:lo + step] = (a * b).mean(axis=1)
    return out.reshape(shape)


def smoothed_ecdf(sample: Sample, spec: KernelSpec, n_for_bandwidth: int, u, v):
    """Kernel-smoothed joint distribution function at ``(u, v)``.

    The bandwidth is ``spec.bandwidth(n_for_bandwidth)`` applied at scale
    ``a_n ** 0.5``. Inputs broadcast and may be any reals.
    """
    h = spec.scale(n_for_bandwidth)
    out = _smoothed_points(sample, spec, h, u, v)
    return float(out) if out.ndim == 0 else out


def smoothed_ecdf_grid(sample: Sample, spec: KernelSpec, n_for_bandwidth: int, xs, ys) -> np.ndarray:
    """``smoothed_ecdf`` on the product grid ``xs x ys``; entry ``[i, j]`` is at
    ``(xs[i], ys[j])``."""
    _check_unit(xs, ys)
    return _smoothed_grid(sample, spec, spec.scale(n_for_bandwidth), xs, ys)


def smoothed_tail_copula_process(sample: Sample, spec: KernelSpec, ctx: TailContext, u, v):
    """``sqrt(n) (T_hat(Un^-1(s), Vn^-1(t)) - s t)`` at ``s = u w``, ``t = v w``.

    The marginal quantiles are the plain empirical ones.
    """
    _check_unit(u, v)
    w = ctx.window
    s, t = np.broadcast_arrays(np.asarray(u, dtype=float) * w, np.asarray(v, dtype=float) * w)
    qu = _quantile_from_counts(sample, Margin.U, quantile_counts(sample, s))
    qv = _quantile_from_counts(sample, Margin.V, quantile_counts(sample, t))
    h = spec.scale(sample.n)
    out = math.sqrt(sample.n) * (_smoothed_points(sample, spec, h, qu, qv) - s * t)
    return float(out) if out.ndim == 0 else out


def smoothed_tail_copula_grid(sample: Sample, spec: KernelSpec, ctx: TailContext, grid_m: int) -> np.ndarray:
    """Smoothed tail copula process on the ``(grid_m+1)^2`` lattice of the
    rescaled unit square."""
    w = ctx.window
    x = np.linspace(0.0, 1.0, grid_m + 1) * w
    qu = _quantile_from_counts(sample, Margin.U, quantile_counts(sample, x))
    qv = _quantile_from_counts(sample, Margin.V, quantile_counts(sample, x))
    t_hat = _smoothed_grid(sample, spec, spec.scale(sample.n), qu, qv)
    return math.sqrt(sample.n) * (t_hat - np.outer(x, x))
