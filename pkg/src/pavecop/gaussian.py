"""Brownian sheet, bivariate Brownian bridge and tied-down bridge on lattices.

A field of resolution ``m`` holds values at ``(i/m, j/m)`` for ``i, j = 0..m``.
The sheet restricted to the lattice is simulated exactly from independent
cell increments, so every covariance at lattice points is exact.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass

import numpy as np

from pavecop._rng import derive_rng
from pavecop.models import CopulaModel, copula_eval


class FieldKind(enum.Enum):
    SHEET = "sheet"
    BRIDGE = "bridge"
    TIED_DOWN = "tied_down"
    GENERIC = "generic"


@dataclass(frozen=True, eq=False)
class GridField:
    """Values on the ``(m+1) x (m+1)`` lattice of the unit square.

    ``values[i, j]`` is the field at ``(i/m, j/m)``.
    """

    m: int
    values: np.ndarray
    kind: FieldKind = FieldKind.GENERIC

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.m + 1, self.m + 1):
            raise ValueError(f"values must have shape {(self.m + 1, self.m + 1)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "kind", FieldKind(self.kind))

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def at(self, s: float, t: float) -> float:
        """Value at a lattice point; ``s * m`` and ``t * m`` must be integers."""
        i = int(round(s * self.m))
        j = int(round(t * self.m))
        if abs(i - s * self.m) > 1e-9 or abs(j - t * self.m) > 1e-9:
            raise ValueError("point is not on the lattice")
        return float(self.values[i, j])

    def dumps(self, delimiter: str = ",") -> str:
        """Matrix text, one lattice row per line."""
        buf = io.StringIO()
        np.savetxt(buf, self.values, delimiter=delimiter, fmt="%.17g")
        return buf.getvalue()


def _sheet_values(increments: np.ndarray) -> np.ndarray:
    m = increments.shape[-1]
    out = np.zeros(increments.shape[:-2] + (m + 1, m + 1))
    out[..., 1:, 1:] = increments.cumsum(axis=-2).cumsum(axis=-1)
    return out


def simulate_sheet(m: int, seed: int, *keys: int) -> GridField:
    """Brownian sheet on the lattice, from i.i.d. ``N(0, 1/m^2)`` cell masses."""
    if m < 1:
        raise ValueError("m must be >= 1")
    rng = derive_rng(seed, *keys)
    inc = rng.standard_normal((m, m)) / m
    return GridField(m, _sheet_values(inc), FieldKind.SHEET)


def simulate_sheets(m: int, reps: int, seed: int, *keys: int) -> np.ndarray:
    """Stack of ``reps`` independent sheets, shape ``(reps, m+1, m+1)``.

    Replication ``r`` uses stream ``(seed, *keys, r)`` and so matches
    ``simulate_sheet(m, seed, *keys, r)``.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    out = np.empty((reps, m + 1, m + 1))
    for r in range(reps):
        inc = derive_rng(seed, *keys, r).standard_normal((m, m)) / m
        out[r] = _sheet_values(inc)
    return out


def _bridge_values(w: np.ndarray) -> np.ndarray:
    m = w.shape[-1] - 1
    g = np.linspace(0.0, 1.0, m + 1)
    out = w - np.multiply.outer(g, g) * w[..., -1:, -1:]
    # exact zero at the far corner
    out[..., -1, -1] = 0.0
    return out


def _tied_values(b: np.ndarray) -> np.ndarray:
    m = b.shape[-1] - 1
    g = np.linspace(0.0, 1.0, m + 1)
    out = b - g[:, None] * b[..., -1:, :] - g[None, :] * b[..., :, -1:]
    out[..., 0, :] = 0.0
    out[..., :, 0] = 0.0
    out[..., -1, :] = 0.0
    out[..., :, -1] = 0.0
    return out


def sheet_to_bridge(field: GridField) -> GridField:
    """``B(s, t) = W(s, t) - s t W(1, 1)``."""
    if field.kind is not FieldKind.SHEET:
        raise ValueError("expected a sheet field")
    return GridField(field.m, _bridge_values(field.values), FieldKind.BRIDGE)


def bridge_to_tied_down(field: GridField) -> GridField:
    """``B(s, t) - s B(1, t) - t B(s, 1)``, zero on the whole boundary."""
    if field.kind is not FieldKind.BRIDGE:
        raise ValueError("expected a bridge field")
    return GridField(field.m, _tied_values(field.values), FieldKind.TIED_DOWN)


def simulate_tied_down(m: int, reps: int, seed: int, *keys: int) -> np.ndarray:
    """Stack of tied-down bridges, shape ``(reps, m+1, m+1)``."""
    return _tied_values(_bridge_values(simulate_sheets(m, reps, seed, *keys)))


class CovKind(enum.Enum):
    SHEET = "sheet"
    BRIDGE = "bridge"
    TIED_DOWN = "tied_down"
    GENERAL_BRIDGE = "general_bridge"


def covariance(kind: CovKind, s1, t1, s2, t2, model: CopulaModel | None = None):
    """Closed-form covariance of the chosen Gaussian field.

    ``GENERAL_BRIDGE`` is the bridge of a copula ``C``:
    ``C(s1 ^ s2, t1 ^ t2) - C(s1, t1) C(s2, t2)``.
    """
    kind = CovKind(kind)
    args = [np.asarray(x, dtype=float) for x in (s1, t1, s2, t2)]
    if any(np.any((a < 0) | (a > 1)) for a in args):
        raise ValueError("arguments must lie in [0, 1]")
    s1, t1, s2, t2 = args
    ms = np.minimum(s1, s2)
    mt = np.minimum(t1, t2)
    if kind is CovKind.SHEET:
        out = ms * mt
    elif kind is CovKind.BRIDGE:
        out = ms * mt - s1 * t1 * s2 * t2
    elif kind is CovKind.TIED_DOWN:
        out = (ms - s1 * s2) * (mt - t1 * t2)
    else:
        if model is None:
            raise ValueError("GENERAL_BRIDGE needs a CopulaModel")
        out = copula_eval(model, ms, mt) - copula_eval(model, s1, t1) * copula_eval(model, s2, t2)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# weighted quadrature


def _gram(m: int, window: float, nu: float) -> np.ndarray:
    """Gram matrix ``G[a, c] = int_0^window x^(2 nu) phi_a(x) phi_c(x) dx`` of
    the piecewise-linear hat basis on ``{0, 1/m, ..., 1}``, with the weight
    moments integrated exactly on each (clipped) cell."""
    h = 1.0 / m
    ncell = int(np.ceil(window * m - 1e-9))
    xl = np.arange(ncell) * h
    xr = xl + h
    b = np.minimum(xr, window)
    i0, i1, i2 = ((b ** e - xl ** e) / e for e in (2.0 * nu + 1.0, 2.0 * nu + 2.0, 2.0 * nu + 3.0))
    # on a cell phi_left = (xr - x) / h and phi_right = (x - xl) / h
    gll = (xr * xr * i0 - 2.0 * xr * i1 + i2) / (h * h)
    grr = (xl * xl * i0 - 2.0 * xl * i1 + i2) / (h * h)
    glr = (-xl * xr * i0 + (xl + xr) * i1 - i2) / (h * h)
    g = np.zeros((m + 1, m + 1))
    k = np.arange(ncell)
    np.add.at(g, (k, k), gll)
    np.add.at(g, (k + 1, k + 1), grr)
    g[k, k + 1] += glr
    g[k + 1, k] += glr
    return g


def integral_squared_weighted(field, window: float, nu1: float, nu2: float):
    """``int_0^w int_0^w u^(2 nu1) v^(2 nu2) f(u, v)^2 du dv`` for the bilinear
    interpolant ``f`` of a lattice field.

    ``field`` is a :class:`GridField` or an array of shape ``(..., m+1, m+1)``
    whose leading axes are batched. The weight is integrated exactly on every
    cell, so the only error is the bilinear interpolation of the field.
    """
    if not 0.0 < window <= 1.0:
        raise ValueError("window must lie in (0, 1]")
    if nu1 <= -0.5 or nu2 <= -0.5:
        raise ValueError("nu1 and nu2 must exceed -1/2")
    vals = field.values if isinstance(field, GridField) else np.asarray(field, dtype=float)
    m = vals.shape[-1] - 1
    gx = _gram(m, window, nu1)
    gy = _gram(m, window, nu2)
    out = np.sum(vals * (gx @ vals @ gy), axis=(-2, -1))
    return float(out) if np.ndim(out) == 0 else out
