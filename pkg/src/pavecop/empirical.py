"""Empirical distribution, quantile and copula processes of a bivariate sample.

Everything is evaluated in rank space. With ``ru``/``rv`` the marginal ranks,
the empirical copula is ``C_n(u, v) = N(ceil(n u), ceil(n v)) / n`` and the
joint ecdf of the uniforms is ``T_n(u, v) = N(U_n(u) n, V_n(v) n) / n`` where
``N(a, b) = #{i : ru_i <= a, rv_i <= b}``.

Processes on the pavement ``[0, k_n/n]^2`` are parametrised by the rescaled
point ``(u, v)`` in the unit square; ``s = u * window`` and ``t = v * window``
denote the original-scale coordinates.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from pavecop import _sweep
from pavecop.models import CopulaModel, Deriv, TailContext, copula_eval, log1, log2

#: above this many cell corners the sup-norm falls back to a point set
EXACT_PAIR_BUDGET = 20_000_000
#: left-limit probe offset, relative to the window
LEFT_SHIFT = 1e-9


class Margin(enum.Enum):
    U = "U"
    V = "V"


class ProcessKind(enum.Enum):
    ALPHA_JOINT = "alpha"
    ALPHA_U = "alpha_u"
    ALPHA_V = "alpha_v"
    BETA_U = "beta_u"
    BETA_V = "beta_v"
    ALPHA_JOINT_STAR = "alpha_star"
    ALPHA_U_STAR = "alpha_u_star"
    ALPHA_V_STAR = "alpha_v_star"
    BETA_U_STAR = "beta_u_star"
    BETA_V_STAR = "beta_v_star"
    G_STAR = "g_star"
    ALPHA_ZERO_STAR = "alpha0_star"
    G_STAR_STAR = "g_star_star"
    ALPHA_ZERO_STAR_STAR = "alpha0_star_star"

    @property
    def starred(self) -> bool:
        return self.value.endswith("star")

    @property
    def needs_model(self) -> bool:
        return self in (ProcessKind.G_STAR_STAR, ProcessKind.ALPHA_ZERO_STAR_STAR)

    @property
    def univariate(self) -> bool:
        return self.value[-1] in "uv" or "_u_" in self.value or "_v_" in self.value


# 2-d kinds as (weight slot, starred)
_JOINT_SLOTS = {
    ProcessKind.ALPHA_JOINT: _sweep.W_ALPHA,
    ProcessKind.ALPHA_JOINT_STAR: _sweep.W_ALPHA,
    ProcessKind.G_STAR: _sweep.W_GSTAR,
    ProcessKind.ALPHA_ZERO_STAR: _sweep.W_ALPHA0,
    ProcessKind.G_STAR_STAR: _sweep.W_GSTAR2,
    ProcessKind.ALPHA_ZERO_STAR_STAR: _sweep.W_ALPHA02,
}

# univariate kinds as (margin, piece)
_UNI = {
    ProcessKind.ALPHA_U: (Margin.U, "alpha"),
    ProcessKind.ALPHA_V: (Margin.V, "alpha"),
    ProcessKind.BETA_U: (Margin.U, "beta"),
    ProcessKind.BETA_V: (Margin.V, "beta"),
    ProcessKind.ALPHA_U_STAR: (Margin.U, "alpha"),
    ProcessKind.ALPHA_V_STAR: (Margin.V, "alpha"),
    ProcessKind.BETA_U_STAR: (Margin.U, "beta"),
    ProcessKind.BETA_V_STAR: (Margin.V, "beta"),
}


@dataclass(frozen=True, eq=False)
class Sample:
    """An immutable bivariate sample on the open unit square.

    Attributes
    ----------
    u, v : ndarray
        Coordinates in (0, 1).
    ru, rv : ndarray of int
        Marginal ranks 1..n, ties broken by original index.
    su, sv : ndarray
        Sorted copies of ``u`` and ``v``.
    """

    u: np.ndarray
    v: np.ndarray
    ru: np.ndarray
    rv: np.ndarray
    su: np.ndarray
    sv: np.ndarray
    rv_by_ru: np.ndarray = field(repr=False)
    ru_by_rv: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.u.size

    def sorted_margin(self, margin: Margin) -> np.ndarray:
        return self.su if Margin(margin) is Margin.U else self.sv

    def __len__(self):
        return self.n


def build_sample(pairs) -> Sample:
    """Build a :class:`Sample` from an ``(n, 2)`` array-like of pairs."""
    arr = np.asarray(pairs, dtype=float)
    if arr.size == 0:
        raise ValueError("empty sample")
    arr = arr.reshape(-1, 2)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise ValueError("sample coordinates must lie in the open interval (0, 1)")
    u = np.ascontiguousarray(arr[:, 0])
    v = np.ascontiguousarray(arr[:, 1])
    n = u.size
    order_u = np.argsort(u, kind="stable")
    order_v = np.argsort(v, kind="stable")
    ru = np.empty(n, dtype=np.int64)
    rv = np.empty(n, dtype=np.int64)
    ranks = np.arange(1, n + 1, dtype=np.int64)
    ru[order_u] = ranks
    rv[order_v] = ranks
    out = Sample(
        u=u, v=v, ru=ru, rv=rv, su=u[order_u], sv=v[order_v],
        rv_by_ru=rv[order_u], ru_by_rv=ru[order_v],
    )
    for a in (out.u, out.v, out.ru, out.rv, out.su, out.sv, out.rv_by_ru, out.ru_by_rv):
        a.flags.writeable = False
    return out


# ---------------------------------------------------------------------------
# rank arithmetic

_SNAP = 1e-11


def ceil_count(x):
    """``ceil`` that treats values within rounding error of an integer as that
    integer, so ``ceil_count(n * (i / n)) == i``."""
    x = np.asarray(x, dtype=float)
    r = np.rint(x)
    near = np.abs(x - r) <= _SNAP * np.maximum(1.0, np.abs(x))
    return np.where(near, r, np.ceil(x)).astype(np.int64)


def floor_count(x):
    x = np.asarray(x, dtype=float)
    r = np.rint(x)
    near = np.abs(x - r) <= _SNAP * np.maximum(1.0, np.abs(x))
    return np.where(near, r, np.floor(x)).astype(np.int64)


def _check_unit(*xs):
    for x in xs:
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)) or np.any((x < 0.0) | (x > 1.0)):
            raise ValueError("arguments must lie in [0, 1]")


def _ret(x, like):
    nd = like.ndim if isinstance(like, np.broadcast) else np.ndim(like)
    return float(x) if nd == 0 else x


def ecdf_counts(sample: Sample, margin: Margin, x) -> np.ndarray:
    """``#{U_i <= x}`` (or for V)."""
    srt = sample.sorted_margin(margin)
    x = np.asarray(x, dtype=float)
    if x.size < 4096 or srt.size < 4096:
        return np.searchsorted(srt, x, side="right")
    # large random query sets: sorted queries avoid a cache miss per bisection step
    flat = x.ravel()
    order = np.argsort(flat, kind="stable")
    out = np.empty(flat.size, dtype=np.int64)
    out[order] = np.searchsorted(srt, flat[order], side="right")
    return out.reshape(x.shape)


def quantile_counts(sample: Sample, p) -> np.ndarray:
    """Order-statistic index ``ceil(n p)`` (0 at p = 0)."""
    return np.minimum(ceil_count(sample.n * np.asarray(p, dtype=float)), sample.n)


def _quantile_from_counts(sample, margin, k):
    srt = sample.sorted_margin(margin)
    k = np.asarray(k)
    return np.where(k > 0, srt[np.maximum(k - 1, 0)], 0.0)


def ecdf_margin(sample: Sample, margin: Margin, x):
    _check_unit(x)
    return _ret(ecdf_counts(sample, Margin(margin), x) / sample.n, x)


def quantile_marginal(sample: Sample, margin: Margin, p):
    """Empirical quantile ``inf{s : ecdf(s) >= p}``, the ``ceil(n p)``-th order
    statistic; returns 0 at ``p = 0``."""
    _check_unit(p)
    k = quantile_counts(sample, p)
    return _ret(_quantile_from_counts(sample, Margin(margin), k), p)


def _dominance(sample, qa, qb):
    qa, qb = np.broadcast_arrays(np.asarray(qa, dtype=np.int64), np.asarray(qb, dtype=np.int64))
    shape = qa.shape
    out = _sweep.dominance_counts(sample.rv_by_ru, np.ascontiguousarray(qa).ravel(), np.ascontiguousarray(qb).ravel())
    return out.reshape(shape)


def ecdf_joint(sample: Sample, u, v):
    """``T_n(u, v) = #{U_i <= u, V_i <= v} / n``."""
    _check_unit(u, v)
    counts = _dominance(sample, ecdf_counts(sample, Margin.U, u), ecdf_counts(sample, Margin.V, v))
    return _ret(counts / sample.n, np.broadcast(np.asarray(u), np.asarray(v)))


def empirical_copula(sample: Sample, u, v):
    """Empirical copula via ranks: ``#{ru <= ceil(n u), rv <= ceil(n v)} / n``."""
    _check_unit(u, v)
    counts = _dominance(sample, quantile_counts(sample, u), quantile_counts(sample, v))
    return _ret(counts / sample.n, np.broadcast(np.asarray(u), np.asarray(v)))


# ---------------------------------------------------------------------------
# processes


def _scale(kind: ProcessKind, ctx: TailContext | None):
    if kind.starred:
        if ctx is None:
            raise ValueError(f"{kind.name} needs a TailContext")
        return ctx.window
    return 1.0


def _univariate(sample, margin, piece, s):
    n = sample.n
    rt = math.sqrt(n)
    out = np.zeros(np.shape(s))
    if piece in ("alpha", "sum"):
        out = out + rt * (ecdf_counts(sample, margin, s) / n - s)
    if piece in ("beta", "sum"):
        q = _quantile_from_counts(sample, margin, quantile_counts(sample, s))
        out = out + rt * (q - s)
    return out


def _joint_inputs(sample, s, t, weights=None):
    # counts for the copula slots (na) and the joint-ecdf slots (nb); a
    # dominance pass is skipped when its slots carry zero weight
    bs = ecdf_counts(sample, Margin.U, s)
    bt = ecdf_counts(sample, Margin.V, t)
    zero = np.zeros(bs.shape, dtype=np.int64)
    use_a = weights is None or bool(weights[_sweep.W_GSTAR] or weights[_sweep.W_GSTAR2])
    use_b = weights is None or bool(weights[_sweep.W_ALPHA] or weights[_sweep.W_ALPHA0] or weights[_sweep.W_ALPHA02])
    na = _dominance(sample, quantile_counts(sample, s), quantile_counts(sample, t)) if use_a else zero
    nb = _dominance(sample, bs, bt) if use_b else zero
    return na, nb, bs, bt


def _model_args(model):
    if model is None:
        return 0, 0.0
    return int(model.kind), model.theta


def _combo_values(sample, weights, s, t, model):
    s, t = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    shape = s.shape
    s = np.ascontiguousarray(s).ravel()
    t = np.ascontiguousarray(t).ravel()
    na, nb, bs, bt = _joint_inputs(sample, s, t, weights)
    code, theta = _model_args(model)
    vals = _sweep.pair_values(s, t, na.ravel(), nb.ravel(), bs.ravel(), bt.ravel(), sample.n, weights, code, theta)
    return math.sqrt(sample.n) * vals.reshape(shape)


def eval_process(sample: Sample, kind: ProcessKind, u, v=None, ctx: TailContext | None = None,
                 model: CopulaModel | None = None):
    """Value of an empirical or quantile process at ``(u, v)``.

    Univariate kinds read only the coordinate of their own margin (``u`` for
    U-processes, ``v`` for V-processes; pass the point as ``u`` when ``v`` is
    omitted). Starred kinds need ``ctx``; the ``**`` kinds also need ``model``.
    """
    kind = ProcessKind(kind)
    w = _scale(kind, ctx)
    if kind.needs_model and model is None:
        raise ValueError(f"{kind.name} needs a CopulaModel")
    if kind in _UNI:
        margin, piece = _UNI[kind]
        x = u if (margin is Margin.U or v is None) else v
        _check_unit(x)
        val = _univariate(sample, margin, piece, np.asarray(x, dtype=float) * w)
        if kind.starred:
            val = val / math.sqrt(w)
        return _ret(val, x)
    if v is None:
        raise ValueError(f"{kind.name} is a two-parameter process")
    _check_unit(u, v)
    weights = np.zeros(5)
    weights[_JOINT_SLOTS[kind]] = 1.0
    vals = _combo_values(sample, weights, np.asarray(u, dtype=float) * w, np.asarray(v, dtype=float) * w, model)
    return _ret(vals, np.broadcast(np.asarray(u), np.asarray(v)))


@dataclass(frozen=True)
class ResidualRecord:
    """Terms of ``G* - alpha0* = r_zero + v w r_u + u w r_v + r_cross``."""

    r_zero: np.ndarray | float
    r_u: np.ndarray | float
    r_v: np.ndarray | float
    r_cross: np.ndarray | float

    def reconstruct(self, u, v, window):
        return self.r_zero + v * window * self.r_u + u * window * self.r_v + self.r_cross


def decomposition(sample: Sample, ctx: TailContext, u, v) -> ResidualRecord:
    """Split ``G_n* - alpha_{n;0}*`` into oscillation, Bahadur-Kiefer and
    cross terms at the rescaled point ``(u, v)``."""
    _check_unit(u, v)
    like = np.broadcast(np.asarray(u), np.asarray(v))
    w = ctx.window
    n = sample.n
    rt = math.sqrt(n)
    s, t = np.broadcast_arrays(np.asarray(u, dtype=float) * w, np.asarray(v, dtype=float) * w)
    ku = quantile_counts(sample, s)
    kv = quantile_counts(sample, t)
    qu = _quantile_from_counts(sample, Margin.U, ku)
    qv = _quantile_from_counts(sample, Margin.V, kv)
    # T_n at the quantile point counts exactly the observations with ranks <= (ku, kv)
    alpha_q = rt * (_dominance(sample, ku, kv) / n - qu * qv)
    alpha_st = rt * (_dominance(sample, ecdf_counts(sample, Margin.U, s), ecdf_counts(sample, Margin.V, t)) / n - s * t)
    beta_u = rt * (qu - s)
    beta_v = rt * (qv - t)
    r_u = beta_u + rt * (ecdf_counts(sample, Margin.U, s) / n - s)
    r_v = beta_v + rt * (ecdf_counts(sample, Margin.V, t) / n - t)
    return ResidualRecord(
        r_zero=_ret(alpha_q - alpha_st, like),
        r_u=_ret(r_u, like),
        r_v=_ret(r_v, like),
        r_cross=_ret(beta_u * beta_v / rt, like),
    )


# ---------------------------------------------------------------------------
# sup norms


def _univariate_sup(sample, margin, piece, window):
    """Exact ``sup_{0 <= s <= window} |process(s)|`` for alpha, beta or their sum.

    Both pieces are constant-plus-linear between breakpoints, so checking
    both ends of every cell is exact.
    """
    n = sample.n
    srt = sample.sorted_margin(margin)
    pts = [np.array([0.0, window])]
    if piece in ("alpha", "sum"):
        pts.append(srt[srt < window])
    if piece in ("beta", "sum"):
        pts.append(np.arange(1, floor_count(n * window) + 1) / n)
    x = np.unique(np.concatenate(pts))
    x = x[(x >= 0.0) & (x <= window)]
    if x.size < 2:
        return 0.0
    mid = 0.5 * (x[:-1] + x[1:])
    const = np.zeros(mid.size)
    if piece in ("alpha", "sum"):
        const += np.searchsorted(srt, mid, side="right") / n
    if piece in ("beta", "sum"):
        const += srt[np.ceil(n * mid).astype(np.int64) - 1]
    slope = 2.0 if piece == "sum" else 1.0
    ends = np.maximum(np.abs(const - slope * x[:-1]), np.abs(const - slope * x[1:]))
    return math.sqrt(n) * float(ends.max())


@dataclass
class _Axis:
    """Cell structure of one axis of the pavement."""

    breaks: np.ndarray
    a: np.ndarray  # per-cell quantile index ceil(n s)
    b: np.ndarray  # per-cell ecdf count #{U <= s}

    def corners(self):
        x = np.empty(2 * self.a.size)
        x[0::2] = self.breaks[:-1]
        x[1::2] = self.breaks[1:]
        return x, np.repeat(self.a, 2), np.repeat(self.b, 2)

    def lattice_states(self, lattice):
        idx = np.searchsorted(self.breaks, lattice)
        ncell = self.a.size
        below = idx - 1
        above = np.minimum(idx, ncell - 1)
        below = np.maximum(below, 0)
        x = np.concatenate([lattice, lattice])
        cells = np.concatenate([below, above])
        a = self.a[cells]
        b = self.b[cells]
        keys = np.unique(np.column_stack([x, a, b]), axis=0)
        return keys[:, 0].copy(), keys[:, 1].astype(np.int64), keys[:, 2].astype(np.int64)


def _axis(sample, margin, window, lattice, need_a, need_b):
    n = sample.n
    srt = sample.sorted_margin(margin)
    pts = [lattice]
    if need_a:
        pts.append(np.arange(1, floor_count(n * window) + 1) / n)
    if need_b:
        pts.append(srt[srt < window])
    x = np.unique(np.concatenate(pts))
    x = x[(x >= 0.0) & (x <= window)]
    mid = 0.5 * (x[:-1] + x[1:])
    a = np.minimum(np.ceil(n * mid).astype(np.int64), n) if need_a else np.zeros(mid.size, dtype=np.int64)
    b = np.searchsorted(srt, mid, side="right").astype(np.int64) if need_b else np.zeros(mid.size, dtype=np.int64)
    return _Axis(x, a, b)


def _combo_sup(sample, weights, window, model, grid_m, method="auto"):
    weights = np.asarray(weights, dtype=float)
    need_a = bool(weights[_sweep.W_GSTAR] or weights[_sweep.W_GSTAR2])
    need_b = bool(weights[_sweep.W_ALPHA] or weights[_sweep.W_ALPHA0] or weights[_sweep.W_ALPHA02])
    lattice = np.linspace(0.0, window, grid_m + 1)
    code, theta = _model_args(model)
    n = sample.n
    if method in ("auto", "exact", "lines"):
        ax_s = _axis(sample, Margin.U, window, lattice, need_a, need_b)
        ax_t = _axis(sample, Margin.V, window, lattice, need_a, need_b)
        ps = ax_s.corners()
        pt = ax_t.corners()
        if method == "exact" or (method == "auto" and ps[0].size * pt[0].size <= EXACT_PAIR_BUDGET):
            best = _sweep.sweep_lines(*ps, *pt, sample.rv_by_ru, n, weights, code, theta, False)
            return math.sqrt(n) * best
        if method == "lines":
            lt = ax_t.lattice_states(lattice)
            ls = ax_s.lattice_states(lattice)
            best = max(
                _sweep.sweep_lines(*ps, *lt, sample.rv_by_ru, n, weights, code, theta, False),
                _sweep.sweep_lines(*pt, *ls, sample.ru_by_rv, n, weights, code, theta, True),
            )
            return math.sqrt(n) * best
    elif method != "points":
        raise ValueError(f"unknown sup-norm method {method!r}")
    return _points_sup(sample, weights, window, model, lattice)


def _points_sup(sample, weights, window, model, lattice):
    # lattice and in-window data points, each with its left limits
    eps = LEFT_SHIFT * window
    shifted = np.maximum(lattice - eps, 0.0)
    best = 0.0
    for xs in (lattice, shifted):
        for ys in (lattice, shifted):
            best = max(best, float(np.abs(_grid_values(sample, weights, xs, ys, model)).max()))
    # data points in first-rank order keep the count lookups cache friendly
    order = np.empty(sample.n, dtype=np.int64)
    order[sample.ru - 1] = np.arange(sample.n)
    inside = (sample.u[order] <= window) & (sample.v[order] <= window)
    if np.any(inside):
        pu = sample.u[order][inside]
        pv = sample.v[order][inside]
        for du in (0.0, eps):
            for dv in (0.0, eps):
                vals = _combo_values(sample, weights, np.maximum(pu - du, 0.0), np.maximum(pv - dv, 0.0), model)
                best = max(best, float(np.abs(vals).max()))
    return best


def sup_norm_window(sample: Sample, kind: ProcessKind, ctx: TailContext | None = None,
                    model: CopulaModel | None = None, grid_m: int = 512, method: str = "auto") -> float:
    """Sup-norm of a process over the rescaled unit square (or unit interval).

    Univariate kinds are always exact. Two-parameter kinds are piecewise
    bilinear between jump coordinates, and ``method`` picks the search:

    ``"exact"``
        Maximum over all cell corners with one-sided limits; the true sup.
    ``"points"``
        The ``(grid_m+1)^2`` lattice joined with the sample points inside the
        window, each also probed a relative ``1e-9`` to the left in either
        coordinate. Cost ``O(n log n + grid_m^2)``; can underestimate by the
        jump part plus ``L / grid_m`` for the smooth part's Lipschitz
        constant ``L``.
    ``"lines"``
        Every lattice line in both directions swept at full jump resolution.
        Costs ``O(grid_m n)``; lies between the other two.
    ``"auto"``
        ``"exact"`` when the corner grid has at most ``EXACT_PAIR_BUDGET``
        points, else ``"points"``.
    """
    return sup_norm_combination(sample, {kind: 1.0}, ctx=ctx, model=model, grid_m=grid_m, method=method)


def sup_norm_combination(sample: Sample, weights: Mapping[ProcessKind, float], ctx: TailContext | None = None,
                         model: CopulaModel | None = None, grid_m: int = 512, method: str = "auto") -> float:
    """Sup-norm of a linear combination of two-parameter processes, e.g.
    ``{G_STAR: 1, ALPHA_ZERO_STAR: -1}``. All kinds must share the same
    scaling (all starred or all plain). See :func:`sup_norm_window`."""
    if grid_m < 2:
        raise ValueError("grid_m must be >= 2")
    kinds = [ProcessKind(k) for k in weights]
    if len(kinds) == 1 and kinds[0] in _UNI:
        kind = kinds[0]
        margin, piece = _UNI[kind]
        w = _scale(kind, ctx)
        val = _univariate_sup(sample, margin, piece, w)
        return val / math.sqrt(w) if kind.starred else val
    if any(k in _UNI for k in kinds):
        raise ValueError("univariate kinds cannot be combined")
    if len({k.starred for k in kinds}) != 1:
        raise ValueError("cannot mix starred and plain kinds")
    if any(k.needs_model for k in kinds) and model is None:
        raise ValueError("** kinds need a CopulaModel")
    w = _scale(kinds[0], ctx)
    vec = _weight_vector(weights)
    if not np.any(vec):
        return 0.0
    return _combo_sup(sample, vec, w, model, grid_m, method)


def lattice_values(sample: Sample, weights: Mapping[ProcessKind, float], window: float,
                   model: CopulaModel | None = None, grid_m: int = 512) -> np.ndarray:
    """Values of a combined two-parameter process on the ``(grid_m+1)^2``
    lattice of ``[0, window]^2``; entry ``[i, j]`` is at ``(i, j) * window / grid_m``."""
    x = np.linspace(0.0, window, grid_m + 1)
    return _grid_values(sample, _weight_vector(weights), x, x, model)


def _weight_vector(weights):
    vec = np.zeros(5)
    for k, wt in weights.items():
        vec[_JOINT_SLOTS[ProcessKind(k)]] += wt
    return vec


def _grid_values(sample, vec, xs, ys, model):
    s, t = np.meshgrid(xs, ys, indexing="ij")
    n = sample.n
    na = lattice_counts(sample, quantile_counts(sample, xs), quantile_counts(sample, ys))
    bs = ecdf_counts(sample, Margin.U, xs)
    bt = ecdf_counts(sample, Margin.V, ys)
    nb = lattice_counts(sample, bs, bt)
    code, theta = _model_args(model)
    bs2, bt2 = np.meshgrid(bs, bt, indexing="ij")
    vals = _sweep.pair_values(s.ravel(), t.ravel(), na.ravel(), nb.ravel(), bs2.ravel(), bt2.ravel(),
                              n, vec, code, theta)
    return math.sqrt(n) * vals.reshape(s.shape)


def lattice_counts(sample: Sample, ka, kb) -> np.ndarray:
    """``N(ka[i], kb[j])`` for nondecreasing threshold vectors, in ``O(n + P Q)``."""
    ka = np.asarray(ka, dtype=np.int64)
    kb = np.asarray(kb, dtype=np.int64)
    # bucket of every rank via a table over 1..n, cheaper than bisecting n random ranks
    ranks = np.arange(sample.n + 1)
    i = np.searchsorted(ka, ranks, side="left")[sample.ru]
    j = np.searchsorted(kb, ranks, side="left")[sample.rv]
    keep = (i < ka.size) & (j < kb.size)
    flat = np.bincount(i[keep] * kb.size + j[keep], minlength=ka.size * kb.size)
    return flat.reshape(ka.size, kb.size).cumsum(axis=0).cumsum(axis=1)


# ---------------------------------------------------------------------------
# oscillation modulus


def _rect_tables(sample, xs, ys):
    """Cumulative counts with closed (<=) and open (<) thresholds."""
    p, q = xs.size, ys.size
    ix = {"le": np.searchsorted(xs, sample.u, side="left"), "lt": np.searchsorted(xs, sample.u, side="right")}
    iy = {"le": np.searchsorted(ys, sample.v, side="left"), "lt": np.searchsorted(ys, sample.v, side="right")}
    out = {}
    for kx, vx in ix.items():
        for ky, vy in iy.items():
            keep = (vx < p) & (vy < q)
            hist = np.zeros((p, q), dtype=np.int64)
            np.add.at(hist, (vx[keep], vy[keep]), 1)
            out[kx, ky] = hist.cumsum(axis=0).cumsum(axis=1)
    return out


def oscillation_modulus(sample: Sample, h: float, grid_m: int = 256, coords=None) -> float:
    """Sup of ``|alpha_n(L)|`` over closed rectangles ``L`` of area at most ``h``.

    Rectangle corners range over the lattice ``{0, 1/grid_m, ..., 1}``, joined
    with the sample coordinates when ``n <= 200``. ``coords`` overrides the
    candidate coordinates with an explicit ``(xs, ys)`` pair.
    """
    if not 0.0 < h < 1.0:
        raise ValueError("h must lie in (0, 1)")
    if coords is None:
        lattice = np.linspace(0.0, 1.0, grid_m + 1)
        xs, ys = lattice, lattice
        if sample.n <= 200:
            xs = np.unique(np.concatenate([lattice, sample.u]))
            ys = np.unique(np.concatenate([lattice, sample.v]))
    else:
        xs, ys = (np.unique(np.asarray(c, dtype=float)) for c in coords)
    n = sample.n
    tab = _rect_tables(sample, xs, ys)
    p, q = xs.size, ys.size
    best = 0.0
    for dx in range(p):
        wid = xs[dx:] - xs[: p - dx]
        wmin = wid.min()
        for dy in range(q):
            hgt = ys[dy:] - ys[: q - dy]
            if wmin * hgt.min() > h:
                break
            area = wid[:, None] * hgt[None, :]
            cnt = (tab["le", "le"][dx:, dy:] - tab["lt", "le"][: p - dx, dy:]
                   - tab["le", "lt"][dx:, : q - dy] + tab["lt", "lt"][: p - dx, : q - dy])
            dev = np.abs(cnt / n - area)
            dev[area > h] = 0.0
            m = dev.max()
            if m > best:
                best = m
    return math.sqrt(n) * best


# ---------------------------------------------------------------------------
# Bahadur-Kiefer statistics and normalisers


def bahadur_kiefer(sample: Sample, ctx: TailContext):
    """Local Bahadur-Kiefer sups for both margins and the scale ``r_n``.

    Returns ``(R_U, R_V, r_n)`` with ``R = sup_{s <= k_n/n} |alpha(s) + beta(s)|``.
    """
    w = ctx.window
    r_u = _univariate_sup(sample, Margin.U, "sum", w)
    r_v = _univariate_sup(sample, Margin.V, "sum", w)
    return r_u, r_v, bk_scale(ctx.n, ctx.kn)


def bk_scale(n, kn) -> float:
    return float(n ** -0.5 * kn ** 0.25 * log2(n) ** 0.25 * (log1(kn) + 2.0 * log2(n)) ** 0.5)


@dataclass(frozen=True)
class RateNormalizer:
    n: int
    kn: float

    @property
    def value(self) -> float:
        return rate_normalizer(self.n, self.kn)


def rate_normalizer(n, kn) -> float:
    """``n^(1/2) k_n^(-1/4) (log2 n)^(-1/4) (log1 n)^(-1/2)``."""
    return float(math.sqrt(n) * kn ** -0.25 * log2(n) ** -0.25 * log1(n) ** -0.5)
