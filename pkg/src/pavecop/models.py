"""Parametric copula models, exact samplers and the k_n sequence rules.

The closed forms are written as scalar numba functions so the same code
serves both the Python API and the compiled sweep kernels in
:mod:`pavecop._sweep`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba
import numpy as np

from pavecop._rng import derive_rng


class CopulaKind(enum.IntEnum):
    INDEPENDENCE = 0
    FGM = 1
    CLAYTON = 2


class Deriv(enum.IntEnum):
    NONE = 0
    DU = 1
    DV = 2
    DU2 = 3
    DV2 = 4
    DUDV = 5


@dataclass(frozen=True)
class CopulaModel:
    """A bivariate copula with closed-form cdf and partial derivatives.

    Parameters
    ----------
    kind : CopulaKind
        Family selector.
    theta : float
        Dependence parameter. FGM needs ``-1 <= theta <= 1``, Clayton
        needs ``theta > 0``; ignored for the independence copula.
    """

    kind: CopulaKind = CopulaKind.INDEPENDENCE
    theta: float = 0.0

    def __post_init__(self):
        kind = CopulaKind(self.kind)
        object.__setattr__(self, "kind", kind)
        theta = float(self.theta)
        if kind is CopulaKind.FGM and not -1.0 <= theta <= 1.0:
            raise ValueError(f"FGM parameter must lie in [-1, 1], got {theta}")
        if kind is CopulaKind.CLAYTON and not theta > 0.0:
            raise ValueError(f"Clayton parameter must be positive, got {theta}")
        if kind is CopulaKind.INDEPENDENCE:
            theta = 0.0
        object.__setattr__(self, "theta", theta)

    @classmethod
    def independence(cls) -> "CopulaModel":
        return cls(CopulaKind.INDEPENDENCE)

    @classmethod
    def fgm(cls, theta: float) -> "CopulaModel":
        return cls(CopulaKind.FGM, theta)

    @classmethod
    def clayton(cls, theta: float) -> "CopulaModel":
        return cls(CopulaKind.CLAYTON, theta)

    @classmethod
    def from_name(cls, name: str, theta: float = 0.0) -> "CopulaModel":
        try:
            kind = CopulaKind[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown copula family {name!r}") from None
        return cls(kind, theta)

    @property
    def name(self) -> str:
        return self.kind.name.lower()

    @property
    def is_independence(self) -> bool:
        return self.kind is CopulaKind.INDEPENDENCE

    def cdf(self, u, v):
        return copula_eval(self, u, v)


# ---------------------------------------------------------------------------
# closed forms


@numba.njit(cache=True, nogil=True)
def _clayton(theta, u, v, deriv):
    if deriv >= 3 and (u <= 0.0 or u >= 1.0 or v <= 0.0 or v >= 1.0):
        return np.nan
    if deriv == 0:
        if u == 0.0 or v == 0.0:
            return 0.0
        if u == 1.0:
            return v
        if v == 1.0:
            return u
        s = u ** -theta + v ** -theta - 1.0
        return s ** (-1.0 / theta)
    if deriv == 2:
        u, v = v, u
        deriv = 1
    elif deriv == 4:
        u, v = v, u
        deriv = 3
    if deriv == 1:
        # conditional cdf of V given U = u, written to stay finite at u = 0
        if v == 0.0:
            return 0.0
        if u == 0.0:
            return 1.0
        return (1.0 + (u / v) ** theta - u ** theta) ** (-(1.0 + theta) / theta)
    s = u ** -theta + v ** -theta - 1.0
    if deriv == 3:
        return (theta + 1.0) * u ** (-theta - 2.0) * s ** (-1.0 / theta - 2.0) * (1.0 - v ** -theta)
    return (theta + 1.0) * (u * v) ** (-theta - 1.0) * s ** (-1.0 / theta - 2.0)


@numba.njit(cache=True, nogil=True)
def _copula_scalar(code, theta, u, v, deriv):
    if code == 0:
        if deriv == 0:
            return u * v
        if deriv == 1:
            return v
        if deriv == 2:
            return u
        if deriv == 5:
            return 1.0
        return 0.0
    if code == 1:
        if deriv == 0:
            return u * v * (1.0 + theta * (1.0 - u) * (1.0 - v))
        if deriv == 1:
            return v * (1.0 + theta * (1.0 - 2.0 * u) * (1.0 - v))
        if deriv == 2:
            return u * (1.0 + theta * (1.0 - u) * (1.0 - 2.0 * v))
        if deriv == 3:
            return -2.0 * theta * v * (1.0 - v)
        if deriv == 4:
            return -2.0 * theta * u * (1.0 - u)
        return 1.0 + theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)
    return _clayton(theta, u, v, deriv)


@numba.njit(cache=True, nogil=True)
def _copula_array(code, theta, u, v, deriv, out):
    for i in range(u.size):
        out[i] = _copula_scalar(code, theta, u[i], v[i], deriv)


def copula_eval(model: CopulaModel, u, v, deriv: Deriv = Deriv.NONE):
    """Evaluate the copula or one of its partial derivatives.

    ``u`` and ``v`` broadcast against each other. Returns a float for scalar
    input and an array otherwise.

    Raises
    ------
    ValueError
        If a point lies outside the unit square, or if a Clayton second
        derivative is requested on the boundary of the square.
    """
    deriv = Deriv(deriv)
    uu, vv = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if np.any((uu < 0) | (uu > 1) | (vv < 0) | (vv > 1)) or np.any(np.isnan(uu) | np.isnan(vv)):
        raise ValueError("copula arguments must lie in [0, 1]^2")
    if model.kind is CopulaKind.CLAYTON and deriv >= Deriv.DU2:
        if np.any((uu <= 0) | (uu >= 1) | (vv <= 0) | (vv >= 1)):
            raise ValueError("Clayton second derivatives need (u, v) strictly inside (0, 1)^2")
    flat_u = np.ascontiguousarray(uu, dtype=float).ravel()
    flat_v = np.ascontiguousarray(vv, dtype=float).ravel()
    out = np.empty(flat_u.size)
    _copula_array(int(model.kind), model.theta, flat_u, flat_v, int(deriv), out)
    if uu.ndim == 0:
        return float(out[0])
    return out.reshape(uu.shape)


# ---------------------------------------------------------------------------
# sampling

_OPEN_LO = 2.0 ** -54
_OPEN_HI = 1.0 - 2.0 ** -53


def _open_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    # Generator.random() can return exactly 0
    return rng.random(n) + _OPEN_LO


def draw_pairs(model: CopulaModel, n: int, rng: np.random.Generator):
    """Draw ``n`` i.i.d. pairs from ``model`` by conditional inversion.

    Returns two float arrays with values strictly inside (0, 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    u = _open_unit(rng, n)
    w = _open_unit(rng, n)
    if model.kind is CopulaKind.INDEPENDENCE:
        v = w
    elif model.kind is CopulaKind.FGM:
        # V | U=u has cdf v + a v (1 - v) with a = theta (1 - 2u); stable root
        a = model.theta * (1.0 - 2.0 * u)
        b = 1.0 + a
        v = 2.0 * w / (b + np.sqrt(b * b - 4.0 * a * w))
    else:
        th = model.theta
        v = ((w ** (-th / (1.0 + th)) - 1.0) * u ** -th + 1.0) ** (-1.0 / th)
    v = np.clip(v, _OPEN_LO, _OPEN_HI)
    return u, v


def sample_pairs(model: CopulaModel, n: int, seed: int, *keys: int):
    """Seeded wrapper around :func:`draw_pairs` returning a :class:`Sample`;
    ``keys`` select an independent stream under the same seed."""
    from pavecop.empirical import build_sample

    u, v = draw_pairs(model, n, derive_rng(seed, *keys))
    return build_sample(np.column_stack([u, v]))


# ---------------------------------------------------------------------------
# k_n sequences


def log1(x):
    """``log(x v e)``; never below 1."""
    return np.log(np.maximum(x, math.e))


def log2(x):
    """Iterated logarithm ``log1(log1(x))``."""
    return log1(log1(x))


class KnRule(enum.Enum):
    PROPORTIONAL = "proportional"
    POWER = "power"
    OVERLOG = "overlog"


@dataclass(frozen=True)
class KnSpec:
    """Rule generating the real sequence k_n.

    ``PROPORTIONAL`` gives ``gamma * n``; ``POWER`` gives ``n ** exponent``
    and ``OVERLOG`` gives ``n / log1(n)`` (both with limit ratio 0).
    """

    rule: KnRule = KnRule.PROPORTIONAL
    gamma: float = 1.0
    exponent: float = 0.5

    def __post_init__(self):
        rule = KnRule(self.rule)
        object.__setattr__(self, "rule", rule)
        if rule is KnRule.PROPORTIONAL and not 0.0 < self.gamma <= 1.0:
            raise ValueError(
                f"gamma = {self.gamma} is outside (0, 1]; the ratio k_n/n must "
                "decrease to a limit in [0, 1] (H3), and the proportional rule needs it positive"
            )
        if rule is KnRule.POWER and not 0.0 < self.exponent < 1.0:
            raise ValueError(f"power exponent must lie in (0, 1), got {self.exponent}")

    @classmethod
    def proportional(cls, gamma: float) -> "KnSpec":
        return cls(KnRule.PROPORTIONAL, gamma=gamma)

    @classmethod
    def power(cls, exponent: float) -> "KnSpec":
        return cls(KnRule.POWER, exponent=exponent)

    @classmethod
    def overlog(cls) -> "KnSpec":
        return cls(KnRule.OVERLOG)

    @property
    def limit_ratio(self) -> float:
        return self.gamma if self.rule is KnRule.PROPORTIONAL else 0.0

    def check_schedule(self, ns) -> dict:
        """Evaluate the four growth conditions on a finite schedule.

        Returns a dict ``{"H1": bool, ..., "H4": bool}``. Monotonicity and
        growth are checked on the evaluated points only.
        """
        ns = np.asarray(sorted(ns), dtype=float)
        kn = np.array([kn_value(self, n) for n in ns])
        ratio = kn / ns
        growth = kn / log2(ns)
        return {
            "H1": bool(np.all((kn > 0) & (kn <= ns))),
            "H2": bool(np.all(np.diff(kn) >= 0)),
            "H3": bool(np.all(np.diff(ratio) <= 1e-15 * ratio[:-1])),
            "H4": bool(np.all(np.diff(growth) > 0)),
        }


def kn_value(spec: KnSpec, n) -> float:
    """Real-valued k_n for sample size ``n > 1``."""
    if n <= 1:
        raise ValueError("k_n is defined for n > 1")
    if spec.rule is KnRule.PROPORTIONAL:
        return spec.gamma * n
    if spec.rule is KnRule.POWER:
        return float(n) ** spec.exponent
    return n / float(log1(n))


@dataclass(frozen=True)
class TailContext:
    """Sample size, k_n and the pavement side ``window = k_n / n``."""

    n: int
    kn: float
    gamma: float = float("nan")

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.kn <= self.n:
            raise ValueError(f"k_n must lie in (0, n], got {self.kn} for n={self.n}")

    @property
    def window(self) -> float:
        return self.kn / self.n

    @classmethod
    def from_spec(cls, spec: KnSpec, n: int) -> "TailContext":
        return cls(n, kn_value(spec, n), spec.limit_ratio)

    @classmethod
    def from_window(cls, n: int, window: float, gamma: float | None = None) -> "TailContext":
        if not 0.0 < window <= 1.0:
            raise ValueError(f"window must lie in (0, 1], got {window}")
        return cls(n, window * n, window if gamma is None else gamma)
