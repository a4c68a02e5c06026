"""Almost-sure constants that the Monte Carlo drivers compare against."""

from __future__ import annotations

import enum
import math


class BoundCase(enum.Enum):
    THM21 = "thm21"
    THM23 = "thm23"


class FactKind(enum.Enum):
    LIL_BETA = "lil_beta"
    BAHADUR_KIEFER = "bahadur_kiefer"
    LIL_GSTAR = "lil_gstar"
    OSCILLATION = "oscillation"


def theorem_bound(gamma: float, case: BoundCase = BoundCase.THM21) -> float:
    """Limsup bound of ``V_n ||G* - alpha0*||``; the smooth-copula case shares it.

    ``(3 2^(-1/4) + gamma 2^(5/4)) (1 - gamma)^(1/4)`` for ``0 < gamma <= 1/2``
    and ``(3 2^(-3/4) + gamma 2^(3/4)) gamma^(-1/4)`` for ``1/2 < gamma <= 1``.
    """
    BoundCase(case)
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"no finite rate constant for gamma = {gamma}; need 0 < gamma <= 1")
    if gamma <= 0.5:
        return (3.0 * 2.0 ** -0.25 + gamma * 2.0 ** 1.25) * (1.0 - gamma) ** 0.25
    return (3.0 * 2.0 ** -0.75 + gamma * 2.0 ** 0.75) * gamma ** -0.25


def fact_constant(which: FactKind, gamma: float = 0.5) -> float:
    """Limit constant of a normalized observable.

    ``LIL_BETA`` and ``BAHADUR_KIEFER`` depend on the regime of ``gamma``; at
    ``gamma = 0`` the Bahadur-Kiefer value ``2^(1/4)`` is an upper bound.
    """
    which = FactKind(which)
    if which is FactKind.LIL_GSTAR:
        return 0.25
    if which is FactKind.OSCILLATION:
        return 1.0
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if which is FactKind.LIL_BETA:
        if gamma <= 0.5:
            return math.sqrt(2.0) * math.sqrt(1.0 - gamma)
        return 2.0 ** -0.5 * gamma ** -0.5
    if gamma <= 0.5:
        return 2.0 ** 0.25 * (1.0 - gamma) ** 0.25
    return 2.0 ** -0.25 * gamma ** -0.25


def all_constants(gamma: float) -> dict:
    out = {}
    for case in BoundCase:
        try:
            out[f"theorem_{case.value}"] = theorem_bound(gamma, case)
        except ValueError:
            out[f"theorem_{case.value}"] = None
    for kind in FactKind:
        out[kind.value] = fact_constant(kind, gamma)
    return out
