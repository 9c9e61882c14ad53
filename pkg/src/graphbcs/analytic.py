"""Closed-form two-body results on a translation-invariant ring.

Bound pairs take the form ``phi(x1, x2) = exp(ip(x1+x2)) rho^|x1-x2|``; these
functions give the pair energy and the decay factor ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PairBandPoint:
    p: float
    energy: float
    rho: float
    at_limit: bool = False  # rho == 1 returned as the g -> 0 limit


def _rho(abs_e: float, coupling: float) -> float:
    return math.sqrt((abs_e - coupling) / (abs_e + coupling))


def hubbard_pair_band(p: float, g: float, K: float = 1.0) -> PairBandPoint:
    """Bound-pair band of the attractive Hubbard ring at centre-of-mass parameter ``p``.

    ``E_p = -sqrt(g^2 + 16 K^2 cos^2 p)`` for ``|p| < pi/2``. At ``g = 0`` the
    pair is unbound and ``rho = 1`` is returned as a flagged limit.
    """
    if not abs(p) < math.pi / 2:
        raise ValueError(f"|p| must be < pi/2 (band edge has no bound pair), got {p}")
    if K <= 0:
        raise ValueError("K must be positive")
    if g < 0:
        raise ValueError("g must be >= 0")
    c = 4.0 * K * math.cos(p)
    e = -math.hypot(g, c)
    if g == 0:
        return PairBandPoint(p, e, 1.0, at_limit=True)
    return PairBandPoint(p, e, _rho(-e, g))


def hubbard_band_range(g: float, K: float = 1.0) -> tuple[float, float]:
    """``(bottom, top)`` of the bound-pair band: ``[-sqrt(g^2+16K^2), -g]``."""
    return -math.hypot(g, 4.0 * K), -g


def bcs_bound_state(G: float, K: float = 1.0) -> tuple[float, float]:
    """Energy and decay factor of the unique BCS bound pair, ``G = g N``."""
    if not G > 0:
        raise ValueError(f"G must be > 0, got {G}")
    if K <= 0:
        raise ValueError("K must be positive")
    e0 = -math.hypot(G, 4.0 * K)
    return e0, _rho(-e0, G)


def bcs_depairing_thermodynamic(G: float, K: float = 1.0) -> float:
    """``sqrt(G^2 + 16 K^2) - 4K``, the large-N depairing energy."""
    if G < 0:
        raise ValueError("G must be >= 0")
    return math.hypot(G, 4.0 * K) - 4.0 * K


def pair_recursion_residual(f, z: int, p: float, energy: float, g: float, K: float = 1.0,
                            contact: float | None = None) -> float:
    """Residual of ``-2K cos p [f(z-1) + f(z+1)] - c delta_z0 f(0) = E f(z)``.

    ``contact`` is the z = 0 coupling (``g`` for Hubbard, ``G`` for BCS at p = 0).
    """
    c = g if contact is None else contact
    lhs = -2.0 * K * math.cos(p) * (f(z - 1) + f(z + 1)) - (c * f(0) if z == 0 else 0.0)
    return lhs - energy * f(z)
