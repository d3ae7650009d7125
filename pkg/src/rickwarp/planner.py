"""Surgery schedules for connected sums of sphere products.

``#_r (S^n x S^m)`` arises from ``S^{n-1} x S^{m+1}`` by ``r + 1`` surgeries
along ``S^p x D^{q+1}`` with ``p = n - 1`` and ``q = m``. The warped-product
construction needs ``k >= max(p, q) + 2``, so the planner picks the ordering
of ``(n, m)`` that makes this smallest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import InputError
from .kchain import BlockOperator, check_profile_hypothesis


def _k_needed(n: int, m: int) -> int:
    return max(m + 2, n + 1)


def _check_hypotheses(n: int, m: int, r: int):
    for name, v in (("n", n), ("m", m), ("r", r)):
        if isinstance(v, bool) or int(v) != v:
            raise InputError(f"{name} must be an integer")
    if n < 2 or m < 2:
        raise InputError("need n, m >= 2")
    if n == m and n < 3:
        raise InputError("equal factors need n = m >= 3")
    if r < 1:
        raise InputError("need r >= 1")


def betti_total(n: int, m: int, r: int) -> int:
    """Total Betti number of ``#_r (S^n x S^m)``: one in degrees 0 and ``n + m``, plus ``2r`` in between."""
    _check_hypotheses(n, m, r)
    return 2 * r + 2


def packing_radius(count: int, fraction: float = 0.9) -> float:
    """Ball radius for ``count`` disjoint balls centred on a great circle of the unit sphere.

    Centres are spaced ``2 pi / count`` apart, so any radius below
    ``min(pi / count, pi / 2)`` keeps them disjoint; ``fraction`` of that bound is used.
    """
    if count < 1:
        raise InputError("count must be positive")
    if not 0 < fraction < 1:
        raise InputError("fraction must lie in (0, 1)")
    return fraction * min(math.pi / count, math.pi / 2)


def ambient_block(n: int, m: int, rho: float) -> BlockOperator:
    """Curvature operator of ``rho^2 ds_{n-1}^2 + ds_{m+1}^2`` split as ``(n-1, m, 1)``."""
    if not rho > 0:
        raise InputError("rho must be positive")
    return BlockOperator.from_values((n - 1, m, 1), l12=0.0, l13=0.0, l23=1.0, l11=1.0 / rho ** 2, l22=1.0)


@dataclass(frozen=True)
class SurgerySlot:
    """Position of one embedded ``S^p(rho) x D^{q+1}(R)``: the ball centre angle on a great circle."""

    index: int
    angle: float
    radius: float

    def to_dict(self) -> dict:
        return {"index": self.index, "angle": self.angle, "radius": self.radius}


@dataclass
class SurgeryPlan:
    """Everything needed to run the per-surgery metric construction."""

    n: int
    m: int
    r: int
    p: int
    q: int
    k_min: int
    swapped: bool
    ratio: float
    slots: list
    betti_total: int
    kappa: Optional[float] = None
    rho: Optional[float] = None
    ambient_check: dict = field(default_factory=dict)

    @property
    def ambient(self) -> str:
        return f"S^{self.p} x S^{self.q + 1} with metric rho^2 ds_{self.p}^2 + ds_{self.q + 1}^2"

    @property
    def rho_requirement(self) -> str:
        return f"rho/N < kappa(p={self.p}, q={self.q}, k={self.k_min}, R/N={self.ratio:.6g})"

    def construction_params(self, **overrides):
        from .construction import ConstructionParams
        args = dict(p=self.p, q=self.q, k=self.k_min, ratio=self.ratio, rho_over_n=self.rho)
        args.update(overrides)
        return ConstructionParams(**args)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "m": self.m, "r": self.r, "p": self.p, "q": self.q, "k_min": self.k_min,
            "swapped": self.swapped, "ambient": self.ambient, "surgeries": len(self.slots),
            "ratio": self.ratio, "slots": [s.to_dict() for s in self.slots],
            "betti_total": self.betti_total, "kappa": self.kappa, "rho": self.rho,
            "rho_requirement": self.rho_requirement, "ambient_check": dict(self.ambient_check),
        }


def plan_connected_sum(n: int, m: int, r: int, packing_fraction: float = 0.9, kappa: Optional[float] = None,
                       ambient_rho: float = 0.1) -> SurgeryPlan:
    """Schedule for ``#_r (S^n x S^m)`` minimising the required ``k``.

    If ``kappa`` is given the plan sets ``rho = kappa / 2`` (with ``N = 1``).
    The ambient product check uses that ``rho``, or ``ambient_rho`` otherwise.
    """
    _check_hypotheses(n, m, r)
    swapped = _k_needed(m, n) < _k_needed(n, m)
    nn, mm = (m, n) if swapped else (n, m)
    p, q = nn - 1, mm
    k = _k_needed(nn, mm)
    R = packing_radius(r + 1, packing_fraction)
    slots = [SurgerySlot(i, 2 * math.pi * i / (r + 1), R) for i in range(r + 1)]
    rho = None if kappa is None else kappa / 2.0
    check = check_profile_hypothesis(ambient_block(nn, mm, rho if rho is not None else ambient_rho), k)
    return SurgeryPlan(n=n, m=m, r=r, p=p, q=q, k_min=k, swapped=swapped, ratio=R, slots=slots,
                       betti_total=betti_total(n, m, r), kappa=kappa, rho=rho,
                       ambient_check={"rho": rho if rho is not None else ambient_rho, **check.to_dict()})


def kmin_for_dimension(d: int):
    """Smallest ``k`` reached by the connected sums in dimension ``d`` and the ``(n, m)`` achieving it."""
    if isinstance(d, bool) or int(d) != d or d < 5:
        raise InputError("dimension must be an integer >= 5")
    c = d // 2
    n, m = (c, c) if d % 2 == 0 else (c + 1, c)
    return plan_connected_sum(n, m, 1).k_min, (n, m)
