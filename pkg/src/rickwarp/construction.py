"""Four-piece warping profile for surgery preserving ``Ric_k > 0``.

The profile on ``[t0, t1]`` consists of

* a round cap on ``[t0, 0]`` closing off the ``S^p`` factor,
* the ODE core ``h = a h0``, ``f = b fC`` on ``[0, t2]``,
* a bend on ``[t2, t3]`` that brings ``h'`` to zero with ``h'' = -2/eps``,
* a concave neck on ``[t3, t1]`` where ``h`` is constant and ``f`` reaches the
  tube boundary data.

All pieces are built with ``N = 1`` and the result is rescaled so that
``h(t1) = rho``. The search policy below is one deterministic choice; the
resulting ``kappa`` is a valid threshold for this policy, not a canonical one.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .curvature import (TAU_MARGIN, WarpedMetric, CurvatureReport, _require_k, eigenvalue_table,
                        margins_from_table, verify_metric)
from .errors import ConstructionError, InfeasibleError, InputError, NonConvergenceError
from .ode import OdeSolution, solve_core_odes
from .profile import Piece, PiecewiseProfile

SQRT_E = math.sqrt(math.e)


@dataclass
class ConstructionParams:
    """Inputs and search controls for :func:`construct`.

    ``rho_over_n=None`` means "use half of the computed kappa". Lengths are in
    units of the tube radius ``N``, which is fixed to 1 during construction.
    """

    p: int
    q: int
    k: int
    ratio: float = 1.0
    rho_over_n: Optional[float] = None
    a0: float = 0.5
    a_shrink: float = 0.5
    c_fraction: float = 0.9
    c_shrink: float = 0.9
    b_safety: float = 0.98
    b_shrink: float = 0.95
    max_iter: int = 60
    step: float = 1e-4
    horizon: float = 8.0
    max_horizon: float = 256.0
    collar: float = 0.9
    slope_margin: float = 0.05
    slope_floor: float = 0.5
    bend_fraction: float = 0.1
    bend_retries: int = 40
    intervals: int = 2048
    smooth: bool = True
    tau_margin: float = TAU_MARGIN
    tau_bc: float = 1e-6

    def __post_init__(self):
        for name in ("p", "q", "k", "max_iter", "bend_retries", "intervals"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise InputError(f"{name} must be an integer")
            setattr(self, name, int(v))
        if self.p < 2 or self.q < 2:
            raise InputError("p and q must both be at least 2")
        _require_k(self.p, self.q, self.k)
        if self.k < max(self.p, self.q) + 2:
            raise InputError(f"the construction needs k >= max(p, q) + 2 = {max(self.p, self.q) + 2}")
        if not 0 < self.ratio < math.pi:
            raise InputError("ratio R/N must lie in (0, pi)")
        if self.rho_over_n is not None and not self.rho_over_n > 0:
            raise InputError("rho/N must be positive")
        if not 0 < self.a0 < 1:
            raise InputError("a0 must lie in (0, 1) so that the round cap exists")
        for name in ("a_shrink", "c_fraction", "c_shrink", "b_safety", "b_shrink", "collar",
                     "slope_margin", "slope_floor", "bend_fraction"):
            if not 0 < getattr(self, name) < 1:
                raise InputError(f"{name} must lie in (0, 1)")
        if not (self.step > 0 and 0 < self.horizon <= self.max_horizon):
            raise InputError("need step > 0 and 0 < horizon <= max_horizon")
        if self.max_iter < 1 or self.intervals < 2:
            raise InputError("max_iter must be >= 1 and intervals >= 2")

    @property
    def collar_ratio(self) -> float:
        """``R/N`` after shrinking the tube to the collar fraction."""
        return self.collar * self.ratio

    @property
    def target_slope(self) -> float:
        """Slope ``f'`` to reach at ``t2``; strictly between ``cos(R/N)`` and 1.

        The floor keeps the neck from flattening out when ``cos(R/N)`` is small,
        which would leave ``-f''/f`` there close to zero.
        """
        c = math.cos(self.collar_ratio)
        return max(c + self.slope_margin * (1.0 - c), self.slope_floor)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ConstructionParams":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown construction parameters: {sorted(extra)}")
        return cls(**d)


@dataclass
class CoreParameters:
    """Outcome of :func:`find_parameters`."""

    a: float
    b: float
    C: float
    t2: float
    target_slope: float
    solution: OdeSolution = field(repr=False)
    margin_minima: np.ndarray = None
    history: list = field(default_factory=list, repr=False)

    def kappa(self, collar_ratio: float) -> float:
        h0, _, _, fC, _, _ = self.solution.evaluate(np.array([self.t2]))
        return float(self.a * h0[0] / (self.b * fC[0]) * math.sin(collar_ratio))


def scale_families(sol: OdeSolution, a: float, b: float, t=None):
    """``(h, h', h'', f, f', f'')`` of ``h = a h0`` and ``f = b fC`` at ``t`` (default: the grid)."""
    if not (a > 0 and b > 0):
        raise InputError("a and b must be positive")
    if t is None:
        h0, fC, dfC = sol.h0, sol.fC, sol.dfC
        vals = (h0, sol.dh0, sol.ddh0, fC, dfC, sol.ddfC)
    else:
        vals = sol.evaluate(t)
    return tuple(a * v for v in vals[:3]) + tuple(b * v for v in vals[3:])


def core_exit_time(sol: OdeSolution, b: float, slope: float) -> Optional[float]:
    """First time with ``b fC'(t) = slope``, or ``None`` beyond the solved horizon."""
    target = slope / b
    dfC = sol.dfC
    if dfC[-1] < target:
        return None
    i = int(np.argmax(dfC >= target))
    if i == 0:
        return 0.0
    g = lambda t: float(sol.evaluate(np.array([t]))[4][0]) - target
    return brentq(g, sol.step * (i - 1), sol.step * i, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def _core_margins(sol, a, b, p, q, k, stop, t2):
    """Margin rows on the ODE grid up to index ``stop`` plus the exact time ``t2``."""
    grid = [v[:stop] for v in scale_families(sol, a, b)]
    end = scale_families(sol, a, b, np.array([t2]))
    cols = [np.concatenate([g, e]) for g, e in zip(grid, end)]
    return np.stack(margins_from_table(*eigenvalue_table(*cols), p, q, k), axis=1)


def find_parameters(params: ConstructionParams, solution: Optional[OdeSolution] = None) -> CoreParameters:
    """Choose ``(C, b, a)`` and ``t2`` so that all four margins hold on ``[0, t2]``.

    ``C`` is set from the first inequality, ``b`` from the fourth (which does
    not depend on ``a``) together with the exit time ``t2``, and ``a`` last.
    Each parameter walks down a geometric ladder; all margins are re-checked
    after every step.
    """
    p, q, k, tau = params.p, params.q, params.k, params.tau_margin
    s0 = params.target_slope
    history = []

    C = None
    for j in range(params.max_iter):
        cand = params.c_fraction * params.c_shrink ** j * (k - q) / q
        history.append({"param": "C", "value": cand})
        if (k - q) - q * cand > 0:
            C = cand
            break
    if C is None:
        raise NonConvergenceError("no C satisfies margin m1", binding="m1")

    if solution is None or solution.C != C or solution.step != params.step:
        solution = solve_core_odes(C, params.horizon, params.step)
    sol = solution

    b0 = params.b_safety * math.sqrt((k - p - 1) * math.e / C)
    a_probe = params.a0
    b = t2 = None
    for j in range(params.max_iter):
        cand = b0 * params.b_shrink ** j
        t_exit = core_exit_time(sol, cand, s0)
        while t_exit is None and sol.T < params.max_horizon:
            sol.extend(min(2.0 * sol.T, params.max_horizon))
            sol.check()
            t_exit = core_exit_time(sol, cand, s0)
        if t_exit is None:
            history.append({"param": "b", "value": cand, "binding": "slope"})
            raise NonConvergenceError(
                f"f' does not reach the target slope {s0:.6g} before t = {params.max_horizon:g} for b = {cand:.6g}",
                binding="slope")
        stop = int(math.floor(t_exit / sol.step)) + 1
        m = _core_margins(sol, a_probe, cand, p, q, k, stop, t_exit)
        ok = bool(np.all(m[:, 3] > tau))
        history.append({"param": "b", "value": cand, "t2": t_exit, "m4_min": float(m[:, 3].min())})
        if ok:
            b, t2 = cand, t_exit
            break
    if b is None:
        raise NonConvergenceError("no b keeps margin m4 positive up to the exit time", binding="m4")

    stop = int(math.floor(t2 / sol.step)) + 1
    a = None
    worst = None
    for j in range(params.max_iter):
        cand = params.a0 * params.a_shrink ** j
        m = _core_margins(sol, cand, b, p, q, k, stop, t2)
        mins = m.min(axis=0)
        history.append({"param": "a", "value": cand, "margin_minima": mins.tolist()})
        if np.all(mins > tau):
            a = cand
            break
        worst = int(np.argmin(mins)) + 1
    if a is None:
        raise NonConvergenceError(f"no a satisfies all inequalities on [0, t2]; binding m{worst}",
                                  binding=f"m{worst}")
    return CoreParameters(a=a, b=b, C=C, t2=t2, target_slope=s0, solution=sol, margin_minima=mins,
                          history=history)


def build_cap(a: float, b: float = 1.0):
    """Round cap on ``[t0, 0]`` joining the core ``C^1`` at ``t = 0``.

    Returns ``(piece, R', N')`` where ``N' sin(R'/N') = a`` and
    ``cos(R'/N') = a / sqrt(e)``.
    """
    if not 0 < a < 1:
        raise InputError("the cap needs 0 < a < 1")
    if not b > 0:
        raise InputError("b must be positive")
    theta = math.acos(a / SQRT_E)
    n_cap = a / math.sin(theta)
    r_cap = n_cap * theta
    t0 = -r_cap

    def fn(t):
        # times within rounding of t0 (e.g. after rescaling) are the tip itself, h = 0 exactly
        s = (t - t0) / n_cap
        s = np.where(s * n_cap <= 16 * np.finfo(float).eps * abs(t0), 0.0, s)
        return (n_cap * np.sin(s), np.cos(s), -np.sin(s) / n_cap, b, 0.0, 0.0)

    return Piece("cap", t0, 0.0, fn), r_cap, n_cap


def core_piece(core: CoreParameters) -> Piece:
    sol, a, b = core.solution, core.a, core.b
    return Piece("core", 0.0, core.t2, lambda t: scale_families(sol, a, b, t))


def build_bend(t2: float, state, epsilon: float) -> Piece:
    """Quadratic ``h`` with ``h'' = -2/eps`` until ``h' = 0``; linear ``f``.

    ``state`` is ``(h, h', f, f')`` at ``t2``. The bend length is
    ``eps h'(t2) / 2``.
    """
    h2, dh2, f2, df2 = (float(x) for x in state)
    if not (epsilon > 0 and dh2 > 0):
        raise InputError("need epsilon > 0 and h'(t2) > 0")
    delta = 0.5 * epsilon * dh2

    def fn(t):
        s = t - t2
        return (h2 + dh2 * s - s * s / epsilon, dh2 - 2.0 * s / epsilon, -2.0 / epsilon,
                f2 + df2 * s, df2, 0.0)

    return Piece("bend", t2, t2 + delta, fn)


def _mean_shape(beta):
    """Mean over ``[0, 1]`` of ``(1 - u)/(1 + beta u)``."""
    if abs(beta) < 1e-6:
        return 0.5 - beta / 6.0 + beta * beta / 12.0
    return -1.0 / beta + (1.0 + beta) / beta ** 2 * math.log1p(beta)


def build_neck(t3: float, state, rho_over_n: float, collar_ratio: float) -> Piece:
    """Constant ``h`` and strictly concave ``f`` from ``f'(t3)`` down to ``cos(R/N)``.

    ``state`` is ``(h, f, f')`` at ``t3``. The neck ends at ``t1`` where
    ``f(t1)/h(t3) = sin(R/N) / (rho/N)``. ``f'`` follows
    ``cos(R/N) + (f'(t3) - cos(R/N)) (1 - u)/(1 + beta u)`` with ``u`` the
    normalized time; ``beta = 0`` unless the mean slope would not be positive.
    """
    h3, f3, s0 = (float(x) for x in state)
    s1 = math.cos(collar_ratio)
    target = h3 * math.sin(collar_ratio) / rho_over_n
    if not f3 < target:
        raise InfeasibleError(f"f(t3) = {f3:.6g} is not below the neck target {target:.6g}",
                              kappa=h3 * math.sin(collar_ratio) / f3, rho_over_n=rho_over_n)
    if not s0 > s1:
        raise InputError("the neck needs f'(t3) > cos(R/N)")
    if s1 >= 0:
        beta = 0.0
    else:
        want = (0.5 * s0 - s1) / (s0 - s1)
        beta = brentq(lambda x: _mean_shape(x) - want, -1.0 + 1e-15, 0.0, xtol=1e-15)
    mean = s1 + (s0 - s1) * _mean_shape(beta)
    length = (target - f3) / mean
    jump = s0 - s1

    def fn(t):
        u = (t - t3) / length
        d = 1.0 + beta * u
        if beta == 0.0:
            G = u - 0.5 * u * u
        else:
            G = -u / beta + (1.0 + beta) / beta ** 2 * np.log1p(beta * u)
        f = f3 + length * (s1 * u + jump * G)
        df = s1 + jump * (1.0 - u) / d
        ddf = -jump * (1.0 + beta) / (d * d) / length
        return (h3, 0.0, 0.0, f, df, ddf)

    return Piece("neck", t3, t3 + length, fn)


def compute_kappa(params: ConstructionParams, core: Optional[CoreParameters] = None) -> float:
    """``h(t2)/f(t2) sin(R/N)`` for the parameters chosen by :func:`find_parameters`."""
    core = core or find_parameters(params)
    return core.kappa(params.collar_ratio)


def _piece_margins(piece: Piece, p, q, k, n=2049) -> np.ndarray:
    t = np.linspace(piece.start, piece.end, n)
    return np.stack(margins_from_table(*eigenvalue_table(*piece(t)), p, q, k), axis=1).min(axis=0)


def assemble_profile(params: ConstructionParams, core: CoreParameters, rho_over_n: float):
    """Cap, core, bend and neck before rescaling, halving the bend width until all margins hold.

    The first bend width is ``bend_fraction * h(t2) / h'(t2)^2``, a length
    for which the bend raises ``h`` by ``bend_fraction / 4`` relative.

    Returns ``(profile, epsilon, cap_radius, cap_scale)``.
    """
    p, q, k, tau = params.p, params.q, params.k, params.tau_margin
    kappa = core.kappa(params.collar_ratio)
    if not rho_over_n < kappa:
        raise InfeasibleError(f"rho/N = {rho_over_n:.6g} is not below kappa = {kappa:.6g}",
                              kappa=kappa, rho_over_n=rho_over_n)
    cap, r_cap, n_cap = build_cap(core.a, core.b)
    mid = core_piece(core)
    h, dh, _, f, df, _ = (float(v[0]) for v in mid(np.array([core.t2])))
    reason = None
    for j in range(params.bend_retries + 1):
        eps = params.bend_fraction * h / dh ** 2 * 0.5 ** j
        bend = build_bend(core.t2, (h, dh, f, df), eps)
        mb = _piece_margins(bend, p, q, k)
        if not np.all(mb > tau):
            reason = f"bend inequality m{int(np.argmin(mb)) + 1} = {mb.min():.3e}"
            continue
        h3, _, _, f3, df3, _ = (float(v[0]) for v in bend(np.array([bend.end])))
        try:
            neck = build_neck(bend.end, (h3, f3, df3), rho_over_n, params.collar_ratio)
        except InfeasibleError as exc:
            reason = str(exc)
            continue
        mn = _piece_margins(neck, p, q, k)
        if not np.all(mn > tau):
            reason = f"neck inequality m{int(np.argmin(mn)) + 1} = {mn.min():.3e}"
            continue
        marks = {"t0": cap.start, "0": 0.0, "t2": core.t2, "t3": bend.end, "t1": neck.end}
        prof = PiecewiseProfile(p, q, [cap, mid, bend, neck], marks, cap_radius=n_cap)
        return prof, eps, r_cap, n_cap
    raise ConstructionError(f"no bend width in the retry budget works: {reason}")


@dataclass
class ConstructionResult:
    """Assembled and verified metric with the data that produced it."""

    params: ConstructionParams
    metric: WarpedMetric
    report: CurvatureReport
    kappa: float
    rho_over_n: float
    a: float
    b: float
    C: float
    times: dict
    cap_radius: float
    cap_scale: float
    scale: float
    bend_epsilon: float
    boundary: dict
    certificates: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    profile: PiecewiseProfile = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "kappa": self.kappa,
            "rho_over_n": self.rho_over_n,
            "a": self.a, "b": self.b, "C": self.C,
            "times_before_rescale": dict(self.times),
            "junctions": dict(self.metric.junctions),
            "cap": {"R_prime": self.cap_radius, "N_prime": self.cap_scale},
            "scale": self.scale,
            "bend_epsilon": self.bend_epsilon,
            "boundary": dict(self.boundary),
            "report": self.report.to_dict(),
            "certificates": list(self.certificates),
            "timing": dict(self.timing),
        }


def boundary_residuals(profile: PiecewiseProfile, rho: float, collar_ratio: float, N: float = 1.0) -> dict:
    """Mismatch of ``h, h', f, f'`` at ``t1`` against the tube data."""
    t1 = profile.breakpoints[-1]
    h, dh, _, f, df, _ = (float(v[0]) for v in profile.evaluate(np.array([t1]), side="left"))
    return {"h": h - rho, "h1": dh, "f": f - N * math.sin(collar_ratio), "f1": df - math.cos(collar_ratio)}


def rescale_and_assemble(params: ConstructionParams, profile: PiecewiseProfile, rho: float):
    """Rescale so that ``h(t1) = rho``, check the boundary data, smooth and verify.

    Returns ``(metric, report, scale, boundary, certificates, rescaled_profile)``.
    """
    from .smoothing import smooth_profile_junctions

    h3 = float(profile.evaluate(np.array([profile.breakpoints[-1]]), side="left")[0][0])
    lam = rho / h3
    scaled = profile.rescaled(lam)
    bc = boundary_residuals(scaled, rho, params.collar_ratio)
    bad = {k: v for k, v in bc.items() if not abs(v) <= params.tau_bc}
    if bad:
        raise ConstructionError(f"boundary conditions at t1 violated: {bad}")
    prov = {"params": params.to_dict()}
    if params.smooth:
        metric, certs = smooth_profile_junctions(scaled, params.k, ("0", "t2", "t3"),
                                                 intervals=params.intervals, tau_margin=params.tau_margin)
    else:
        metric, certs = scaled.to_metric(params.intervals), []
    metric.provenance.update(prov)
    report = verify_metric(metric, params.k, tau_margin=params.tau_margin)
    if not (report.passed and report.margins_pass):
        raise ConstructionError(f"assembled metric fails verification: {report.to_dict()['worst_margin_sample']}")
    return metric, report, lam, bc, certs, scaled


def construct(params: ConstructionParams) -> ConstructionResult:
    """Run the whole pipeline for ``params``."""
    clock = {}
    start = time.perf_counter()
    core = find_parameters(params)
    clock["search"] = time.perf_counter() - start
    kappa = core.kappa(params.collar_ratio)
    rho_over_n = kappa / 2.0 if params.rho_over_n is None else float(params.rho_over_n)
    if not rho_over_n < kappa:
        raise InfeasibleError(f"rho/N = {rho_over_n:.6g} is not below kappa = {kappa:.6g}",
                              kappa=kappa, rho_over_n=rho_over_n)
    mark = time.perf_counter()
    profile, eps, r_cap, n_cap = assemble_profile(params, core, rho_over_n)
    clock["pieces"] = time.perf_counter() - mark
    mark = time.perf_counter()
    metric, report, lam, bc, certs, scaled = rescale_and_assemble(params, profile, rho_over_n)
    clock["assemble_and_verify"] = time.perf_counter() - mark
    metric.provenance.update(kappa=kappa, rho_over_n=rho_over_n, a=core.a, b=core.b, C=core.C)
    clock["total"] = time.perf_counter() - start
    return ConstructionResult(params=params, metric=metric, report=report, kappa=kappa, rho_over_n=rho_over_n,
                              a=core.a, b=core.b, C=core.C, times=dict(profile.marks), cap_radius=r_cap,
                              cap_scale=n_cap, scale=lam, bend_epsilon=eps, boundary=bc, certificates=certs,
                              timing=clock, profile=scaled)
