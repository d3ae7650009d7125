"""Mollifier smoothing of ``C^1`` junctions in warping profiles.

Near a junction ``x = 0`` the piecewise function ``h`` is replaced by

``H = hbar psi + h (1 - psi)``

where ``hbar`` is the convolution of ``h`` with a bump of width ``eps`` and
``psi`` is a cutoff equal to 1 on ``[-nu/2, nu/2]`` and 0 outside
``(-nu, nu)``. Derivatives of ``H`` come from mollifying ``h'`` and ``h''``
and the product rule, never from differencing samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit

from .curvature import TAU_MARGIN, WarpedMetric, eigenvalue_table, hermite5, margins_from_table
from .errors import InputError, SmoothingError
from .profile import Piece, PiecewiseProfile

TAU_BC = 1e-6


def mollifier_weights(epsilon: float, dx: float) -> np.ndarray:
    """Discrete weights of ``exp(-1/(1 - (y/eps)^2))`` on ``dx * j``, summing to 1."""
    if not (epsilon > 0 and dx > 0):
        raise InputError("epsilon and dx must be positive")
    J = int(math.ceil(epsilon / dx - 1e-12))
    y = dx * np.arange(-J, J + 1) / epsilon
    w = np.zeros_like(y)
    inside = np.abs(y) < 1
    w[inside] = np.exp(-1.0 / (1.0 - y[inside] ** 2))
    if w.sum() <= 0:
        raise InputError("mollifier has no support at this resolution")
    return w / w.sum()


def mollify(x, y, epsilon: float):
    """Discrete convolution of uniformly sampled ``y`` with the bump of width ``epsilon``.

    Returns ``(x_out, y_out)`` on the samples that lie at least ``epsilon``
    inside the input range.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise InputError("x and y must be matching arrays with at least 3 samples")
    dx = (x[-1] - x[0]) / (x.size - 1)
    if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0):
        raise InputError("mollify needs uniformly spaced samples")
    if dx > epsilon / 16 * (1 + 1e-12):
        raise InputError(f"sample spacing {dx:.3e} exceeds epsilon/16 = {epsilon / 16:.3e}")
    w = mollifier_weights(epsilon, dx)
    J = w.size // 2
    if x.size <= 2 * J:
        raise InputError("input window does not exceed the output window by epsilon")
    return x[J:-J], np.convolve(y, w, mode="valid")


def psi(x, nu: float):
    """Cutoff ``psi`` with its first two derivatives.

    ``psi = S(2 (nu - |x|)/nu)`` where ``S`` is the smooth step built from
    ``exp(-1/z)``; so ``psi = 1`` on ``|x| <= nu/2`` and ``psi = 0`` on ``|x| >= nu``.
    """
    if not nu > 0:
        raise InputError("nu must be positive")
    x = np.asarray(x, dtype=float)
    z = 2.0 * (nu - np.abs(x)) / nu
    val = np.where(z >= 1, 1.0, 0.0)
    d1 = np.zeros_like(x)
    d2 = np.zeros_like(x)
    mid = (z > 0) & (z < 1)
    if np.any(mid):
        zm = z[mid]
        g = 1.0 / zm - 1.0 / (1.0 - zm)
        g1 = -1.0 / zm ** 2 - 1.0 / (1.0 - zm) ** 2
        g2 = 2.0 / zm ** 3 - 2.0 / (1.0 - zm) ** 3
        S = expit(-g)
        P = S * expit(g)
        S1 = -P * g1
        S2 = -(1.0 - 2.0 * S) * S1 * g1 - P * g2
        dz = -2.0 * np.sign(x[mid]) / nu
        val[mid] = S
        d1[mid] = S1 * dz
        d2[mid] = S2 * dz * dz
    return val, d1, d2


def blend(x, smooth, original, nu: float):
    """``H = smooth psi + original (1 - psi)`` with derivatives.

    ``smooth`` and ``original`` are triples ``(value, first, second)`` sampled at ``x``.
    """
    x = np.asarray(x, dtype=float)
    s0, s1, s2 = (np.asarray(v, dtype=float) for v in smooth)
    g0, g1, g2 = (np.asarray(v, dtype=float) for v in original)
    if any(v.shape != x.shape for v in (s0, s1, s2, g0, g1, g2)):
        raise InputError("smooth and original samples must be aligned with x")
    P0, P1, P2 = psi(x, nu)
    d0, d1, d2 = s0 - g0, s1 - g1, s2 - g2
    H0 = g0 + P0 * d0
    H1 = g1 + P0 * d1 + P1 * d0
    H2 = g2 + P0 * d2 + 2.0 * P1 * d1 + P2 * d0
    out = P0 == 0
    H0[out], H1[out], H2[out] = g0[out], g1[out], g2[out]
    return H0, H1, H2


@dataclass
class PiecewiseFunction:
    """Two smooth pieces meeting at ``junction``; each returns ``(value, first, second)``.

    At the junction itself the value and slope come from the right piece and
    the second derivative is the mean of both sides, which is the consistent
    midpoint choice for a jump in ``h''``.
    """

    left: Callable
    right: Callable
    junction: float = 0.0

    def sides(self):
        j = np.array([self.junction])
        return [float(v[0]) for v in self.left(j)], [float(v[0]) for v in self.right(j)]

    def c1_gap(self):
        lo, hi = self.sides()
        return abs(hi[0] - lo[0]), abs(hi[1] - lo[1])

    def check_c1(self, tol: float = TAU_BC):
        gap0, gap1 = self.c1_gap()
        lo, hi = self.sides()
        scale = max(1.0, abs(lo[0]), abs(lo[1]))
        if gap0 > tol * scale or gap1 > tol * scale:
            raise InputError(f"junction at {self.junction} is not C^1: value gap {gap0:.3e}, slope gap {gap1:.3e}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = [np.empty_like(x) for _ in range(3)]
        lm, rm = x < self.junction, x > self.junction
        for mask, fn in ((lm, self.left), (rm, self.right)):
            if np.any(mask):
                for o, v in zip(out, fn(x[mask])):
                    o[mask] = v
        at = x == self.junction
        if np.any(at):
            lo, hi = self.sides()
            out[0][at], out[1][at], out[2][at] = hi[0], hi[1], 0.5 * (lo[2] + hi[2])
        return tuple(out)

    def second_derivative_range(self, x):
        """Extremes of the one-sided second derivatives over the samples ``x``."""
        x = np.asarray(x, dtype=float)
        vals = []
        if np.any(x <= self.junction):
            vals.append(self.left(x[x <= self.junction])[2])
        if np.any(x >= self.junction):
            vals.append(self.right(x[x >= self.junction])[2])
        v = np.concatenate(vals)
        return float(v.min()), float(v.max())


@dataclass
class SmoothingParams:
    """``nu``: half-width of the window; ``delta``: ``C^1`` budget; ``epsilon``: mollifier width."""

    nu: float
    delta: float
    epsilon: Optional[float] = None

    def __post_init__(self):
        if not (self.nu > 0 and self.delta > 0):
            raise InputError("nu and delta must be positive")
        if self.epsilon is not None and not 0 < self.epsilon < self.nu / 2:
            raise InputError("epsilon must lie in (0, nu/2)")

    @property
    def initial_epsilon(self) -> float:
        return self.epsilon if self.epsilon is not None else self.nu / 4


@dataclass
class SmoothingCertificate:
    """Checked facts about one smoothed function.

    ``lemma_interval`` is built from the one-sided second derivatives at
    ``-nu`` and ``nu``; ``extrema_interval`` from the extremes of the
    piecewise second derivative over ``[-nu, nu]``. Both are widened by ``delta``.
    """

    junction: float
    nu: float
    delta: float
    epsilon: float
    dx: float
    sup_value: float
    sup_slope: float
    second_min: float
    second_max: float
    lemma_interval: tuple
    extrema_interval: tuple
    unit_mass_error: float

    @property
    def close(self) -> bool:
        return self.sup_value <= self.delta and self.sup_slope <= self.delta

    @property
    def lemma_contains(self) -> bool:
        lo, hi = self.lemma_interval
        return lo <= self.second_min and self.second_max <= hi

    @property
    def extrema_contains(self) -> bool:
        lo, hi = self.extrema_interval
        return lo <= self.second_min and self.second_max <= hi

    @property
    def lemma_attainable(self) -> bool:
        """True when the piecewise ``h''`` extremes lie strictly inside ``lemma_interval``.

        Then ``H''`` tends to that range as ``epsilon`` shrinks, so the lemma
        form is required as well.
        """
        lo, hi = self.lemma_interval
        return lo < self.extrema_interval[0] + self.delta and self.extrema_interval[1] - self.delta < hi

    @property
    def holds(self) -> bool:
        return self.close and self.extrema_contains and (self.lemma_contains or not self.lemma_attainable)

    def to_dict(self) -> dict:
        return {
            "junction": self.junction, "nu": self.nu, "delta": self.delta, "epsilon": self.epsilon,
            "dx": self.dx, "sup_value": self.sup_value, "sup_slope": self.sup_slope,
            "second_min": self.second_min, "second_max": self.second_max,
            "lemma_interval": list(self.lemma_interval), "extrema_interval": list(self.extrema_interval),
            "unit_mass_error": self.unit_mass_error,
            "close": self.close, "lemma_contains": self.lemma_contains,
            "extrema_contains": self.extrema_contains, "lemma_attainable": self.lemma_attainable,
            "holds": self.holds,
        }


@dataclass
class SmoothedFunction:
    """Samples of ``H`` on the window grid (absolute coordinates)."""

    x: np.ndarray
    value: np.ndarray
    first: np.ndarray
    second: np.ndarray
    original: tuple = field(repr=False, default=None)


def _window_grid(junction, nu, epsilon, per_eps=16):
    dx = epsilon / per_eps
    J_out = int(math.ceil(nu / dx))
    J_m = mollifier_weights(epsilon, dx).size // 2
    j = np.arange(-(J_out + J_m), J_out + J_m + 1)
    return dx, J_m, junction + dx * j, dx * j


def _mollified_differences(dx, g_full, w):
    """``D = hbar - h`` and its first two derivatives on the output grid.

    Where the mollifier stencil stays on one side of the junction the value
    and slope differences are accumulated from Hermite increments between
    sample pairs, which avoids cancelling two nearly equal function values;
    this matters because ``psi''`` scales like ``1/nu^2``. The increments use
    the nominal offsets ``dx * j`` and only the derivative columns, so
    rounding in the sample times does not leak in. Stencils that cross
    the junction use the plain convolution, and there ``psi = 1`` with
    vanishing derivatives.
    """
    v, d, s = g_full
    J = w.size // 2
    n = v.size - 2 * J
    b = np.arange(n) + J
    D0 = np.convolve(v, w, mode="valid") - v[b]
    D1 = np.convolve(d, w, mode="valid") - d[b]
    D2 = np.convolve(s, w, mode="valid") - s[b]
    H0 = np.zeros(n)
    H1 = np.zeros(n)
    for m in range(w.size):
        if w[m] == 0:
            continue
        a = b - J + m
        y = dx * (m - J)
        H0 += w[m] * (0.5 * y * (d[a] + d[b]) + y * y / 12.0 * (s[b] - s[a]))
        H1 += w[m] * (0.5 * y * (s[a] + s[b]))
    return D0, D1, D2, H0, H1


def _smooth_once(pw: PiecewiseFunction, nu, delta, epsilon, per_eps=16):
    dx, J_m, x_full, rel_full = _window_grid(pw.junction, nu, epsilon, per_eps)
    g_full = pw(x_full)
    w = mollifier_weights(epsilon, dx)
    x = x_full[J_m:-J_m]
    rel = rel_full[J_m:-J_m]
    orig = tuple(v[J_m:-J_m] for v in g_full)
    D0, D1, D2, E0, E1 = _mollified_differences(dx, g_full, w)
    one_sided = np.abs(rel) >= J_m * dx
    D0 = np.where(one_sided, E0, D0)
    D1 = np.where(one_sided, E1, D1)
    P0, P1, P2 = psi(rel, nu)
    H = (orig[0] + P0 * D0, orig[1] + P0 * D1 + P1 * D0, orig[2] + P0 * D2 + 2.0 * P1 * D1 + P2 * D0)
    inside = np.abs(rel) <= nu
    s_min, s_max = float(H[2][inside].min()), float(H[2][inside].max())
    lo_nu = float(pw.left(np.array([pw.junction - nu]))[2][0])
    hi_nu = float(pw.right(np.array([pw.junction + nu]))[2][0])
    e_lo, e_hi = pw.second_derivative_range(x[inside])
    cert = SmoothingCertificate(
        junction=float(pw.junction), nu=nu, delta=delta, epsilon=epsilon, dx=dx,
        sup_value=float(np.max(np.abs(P0 * D0))), sup_slope=float(np.max(np.abs(P0 * D1 + P1 * D0))),
        second_min=s_min, second_max=s_max,
        lemma_interval=(min(lo_nu, hi_nu) - delta, max(lo_nu, hi_nu) + delta),
        extrema_interval=(e_lo - delta, e_hi + delta),
        unit_mass_error=abs(float(w.sum()) - 1.0))
    return SmoothedFunction(x, *H, original=orig), cert


def smooth_junction(pw: PiecewiseFunction, params: SmoothingParams, max_points: int = 2 ** 22):
    """Smooth ``pw`` near its junction; halves ``epsilon`` until the certificate holds.

    Returns ``(SmoothedFunction, SmoothingCertificate)``.
    """
    pw.check_c1()
    eps = params.initial_epsilon
    last = None
    while True:
        dx = eps / 16.0
        if dx <= 64 * np.finfo(float).eps * max(1.0, abs(pw.junction)) or 2 * params.nu / dx > max_points:
            raise SmoothingError(
                f"epsilon reached the resolution floor ({eps:.3e}) without a valid certificate; "
                f"last: {None if last is None else last.to_dict()}; sample the pieces more finely")
        out, cert = _smooth_once(pw, params.nu, params.delta, eps)
        if cert.holds:
            return out, cert
        last = cert
        eps *= 0.5


def _smooth_pair(ph: PiecewiseFunction, pf: PiecewiseFunction, nu, delta, max_points, per_eps=16):
    """Smooth ``h`` and ``f`` with a common ``epsilon`` so their windows share one grid."""
    eps = nu / 4
    while True:
        dx = eps / per_eps
        if dx <= 64 * np.finfo(float).eps * max(1.0, abs(ph.junction)) or 2 * nu / dx > max_points:
            raise SmoothingError(f"epsilon reached the resolution floor ({eps:.3e}) at t = {ph.junction}")
        H, ch = _smooth_once(ph, nu, delta, eps, per_eps)
        F, cf = _smooth_once(pf, nu, delta, eps, per_eps)
        if ch.holds and cf.holds:
            return H, F, ch, cf
        eps *= 0.5


def margin_gradients(h, h1, h2, f, f1, f2, p, q, k):
    """Gradients of the four margins with respect to ``(h, h', h'', f, f', f'')``, shape ``(n, 4, 6)``."""
    h, h1, h2, f, f1, f2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (h, h1, h2, f, f1, f2)))
    z = np.zeros_like(h)
    d12 = np.stack([h2 / h ** 2, z, -1.0 / h, z, z, z], -1)
    d13 = np.stack([z, z, z, f2 / f ** 2, z, -1.0 / f], -1)
    d22 = np.stack([-2.0 * (1.0 - h1 ** 2) / h ** 3, -2.0 * h1 / h ** 2, z, z, z, z], -1)
    d33 = np.stack([z, z, z, -2.0 * (1.0 - f1 ** 2) / f ** 3, -2.0 * f1 / f ** 2, z], -1)
    d23 = np.stack([h1 * f1 / (h * h * f), -f1 / (h * f), z, h1 * f1 / (h * f * f), -h1 / (h * f), z], -1)
    rows = [(k - q) * d12 + q * d13,
            d12 + (k - q - 1) * d22 + q * d23,
            (k - q) * d22 + q * d23,
            d13 + p * d23 + (k - p - 1) * d33]
    return np.stack(rows, axis=-2)


def _margins(cols, p, q, k):
    return np.stack(margins_from_table(*eigenvalue_table(*cols), p, q, k), axis=1)


@dataclass
class JunctionWindow:
    """Smoothed samples of ``h`` and ``f`` around one junction plus the data behind the choice."""

    name: str
    t: float
    nu: float
    h: SmoothedFunction
    f: SmoothedFunction
    certificate: dict

    @property
    def half_width(self) -> float:
        return float(max(self.t - self.h.x[0], self.h.x[-1] - self.t))

    def columns(self):
        return (self.h.value, self.h.first, self.h.second, self.f.value, self.f.first, self.f.second)


def _pair_from_pieces(left: Piece, right: Piece, tj: float):
    def side(piece, offset):
        return lambda x: piece(x)[offset:offset + 3]
    ph = PiecewiseFunction(side(left, 0), side(right, 0), tj)
    pf = PiecewiseFunction(side(left, 3), side(right, 3), tj)
    return ph, pf


def smooth_window(name: str, left: Piece, right: Piece, p: int, q: int, k: int, nu: Optional[float] = None,
                  nu_fraction: float = 1e-3, delta: Optional[float] = None, tau_margin: float = TAU_MARGIN,
                  max_halvings: int = 30, max_points: int = 2 ** 22) -> JunctionWindow:
    """Smooth both warping functions where ``left`` meets ``right`` and re-verify the margins.

    ``delta`` defaults to half of ``min_i m_i / L_i`` where ``m_i`` is the
    smallest one-sided value of margin ``i`` in the window and ``L_i`` the
    largest l1-norm of its gradient there.
    """
    tj = left.end
    if right.start != tj:
        raise InputError("pieces do not meet")
    if nu is None:
        nu = nu_fraction * min(left.length, right.length)
    if not 0 < nu < min(left.length, right.length):
        raise InputError("window half-width must be positive and smaller than both pieces")
    ph, pf = _pair_from_pieces(left, right, tj)
    for pw, label in ((ph, "h"), (pf, "f")):
        try:
            pw.check_c1()
        except InputError as exc:
            raise InputError(f"{label} at junction {name!r}: {exc}") from None
    xs_l = np.linspace(tj - nu, tj, 257)
    xs_r = np.linspace(tj, tj + nu, 257)
    one_sided = [left(xs_l), right(xs_r)]
    m_each = np.min([_margins(c, p, q, k).min(axis=0) for c in one_sided], axis=0)
    L = np.max([np.abs(margin_gradients(*c, p, q, k)).sum(axis=-1).max(axis=0) for c in one_sided], axis=0)
    m_in = float(m_each.min())
    if m_in <= tau_margin:
        raise InputError(f"one-sided margins near junction {name!r} are not positive (min {m_in:.3e})")
    d = 0.5 * float(np.min(m_each / L)) if delta is None else float(delta)
    last = None
    for _ in range(max_halvings + 1):
        # samples per epsilon; refined until Hermite midpoints also keep the margins
        for per_eps in (16, 32, 64):
            try:
                H, F, ch, cf = _smooth_pair(ph, pf, nu, d, max_points, per_eps)
            except SmoothingError:
                if per_eps == 16:
                    raise
                break
            cols = (H.value, H.first, H.second, F.value, F.first, F.second)
            m = _margins(cols, p, q, k)
            worst = float(m.min())
            if worst <= tau_margin:
                break
            mid = WarpedMetric(p, q, H.x, *cols).midpoints()
            m_mid = _margins(mid.columns(), p, q, k)
            worst_mid = float(m_mid.min())
            if worst_mid > tau_margin:
                cert = {"name": name, "t": tj, "nu": nu, "delta": d, "epsilon": ch.epsilon, "sensitivity": L.tolist(),
                        "samples_per_epsilon": per_eps, "one_sided_min_margin": m_in,
                        "window_min_margin": worst, "window_midpoint_min_margin": worst_mid,
                        "window_margin_minima": np.minimum(m.min(axis=0), m_mid.min(axis=0)).tolist(),
                        "samples": int(H.x.size), "h": ch.to_dict(), "f": cf.to_dict()}
                return JunctionWindow(name, tj, nu, H, F, cert)
            worst = worst_mid
        last = worst
        d *= 0.5
    raise SmoothingError(f"junction {name!r}: margins stay non-positive after shrinking delta (worst {last:.3e})")


def _splice(base: WarpedMetric, windows: Sequence[JunctionWindow]) -> WarpedMetric:
    t = base.t
    cols = list(base.columns())
    keep = np.ones(t.size, dtype=bool)
    for w in windows:
        keep &= ~((t >= w.h.x[0]) & (t <= w.h.x[-1]))
    ts = [t[keep]] + [w.h.x for w in windows]
    cs = [[c[keep]] + [wc for wc in [w.columns()[i] for w in windows]] for i, c in enumerate(cols)]
    tt = np.concatenate(ts)
    order = np.argsort(tt, kind="stable")
    new = [np.concatenate(c)[order] for c in cs]
    junctions = dict(base.junctions)
    return WarpedMetric(base.p, base.q, tt[order], *new, junctions=junctions, cap_radius=base.cap_radius,
                        provenance=dict(base.provenance))


def smooth_profile_junctions(profile: PiecewiseProfile, k: int, names: Sequence[str] = ("0", "t2", "t3"),
                             intervals: int = 2048, tau_margin: float = TAU_MARGIN, **kwargs):
    """Sample ``profile`` and replace the neighbourhood of each named junction by its smoothing.

    Returns ``(metric, certificates)``.
    """
    bp = profile.breakpoints
    windows = []
    for name in names:
        if name not in profile.marks:
            raise InputError(f"unknown junction {name!r}")
        tj = profile.marks[name]
        idx = np.flatnonzero(bp == tj)
        if idx.size != 1 or idx[0] in (0, bp.size - 1):
            raise InputError(f"junction {name!r} is not an interior breakpoint")
        i = int(idx[0])
        windows.append(smooth_window(name, profile.pieces[i - 1], profile.pieces[i], profile.p, profile.q, k,
                                     tau_margin=tau_margin, **kwargs))
    metric = _splice(profile.to_metric(intervals), windows)
    return metric, [w.certificate for w in windows]


def _one_sided_second(t, s, i, side):
    """Second derivative at sample ``i`` extrapolated linearly from the two neighbours on ``side``."""
    j1, j2 = (i - 1, i - 2) if side == "left" else (i + 1, i + 2)
    return s[j1] + (s[j1] - s[j2]) * (t[i] - t[j1]) / (t[j1] - t[j2])


def _hermite_piece(metric: WarpedMetric, lo: int, hi: int, name: str, fix_left=None, fix_right=None):
    t = metric.t[lo:hi + 1]
    data = []
    for v, d, s in ((metric.h, metric.h1, metric.h2), (metric.f, metric.f1, metric.f2)):
        s = s[lo:hi + 1].copy()
        if fix_left is not None:
            s[0] = fix_left[len(data)]
        if fix_right is not None:
            s[-1] = fix_right[len(data)]
        data.append((v[lo:hi + 1], d[lo:hi + 1], s))

    def fn(x):
        out = []
        for v, d, s in data:
            out.extend(hermite5(t, v, d, s, x))
        return tuple(out)

    return Piece(name, float(t[0]), float(t[-1]), fn)


def _slope_defect(t, v, d, s, i, j):
    dt = t[j] - t[i]
    return abs((v[j] - v[i]) / dt - 0.5 * (d[i] + d[j]) + dt * (s[j] - s[i]) / 12.0) / (1.0 + abs(d[i]) + abs(d[j]))


def profile_from_metric(metric: WarpedMetric, names: Sequence[str], tol: float = 1e-4) -> PiecewiseProfile:
    """Split ``metric`` at the named junction samples into quintic-Hermite pieces.

    The single sample at a junction carries one second derivative; each side
    replaces it by linear extrapolation from its own neighbours. A jump in the
    first derivative shows up as a slope defect on the adjacent interval and is
    rejected as a ``C^0``-only junction.
    """
    t = metric.t
    cuts = []
    for name in names:
        if name not in metric.junctions:
            raise InputError(f"unknown junction {name!r}")
        hit = np.flatnonzero(t == metric.junctions[name])
        if hit.size != 1:
            raise InputError(f"junction {name!r} is not a sample time")
        i = int(hit[0])
        if i < 2 or i > t.size - 3:
            raise InputError(f"junction {name!r} needs two samples on each side")
        cuts.append(i)
    order = np.argsort(cuts)
    cuts = [cuts[j] for j in order]
    for i in cuts:
        for v, d, s, label in ((metric.h, metric.h1, metric.h2, "h"), (metric.f, metric.f1, metric.f2, "f")):
            sl = s.copy()
            sl[i] = _one_sided_second(t, s, i, "left")
            sr = s.copy()
            sr[i] = _one_sided_second(t, s, i, "right")
            worst = max(_slope_defect(t, v, d, sl, i - 1, i), _slope_defect(t, v, d, sr, i, i + 1))
            if worst > tol:
                raise InputError(f"{label} is not C^1 at t = {t[i]!r} (slope defect {worst:.3e})")
    bounds = [0] + cuts + [t.size - 1]
    pieces = []
    for n, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        fl = fr = None
        if n > 0:
            fl = (_one_sided_second(t, metric.h2, lo, "right"), _one_sided_second(t, metric.f2, lo, "right"))
        if n < len(bounds) - 2:
            fr = (_one_sided_second(t, metric.h2, hi, "left"), _one_sided_second(t, metric.f2, hi, "left"))
        pieces.append(_hermite_piece(metric, lo, hi, f"piece{n}", fl, fr))
    return PiecewiseProfile(metric.p, metric.q, pieces, dict(metric.junctions), metric.cap_radius)


def smooth_metric_junctions(metric: WarpedMetric, k: int, names: Optional[Sequence[str]] = None,
                            tau_margin: float = TAU_MARGIN, **kwargs):
    """Smooth a sampled metric at its named junctions, keeping all samples outside the windows.

    Returns ``(metric, certificates)``.
    """
    if names is None:
        names = [n for n, v in metric.junctions.items() if metric.t[0] < v < metric.t[-1]]
    prof = profile_from_metric(metric, names)
    windows = []
    for name in names:
        tj = metric.junctions[name]
        i = int(np.flatnonzero(prof.breakpoints == tj)[0])
        windows.append(smooth_window(name, prof.pieces[i - 1], prof.pieces[i], metric.p, metric.q, k,
                                     tau_margin=tau_margin, **kwargs))
    return _splice(metric, windows), [w.certificate for w in windows]
