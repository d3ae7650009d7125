"""Curvature of doubly warped products ``dt^2 + h(t)^2 ds_p^2 + f(t)^2 ds_q^2``.

Convention used throughout the package: ``h`` scales the ``S^p`` factor and
``f`` scales the ``S^q`` factor. With the orthonormal frame
``d/dt, E_1..E_p, F_1..F_q`` the curvature operator is diagonal on the wedge
products of frame vectors, so it is a :class:`~rickwarp.kchain.BlockOperator`
with block dimensions ``(1, p, q)`` and eigenvalues

=========  ======================
 block      eigenvalue
=========  ======================
 (1, 2)     ``-h''/h``
 (1, 3)     ``-f''/f``
 (2, 2)     ``(1 - h'^2)/h^2``
 (3, 3)     ``(1 - f'^2)/f^2``
 (2, 3)     ``-h'f'/(hf)``
=========  ======================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InputError, NecessityError, RouteDisagreementError, SingularStateError
from .kchain import BlockOperator, admissible_profiles, check_profile_hypothesis, perp_spectra, simplex_grid

TAU_MARGIN = 1e-8
FIELDS = ("h", "h1", "h2", "f", "f1", "f2")


@dataclass(frozen=True)
class WarpState:
    """Values and first two derivatives of both warping functions at time ``t``."""

    t: float
    h: float
    h1: float
    h2: float
    f: float
    f1: float
    f2: float

    def as_tuple(self):
        return (self.h, self.h1, self.h2, self.f, self.f1, self.f2)

    def scaled(self, lam: float) -> "WarpState":
        """State of ``lam * h(t/lam), lam * f(t/lam)`` at the image time."""
        return WarpState(lam * self.t, lam * self.h, self.h1, self.h2 / lam,
                         lam * self.f, self.f1, self.f2 / lam)


def necessity_bound(p: int, q: int) -> int:
    """Smallest ``k`` for which all four inequalities can hold."""
    return max(p + 2, q + 1)


def _require_k(p, q, k):
    if k < necessity_bound(p, q):
        raise NecessityError(
            f"k={k} is too small for (p, q)=({p}, {q}): margin m1 needs k >= q+1 and "
            f"margin m4 needs k >= p+2, so k >= {necessity_bound(p, q)}")
    if k > p + q:
        raise InputError(f"k={k} exceeds n-1={p + q}")


def eigenvalue_table(h, h1, h2, f, f1, f2):
    """``(l12, l13, l22, l33, l23)``; works elementwise on arrays."""
    h, h1, h2, f, f1, f2 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (h, h1, h2, f, f1, f2)))
    with np.errstate(divide="ignore", invalid="ignore"):
        l12 = -h2 / h
        l13 = -f2 / f
        l22 = (1.0 - h1 * h1) / (h * h)
        l33 = (1.0 - f1 * f1) / (f * f)
        l23 = -(h1 * f1) / (h * f)
    return l12, l13, l22, l33, l23


def curvature_block(state: WarpState, p: int, q: int) -> BlockOperator:
    """Curvature operator of the warped product at ``state`` as a block operator."""
    if not (state.h > 0 and state.f > 0):
        raise SingularStateError(f"warping functions must be positive, got h={state.h}, f={state.f}")
    l12, l13, l22, l33, l23 = (float(x) for x in eigenvalue_table(*state.as_tuple()))
    return BlockOperator.from_values((1, p, q), l12, l13, l23,
                                     l22=l22 if p >= 2 else None,
                                     l33=l33 if q >= 2 else None)


def round_cap_block(radius: float, f: float, p: int, q: int) -> BlockOperator:
    """Limit of the curvature operator at the tip of a round cap ``h = N sin((t - t0)/N)`` with ``f`` constant."""
    c = 1.0 / radius ** 2
    return BlockOperator.from_values((1, p, q), c, 0.0, 0.0,
                                     l22=c if p >= 2 else None,
                                     l33=1.0 / f ** 2 if q >= 2 else None)


def margins_from_table(l12, l13, l22, l33, l23, p, q, k):
    """The four inequality expressions from eigenvalue arrays."""
    m1 = (k - q) * l12 + q * l13
    m2 = l12 + (k - q - 1) * l22 + q * l23
    m3 = (k - q) * l22 + q * l23
    m4 = l13 + p * l23 + (k - p - 1) * l33
    return m1, m2, m3, m4


def corollary_margins(state: WarpState, p: int, q: int, k: int, enforce_necessity: bool = True):
    """Left-hand sides ``(m1, m2, m3, m4)`` of the four curvature inequalities."""
    if enforce_necessity:
        _require_k(p, q, k)
    if not (state.h > 0 and state.f > 0):
        raise SingularStateError(f"warping functions must be positive, got h={state.h}, f={state.f}")
    return tuple(float(m) for m in margins_from_table(*eigenvalue_table(*state.as_tuple()), p, q, k))


def sign_hypotheses(h1, h2, f1, f2):
    """``f'' >= 0``, ``h'' < 0`` and ``h', f'`` in ``[0, 1)``, elementwise."""
    h1, h2, f1, f2 = (np.asarray(x) for x in (h1, h2, f1, f2))
    return (f2 >= 0) & (h2 < 0) & (h1 >= 0) & (h1 < 1) & (f1 >= 0) & (f1 < 1)


def applicable_margins(p: int, q: int, k: int) -> np.ndarray:
    """Mask of inequalities whose extremal chain exists for this ``(p, q, k)``.

    Margin m3 comes from a chain with base in ``S^p`` using ``k - q``
    further ``S^p`` directions, which only exists when ``k - q <= p - 1``.
    """
    return np.array([k - q <= p, 0 <= k - q - 1 <= p - 1, k - q <= p - 1, 0 <= k - p - 1 <= q - 1])


def profile_minimum(l12, l13, l22, l33, l23, p, q, k):
    """Smallest admissible profile sum for dims ``(1, p, q)``, elementwise over arrays."""
    arrs = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (l12, l13, l22, l33, l23)))
    l12, l13, l22, l33, l23 = arrs
    table = [[None, l12, l13], [l12, l22, l23], [l13, l23, l33]]
    best = np.full(l12.shape, np.inf)
    for prof in admissible_profiles((1, p, q), k):
        row = table[prof.base]
        val = sum(n * row[j] for j, n in enumerate(prof.counts) if n)
        best = np.minimum(best, val)
    return best


@dataclass
class WarpedMetric:
    """Samples of a doubly warped product on an interval.

    ``junctions`` maps piece boundaries (``"t0"``, ``"0"``, ``"t2"``, ``"t3"``,
    ``"t1"``) to sample times. ``cap_radius`` is the radius of the round cap
    whose tip is the first sample, if the first sample is singular (``h = 0``).
    """

    p: int
    q: int
    t: np.ndarray
    h: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    junctions: dict = field(default_factory=dict)
    cap_radius: Optional[float] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t",) + FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.t.size
        if any(getattr(self, name).shape != (n,) for name in FIELDS):
            raise InputError("all sample columns must have the same length")
        if n < 2 or np.any(np.diff(self.t) <= 0):
            raise InputError("sample times must be strictly increasing")

    def __len__(self):
        return self.t.size

    def state(self, i: int) -> WarpState:
        return WarpState(*(float(getattr(self, name)[i]) for name in ("t",) + FIELDS))

    def columns(self):
        return tuple(getattr(self, name) for name in FIELDS)

    def singular_mask(self) -> np.ndarray:
        return (self.h <= 0) | (self.f <= 0)

    def rescaled(self, lam: float) -> "WarpedMetric":
        """The metric ``lam^2 g``, i.e. ``lam h(t/lam)`` and ``lam f(t/lam)``."""
        return WarpedMetric(self.p, self.q, lam * self.t, lam * self.h, self.h1.copy(), self.h2 / lam,
                            lam * self.f, self.f1.copy(), self.f2 / lam,
                            junctions={k: lam * v for k, v in self.junctions.items()},
                            cap_radius=None if self.cap_radius is None else lam * self.cap_radius,
                            provenance=dict(self.provenance))

    def midpoints(self) -> "WarpedMetric":
        """Quintic Hermite reconstruction at the midpoint of every sample interval."""
        tm = 0.5 * (self.t[:-1] + self.t[1:])
        cols = []
        for v, d, s in ((self.h, self.h1, self.h2), (self.f, self.f1, self.f2)):
            cols.extend(hermite5(self.t, v, d, s, tm))
        return WarpedMetric(self.p, self.q, tm, *cols)

    def hermite_residual(self) -> float:
        """Largest relative mismatch between samples and the Hermite fit through their neighbours."""
        if self.t.size < 3:
            return 0.0
        worst = 0.0
        idx = np.arange(1, self.t.size - 1)
        tl, tr = self.t[idx - 1], self.t[idx + 1]
        for v, d, s in ((self.h, self.h1, self.h2), (self.f, self.f1, self.f2)):
            pv, pd, _ = _hermite5_interval(tl, tr, v[idx - 1], d[idx - 1], s[idx - 1],
                                           v[idx + 1], d[idx + 1], s[idx + 1], self.t[idx])
            span = tr - tl
            scale = np.abs(v[idx]) + span * np.abs(d[idx]) + span ** 2 * np.abs(s[idx]) + 1e-300
            worst = max(worst, float(np.max(np.abs(pv - v[idx]) / scale)),
                        float(np.max(span * np.abs(pd - d[idx]) / scale)))
        return worst


_H5 = np.array([
    [1, 0, 0, -10, 15, -6],
    [0, 1, 0, -6, 8, -3],
    [0, 0, 0.5, -1.5, 1.5, -0.5],
    [0, 0, 0, 0.5, -1, 0.5],
    [0, 0, 0, -4, 7, -3],
    [0, 0, 0, 10, -15, 6],
], dtype=float)


def _hermite5_interval(x0, x1, y0, d0, s0, y1, d1, s1, x):
    dx = x1 - x0
    u = (x - x0) / dx
    P = np.stack([u ** j for j in range(6)])
    dP = np.stack([j * u ** (j - 1) if j else np.zeros_like(u) for j in range(6)])
    ddP = np.stack([j * (j - 1) * u ** (j - 2) if j > 1 else np.zeros_like(u) for j in range(6)])
    coef = [y0, dx * d0, dx * dx * s0, dx * dx * s1, dx * d1, y1]
    val = sum(c * (_H5[i] @ P) for i, c in enumerate(coef))
    der = sum(c * (_H5[i] @ dP) for i, c in enumerate(coef)) / dx
    sec = sum(c * (_H5[i] @ ddP) for i, c in enumerate(coef)) / (dx * dx)
    return val, der, sec


def hermite5(x, y, dy, ddy, xq):
    """Piecewise quintic Hermite interpolation of value, slope and curvature data."""
    x = np.asarray(x, dtype=float)
    xq = np.asarray(xq, dtype=float)
    i = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, x.size - 2)
    return _hermite5_interval(x[i], x[i + 1], y[i], dy[i], ddy[i], y[i + 1], dy[i + 1], ddy[i + 1], xq)


# ---------------------------------------------------------------------------
# pointwise and grid verification
# ---------------------------------------------------------------------------

@dataclass
class ReportRow:
    t: float
    margins: tuple
    profile_min: float
    sign_hypotheses: bool
    corollary_pass: Optional[bool]
    profile_pass: bool
    passed: bool


def _route_tolerance(*vals):
    scale = max(1.0, max(abs(float(v)) for v in vals if np.isfinite(v)))
    return 1e-9 * scale


def rick_positive_at(state: WarpState, p: int, q: int, k: int, tau_margin: float = 0.0):
    """Decide ``Ric_k > 0`` at one regular state by both criteria.

    Returns ``(passed, row)``. Under the sign hypotheses the smallest
    applicable inequality margin and the smallest profile sum are the same
    number; a mismatch raises :class:`RouteDisagreementError`.
    """
    _require_k(p, q, k)
    block = curvature_block(state, p, q)
    check = check_profile_hypothesis(block, k, tau_margin)
    margins = corollary_margins(state, p, q, k)
    hyp = bool(sign_hypotheses(state.h1, state.h2, state.f1, state.f2))
    cor = None
    if hyp:
        app = np.array(margins)[applicable_margins(p, q, k)]
        cor = bool(np.min(app) > tau_margin)
        if abs(np.min(app) - check.min_value) > _route_tolerance(check.min_value, *app):
            raise RouteDisagreementError(
                f"at t={state.t}: inequality route gives {np.min(app)!r}, profile route {check.min_value!r}")
    row = ReportRow(state.t, margins, check.min_value, hyp, cor, check.holds, check.holds)
    return check.holds, row


@dataclass
class CurvatureReport:
    """Per-sample margins of the four inequalities and the minimum k-chain value."""

    k: int
    t: np.ndarray
    margins: np.ndarray
    chain_min: np.ndarray
    sign_hypotheses: np.ndarray
    tau_margin: float
    source: np.ndarray = None

    @property
    def passed_samples(self) -> np.ndarray:
        return self.chain_min > self.tau_margin

    @property
    def margin_minima(self) -> np.ndarray:
        return self.margins.min(axis=0)

    @property
    def chain_minimum(self) -> float:
        return float(self.chain_min.min())

    @property
    def worst_index(self) -> int:
        return int(np.argmin(self.chain_min))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.passed_samples))

    @property
    def margins_pass(self) -> bool:
        return bool(np.all(self.margin_minima > self.tau_margin))

    @property
    def verdict(self) -> str:
        """``"pass"`` iff the k-chain minimum and all four inequality minima exceed ``tau_margin``."""
        return "pass" if self.passed and self.margins_pass else "fail"

    def to_dict(self) -> dict:
        i = self.worst_index
        worst_margin = np.unravel_index(int(np.argmin(self.margins)), self.margins.shape)
        return {
            "verdict": self.verdict,
            "ric_k_positive": self.passed,
            "k": self.k,
            "tau_margin": self.tau_margin,
            "samples": int(self.t.size),
            "margin_minima": {f"m{j + 1}": float(v) for j, v in enumerate(self.margin_minima)},
            "all_margins_positive": self.margins_pass,
            "chain_minimum": self.chain_minimum,
            "worst_sample": {"index": i, "t": float(self.t[i]), "chain_min": float(self.chain_min[i]),
                             "margins": [float(x) for x in self.margins[i]],
                             "source": None if self.source is None else str(self.source[i])},
            "worst_margin_sample": {"index": int(worst_margin[0]), "t": float(self.t[worst_margin[0]]),
                                    "inequality": int(worst_margin[1]) + 1,
                                    "value": float(self.margins[worst_margin])},
            "sign_hypothesis_samples": int(np.count_nonzero(self.sign_hypotheses)),
            "profile_route_only_samples": int(np.count_nonzero(~self.sign_hypotheses)),
        }


def _metric_tables(metric: WarpedMetric):
    cols = metric.columns()
    table = list(eigenvalue_table(*cols))
    sing = metric.singular_mask()
    if np.any(sing):
        idx = np.flatnonzero(sing)
        if metric.cap_radius is None or np.any(metric.h[idx] != 0) or np.any(metric.f[idx] <= 0):
            raise SingularStateError(f"singular samples at t={metric.t[idx]} without round-cap data")
        c = 1.0 / metric.cap_radius ** 2
        table = [x.copy() for x in table]
        table[0][idx] = c
        table[1][idx] = 0.0
        table[2][idx] = c
        table[3][idx] = 1.0 / metric.f[idx] ** 2
        table[4][idx] = 0.0
    return table, sing


def verify_metric(metric: WarpedMetric, k: int, tau_margin: float = TAU_MARGIN,
                  midpoints: bool = True, check_routes: bool = True) -> CurvatureReport:
    """Evaluate both curvature criteria at every sample (and interval midpoint).

    Singular samples at a cap tip use the closed-form limits of the round
    cap. The verdict is positive iff the minimum k-chain value exceeds
    ``tau_margin`` everywhere.
    """
    p, q = metric.p, metric.q
    _require_k(p, q, k)
    parts = [metric]
    if midpoints and len(metric) > 1:
        parts.append(metric.midpoints())
    ts, margins, chain, hyp, src = [], [], [], [], []
    for label, m in zip(("sample", "midpoint"), parts):
        table, sing = _metric_tables(m)
        mg = np.stack(margins_from_table(*table, p, q, k), axis=1)
        cm = profile_minimum(*table, p, q, k)
        sh = sign_hypotheses(m.h1, m.h2, m.f1, m.f2) & ~sing
        if check_routes and np.any(sh):
            app = applicable_margins(p, q, k)
            cor = mg[sh][:, app].min(axis=1)
            scale = np.maximum(1.0, np.max(np.abs(np.column_stack([mg[sh][:, app], cm[sh]])), axis=1))
            bad = np.abs(cor - cm[sh]) > 1e-9 * scale
            if np.any(bad):
                j = np.flatnonzero(sh)[np.argmax(bad)]
                raise RouteDisagreementError(
                    f"route disagreement at t={m.t[j]!r}: inequalities {mg[j]}, profile minimum {cm[j]!r}")
        ts.append(m.t)
        margins.append(mg)
        chain.append(cm)
        hyp.append(sh)
        src.append(np.full(m.t.size, label))
    order = np.argsort(np.concatenate(ts), kind="stable")
    return CurvatureReport(k=k, t=np.concatenate(ts)[order], margins=np.vstack(margins)[order],
                           chain_min=np.concatenate(chain)[order], sign_hypotheses=np.concatenate(hyp)[order],
                           tau_margin=tau_margin, source=np.concatenate(src)[order])


def analytic_chain_minima(metric: WarpedMetric, k: int, resolution: int = 24) -> np.ndarray:
    """Minimum k-chain value at every sample from the closed-form ``A_v`` spectra on a simplex grid."""
    table, _ = _metric_tables(metric)
    l12, l13, l22, l33, l23 = table
    w = simplex_grid(resolution)
    out = np.empty(metric.t.size)
    p, q = metric.p, metric.q
    for i in range(metric.t.size):
        lam = np.array([[np.nan, l12[i], l13[i]], [l12[i], l22[i], l23[i]], [l13[i], l23[i], l33[i]]])
        if p < 2:
            lam[1, 1] = np.nan
        if q < 2:
            lam[2, 2] = np.nan
        block = BlockOperator((1, p, q), lam)
        out[i] = perp_spectra(block, w)[:, :k].sum(axis=1).min()
    return out
