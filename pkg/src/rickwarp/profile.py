"""Piecewise warping profiles built from analytic pieces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .curvature import WarpedMetric
from .errors import InputError


@dataclass(frozen=True)
class Piece:
    """One analytic piece on ``[start, end]``.

    ``fn(t)`` returns the six arrays ``(h, h', h'', f, f', f'')``.
    """

    name: str
    start: float
    end: float
    fn: Callable

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return tuple(np.broadcast_to(np.asarray(c, dtype=float), t.shape).copy() for c in self.fn(t))

    @property
    def length(self) -> float:
        return self.end - self.start


def _scaled_fn(fn, lam):
    def g(t):
        h, h1, h2, f, f1, f2 = fn(t / lam)
        return lam * h, h1, h2 / lam, lam * f, f1, f2 / lam
    return g


@dataclass
class PiecewiseProfile:
    """Contiguous pieces of a warping profile on ``[pieces[0].start, pieces[-1].end]``.

    ``marks`` names the breakpoints, e.g. ``{"t0": ..., "0": ..., "t2": ...}``.
    """

    p: int
    q: int
    pieces: list
    marks: dict = field(default_factory=dict)
    cap_radius: Optional[float] = None

    def __post_init__(self):
        if not self.pieces:
            raise InputError("a profile needs at least one piece")
        for left, right in zip(self.pieces, self.pieces[1:]):
            if left.end != right.start:
                raise InputError(f"pieces {left.name!r} and {right.name!r} are not contiguous")
        if any(pc.end <= pc.start for pc in self.pieces):
            raise InputError("every piece must have positive length")

    @property
    def breakpoints(self) -> np.ndarray:
        return np.array([pc.start for pc in self.pieces] + [self.pieces[-1].end])

    @property
    def interior_breakpoints(self) -> np.ndarray:
        return self.breakpoints[1:-1]

    def piece_index(self, t, side: str = "right") -> np.ndarray:
        """Index of the piece used at each time; ``side`` decides breakpoints."""
        inner = self.interior_breakpoints
        idx = np.searchsorted(inner, np.asarray(t, dtype=float), side="right" if side == "right" else "left")
        return idx

    def evaluate(self, t, side: str = "right"):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        bp = self.breakpoints
        if np.any(t < bp[0]) or np.any(t > bp[-1]):
            raise InputError(f"times outside the profile domain [{bp[0]}, {bp[-1]}]")
        idx = self.piece_index(t, side)
        out = [np.empty_like(t) for _ in range(6)]
        for i in np.unique(idx):
            sel = idx == i
            vals = self.pieces[i](t[sel])
            for o, v in zip(out, vals):
                o[sel] = v
        return tuple(out)

    def jumps(self) -> list:
        """Left/right mismatch of ``(h, h', h'', f, f', f'')`` at each interior breakpoint."""
        out = []
        for left, right in zip(self.pieces, self.pieces[1:]):
            a = left(np.array([left.end]))
            b = right(np.array([right.start]))
            out.append(np.array([float(y[0] - x[0]) for x, y in zip(a, b)]))
        return out

    def rescaled(self, lam: float) -> "PiecewiseProfile":
        """Profile of ``lam h(t/lam), lam f(t/lam)``."""
        if not lam > 0:
            raise InputError("rescale factor must be positive")
        pieces = [Piece(pc.name, lam * pc.start, lam * pc.end, _scaled_fn(pc.fn, lam)) for pc in self.pieces]
        return PiecewiseProfile(self.p, self.q, pieces, {k: lam * v for k, v in self.marks.items()},
                                None if self.cap_radius is None else lam * self.cap_radius)

    def sample_times(self, intervals: int = 2048) -> list:
        """Per-piece sample grids: ``intervals`` equal steps plus their exact midpoints."""
        n = 2 * intervals + 1
        return [np.linspace(pc.start, pc.end, n) for pc in self.pieces]

    def to_metric(self, intervals: int = 2048, provenance: Optional[dict] = None) -> WarpedMetric:
        """Sample every piece on its own grid; breakpoints take the right piece's values."""
        ts, cols = [], [[] for _ in range(6)]
        for i, (pc, t) in enumerate(zip(self.pieces, self.sample_times(intervals))):
            if i < len(self.pieces) - 1:
                t = t[:-1]
            ts.append(t)
            for c, v in zip(cols, pc(t)):
                c.append(v)
        return WarpedMetric(self.p, self.q, np.concatenate(ts), *(np.concatenate(c) for c in cols),
                            junctions=dict(self.marks), cap_radius=self.cap_radius,
                            provenance=dict(provenance or {}))
