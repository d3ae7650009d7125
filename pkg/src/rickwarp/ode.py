"""Fixed-step RK4 integration of the core warping ODEs.

``h0' = exp(-h0^2 / 2)``, ``h0(0) = 1`` and ``fC'' = C exp(-h0^2) fC``,
``fC(0) = 1``, ``fC'(0) = 0``, integrated as the first-order system
``y = (h0, fC, fC')``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, StepSizeError


def _rhs_array(C, h, f, g):
    e = np.exp(-0.5 * h * h)
    return e, g, C * e * e * f


def _rk4_steps(C, y, dt, nsteps):
    """Advance ``y`` by ``nsteps`` steps; returns the visited states (excluding the start)."""
    h, f, g = y
    H = [0.0] * nsteps
    F = [0.0] * nsteps
    G = [0.0] * nsteps
    half = 0.5 * dt
    sixth = dt / 6.0
    exp = math.exp
    for i in range(nsteps):
        e = exp(-0.5 * h * h)
        k1h, k1f, k1g = e, g, C * e * e * f
        hh, ff, gg = h + half * k1h, f + half * k1f, g + half * k1g
        e = exp(-0.5 * hh * hh)
        k2h, k2f, k2g = e, gg, C * e * e * ff
        hh, ff, gg = h + half * k2h, f + half * k2f, g + half * k2g
        e = exp(-0.5 * hh * hh)
        k3h, k3f, k3g = e, gg, C * e * e * ff
        hh, ff, gg = h + dt * k3h, f + dt * k3f, g + dt * k3g
        e = exp(-0.5 * hh * hh)
        k4h, k4f, k4g = e, gg, C * e * e * ff
        h += sixth * (k1h + 2.0 * (k2h + k3h) + k4h)
        f += sixth * (k1f + 2.0 * (k2f + k3f) + k4f)
        g += sixth * (k1g + 2.0 * (k2g + k3g) + k4g)
        H[i] = h
        F[i] = f
        G[i] = g
    return H, F, G


def _rk4_partial(C, h, f, g, dt):
    """One RK4 step of (possibly different) length ``dt`` for arrays of start states."""
    k1 = _rhs_array(C, h, f, g)
    k2 = _rhs_array(C, h + 0.5 * dt * k1[0], f + 0.5 * dt * k1[1], g + 0.5 * dt * k1[2])
    k3 = _rhs_array(C, h + 0.5 * dt * k2[0], f + 0.5 * dt * k2[1], g + 0.5 * dt * k2[2])
    k4 = _rhs_array(C, h + dt * k3[0], f + dt * k3[1], g + dt * k3[2])
    return tuple(y + dt / 6.0 * (a + 2.0 * (b + c) + d) for y, a, b, c, d in zip((h, f, g), k1, k2, k3, k4))


@dataclass
class OdeSolution:
    """Grid solution of the core system on ``[0, T]`` with uniform ``step``.

    Derivative columns are the ODE right-hand sides evaluated on the grid:
    ``h0' = exp(-h0^2/2)``, ``h0'' = -h0 exp(-h0^2)``, ``fC'' = C exp(-h0^2) fC``.
    """

    C: float
    step: float
    h0: np.ndarray
    fC: np.ndarray
    dfC: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.step * np.arange(self.h0.size)

    @property
    def T(self) -> float:
        return self.step * (self.h0.size - 1)

    @property
    def dh0(self) -> np.ndarray:
        return np.exp(-0.5 * self.h0 ** 2)

    @property
    def ddh0(self) -> np.ndarray:
        return -self.h0 * np.exp(-self.h0 ** 2)

    @property
    def ddfC(self) -> np.ndarray:
        return self.C * np.exp(-self.h0 ** 2) * self.fC

    def extend(self, T: float) -> "OdeSolution":
        """Continue the integration in place up to at least ``T``; identical to integrating from 0."""
        n_total = int(math.ceil(T / self.step - 1e-9))
        extra = n_total - (self.h0.size - 1)
        if extra <= 0:
            return self
        y = (float(self.h0[-1]), float(self.fC[-1]), float(self.dfC[-1]))
        H, F, G = _rk4_steps(self.C, y, self.step, extra)
        self.h0 = np.concatenate([self.h0, H])
        self.fC = np.concatenate([self.fC, F])
        self.dfC = np.concatenate([self.dfC, G])
        return self

    def evaluate(self, t):
        """``(h0, h0', h0'', fC, fC', fC'')`` at arbitrary times in ``[0, T]``.

        Between grid nodes a single RK4 step of partial length is taken from the
        node to the left, which keeps the local error at ``O(step^5)``.
        """
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.T * (1 + 1e-15) + 1e-15):
            raise InputError(f"evaluation time outside [0, {self.T}]")
        i = np.clip(np.floor(t / self.step).astype(int), 0, self.h0.size - 1)
        dt = t - i * self.step
        h, f, g = _rk4_partial(self.C, self.h0[i], self.fC[i], self.dfC[i], dt)
        e = np.exp(-0.5 * h * h)
        return h, e, -h * e * e, f, g, self.C * e * e * f

    def residuals(self):
        """Per-unit-time defects of the stored grid against the ODEs.

        Each defect compares the increment of a component over two steps with the
        Simpson quadrature of its derivative column and divides by the step; for
        a fourth-order solution they scale like ``step^4``.
        """
        s = self.step
        out = {}
        for name, y, dy in (("h0", self.h0, self.dh0), ("fC", self.fC, self.dfC), ("dfC", self.dfC, self.ddfC)):
            if y.size < 3:
                out[name] = 0.0
                continue
            inc = y[2:] - y[:-2]
            simpson = s / 3.0 * (dy[:-2] + 4.0 * dy[1:-1] + dy[2:])
            out[name] = float(np.max(np.abs(inc - simpson)) / s)
        return out

    def residual_tolerance(self) -> float:
        """``10 step^4`` plus a floating-point floor for differencing values of size ``|y|``."""
        scale = max(1.0, float(np.max(np.abs(self.fC))), float(np.max(np.abs(self.dfC))))
        return 10.0 * self.step ** 4 + 64.0 * np.finfo(float).eps * scale / self.step

    def check(self) -> "OdeSolution":
        """Raise :class:`StepSizeError` if residuals or monotonicity fail."""
        res = self.residuals()
        tol = self.residual_tolerance()
        worst = max(res, key=res.get)
        if res[worst] > tol:
            raise StepSizeError(f"residual of {worst} is {res[worst]:.3e} > {tol:.3e}; refine the step")
        if np.any(self.dh0 <= 0) or np.any(self.dfC < 0) or np.any(self.ddfC <= 0):
            raise StepSizeError("monotonicity h0' > 0, fC' >= 0, fC'' > 0 violated")
        return self


def solve_core_odes(C: float, T: float, step: float = 1e-4, check: bool = True) -> OdeSolution:
    """Integrate the core system on ``[0, T]`` with classical RK4 and a fixed step."""
    if not (C > 0 and T > 0 and step > 0):
        raise InputError("C, T and step must all be positive")
    sol = OdeSolution(C=float(C), step=float(step), h0=np.array([1.0]), fC=np.array([1.0]), dfC=np.array([0.0]))
    sol.extend(T)
    return sol.check() if check else sol
