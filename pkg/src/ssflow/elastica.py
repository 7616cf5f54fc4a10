"""Stationary curves of the flow: Euler-Lagrange residual and the borderline elastica.

Finite-energy stationary curvatures on the whole line are either zero or the
one-parameter family ``sign * sqrt(2) lam sech(lam (s - s0) / sqrt(2))``; they
lie on the zero level of the first integral ``k'^2 + k^4/4 - lam^2 k^2/2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import geometry as geo
from .geometry import Curve, GridField

SQRT2 = np.sqrt(2.0)
LAUNCH_EPS = 1e-6
LAMBDA_REL_TOL = 0.05
SHAPE_FACTOR = 10.0
RAMP = 0.02


@dataclass(frozen=True)
class ElasticaProfile:
    kind: Literal["line", "borderline"]
    lam: float
    s0: float = 0.0
    sign: int = 1
    shape_gap: float = 0.0
    residual: float = 0.0

    @property
    def peak(self) -> float:
        return self.sign * SQRT2 * self.lam if self.kind == "borderline" else 0.0


@dataclass(frozen=True)
class NonStationary:
    reason: str
    lam_eff: float = float("nan")
    shape_gap: float = float("nan")
    residual: float = float("nan")
    kind: str = "nonstationary"


def first_integral(k: np.ndarray, dk: np.ndarray, lam: float) -> np.ndarray:
    return dk**2 + k**4 / 4 - lam**2 * k**2 / 2


def el_residual(kappa: GridField, lam: float) -> float:
    """max over interior nodes of |2 k'' + k^3 - lam^2 k|."""
    k = kappa.values
    kss = (k[2:] - 2 * k[1:-1] + k[:-2]) / kappa.spacing**2
    kin = k[1:-1]
    return float(np.max(np.abs(2 * kss + kin**3 - lam**2 * kin)))


def borderline_values(s, lam: float, s0: float = 0.0, sign: int = 1):
    return sign * SQRT2 * lam / np.cosh(lam * (np.asarray(s) - s0) / SQRT2)


def borderline_profile(lam: float, s0: float = 0.0, sign: int = 1, grid=(-40.0, 40.0, 1601)) -> GridField:
    """Closed-form borderline curvature on ``grid = (a, b, n)`` or a GridField-like spec."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if isinstance(grid, GridField):
        a, h, n = grid.origin, grid.spacing, len(grid)
    else:
        a, b, n = grid
        h = (b - a) / (n - 1)
    s = a + h * np.arange(n)
    return GridField(borderline_values(s, lam, s0, sign), h, a)


def borderline_curve(lam: float, s0: float = 0.0, sign: int = 1, grid=(-40.0, 40.0, 1601),
                     start=None, start_angle: float = 0.0) -> Curve:
    """Curve with borderline curvature, by integration of the Frenet system."""
    kap = borderline_profile(lam, s0, sign, grid)
    return geo.build_from_curvature(kap, (0.0, 0.0) if start is None else start, start_angle)


def borderline_closed_form(s, lam: float):
    """Arclength parametrization of the counter-clockwise borderline loop centred at s = 0.

    Tails are asymptotic to the horizontal axis; the loop sits above it.
    """
    u = lam * np.asarray(s, dtype=float) / SQRT2
    c = 2 * SQRT2 / lam
    return np.column_stack([s - c * np.tanh(u), c / np.cosh(u)])


def _form_rhs(k, lam, sign):
    # lam^2 k^2 / 2 - k^4 / 4 in factored form: no cancellation next to the peak
    a = np.abs(k)
    arg = np.maximum(SQRT2 * lam - a, 0.0) * (SQRT2 * lam + a)
    return -sign * 0.5 * a * np.sqrt(arg)


def integrate_form(lam: float, sign: int = 1, h: float = 1e-3, s_max: float = 20.0) -> GridField:
    """RK4 integration of the separatrix ODE from the peak, mirrored to s < 0.

    The peak ``k = sign sqrt(2) lam`` is an equilibrium of the first-order ODE,
    so the integration starts at ``s = LAUNCH_EPS`` from the series
    ``k ~ sign sqrt(2) lam (1 - lam^2 eps^2 / 4)``.
    """
    if not lam > 0 or not h > 0:
        raise ValueError("lambda and h must be positive")
    sign = 1 if sign >= 0 else -1
    m = int(round(s_max / h))
    k = np.empty(m + 1)
    k[0] = sign * SQRT2 * lam
    eps = LAUNCH_EPS
    kk = sign * SQRT2 * lam * (1 - lam**2 * eps**2 / 4)

    def rk4(y, dt):
        a1 = _form_rhs(y, lam, sign)
        a2 = _form_rhs(y + dt / 2 * a1, lam, sign)
        a3 = _form_rhs(y + dt / 2 * a2, lam, sign)
        a4 = _form_rhs(y + dt * a3, lam, sign)
        return y + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)

    # Next to the peak the right-hand side behaves like sqrt(k_peak - k) and RK4
    # lags unless its step is small compared with the distance to the peak, so
    # steps are capped at RAMP * s until they reach h.
    pos = eps
    while pos < h:
        dt = min(RAMP * pos, h - pos)
        kk = rk4(kk, dt)
        pos += dt
    k[1] = kk
    for i in range(2, m + 1):
        sub = int(np.ceil(1.0 / (RAMP * (i - 1))))
        y = k[i - 1]
        for _ in range(sub):
            y = rk4(y, h / sub)
        k[i] = y
    full = np.concatenate([k[:0:-1], k])
    return GridField(full, h, -m * h)


def _peak(s: np.ndarray, k: np.ndarray):
    i = int(np.argmax(np.abs(k)))
    if 0 < i < len(k) - 1:
        y0, y1, y2 = k[i - 1], k[i], k[i + 1]
        denom = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        off = float(np.clip(off, -1, 1))
        h = 0.5 * (s[i + 1] - s[i - 1])
        return s[i] + off * h, y1 - 0.25 * (y0 - y2) * off
    return s[i], k[i]


def classify(curve: Curve, lam: float, tol: float = 1e-2):
    """Label a curve as ``line``, ``borderline`` or NonStationary.

    Thresholds: shape gap (relative L2) below ``10 tol``, scaled
    Euler-Lagrange residual below ``10 tol`` and ``|lam_eff - lam| < 0.05 lam``.
    """
    if not curve.is_arclength:
        curve = geo.resample_arclength(curve, len(curve))
    p = curve.param
    kap = GridField(geo.curvature_values(curve, order=4), (p[-1] - p[0]) / (len(p) - 1), p[0])
    s, k = kap.grid, kap.values
    sup = float(np.max(np.abs(k)))
    if sup < tol:
        return ElasticaProfile("line", float(lam), shape_gap=0.0, residual=el_residual(kap, lam))
    mean = float(np.mean(k))
    if abs(mean) > tol and np.std(k) < 1e-3 * abs(mean):
        return NonStationary("constant curvature: circle branch, infinite energy on the line",
                             abs(mean) / SQRT2)
    s0, kpk = _peak(s, k)
    sign = 1 if kpk > 0 else -1
    lam_eff = abs(kpk) / SQRT2
    ref = borderline_values(s, lam_eff, s0, sign)
    gap = float(np.sqrt(np.trapezoid((k - ref) ** 2, s) / np.trapezoid(ref**2, s)))
    res = el_residual(kap, lam_eff) / (SQRT2 * lam_eff) ** 3
    if gap < SHAPE_FACTOR * tol and res < SHAPE_FACTOR * tol and abs(lam_eff - lam) < LAMBDA_REL_TOL * lam:
        return ElasticaProfile("borderline", lam_eff, float(s0), sign, gap, res)
    if abs(lam_eff - lam) >= LAMBDA_REL_TOL * lam:
        why = f"peak curvature gives lambda_eff={lam_eff:.4g}, flow lambda={lam:.4g}"
    else:
        why = f"shape gap {gap:.3g} or residual {res:.3g} above {SHAPE_FACTOR * tol:.3g}"
    return NonStationary(why, lam_eff, gap, res)
