"""Discrete planar curves and their geometric measurements.

Sign convention: the unit normal is the tangent rotated by a quarter turn
counter-clockwise, ``n = R t`` with ``R = [[0, -1], [1, 0]]``, so a
counter-clockwise circle has positive curvature.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ARC_EPS = 1e-6
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])

# Gauss-Legendre nodes on [0, 1] for segment arclengths
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


class DegenerateCurveError(ValueError):
    """Raised when a point set cannot carry a curve (repeated points, too few nodes)."""


@dataclass(frozen=True)
class Curve:
    """Ordered planar points with a strictly increasing parameter.

    ``is_arclength`` records that the parameter is arclength along the curve
    (set by resampling and by curvature integration).
    """

    points: np.ndarray
    param: np.ndarray
    is_arclength: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        par = np.array(self.param, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DegenerateCurveError(f"points must have shape (n, 2), got {pts.shape}")
        if len(pts) < 5:
            raise DegenerateCurveError(f"need at least 5 points, got {len(pts)}")
        if par.shape != (len(pts),):
            raise DegenerateCurveError("param length must match point count")
        if not np.all(np.diff(par) > 0):
            raise DegenerateCurveError("param must be strictly increasing")
        chords = np.hypot(*np.diff(pts, axis=0).T)
        if not np.all(chords > 0):
            i = int(np.argmin(chords))
            raise DegenerateCurveError(f"repeated point at nodes {i} and {i + 1}")
        pts.setflags(write=False)
        par.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "param", par)

    def __len__(self):
        return len(self.points)

    @property
    def chords(self) -> np.ndarray:
        return np.hypot(*np.diff(self.points, axis=0).T)

    def transformed(self, angle: float = 0.0, shift=(0.0, 0.0)) -> "Curve":
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return Curve(self.points @ rot.T + np.asarray(shift), self.param, self.is_arclength)

    def reversed(self) -> "Curve":
        return Curve(self.points[::-1], -self.param[::-1], self.is_arclength)


@dataclass(frozen=True)
class GridField:
    """Scalar samples on the uniform grid ``origin + spacing * i``."""

    values: np.ndarray
    spacing: float
    origin: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 5:
            raise ValueError(f"GridField needs at least 5 samples, got shape {v.shape}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", float(self.origin))

    def __len__(self):
        return len(self.values)

    @property
    def grid(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(len(self.values))

    @property
    def length(self) -> float:
        return self.spacing * (len(self.values) - 1)

    @classmethod
    def sample(cls, fn, a: float, b: float, n: int) -> "GridField":
        x = np.linspace(a, b, n)
        return cls(fn(x), (b - a) / (n - 1), a)


@dataclass(frozen=True)
class EnergyReport:
    length: float
    bending: float
    total: float
    lam: float = field(metadata={"name": "lambda"})


# -- finite differences ------------------------------------------------------


def _uniform_step(param: np.ndarray) -> float | None:
    d = np.diff(param)
    if np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        return float(d[0])
    return None


def diff1(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order first derivative along axis 0, one-sided at the ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * h)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * h)
    return out


def diff2(f: np.ndarray, h: float) -> np.ndarray:
    """Second-order second derivative along axis 0, one-sided at the ends."""
    f = np.asarray(f, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h**2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h**2
    return out


def _refine4(d1, d2, f, h):
    # five-point fourth-order stencils where they fit
    d1[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    d2[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * h * h)
    if len(f) >= 6:
        # one-sided fourth-order stencils on the first two nodes at each end
        w1 = np.array([[-25, 48, -36, 16, -3, 0], [-3, -10, 18, -6, 1, 0]]) / (12 * h)
        w2 = np.array([[45, -154, 214, -156, 61, -10], [10, -15, -4, 14, -6, 1]]) / (12 * h * h)
        d1[:2] = w1 @ f[:6]
        d2[:2] = w2 @ f[:6]
        d1[-2:] = -(w1 @ f[::-1][:6])[::-1]
        d2[-2:] = (w2 @ f[::-1][:6])[::-1]
    return d1, d2


def _derivs(curve: Curve, order: int = 2):
    h = _uniform_step(curve.param)
    if h is not None:
        d1, d2 = diff1(curve.points, h), diff2(curve.points, h)
        if order == 4:
            d1, d2 = _refine4(d1, d2, curve.points, h)
        return d1, d2
    d1 = np.gradient(curve.points, curve.param, axis=0, edge_order=2)
    d2 = np.gradient(d1, curve.param, axis=0, edge_order=2)
    return d1, d2


def _field_for(curve: Curve, values: np.ndarray) -> GridField:
    p = curve.param
    return GridField(values, (p[-1] - p[0]) / (len(p) - 1), p[0])


# -- measurements ------------------------------------------------------------


def speed(curve: Curve, order: int = 2) -> np.ndarray:
    """|d gamma / d param| at every node."""
    d1, _ = _derivs(curve, order)
    return np.hypot(d1[:, 0], d1[:, 1])


def tangent(curve: Curve) -> np.ndarray:
    d1, _ = _derivs(curve)
    return d1 / np.hypot(d1[:, 0], d1[:, 1])[:, None]


def normal(curve: Curve) -> np.ndarray:
    return tangent(curve) @ ROT.T


def curvature_values(curve: Curve, order: int = 2) -> np.ndarray:
    """Nodewise curvature; ``order=4`` uses five-point stencils away from the ends."""
    d1, d2 = _derivs(curve, order)
    cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    return cross / np.hypot(d1[:, 0], d1[:, 1]) ** 3


def curvature(curve: Curve) -> GridField:
    """Signed curvature (x'y'' - y'x'') / |gamma'|^3 on the curve's parameter grid."""
    return _field_for(curve, curvature_values(curve))


def arclength(curve: Curve) -> np.ndarray:
    """Cumulative arclength at the nodes (trapezoid on the speed)."""
    sp = speed(curve)
    ds = 0.5 * (sp[1:] + sp[:-1]) * np.diff(curve.param)
    return np.concatenate([[0.0], np.cumsum(ds)])


def energy(curve: Curve, lam: float) -> EnergyReport:
    """lambda^2 * length + integral of kappa^2 ds, both by the trapezoid rule."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    sp = speed(curve)
    k = curvature_values(curve)
    length = float(np.trapezoid(sp, curve.param))
    bending = float(np.trapezoid(k * k * sp, curve.param))
    return EnergyReport(length, bending, lam * lam * length + bending, float(lam))


def index(curve: Curve) -> float:
    """Total turning: integral of kappa ds."""
    return float(np.trapezoid(curvature_values(curve) * speed(curve), curve.param))


def hausdorff(a: Curve, b: Curve) -> float:
    """Symmetric Hausdorff distance between the point sets, refined to the polylines."""
    from scipy.spatial import cKDTree

    def one_way(p, q):
        dist, idx = cKDTree(q).query(p)
        # refine against the two polyline segments adjacent to the nearest vertex
        best = dist.copy()
        for off in (-1, 0):
            j = np.clip(idx + off, 0, len(q) - 2)
            a0, a1 = q[j], q[j + 1]
            seg = a1 - a0
            t = np.clip(np.einsum("ij,ij->i", p - a0, seg) / np.einsum("ij,ij->i", seg, seg), 0, 1)
            best = np.minimum(best, np.hypot(*(p - a0 - t[:, None] * seg).T))
        return best.max()

    return float(max(one_way(a.points, b.points), one_way(b.points, a.points)))


# -- construction ------------------------------------------------------------


def _cell_midpoints(k: np.ndarray) -> np.ndarray:
    """Cubic-interpolated values at cell midpoints."""
    km = np.empty(len(k) - 1)
    km[1:-1] = (-k[:-3] + 9 * k[1:-2] + 9 * k[2:-1] - k[3:]) / 16
    km[0] = (5 * k[0] + 15 * k[1] - 5 * k[2] + k[3]) / 16
    km[-1] = (5 * k[-1] + 15 * k[-2] - 5 * k[-3] + k[-4]) / 16
    return km


def build_from_curvature(kappa: GridField, start=(0.0, 0.0), start_angle: float = 0.0) -> Curve:
    """Integrate theta' = kappa, gamma' = (cos theta, sin theta) with RK4.

    The curvature at the half step comes from a local cubic through four
    neighbouring samples, so the result is fourth-order accurate in the
    spacing for smooth data.
    """
    k = kappa.values
    h = kappa.spacing
    n = len(k)
    km = _cell_midpoints(k)
    theta = start_angle + np.concatenate([[0.0], np.cumsum(h / 6 * (k[:-1] + 4 * km + k[1:]))])
    t0 = theta[:-1]
    # angle at the half step from the quadratic through k_i, km, k_{i+1}
    th_mid = t0 + h / 24 * (5 * k[:-1] + 8 * km - k[1:])
    th_end = theta[1:]
    stages = np.stack([t0, th_mid, th_mid, th_end])
    w = np.array([1.0, 2.0, 2.0, 1.0])[:, None]
    dx = h / 6 * (w * np.cos(stages)).sum(axis=0)
    dy = h / 6 * (w * np.sin(stages)).sum(axis=0)
    pts = np.empty((n, 2))
    pts[0] = start
    pts[1:, 0] = start[0] + np.cumsum(dx)
    pts[1:, 1] = start[1] + np.cumsum(dy)
    return Curve(pts, kappa.grid, True)


def turning_angle(kappa: GridField, start_angle: float = 0.0) -> np.ndarray:
    """Tangent angle theta(s) obtained by Simpson-type integration of kappa."""
    k = kappa.values
    km = _cell_midpoints(k)
    return start_angle + np.concatenate([[0.0], np.cumsum(kappa.spacing / 6 * (k[:-1] + 4 * km + k[1:]))])


# -- arclength resampling ----------------------------------------------------


def _stencil_start(seg: np.ndarray, n: int) -> np.ndarray:
    return np.clip(seg - 1, 0, n - 4)


def _lagrange(c_nodes, p_nodes, c):
    """Value and derivative of the cubic through 4 nodes, vectorized over rows."""
    m = c_nodes.shape[0]
    val = np.zeros((m, 2))
    der = np.zeros((m, 2))
    for j in range(4):
        others = [i for i in range(4) if i != j]
        denom = np.ones(m)
        num = np.ones(m)
        dnum = np.zeros(m)
        for i in others:
            denom *= c_nodes[:, j] - c_nodes[:, i]
        for i in others:
            num *= c - c_nodes[:, i]
            prod = np.ones(m)
            for k in others:
                if k != i:
                    prod *= c - c_nodes[:, k]
            dnum += prod
        val += (num / denom)[:, None] * p_nodes[:, j]
        der += (dnum / denom)[:, None] * p_nodes[:, j]
    return val, der


def _resample_once(points: np.ndarray, n: int):
    npts = len(points)
    chords = np.hypot(*np.diff(points, axis=0).T)
    if np.any(chords <= 0):
        raise DegenerateCurveError("repeated points; cannot resample")
    c = np.concatenate([[0.0], np.cumsum(chords)])

    def interp(seg, cc):
        st = _stencil_start(seg, npts)
        idx = st[:, None] + np.arange(4)
        return _lagrange(c[idx], points[idx], cc)

    # arclength of each segment of the piecewise cubic
    seg_all = np.arange(npts - 1)
    a, b = c[:-1], c[1:]
    qs = a[:, None] + (b - a)[:, None] * _GL_X
    _, der = interp(np.repeat(seg_all, len(_GL_X)), qs.ravel())
    spd = np.hypot(*der.T).reshape(qs.shape)
    seg_len = (spd * _GL_W).sum(axis=1) * (b - a)
    s_nodes = np.concatenate([[0.0], np.cumsum(seg_len)])
    total = s_nodes[-1]

    targets = np.linspace(0.0, total, n)
    seg = np.clip(np.searchsorted(s_nodes, targets, side="right") - 1, 0, npts - 2)
    frac = (targets - s_nodes[seg]) / seg_len[seg]
    cc = c[seg] + frac * (c[seg + 1] - c[seg])
    for _ in range(6):
        # arclength from segment start to cc by Gauss-Legendre
        span = cc - c[seg]
        qq = c[seg][:, None] + span[:, None] * _GL_X
        _, dq = interp(np.repeat(seg, len(_GL_X)), qq.ravel())
        partial = (np.hypot(*dq.T).reshape(qq.shape) * _GL_W).sum(axis=1) * span
        _, d_here = interp(seg, cc)
        step = (s_nodes[seg] + partial - targets) / np.hypot(*d_here.T)
        cc = cc - step
        if np.max(np.abs(step)) < 1e-15 * max(total, 1.0):
            break
    out, _ = interp(seg, cc)
    out[0] = points[0]
    out[-1] = points[-1]
    return out, total, (seg, cc, c)


def resample_arclength(curve: Curve, n: int, carry: np.ndarray | None = None):
    """Redistribute ``n`` nodes uniformly in arclength of a local-cubic interpolant.

    Two passes are made: the second interpolates through the first pass's
    nearly uniform nodes, which makes chord and arclength agree more closely.
    If ``carry`` (per-node scalars such as material labels) is given, it is
    transported by the same cubic interpolation and returned as a second value.
    """
    if n < 5:
        raise ValueError("need n >= 5")
    pts = curve.points
    lab = None if carry is None else np.asarray(carry, dtype=float)
    for _ in range(2):
        new, total, (seg, cc, cnodes) = _resample_once(pts, n)
        if lab is not None:
            st = _stencil_start(seg, len(pts))
            idx = st[:, None] + np.arange(4)
            lv, _ = _lagrange(cnodes[idx], np.stack([lab[idx], lab[idx]], axis=-1), cc)
            lab = lv[:, 0]
            lab[0], lab[-1] = carry[0], carry[-1]
            carry = lab
        pts = new
    param = curve.param[0] + np.linspace(0.0, total, n)
    out = Curve(pts, param, True)
    return out if lab is None else (out, lab)


# -- CSV I/O -----------------------------------------------------------------


def write_curve_csv(curve: Curve, path) -> None:
    data = np.column_stack([curve.param, curve.points])
    np.savetxt(path, data, delimiter=",", header="param,x1,x2", comments="", fmt="%.17g")


def read_curve_csv(path, is_arclength: bool = False) -> Curve:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Curve(data[:, 1:3], data[:, 0], is_arclength)


def write_field_csv(f: GridField, path, header: str = "s,value") -> None:
    np.savetxt(path, np.column_stack([f.grid, f.values]), delimiter=",", header=header,
               comments="", fmt="%.17g")


def read_field_csv(path) -> GridField:
    data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
    s = data[:, 0]
    h = np.diff(s)
    if not np.allclose(h, h[0], rtol=1e-8):
        raise ValueError("field grid must be uniform")
    return GridField(data[:, 1], float(h.mean()), float(s[0]))
