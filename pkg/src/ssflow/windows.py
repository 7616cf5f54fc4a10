"""Whole-line curves approached through a ladder of pinned windows.

A datum ``gamma0 = (phi0, psi0)`` with flat tails is cut off smoothly,
``Gamma_r = (phi0, eta_r psi0)``, and each window is evolved with pinned,
zero-curvature ends.  Agreement of consecutive windows on a fixed compact
set ``|x| <= N`` is the finite stand-in for convergence as ``r -> inf``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import elastica
from . import flow_param as fp
from . import geometry as geo
from .geometry import ARC_EPS, Curve

DEFAULT_RHO = 0.1


def _smooth_zero(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def cutoff(r: float, x):
    """eta_r: 1 on |x| <= r-1, 0 on |x| >= r, exp(-1/t) transition in between."""
    if not r > 1:
        raise ValueError("r must exceed 1")
    t = r - np.abs(np.asarray(x, dtype=float))  # 1 at the inner junction, 0 at the outer
    a, b = _smooth_zero(t), _smooth_zero(1.0 - t)
    out = a / (a + b)
    out = np.where(t >= 1, 1.0, np.where(t <= 0, 0.0, out))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class WholeLineDatum:
    """Arclength-parametrized whole-line curve with flat tails."""

    phi0: Callable
    psi0: Callable
    alpha: float = 1.0
    M: float | None = None
    rho: float = DEFAULT_RHO
    name: str = "datum"
    scan_max: float = 60.0

    def __post_init__(self):
        if not self.alpha > 0.5:
            raise ValueError("tail exponent alpha must exceed 1/2")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.M is None:
            object.__setattr__(self, "M", chart_radius(self, self.rho, self.scan_max))

    def derivative(self, x, h: float = 1e-5):
        x = np.asarray(x, dtype=float)
        dphi = (self.phi0(x + h) - self.phi0(x - h)) / (2 * h)
        dpsi = (self.psi0(x + h) - self.psi0(x - h)) / (2 * h)
        return dphi, dpsi

    def points(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.column_stack([self.phi0(x), self.psi0(x)])


def _tail_ok(datum: WholeLineDatum, x: np.ndarray, rho: float) -> np.ndarray:
    dphi, dpsi = datum.derivative(x)
    return (np.abs(datum.psi0(x)) < rho) & (np.abs(dpsi) < rho) & (np.abs(np.abs(dphi) - 1) < rho)


def chart_radius(datum: WholeLineDatum, rho: float = DEFAULT_RHO, scan_max: float = 60.0,
                 step: float = 0.25) -> float:
    """Smallest sampled radius beyond which all three tail inequalities hold."""
    radii = np.arange(step, scan_max + step / 2, step)
    x = np.concatenate([-radii[::-1], radii])
    ok = _tail_ok(datum, x, rho)
    ok = ok[: len(radii)][::-1] & ok[len(radii):]  # both sides at each radius
    bad = np.nonzero(~ok)[0]
    if len(bad) == 0:
        return float(step)
    if bad[-1] == len(radii) - 1:
        raise ValueError("tail inequalities fail at the scan limit; datum tails are not flat")
    return float(radii[bad[-1] + 1])


def check_datum(datum: WholeLineDatum, span: float | None = None) -> dict:
    """Unit speed, tail inequalities at M, 2M, 4M and power-law tail domination."""
    span = span or 4 * datum.M + 1
    x = np.linspace(-span, span, 4001)
    dphi, dpsi = datum.derivative(x)
    unit = float(np.max(np.abs(np.hypot(dphi, dpsi) - 1)))
    probes = np.array([datum.M, 2 * datum.M, 4 * datum.M])
    tails = bool(np.all(_tail_ok(datum, np.concatenate([probes, -probes]), datum.rho)))
    decay = np.abs(datum.psi0(np.concatenate([probes, -probes]))) * np.abs(np.concatenate([probes, probes])) ** datum.alpha
    dominated = bool(decay[1] <= decay[0] + 1e-12 and decay[2] <= decay[1] + 1e-12
                     and decay[4] <= decay[3] + 1e-12 and decay[5] <= decay[4] + 1e-12)
    return {"unit_speed_gap": unit, "unit_speed_ok": unit < ARC_EPS, "tails_ok": tails,
            "power_tail_ok": dominated}


# -- builtin data ------------------------------------------------------------


def line_datum() -> WholeLineDatum:
    return WholeLineDatum(lambda x: np.asarray(x, dtype=float),
                          lambda x: np.zeros_like(np.asarray(x, dtype=float)), name="line")


def bump_datum(amplitude: float = 0.3, x_max: float = 200.0) -> WholeLineDatum:
    """Arclength reparametrization of the graph (u, amplitude sech u)."""

    def rhs(_, u):
        dpsi = -amplitude * np.tanh(u) / np.cosh(u)
        return 1.0 / np.sqrt(1.0 + dpsi**2)

    sol = solve_ivp(rhs, (0.0, x_max), [0.0], method="DOP853", rtol=1e-13, atol=1e-14,
                    dense_output=True)
    u_end = float(sol.y[0, -1])

    def u_of(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        inside = np.minimum(ax, x_max)
        u = sol.sol(inside)[0]
        u = np.where(ax > x_max, u_end + (ax - x_max), u)
        return np.sign(x) * u

    return WholeLineDatum(u_of, lambda x: amplitude / np.cosh(u_of(x)), name="bump")


def loop_datum(lam0: float = 0.8) -> WholeLineDatum:
    """Borderline elastica at ``lam0``: one counter-clockwise loop, index 2 pi."""
    return WholeLineDatum(lambda x: elastica.borderline_closed_form(x, lam0)[:, 0],
                          lambda x: elastica.borderline_closed_form(x, lam0)[:, 1],
                          name=f"loop({lam0:g})")


def csv_datum(path, alpha: float | None = None) -> WholeLineDatum:
    """Datum from a dense table ``x,phi,psi`` with cubic interpolation.

    Beyond the table, phi continues with unit slope and psi with the power law
    ``c |x|^-alpha`` fitted on the last decade of samples on each side.
    """
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x, phi, psi = data[:, 0], data[:, 1], data[:, 2]
    sphi, spsi = CubicSpline(x, phi), CubicSpline(x, psi)
    k = max(5, len(x) // 10)

    def fit(xs, ys):
        ok = (np.abs(ys) > 0) & (np.abs(xs) > 0)
        if ok.sum() < 2:
            return 0.0, 1.0
        slope, icpt = np.polyfit(np.log(np.abs(xs[ok])), np.log(np.abs(ys[ok])), 1)
        return float(np.sign(ys[ok][-1]) * np.exp(icpt)), max(float(-slope), 0.51)

    cl, al = fit(x[:k], psi[:k])
    cr, ar = fit(x[-k:], psi[-k:])
    a_used = alpha if alpha is not None else min(al, ar)

    def phi0(q):
        q = np.asarray(q, dtype=float)
        return np.where(q < x[0], phi[0] + (q - x[0]), np.where(q > x[-1], phi[-1] + (q - x[-1]), sphi(np.clip(q, x[0], x[-1]))))

    def psi0(q):
        q = np.asarray(q, dtype=float)
        inner = spsi(np.clip(q, x[0], x[-1]))
        with np.errstate(divide="ignore", over="ignore"):
            left = cl * np.abs(q) ** (-al)
            right = cr * np.abs(q) ** (-ar)
        return np.where(q < x[0], left, np.where(q > x[-1], right, inner))

    return WholeLineDatum(phi0, psi0, alpha=a_used, name=Path(path).stem)


BUILTIN_DATA = {"line": line_datum, "bump": bump_datum, "loop": loop_datum}


def datum_from_name(spec: str) -> WholeLineDatum:
    """``line``, ``bump``, ``bump:0.2``, ``loop``, ``loop:0.8`` or a CSV path."""
    name, _, arg = spec.partition(":")
    if name in BUILTIN_DATA:
        return BUILTIN_DATA[name](float(arg)) if arg else BUILTIN_DATA[name]()
    return csv_datum(spec)


# -- windows -----------------------------------------------------------------


@dataclass(frozen=True)
class WindowSpec:
    r: float
    nodes: int
    taper_width: float = 1.0

    def __post_init__(self):
        if self.taper_width != 1.0:
            raise ValueError("taper width is fixed at 1")
        if self.nodes < 5:
            raise ValueError("need at least 5 nodes")

    @classmethod
    def with_spacing(cls, r: float, h: float) -> "WindowSpec":
        return cls(r, int(round(2 * r / h)) + 1)


def build_window(datum: WholeLineDatum, spec: WindowSpec) -> Curve:
    """Sample Gamma_r = (phi0, eta_r psi0) on a uniform grid of [-r, r]."""
    if not spec.r - 1 > datum.M:
        raise ValueError(f"window radius {spec.r} too small: need r - 1 > M = {datum.M}")
    x = np.linspace(-spec.r, spec.r, spec.nodes)
    y = cutoff(spec.r, x) * datum.psi0(x)
    y[0] = y[-1] = 0.0
    pts = np.column_stack([datum.phi0(x), y])
    dphi, dpsi = datum.derivative(x)
    hd = 1e-5
    deta = (cutoff(spec.r, x + hd) - cutoff(spec.r, x - hd)) / (2 * hd)
    dy = cutoff(spec.r, x) * dpsi + deta * datum.psi0(x)
    unit = np.max(np.abs(np.hypot(dphi, dy) - 1)) < ARC_EPS
    return Curve(pts, x, bool(unit))


def window_boundary_residuals(datum: WholeLineDatum, r: float, delta: float = 1e-4) -> dict:
    """Endpoint positions and curvature of the continuous window curve at x = +-r.

    Curvature comes from central differences of the closed-form window, so the
    steep part of the taper next to the end does not pollute it the way a
    one-sided stencil on sampled nodes would.
    """
    def window(x):
        x = np.asarray(x, dtype=float)
        return np.column_stack([datum.phi0(x), cutoff(r, x) * datum.psi0(x)])

    out = {}
    for side, x0 in (("left", -r), ("right", r)):
        p = window([x0 - delta, x0, x0 + delta])
        d1 = (p[2] - p[0]) / (2 * delta)
        d2 = (p[2] - 2 * p[1] + p[0]) / delta**2
        k = (d1[0] * d2[1] - d1[1] * d2[0]) / np.hypot(*d1) ** 3
        out[side] = {"height": float(abs(p[1, 1])), "curvature": float(abs(k))}
    return out


# -- ladder ------------------------------------------------------------------


@dataclass
class LadderReport:
    radii: list
    N: float
    sup_gaps: list
    kappa_l2: dict
    sup_kappa: dict
    initial_kappa_l2: dict
    trajectories: dict = field(default_factory=dict, repr=False)
    status: dict = field(default_factory=dict)

    @property
    def pairs(self):
        return list(zip(self.radii[:-1], self.radii[1:]))


def material_restrict(state: fp.ParamState, N: float, at=None) -> tuple[np.ndarray, np.ndarray]:
    """Curve points at material labels in [-N, N] (the labels themselves if ``at`` is None)."""
    lab = state.labels
    pts = state.curve.points
    if at is None:
        sel = np.abs(lab) <= N + 1e-12
        return lab[sel], pts[sel]
    spl = CubicSpline(lab, pts, axis=0)
    return np.asarray(at), spl(at)


def sup_gap(a: fp.ParamState, b: fp.ParamState, N: float) -> float:
    labels, pa = material_restrict(a, N)
    _, pb = material_restrict(b, N, at=labels)
    return float(np.max(np.hypot(*(pa - pb).T)))


def _run_window(datum, r, h, lam, config):
    curve = build_window(datum, WindowSpec.with_spacing(r, h))
    state = fp.ParamState(curve, lam)
    return fp.evolve(state, config, stop_on_stationary=False)


def run_ladder(datum: WholeLineDatum, radii, N: float, config: fp.FlowConfig, lam: float = 1.0,
               h: float = 0.05, workers: int = 4) -> LadderReport:
    """Evolve every window to the shared horizon and compare neighbours on |x| <= N."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise ValueError("radii must be strictly increasing")
    if not N < min(radii) - 1:
        raise ValueError("compact half-width N must be below min(radii) - 1")
    for r in radii:
        if not r - 1 > datum.M:
            raise ValueError(f"radius {r} too small for datum chart radius M = {datum.M}")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {r: pool.submit(_run_window, datum, r, h, lam, config) for r in radii}
        trajs = {r: futures[r].result() for r in radii}
    gaps = [sup_gap(trajs[a].final, trajs[b].final, N) for a, b in zip(radii[:-1], radii[1:])]
    kl2 = {r: np.sqrt(trajs[r].column("bending")) for r in radii}
    ksup = {r: trajs[r].column("sup_kappa") for r in radii}
    k0 = {r: float(kl2[r][0]) for r in radii}
    status = {r: trajs[r].status for r in radii}
    return LadderReport(radii, N, gaps, kl2, ksup, k0, trajs, status)


def tail_profile(trajectory: fp.Trajectory, t: float) -> tuple[float, float]:
    """sup |gamma . e| and sup |d_x gamma . e| over the outer third of the window, e = (0, 1)."""
    if not trajectory.states:
        raise ValueError("empty trajectory")
    state = trajectory.nearest(t)
    lab = state.labels
    r = max(abs(lab[0]), abs(lab[-1]))
    y = state.curve.points[:, 1]
    dy = np.gradient(y, lab, edge_order=2)
    sel = np.abs(lab) >= 2 * r / 3
    return float(np.max(np.abs(y[sel]))), float(np.max(np.abs(dy[sel])))


def write_ladder_csv(report: LadderReport, path) -> None:
    rows = [(a, b, g) for (a, b), g in zip(report.pairs, report.sup_gaps)]
    np.savetxt(path, np.array(rows, dtype=float).reshape(-1, 3), delimiter=",",
               header="r_low,r_high,sup_gap", comments="", fmt="%.17g")
