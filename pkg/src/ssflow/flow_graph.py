"""Normal-graph formulation: gamma = Gamma0 + d n0 over a fixed arclength base.

With ``m = sqrt((1 - k0 d)^2 + d'^2)`` and

    nu1 = k0' d + k0 d'
    nu2 = d' d'' + nu1 (k0 d - 1)
    nu3 = d' (k0' d + 2 k0 d') + (1 - k0 d)(d'' + k0 - k0^2 d)
    nu4 = d' d''' + d''^2 + nu1^2 + nu1' (k0 d - 1)

the curvature is ``nu3 / m^3`` and the offset evolves by

    d_t = { -2 nu3''/m^4 + 14 nu2 nu3'/m^6 + 6 nu3 nu4/m^6
            - 36 nu2^2 nu3/m^8 - nu3^3/m^8 + lam^2 nu3/m^2 } / (1 - k0 d),

which is the normal speed ``-2 k_ss - k^3 + lam^2 k`` times ``m / (1 - k0 d)``.

Boundary data: ``d = 0`` at both ends and zero curvature there.  With
``d = 0`` the latter reads ``d'' = -k0 (1 + 2 d'^2)``, which reduces to
``d'' = 0`` on a straight base.  Ghost values ``d_{-j} = -d_j + c (j h)^2``
with ``c`` that target enforce it.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from . import geometry as geo
from .flow_param import FlowConfig, StepRecord, Trajectory
from .geometry import Curve, GridField

REBASE_OFFSET = 0.5


class ChartFailure(RuntimeError):
    """The normal-graph chart degenerated (1 - k0 d <= 0 or zero metric)."""


@dataclass(frozen=True)
class GraphState:
    base: Curve
    offset: GridField
    base_curvature: GridField
    time: float = 0.0
    lam: float = 1.0
    rebases: int = 0

    def __post_init__(self):
        if len(self.offset) != len(self.base) or len(self.base_curvature) != len(self.base):
            raise ValueError("offset, base and base curvature must share node count")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    @classmethod
    def from_base(cls, base: Curve, lam: float, offset=None) -> "GraphState":
        if not base.is_arclength:
            base = geo.resample_arclength(base, len(base))
        h = base.param[1] - base.param[0]
        d = np.zeros(len(base)) if offset is None else np.asarray(offset, dtype=float)
        k0 = geo.curvature_values(base, order=4)
        return cls(base, GridField(d, h, base.param[0]), GridField(k0, h, base.param[0]), 0.0, lam)

    @property
    def h(self) -> float:
        return self.offset.spacing

    @property
    def normals(self) -> np.ndarray:
        return geo.normal(self.base)

    def to_curve(self) -> Curve:
        pts = self.base.points + self.offset.values[:, None] * self.normals
        return Curve(pts, self.base.param, False)

    @property
    def curve(self) -> Curve:
        return self.to_curve()


@dataclass(frozen=True)
class GraphStepReport:
    dt_used: float
    newton_like_sweeps: int
    max_offset_change: float
    energy_after: float


def _extrapolate(v: np.ndarray) -> np.ndarray:
    """Two ghost values each side by cubic extrapolation."""
    c = np.array([[4, -6, 4, -1], [10, -20, 15, -4]], dtype=float)  # j = 1, 2
    left = c @ v[:4]
    right = c @ v[::-1][:4]
    return np.concatenate([left[::-1], v, right])


def _boundary_targets(d: np.ndarray, k0: np.ndarray, h: float):
    """d'' at each end from the zero-curvature condition, consistent with the ghosts."""
    out = []
    for dv, kv in ((d, k0[0]), (d[::-1], k0[-1])):
        c = -kv
        for _ in range(4):
            slope = dv[1] / h - c * h / 2
            c = -kv * (1 + 2 * slope**2)
        out.append(c)
    return out


def _extend_offset(d: np.ndarray, k0: np.ndarray, h: float) -> np.ndarray:
    cl, cr = _boundary_targets(d, k0, h)
    j = np.array([2.0, 1.0])
    left = -d[[2, 1]] + cl * (j * h) ** 2
    right = -d[[-2, -3]] + cr * (j[::-1] * h) ** 2
    return np.concatenate([left, d, right])


def _nu(state: GraphState, d: np.ndarray | None = None):
    h = state.h
    d = state.offset.values if d is None else d
    k0 = state.base_curvature.values
    D = _extend_offset(d, k0, h)
    K = _extrapolate(k0)
    # values on nodes -1..n
    Dm, Km = D[1:-1], K[1:-1]
    d1 = (D[2:] - D[:-2]) / (2 * h)
    d2 = (D[2:] - 2 * D[1:-1] + D[:-2]) / h**2
    k1 = (K[2:] - K[:-2]) / (2 * h)
    nu1 = k1 * Dm + Km * d1
    nu3 = d1 * (k1 * Dm + 2 * Km * d1) + (1 - Km * Dm) * (d2 + Km - Km**2 * Dm)
    m = np.sqrt((1 - Km * Dm) ** 2 + d1**2)
    # nodes 0..n-1
    s = slice(1, -1)
    d3 = (D[4:] - 2 * D[3:-1] + 2 * D[1:-3] - D[:-4]) / (2 * h**3)
    nu1p = (nu1[2:] - nu1[:-2]) / (2 * h)
    nu3p = (nu3[2:] - nu3[:-2]) / (2 * h)
    nu3pp = (nu3[2:] - 2 * nu3[1:-1] + nu3[:-2]) / h**2
    kd = k0 * d
    nu2 = d1[s] * d2[s] + nu1[s] * (kd - 1)
    nu4 = d1[s] * d3 + d2[s] ** 2 + nu1[s] ** 2 + nu1p * (kd - 1)
    return dict(nu1=nu1[s], nu2=nu2, nu3=nu3[s], nu4=nu4, nu3p=nu3p, nu3pp=nu3pp,
                m=m[s], chart=1 - kd)


def metric(state: GraphState) -> GridField:
    """|d gamma / dx| = sqrt((1 - k0 d)^2 + d'^2) nodewise."""
    q = _nu(state)
    v = q["m"]
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ChartFailure("metric is not positive")
    if np.any(q["chart"] <= 0):
        raise ChartFailure(f"graph chart broken: min(1 - k0 d) = {q['chart'].min():.3g}")
    return GridField(v, state.h, state.offset.origin)


def graph_curvature(state: GraphState) -> np.ndarray:
    q = _nu(state)
    return q["nu3"] / q["m"] ** 3


def rhs(state: GraphState, d: np.ndarray | None = None) -> GridField:
    """Right-hand side of the offset equation, zero at the pinned ends."""
    q = _nu(state, d)
    if np.any(q["chart"] <= 0):
        raise ChartFailure(f"graph chart broken: min(1 - k0 d) = {q['chart'].min():.3g}")
    m, nu2, nu3, nu4 = q["m"], q["nu2"], q["nu3"], q["nu4"]
    val = (-2 * q["nu3pp"] / m**4 + 14 * nu2 * q["nu3p"] / m**6 + 6 * nu3 * nu4 / m**6
           - 36 * nu2**2 * nu3 / m**8 - nu3**3 / m**8 + state.lam**2 * nu3 / m**2) / q["chart"]
    val[0] = val[-1] = 0.0
    return GridField(val, state.h, state.offset.origin)


def dt_stable(state: GraphState) -> float:
    """Conservative step 0.25 h^2 for the explicit second-order remainder."""
    return 0.25 * state.h**2


def _d4_banded(coef: np.ndarray, h: float, dt: float) -> np.ndarray:
    """Banded I + dt coef D4 on all nodes, odd ghosts, identity rows at the ends."""
    n = len(coef)
    main = np.full(n, 6.0)
    main[1] = main[-2] = 5.0
    D4 = sp.diags([np.ones(n - 2), -4 * np.ones(n - 1), main, -4 * np.ones(n - 1), np.ones(n - 2)],
                  [-2, -1, 0, 1, 2], format="lil") / h**4
    M = (sp.identity(n) + dt * sp.diags(coef) @ D4).tolil()
    for r in (0, n - 1):
        M.rows[r] = [r]
        M.data[r] = [1.0]
    M = M.todia()
    ab = np.zeros((5, n))
    for off, diag in zip(M.offsets, M.data):
        ab[2 - off, :] += diag[:n]
    return ab, D4.tocsr()


def step(state: GraphState, dt: float) -> tuple[GraphState, GraphStepReport]:
    """IMEX: implicit frozen -(2/m^4) d'''' and explicit remainder."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    d = state.offset.values
    q = _nu(state)
    coef = 2.0 / q["m"] ** 4
    r = rhs(state).values
    ab, D4 = _d4_banded(coef, state.h, dt)
    b = d + dt * (r + coef * (D4 @ d))
    b[0] = b[-1] = 0.0
    try:
        new = solve_banded((2, 2), ab, b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"banded solve failed: {exc}") from exc
    new[0] = new[-1] = 0.0
    k0 = state.base_curvature.values
    if not np.all(np.isfinite(new)) or np.any(1 - k0 * new <= 0):
        raise ChartFailure("graph chart broken during step")
    out = replace(state, offset=GridField(new, state.h, state.offset.origin), time=state.time + dt)
    e = geo.energy(out.to_curve(), state.lam).total
    return out, GraphStepReport(dt, 1, float(np.max(np.abs(new - d))), e)


def rebase(state: GraphState) -> GraphState:
    """Use the current curve, resampled by arclength, as the new base with d = 0."""
    curve = geo.resample_arclength(state.to_curve(), len(state.base))
    fresh = GraphState.from_base(curve, state.lam)
    return replace(fresh, time=state.time, rebases=state.rebases + 1)


def record(state: GraphState) -> StepRecord:
    c = state.to_curve()
    e = geo.energy(c, state.lam)
    r = rhs(state).values
    k = graph_curvature(state)
    m = _nu(state)["m"]
    return StepRecord(state.time, e.total, e.length, e.bending, geo.index(c),
                      float(np.max(np.abs(k))), float(np.max(np.abs(r))),
                      float(np.sqrt(np.trapezoid(r**2 * m, dx=state.h))))


def evolve(state: GraphState, config: FlowConfig) -> Trajectory:
    """Step to ``t_final`` or until ||rhs||_inf < tolerance, re-basing on chart trouble."""
    traj = Trajectory(states=[state], diagnostics=[record(state)])
    if traj.diagnostics[-1].sup_speed < config.stationarity_tol:
        traj.status = "stationary"
        return traj
    cur = state
    n_steps = config.steps_from(state.time)
    for k in range(1, n_steps + 1):
        dt = min(config.dt, config.t_final - cur.time)
        if dt <= 0:
            break
        if np.max(np.abs(cur.base_curvature.values * cur.offset.values)) > REBASE_OFFSET:
            cur = _rebase_or_abort(cur, config, traj)
            if cur is None:
                return traj
        try:
            cur, _ = step(cur, dt)
        except ChartFailure:
            cur = _rebase_or_abort(cur, config, traj)
            if cur is None:
                return traj
            cur, _ = step(cur, dt)
        rec = record(cur)
        traj.diagnostics.append(rec)
        done = rec.sup_speed < config.stationarity_tol
        if k % config.cadence == 0 or k == n_steps or done:
            traj.states.append(cur)
        if done:
            traj.status = "stationary"
            return traj
    traj.status = "t_final"
    return traj


def _rebase_or_abort(cur: GraphState, config: FlowConfig, traj: Trajectory):
    if cur.rebases >= config.rebase_budget:
        traj.status = "rebase_budget"
        traj.message = f"re-base budget {config.rebase_budget} exhausted at t={cur.time:.6g}"
        if traj.states[-1] is not cur:
            traj.states.append(cur)
        return None
    return rebase(cur)
