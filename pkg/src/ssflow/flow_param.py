"""Position-space evolution of the shortening-straightening flow.

The velocity is written directly in terms of the position vector,

    V = -2 g_ssss + (lam^2 - 3 |g_ss|^2) g_ss - 3 (|g_ss|^2)_s g_s,

whose tangential parts cancel in the continuum, leaving the normal speed
``F = -2 k_ss - k^3 + lam^2 k``.  Node spacing is the arc length of each
cell (chord times ``1 + l^2 k^2 / 24`` with the local circle curvature), and
the nonuniform first, second and fourth differences carry deferred
corrections that lift them to fourth order.

Boundary handling uses four ghost nodes at each end:

* ``pinned_hinged``: odd reflection ``g_{-j} = 2 g_0 - g_j``.  Every even
  arclength derivative of the extended polygon vanishes at the end, so the
  endpoint curvature and velocity are exactly zero.
* ``free_whole_line_window``: linear extrapolation ``g_{-j} = g_0 - j (g_1 - g_0)``
  and free endpoints; a natural-end variant for experiments.

Time stepping is IMEX: ``(I + 2 dt A) g^{n+1} = g^n + dt (V + 2 A g^n)`` with
``A`` the frozen-chord discrete ``d^4/ds^4`` used inside ``V`` (seven bands,
one LU for both coordinates).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from . import geometry as geo
from .geometry import Curve

Boundary = Literal["pinned_hinged", "free_whole_line_window"]
PINNED: Boundary = "pinned_hinged"
FREE: Boundary = "free_whole_line_window"
COLLAPSE_FRACTION = 0.1


class DegenerateFlowError(RuntimeError):
    """Node spacing collapsed; the partial trajectory is attached."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class FlowConfig:
    dt: float = 1e-4
    t_final: float = 0.1
    stationarity_tol: float = 1e-7
    resample_every: int = 10
    nodes: int = 201
    rebase_budget: int = 20
    save_every: int | None = None  # default: ceil(t_final / (200 dt))

    def __post_init__(self):
        if not (self.dt > 0 and self.t_final > 0 and self.stationarity_tol > 0):
            raise ValueError("dt, t_final and stationarity_tol must be positive")
        if self.resample_every < 0 or self.nodes < 5 or self.rebase_budget < 0:
            raise ValueError("invalid counts in FlowConfig")

    @property
    def n_steps(self) -> int:
        return self.steps_from(0.0)

    def steps_from(self, t0: float) -> int:
        """Steps needed to reach the absolute horizon ``t_final`` from time ``t0``."""
        return max(0, int(math.ceil((self.t_final - t0) / self.dt - 1e-9)))

    @property
    def cadence(self) -> int:
        if self.save_every:
            return int(self.save_every)
        return max(1, math.ceil(self.t_final / (200 * self.dt)))


@dataclass(frozen=True)
class ParamState:
    curve: Curve
    lam: float
    time: float = 0.0
    boundary: Boundary = PINNED
    labels: np.ndarray | None = None
    resamples: int = 0
    anchors: np.ndarray | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.boundary not in (PINNED, FREE):
            raise ValueError(f"unknown boundary mode {self.boundary!r}")
        if self.labels is None:
            object.__setattr__(self, "labels", np.array(self.curve.param, dtype=float))
        if self.anchors is None:
            object.__setattr__(self, "anchors", self.curve.points[[0, -1]].copy())


@dataclass(frozen=True)
class StepRecord:
    t: float
    energy: float
    length: float
    bending: float
    index: float
    sup_kappa: float
    sup_speed: float
    l2_speed: float


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    status: str = "running"
    message: str = ""

    @property
    def stationary(self) -> bool:
        return self.status == "stationary"

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.diagnostics])

    def nearest(self, t: float):
        if not self.states:
            raise ValueError("empty trajectory")
        return self.states[int(np.argmin(np.abs(self.times - t)))]

    @property
    def final(self):
        return self.states[-1]


# -- discrete arclength operators --------------------------------------------

GHOSTS = 4


def extend(points: np.ndarray, boundary: Boundary, depth: int = GHOSTS) -> np.ndarray:
    """Append ``depth`` ghost nodes at each end (see the module docstring)."""
    p = np.asarray(points, dtype=float)
    a, b = p[0], p[-1]
    j = np.arange(depth, 0, -1)
    if boundary == PINNED:
        left = 2 * a - p[j]
        right = 2 * b - p[-1 - j[::-1]]
    else:
        left = a - j[:, None] * (p[1] - a)
        right = b + j[::-1, None] * (b - p[-2])
    return np.concatenate([left, p, right])


def _extension_matrix(n: int, boundary: Boundary, depth: int = 2) -> sp.csr_matrix:
    """Sparse map from node values to the ghost-extended vector."""
    rows, cols, vals = [], [], []
    for i in range(n):
        rows.append(i + depth), cols.append(i), vals.append(1.0)
    for j in range(1, depth + 1):
        lo, hi = depth - j, n + depth - 1 + j
        if boundary == PINNED:
            entries = [(lo, 0, 2.0), (lo, j, -1.0), (hi, n - 1, 2.0), (hi, n - 1 - j, -1.0)]
        else:
            entries = [(lo, 0, 1.0 + j), (lo, 1, -float(j)),
                       (hi, n - 1, 1.0 + j), (hi, n - 2, -float(j))]
        for r, c, v in entries:
            rows.append(r), cols.append(c), vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 2 * depth, n))


def _s2_matrix(chords: np.ndarray, m: int) -> sp.csr_matrix:
    """Three-point second derivative at interior nodes 1..m-2 of an m-node polygon."""
    lm, lp = chords[:-1], chords[1:]
    c = 2.0 / (lm + lp)
    j = np.arange(1, m - 1)
    rows = np.concatenate([j - 1] * 3)
    cols = np.concatenate([j - 1, j, j + 1])
    vals = np.concatenate([c / lm, -c * (1 / lm + 1 / lp), c / lp])
    return sp.csr_matrix((vals, (rows, cols)), shape=(m - 2, m))


def _bc(w, u):
    return w[:, None] if u.ndim == 2 else w


def arc_spacing(pts: np.ndarray) -> np.ndarray:
    """Arclength between consecutive nodes, chord * (1 + l^2 k^2 / 24).

    ``k`` is the Menger (three-point circle) curvature averaged over the two
    ends of each chord.  The correction makes the spacing fourth-order
    accurate; plain chords would cap every derivative at second order.
    """
    d = np.diff(pts, axis=0)
    ell = np.hypot(d[:, 0], d[:, 1])
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    k = 2 * cross / (ell[:-1] * ell[1:] * np.hypot(*(pts[2:] - pts[:-2]).T))
    k = np.concatenate([[k[0]], k, [k[-1]]])
    kbar = 0.5 * (k[:-1] + k[1:])
    return ell * (1 + (ell * kbar) ** 2 / 24)


class _Grid:
    """Chord data on the extended polygon; arrays are addressed by extended index."""

    def __init__(self, ext: np.ndarray):
        self.chords = arc_spacing(ext)
        self.hh = self.chords[:-1] * self.chords[1:]  # local h^2 at extended index e (e >= 1)

    def d2(self, u, e0):
        m = len(u)
        lm, lp = self.chords[e0:e0 + m - 2], self.chords[e0 + 1:e0 + m - 1]
        c = 2.0 / (lm + lp)
        out = _bc(c, u) * ((u[2:] - u[1:-1]) / _bc(lp, u) - (u[1:-1] - u[:-2]) / _bc(lm, u))
        return out, e0 + 1

    def d1(self, u, e0):
        m = len(u)
        w = self.chords[e0:e0 + m - 2] + self.chords[e0 + 1:e0 + m - 1]
        return (u[2:] - u[:-2]) / _bc(w, u), e0 + 1

    def h2(self, e0, m):
        return self.hh[e0 - 1:e0 - 1 + m]


def _take(u, e0, lo, hi):
    """Rows of ``u`` (starting at extended index e0) for extended indices lo..hi-1."""
    return u[lo - e0:hi - e0]


def _derivatives(ue: np.ndarray, grid: _Grid, n: int, order: int):
    """First, second (nodes -2..n+1) and fourth (nodes 0..n-1) arclength derivatives.

    ``order=4`` applies deferred corrections D2 - h^2/12 D2^2, D1 - h^2/6 D1 D2
    and D2^2 - h^2/6 D2^3 with the local chord product as h^2.
    """
    g = GHOSTS
    a2, e2 = grid.d2(ue, 0)
    a22, e22 = grid.d2(a2, e2)
    a1, e1 = grid.d1(ue, 0)
    lo2, hi2 = g - 2, g + n + 2
    lo, hi = g, g + n
    if order == 2:
        return _take(a1, e1, lo, hi), _take(a2, e2, lo2, hi2), _take(a22, e22, lo, hi)
    a222, e222 = grid.d2(a22, e22)
    b1, eb1 = grid.d1(a2, e2)
    h2 = _bc(grid.h2(lo2, hi2 - lo2), ue)
    second = _take(a2, e2, lo2, hi2) - h2 / 12 * _take(a22, e22, lo2, hi2)
    h0 = _bc(grid.h2(lo, n), ue)
    first = _take(a1, e1, lo, hi) - h0 / 6 * _take(b1, eb1, lo, hi)
    fourth = _take(a22, e22, lo, hi) - h0 / 6 * _take(a222, e222, lo, hi)
    return first, second, fourth


ORDER = 4


@dataclass(frozen=True)
class Operators:
    """Arclength derivatives of one configuration (frozen within a step)."""

    ext: np.ndarray
    chords: np.ndarray
    g1: np.ndarray  # g_s at nodes 0..n-1
    g2: np.ndarray  # g_ss at nodes -2..n+1
    g4: np.ndarray  # g_ssss at nodes 0..n-1
    boundary: Boundary = PINNED
    order: int = ORDER

    @classmethod
    def build(cls, points: np.ndarray, boundary: Boundary, order: int = ORDER) -> "Operators":
        ext = extend(points, boundary)
        grid = _Grid(ext)
        g1, g2, g4 = _derivatives(ext, grid, len(points), order)
        return cls(ext, grid.chords, g1, g2, g4, boundary, order)

    @property
    def spacing(self) -> np.ndarray:
        return self.chords

    @property
    def n(self) -> int:
        return len(self.g1)

    @property
    def kappa(self) -> np.ndarray:
        t, a = self.g1, self.g2[2:-2]
        return (t[:, 0] * a[:, 1] - t[:, 1] * a[:, 0]) / np.hypot(t[:, 0], t[:, 1]) ** 3

    def scalar_derivs(self, u: np.ndarray, odd: bool = True):
        """First, second and fourth arclength derivatives of a nodal scalar.

        The scalar is extended by odd reflection about each end
        (``u_{-j} = 2 u_0 - u_j``), the parity curvature has at hinged ends,
        or by even reflection when ``odd`` is false.
        """
        u = np.asarray(u, dtype=float)
        j = np.arange(GHOSTS, 0, -1)
        if odd:
            left, right = 2 * u[0] - u[j], 2 * u[-1] - u[-1 - j[::-1]]
        else:
            left, right = u[j], u[-1 - j[::-1]]
        ue = np.concatenate([left, u, right])
        d1, d2, d4 = _derivatives(ue, _Grid(self.ext), self.n, self.order)
        return d1, d2[2:-2], d4

    def second_of(self, u: np.ndarray) -> np.ndarray:
        """First derivative of a field given on nodes -2..n+1 (as g2 is)."""
        grid = _Grid(self.ext)
        e0 = GHOSTS - 2
        b1, e1 = grid.d1(u, e0)
        first = _take(b1, e1, GHOSTS, GHOSTS + self.n)
        if self.order == 2:
            return first
        c2, ec2 = grid.d2(u, e0)
        c21, e21 = grid.d1(c2, ec2)
        return first - grid.h2(GHOSTS, self.n) / 6 * _take(c21, e21, GHOSTS, GHOSTS + self.n)


def velocity_parts(points: np.ndarray, lam: float, boundary: Boundary = PINNED, order: int = ORDER):
    """Velocity, its explicit remainder (without -2 g_ssss) and the operator data."""
    ops = Operators.build(points, boundary, order)
    q = np.einsum("ij,ij->i", ops.g2, ops.g2)
    dq = ops.second_of(q)
    g2 = ops.g2[2:-2]
    rest = (lam**2 - 3 * q[2:-2])[:, None] * g2 - 3 * dq[:, None] * ops.g1
    v = -2 * ops.g4 + rest
    if boundary == PINNED:
        v[0] = v[-1] = 0.0
        rest[0] = rest[-1] = 0.0
    return v, rest, ops


def velocity(curve: Curve, lam: float, boundary: Boundary = PINNED) -> np.ndarray:
    """Nodal velocity (n, 2) of the flow."""
    return velocity_parts(curve.points, lam, boundary)[0]


def normal_speed(curve: Curve, lam: float, boundary: Boundary = PINNED) -> np.ndarray:
    """F = -2 k_ss - k^3 + lam^2 k from the discrete curvature."""
    ops = Operators.build(curve.points, boundary)
    k = ops.kappa
    if boundary == PINNED:
        k[0] = k[-1] = 0.0
    _, kss, _ = ops.scalar_derivs(k, odd=boundary == PINNED)
    return -2 * kss - k**3 + lam**2 * k


def discrete_kappa(curve: Curve, boundary: Boundary = PINNED) -> np.ndarray:
    return Operators.build(curve.points, boundary).kappa


def _fourth_operator(chords: np.ndarray, n: int, boundary: Boundary, order: int = ORDER) -> sp.csr_matrix:
    """The discrete d^4/ds^4 of the velocity as a matrix on nodes 0..n-1.

    ``order=2`` gives D2 D2 (pentadiagonal); ``order=4`` adds the deferred
    correction ``-h^2/6 D2^3`` (seven bands) so the implicit operator matches
    the one inside the velocity and every grid mode is damped.
    """
    depth = 3 if order == 4 else 2
    c = chords[GHOSTS - depth:len(chords) - GHOSTS + depth]
    E = _extension_matrix(n, boundary, depth)
    m = n + 2 * depth
    mats = [_s2_matrix(c[j:len(c) - j], m - 2 * j) for j in range(depth)]
    if order == 2:
        return (mats[1] @ mats[0] @ E).tocsr()
    inner = mats[0] @ E  # nodes -2..n+1
    d22 = mats[2] @ inner[1:-1]
    d222 = mats[2] @ mats[1] @ inner
    hh = c[2:-3] * c[3:-2]
    return (d22 - sp.diags(hh / 6) @ d222).tocsr()


def _to_banded(A: sp.spmatrix, n: int, bands: int = 3) -> np.ndarray:
    ab = np.zeros((2 * bands + 1, n))
    A = A.todia()
    for off, diag in zip(A.offsets, A.data):
        if abs(off) > bands:
            if np.any(diag != 0):
                raise RuntimeError("operator wider than expected")
            continue
        # dia storage aligns data[k, j] with column j
        ab[bands - off, :] += diag[:n]
    return ab


def imex_update(points: np.ndarray, lam: float, dt: float, boundary: Boundary):
    """One IMEX step; returns new points and the explicit velocity at the old state.

    Solved in increment form ``(I + 2 dt A) delta = dt V``, which equals the
    update with ``-2 A g`` implicit and the remainder explicit but never forms
    the large cancelling term ``2 dt A g^n``.
    """
    n = len(points)
    v, rest, ops = velocity_parts(points, lam, boundary)
    A = _fourth_operator(ops.chords, n, boundary, ops.order)
    M = (sp.identity(n, format="csr") + 2 * dt * A).tolil()
    rhs = dt * v
    if boundary == PINNED:
        for r in (0, n - 1):
            M.rows[r] = [r]
            M.data[r] = [1.0]
        rhs[0] = rhs[-1] = 0.0
    ab = _to_banded(M.tocsr(), n)
    try:
        delta = solve_banded((3, 3), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"banded solve failed: {exc}") from exc
    if not np.all(np.isfinite(delta)):
        raise RuntimeError("banded solve produced non-finite values")
    return points + delta, v


def step(state: ParamState, dt: float, *, h_ref: float | None = None,
         resample: bool = False) -> ParamState:
    """Advance one IMEX step; optionally resample by arclength afterwards."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    new, _ = imex_update(state.curve.points, state.lam, dt, state.boundary)
    if state.boundary == PINNED:
        new[0], new[-1] = state.anchors
    chords = np.hypot(*np.diff(new, axis=0).T)
    h_ref = h_ref if h_ref is not None else float(np.mean(state.curve.chords))
    if chords.min() < COLLAPSE_FRACTION * h_ref:
        i = int(np.argmin(chords))
        raise DegenerateFlowError(
            f"node spacing collapsed to {chords.min():.3g} (< {COLLAPSE_FRACTION} h) "
            f"between nodes {i} and {i + 1} at t={state.time + dt:.6g}")
    curve = Curve(new, state.curve.param, state.curve.is_arclength)
    labels, count = state.labels, state.resamples
    if resample:
        curve, labels = geo.resample_arclength(curve, len(curve), carry=labels)
        count += 1
    return replace(state, curve=curve, time=state.time + dt, labels=labels, resamples=count)


def record(state: ParamState) -> StepRecord:
    c = state.curve
    e = geo.energy(c, state.lam)
    v = velocity(c, state.lam, state.boundary)
    spd = np.hypot(v[:, 0], v[:, 1])
    arc = np.concatenate([[0.0], np.cumsum(c.chords)])
    return StepRecord(
        t=state.time,
        energy=e.total,
        length=e.length,
        bending=e.bending,
        index=geo.index(c),
        sup_kappa=float(np.max(np.abs(discrete_kappa(c, state.boundary)))),
        sup_speed=float(spd.max()),
        l2_speed=float(np.sqrt(np.trapezoid(spd**2, arc))),
    )


def evolve(state: ParamState, config: FlowConfig, *, stop_on_stationary: bool = True) -> Trajectory:
    """Iterate ``step`` to ``t_final`` or until the sup speed drops below tolerance."""
    traj = Trajectory(states=[state], diagnostics=[record(state)])
    h_ref = float(np.mean(state.curve.chords))
    if stop_on_stationary and traj.diagnostics[-1].sup_speed < config.stationarity_tol:
        traj.status = "stationary"
        return traj
    cadence = config.cadence
    n_steps = config.steps_from(state.time)
    cur = state
    for k in range(1, n_steps + 1):
        dt = min(config.dt, config.t_final - cur.time) if k == n_steps else config.dt
        if dt <= 0:
            break
        do_resample = bool(config.resample_every) and k % config.resample_every == 0
        try:
            cur = step(cur, dt, h_ref=h_ref, resample=do_resample)
        except DegenerateFlowError as exc:
            traj.status = "degenerate"
            traj.message = str(exc)
            if traj.states[-1] is not cur:
                traj.states.append(cur)
            exc.trajectory = traj
            return traj
        rec = record(cur)
        traj.diagnostics.append(rec)
        done = stop_on_stationary and rec.sup_speed < config.stationarity_tol
        if k % cadence == 0 or k == n_steps or done:
            traj.states.append(cur)
        if done:
            traj.status = "stationary"
            return traj
    traj.status = "t_final"
    return traj


# -- identity residuals ------------------------------------------------------


def _pair(trajectory: Trajectory, i: int):
    if not 0 <= i < len(trajectory.states) - 1:
        raise IndexError("need two consecutive saved states")
    a, b = trajectory.states[i], trajectory.states[i + 1]
    if len(a.curve) != len(b.curve):
        raise ValueError("saved states have different node counts")
    if a.resamples != b.resamples:
        raise ValueError("saved states straddle a resampling event")
    return a, b


def kappa_rhs(state: ParamState) -> tuple[np.ndarray, np.ndarray]:
    """Curvature and the right-hand side of its evolution equation,

    -2 k_ssss - 5 k^2 k_ss + lam^2 k_ss - 6 k k_s^2 - k^5 + lam^2 k^3.
    """
    ops = Operators.build(state.curve.points, state.boundary)
    k = ops.kappa
    pinned = state.boundary == PINNED
    if pinned:
        k[0] = k[-1] = 0.0
    ks, kss, k4 = ops.scalar_derivs(k, odd=pinned)
    lam2 = state.lam**2
    rhs = -2 * k4 - 5 * k**2 * kss + lam2 * kss - 6 * k * ks**2 - k**5 + lam2 * k**3
    return k, rhs


def curvature_evolution_residual(trajectory: Trajectory, i: int) -> float:
    """max over interior nodes of |dk/dt - RHS(k)| between saved states i and i+1."""
    a, b = _pair(trajectory, i)
    dt = b.time - a.time
    ka, rhs = kappa_rhs(a)
    kb, _ = kappa_rhs(b)
    return float(np.max(np.abs((kb - ka) / dt - rhs)[1:-1]))


def metric_evolution_residual(trajectory: Trajectory, i: int) -> float:
    """max over nodes 2..n-3 of |d|g_x|/dt + k F |g_x||, fourth-order speeds."""
    a, b = _pair(trajectory, i)
    dt = b.time - a.time
    sa, sb = geo.speed(a.curve, order=4), geo.speed(b.curve, order=4)
    k, _ = kappa_rhs(a)
    F = normal_speed(a.curve, a.lam, a.boundary)
    return float(np.max(np.abs((sb - sa) / dt + k * F * sa)[2:-2]))


def fd_weights(x: np.ndarray, x0: float, m: int) -> np.ndarray:
    """Weights of the m-th derivative at ``x0`` from values at nodes ``x``."""
    x = np.asarray(x, dtype=float) - x0
    k = np.arange(len(x))
    V = x[None, :] ** k[:, None] / np.array([math.factorial(i) for i in k])[:, None]
    e = np.zeros(len(x))
    e[m] = 1.0
    return np.linalg.solve(V, e)


def endpoint_even_derivatives(state: ParamState):
    """One-sided estimates of k_ss and k_ssss at both ends, and interior sups.

    End stencils use the actual node arclengths (4 and 6 nodes, second
    order); interior sups come from the nonuniform difference operators.
    Returns ``(end2, end4, sup2, sup4)`` with ``end*`` the larger of the two ends.
    """
    ops = Operators.build(state.curve.points, state.boundary)
    k = ops.kappa
    if state.boundary == PINNED:
        k[0] = k[-1] = 0.0
    n = len(k)
    s = np.concatenate([[0.0], np.cumsum(ops.chords[GHOSTS:GHOSTS + n - 1])])
    ends = []
    for m, width in ((2, 4), (4, 6)):
        left = fd_weights(s[:width], s[0], m) @ k[:width]
        right = fd_weights(s[-width:], s[-1], m) @ k[-width:]
        ends.append(max(abs(left), abs(right)))
    _, d2, d4 = ops.scalar_derivs(k, odd=state.boundary == PINNED)
    inner = slice(3, n - 3)
    return (float(ends[0]), float(ends[1]), float(np.abs(d2[inner]).max()),
            float(np.abs(d4[inner]).max()))


# -- output ------------------------------------------------------------------

DIAG_COLUMNS = ("t", "energy", "length", "bending", "index", "sup_kappa", "sup_rhs")


def write_trajectory(trajectory: Trajectory, out_dir) -> Path:
    """Numbered curve CSVs plus ``diagnostics.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for j, s in enumerate(trajectory.states):
        geo.write_curve_csv(_curve_of(s), out / f"curve_{j:04d}.csv")
    rows = np.array([[r.t, r.energy, r.length, r.bending, r.index, r.sup_kappa, r.sup_speed]
                     for r in trajectory.diagnostics])
    np.savetxt(out / "diagnostics.csv", rows, delimiter=",", header=",".join(DIAG_COLUMNS),
               comments="", fmt="%.17g")
    return out


def _curve_of(state) -> Curve:
    return state.curve if hasattr(state, "curve") else state.to_curve()
