"""Hinged fourth-order boundary value problem ``phi'''' + mu phi = f`` on [0, L].

Two solution paths are provided: an explicit Green's function (``mu > 0``) and a
pentadiagonal finite-difference solve (``mu >= 0``).

Green's function
----------------
With ``a = mu**0.25 / sqrt(2)``, ``cs(z) = cos(az) sinh(az)`` and
``sc(z) = sin(az) cosh(az)``, the left-hinged homogeneous solutions are
``g1 = cs - sc`` and ``g3 = cs + sc``.  The right-hinged partners are

    g2(z) = e^{az} cos(az) - (K1/K0) cs(z) + (K2/K0) sc(z)
    g4(z) = -e^{az} sin(az) + (K1/K0) sc(z) + (K2/K0) cs(z)

with ``K0 = 2 cos^2(aL) sinh^2(aL) + 2 sin^2(aL) cosh^2(aL)``,
``K1 = e^{2aL} - cos(2aL)`` and ``K2 = -sin(2aL)``, and the kernel is

    G(x, xi) = (g1(lo) g2(hi) + g3(lo) g4(hi)) / (4 a^3),  lo = min, hi = max.

The commonly quoted form of this kernel uses ``K1, K2`` half as large, a
prefactor ``1/(2a)^3`` and puts ``g1, g3`` on the larger argument. That
version violates ``G(0, xi) = 0`` and ``G(L, xi) = 0`` and is off by a factor
of two from the sine-series kernel ``(2/L) sum sin(k x) sin(k xi) / (k^4 + mu)``.
The form above matches the series to round-off (see ``tests/test_biharm.py``).

For evaluation, ``g2`` and ``g4`` are rewritten as

    g2(z) = (cs(L) cs(L-z) + sc(L) sc(L-z)) / D,
    g4(z) = (sc(L) cs(L-z) - cs(L) sc(L-z)) / D,   D = K0 / 2,

and every factor ``e^{a y}`` is pulled out and cancelled, so the kernel never
forms a large hyperbolic term regardless of ``a L``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .geometry import GridField

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class BvpProblem:
    mu: float
    length: float
    rhs: GridField

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("length must be positive")
        if not self.mu >= 0:
            raise ValueError("mu must be nonnegative")
        if abs(self.rhs.length - self.length) > 1e-10 * max(1.0, self.length):
            raise ValueError(f"rhs grid spans {self.rhs.length}, expected {self.length}")


def _cs(a, y):
    # e^{-ay} cos(ay) sinh(ay)
    return np.cos(a * y) * (1.0 - np.exp(-2.0 * a * y)) / 2.0


def _sc(a, y):
    # e^{-ay} sin(ay) cosh(ay)
    return np.sin(a * y) * (1.0 + np.exp(-2.0 * a * y)) / 2.0


@dataclass(frozen=True)
class GreenTable:
    """Constants of the hinged Green's function for given ``mu`` and ``L``.

    ``k0, k1, k2`` are the unscaled constants (they overflow to ``inf`` for
    very large ``mu_star * length``; evaluation never uses them directly).
    """

    mu_star: float
    k0: float
    k1: float
    k2: float
    length: float

    @classmethod
    def build(cls, mu: float, length: float) -> "GreenTable":
        if not mu > 0:
            raise ValueError("Green's function path needs mu > 0 (mu_star = 0 is degenerate)")
        a = mu**0.25 / np.sqrt(2.0)
        aL = a * length
        with np.errstate(over="ignore"):
            k0 = 2 * np.cos(aL) ** 2 * np.sinh(aL) ** 2 + 2 * np.sin(aL) ** 2 * np.cosh(aL) ** 2
            k1 = np.exp(2 * aL) - np.cos(2 * aL)
        k2 = -np.sin(2 * aL)
        return cls(float(a), float(k0), float(k1), float(k2), float(length))

    def __call__(self, x, xi):
        return green_kernel(self, x, xi)


def green_kernel(table: GreenTable, x, xi):
    """G(x, xi); vectorized over broadcastable ``x`` and ``xi``."""
    a, L = table.mu_star, table.length
    if not a > 0:
        raise ValueError("mu_star must be positive")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    lo = np.minimum(x, xi)
    hi = np.maximum(x, xi)
    w = L - hi
    csL, scL = _cs(a, L), _sc(a, L)
    D = csL**2 + scL**2
    g1 = _cs(a, lo) - _sc(a, lo)
    g3 = _cs(a, lo) + _sc(a, lo)
    g2 = (csL * _cs(a, w) + scL * _sc(a, w)) / D
    g4 = (scL * _cs(a, w) - csL * _sc(a, w)) / D
    return np.exp(-a * (hi - lo)) * (g1 * g2 + g3 * g4) / (4 * a**3)


def green_solve(problem: BvpProblem) -> GridField:
    """phi(x_i) = integral of G(x_i, xi) f(xi) by the trapezoid rule.

    The kernel has a kink in its third derivative at ``xi = x``; splitting at
    the node keeps the trapezoid rule second order.
    """
    table = GreenTable.build(problem.mu, problem.length)
    f = problem.rhs.values
    x = problem.rhs.grid - problem.rhs.origin
    h = problem.rhs.spacing
    w = np.full(len(x), h)
    w[0] = w[-1] = h / 2
    G = green_kernel(table, x[:, None], x[None, :])
    return GridField(G @ (w * f), h, problem.rhs.origin)


def green_solve_callable(mu: float, length: float, f, x, panels: int = 64):
    """High-accuracy phi(x) for a callable ``f`` (Gauss-Legendre, split at x)."""
    table = GreenTable.build(mu, length)
    out = np.empty(len(x))
    for i, xv in enumerate(np.atleast_1d(x)):
        total = 0.0
        for a, b in ((0.0, xv), (xv, length)):
            if b <= a:
                continue
            edges = np.linspace(a, b, panels + 1)
            mids = 0.5 * (edges[1:] + edges[:-1])
            half = 0.5 * np.diff(edges)
            q = (mids[:, None] + half[:, None] * _GL_X).ravel()
            wq = (half[:, None] * _GL_W).ravel()
            total += np.sum(wq * green_kernel(table, xv, q) * f(q))
        out[i] = total
    return out


def _operator_bands(n_int: int, h: float, mu: float) -> np.ndarray:
    """Banded storage of the hinged D4 + mu on interior nodes 1..n_int."""
    ab = np.zeros((5, n_int))
    inv = 1.0 / h**4
    ab[0, 2:] = inv
    ab[1, 1:] = -4 * inv
    ab[2, :] = 6 * inv + mu
    ab[3, :-1] = -4 * inv
    ab[4, :-2] = inv
    # phi_{-1} = -phi_1 and phi_{n+1} = -phi_{n-1} fold the ghosts into the diagonal
    ab[2, 0] = 5 * inv + mu
    ab[2, -1] = 5 * inv + mu
    return ab


def solve_bvp_direct(problem: BvpProblem) -> GridField:
    """Second-order finite differences, hinged ends via odd ghost reflection."""
    rhs = problem.rhs
    n = len(rhs)
    if n - 2 < 7:
        raise ValueError("need at least 7 interior nodes")
    ab = _operator_bands(n - 2, rhs.spacing, problem.mu)
    try:
        inner = solve_banded((2, 2), ab, rhs.values[1:-1])
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"banded solve failed for mu={problem.mu}, n={n}: {exc}") from exc
    if not np.all(np.isfinite(inner)):
        raise RuntimeError("banded solve produced non-finite values")
    phi = np.zeros(n)
    phi[1:-1] = inner
    return GridField(phi, rhs.spacing, rhs.origin)


def fourth_derivative(phi: GridField) -> np.ndarray:
    """Discrete phi'''' using odd reflection about both ends (zero at the ends)."""
    v = phi.values
    ext = np.concatenate([[-v[2], -v[1]], v, [-v[-2], -v[-3]]])
    ext[:2] += 2 * v[0]
    ext[-2:] += 2 * v[-1]
    d4 = (ext[4:] - 4 * ext[3:-1] + 6 * ext[2:-2] - 4 * ext[1:-3] + ext[:-4]) / phi.spacing**4
    return d4


def apply_operator(phi: GridField, mu: float) -> np.ndarray:
    return fourth_derivative(phi) + mu * phi.values


def lp_norm(values: np.ndarray, h: float, p) -> float:
    v = np.abs(np.asarray(values, dtype=float))
    if p == np.inf or p == "inf":
        return float(v.max())
    return float(np.trapezoid(v**p, dx=h) ** (1.0 / p))


def apriori_ratio(problem: BvpProblem, p=2) -> float:
    """(||phi||_p + ||phi''''||_p) / ||f||_p for the direct solution."""
    if p not in (1, 2, np.inf, "inf"):
        raise ValueError("p must be 1, 2 or inf")
    h = problem.rhs.spacing
    fnorm = lp_norm(problem.rhs.values, h, p)
    if fnorm == 0:
        raise ValueError("rhs has zero norm")
    phi = solve_bvp_direct(problem)
    return (lp_norm(phi.values, h, p) + lp_norm(fourth_derivative(phi), h, p)) / fnorm


BUILTIN_RHS = {
    "sin1": lambda x, L: np.sin(np.pi * x / L),
    "sin2": lambda x, L: np.sin(2 * np.pi * x / L),
    "three_sines": lambda x, L: (np.sin(np.pi * x / L) + 0.5 * np.sin(3 * np.pi * x / L)
                                 - 0.25 * np.sin(6 * np.pi * x / L)),
    "one": lambda x, L: np.ones_like(x),
}
