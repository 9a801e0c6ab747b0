"""Hamiltonian connection 2-forms on the trivial bundle D x CP^n.

A connection is the closed 2-form::

    tau = omega + d(F dx + G dy) + c dx^dy

given by fiberwise Hamiltonians ``F, G`` on ``D x M`` and a function ``c``
on the disc.  Its curvature is ``Omega = {F, G} + d_y F - d_x G`` with the
Poisson bracket ``{F, G} = omega(X_F, X_G)``.

``F`` and ``G`` are vectorized callables ``F(x, y, z)`` where ``z`` holds unit
vectors of shape ``(..., n+1)`` and ``x, y`` broadcast against ``z.shape[:-1]``.
Base points are written ``x + iy = r exp(2 pi i t)`` with ``t`` in turns.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .cpn import (
    ExactLoopSpec,
    directional_derivative,
    hamiltonian_vector_field,
    normalize,
    psi_loop,
)
from .errors import ConvergenceError, DomainError, MeanNotZeroError, NotInTError
from .extrema import sphere_extremum, uniform_sphere
from .parallel import chunk_slices, ordered_map
from .quadrature import PolarGrid, gauss_legendre

DOMAIN_TOL = 1e-12


@dataclass(frozen=True)
class CutoffRho:
    """Quintic smoothstep from 0 at ``r = eps`` to 1 at ``r = 1 - eps``."""

    eps: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0 / 3.0:
            raise ValueError("eps must lie in (0, 1/3)")

    def _u(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.eps) / (1.0 - 2.0 * self.eps), 0.0, 1.0)

    def __call__(self, r):
        u = self._u(r)
        return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)

    def derivative(self, r):
        u = self._u(r)
        return 30.0 * u**2 * (1.0 - u) ** 2 / (1.0 - 2.0 * self.eps)

    def breakpoints(self):
        return (0.0, self.eps, 1.0 - self.eps, 1.0)


def polar(x, y):
    r = np.hypot(x, y)
    t = np.mod(np.arctan2(y, x) / (2.0 * np.pi), 1.0)
    return r, t


@dataclass(frozen=True)
class HamiltonianConnection:
    n: int
    F: Callable
    G: Callable
    c: Callable = None
    provenance: str = "custom"
    mean_zero_certified: bool = False
    spec: Optional[ExactLoopSpec] = None
    rho: Optional[CutoffRho] = None
    analytic_curvature: Optional[Callable] = None
    breakpoints: tuple = (0.0, 1.0)
    meta: dict = field(default_factory=dict)

    def c_value(self, x, y):
        if self.c is None:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return np.asarray(self.c(x, y), dtype=float)

    def with_c(self, c, provenance=None):
        """Same ``F, G`` with a new ``c`` (callable or constant)."""
        func = c if callable(c) else (lambda x, y, v=float(c): np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, v))
        return HamiltonianConnection(
            self.n, self.F, self.G, func, provenance or self.provenance, self.mean_zero_certified,
            self.spec, self.rho, None, self.breakpoints, dict(self.meta),
        )


def flat_connection(n, spec=None):
    """``F = G = c = 0``; preserves the constant loop."""
    def zero(x, y, z):
        return np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y), np.shape(z)[:-1]))
    return HamiltonianConnection(
        n, zero, zero, None, "flat", True, spec if spec is not None else psi_loop(0, n),
        analytic_curvature=zero,
    )


def build_from_loop(spec, rho=None):
    """Connection ``F = -sin(2 pi t) rho(r) H_t/(2 pi r)``, ``G = cos(2 pi t) rho(r) H_t/(2 pi r)``, ``c = 0``.

    ``F dx + G dy = rho(r) H_t dt``, so parallel transport around the
    boundary circle is the loop's own Hamiltonian isotopy.  The curvature is
    ``-rho'(r) H_t / (2 pi r)``, exposed as ``analytic_curvature``.
    """
    if not spec.mean_zero:
        raise MeanNotZeroError("generator must have mean zero; recentre the loop first")
    rho = CutoffRho() if rho is None else rho

    def profile(x, y):
        r, t = polar(x, y)
        safe = np.where(r > rho.eps, r, 1.0)
        return np.where(r > rho.eps, rho(r) / (2.0 * np.pi * safe**2), 0.0), t

    def F(x, y, z):
        p, t = profile(x, y)
        return -np.asarray(y) * p * spec.hamiltonian(t, z)

    def G(x, y, z):
        p, t = profile(x, y)
        return np.asarray(x) * p * spec.hamiltonian(t, z)

    def omega(x, y, z):
        r, t = polar(x, y)
        safe = np.where(r > 0.0, r, 1.0)
        return np.where(r > rho.eps, -rho.derivative(r) / (2.0 * np.pi * safe), 0.0) * spec.hamiltonian(t, z)

    return HamiltonianConnection(
        spec.n, F, G, None, f"loop_built({spec.label}, eps={rho.eps:g})", True, spec, rho,
        omega, rho.breakpoints(),
    )


def check_mean_zero(conn, base_points=((0.3, 0.2), (-0.5, 0.4), (0.0, -0.8)), samples=20000, seed=0, tol=3e-3):
    """Monte-Carlo check that ``F`` and ``G`` have Fubini-Study mean zero on each fiber."""
    rng = np.random.default_rng(seed)
    dim = conn.n + 1
    worst = 0.0
    for x, y in base_points:
        v = uniform_sphere(rng, samples, 2 * dim)
        z = v[:, :dim] + 1j * v[:, dim:]
        for func in (conn.F, conn.G):
            worst = max(worst, abs(float(np.mean(func(x, y, z)))))
    if worst > tol:
        raise MeanNotZeroError(f"fiber mean {worst:.2e} exceeds {tol:g}")
    return worst


def _check_domain(x, y):
    if np.any(np.hypot(x, y) > 1.0 + DOMAIN_TOL):
        raise DomainError("base point outside the closed unit disc")


RICHARDSON = np.array([-1.0, -0.5, 0.5, 1.0])
RICHARDSON_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 6.0


def _base_derivative(func, x, y, z, axis, h):
    """Central difference in x (axis 0) or y (axis 1) with one Richardson step.

    ``(4 D(h/2) - D(h)) / 3`` with ``D`` the central difference, evaluated as
    one stacked call.
    """
    nd = max(np.ndim(x), np.ndim(y), np.ndim(z) - 1)
    off = (h * RICHARDSON).reshape((4,) + (1,) * nd)
    if axis == 0:
        vals = func(x + off, y, z)
    else:
        vals = func(x, y + off, z)
    return np.tensordot(RICHARDSON_WEIGHTS, vals, axes=(0, 0)) / h


def poisson_bracket(conn, x, y, z, fiber_step=1e-3):
    """``{F, G}(z) = dF(X_G)`` at the base point ``(x, y)``."""
    xg = hamiltonian_vector_field(lambda w: conn.G(x, y, w), z, fiber_step)
    return directional_derivative(lambda w: conn.F(x, y, w), z, xg, fiber_step)


def curvature(conn, x, y, z, h=1e-5):
    """Curvature ``{F,G} + d_y F - d_x G`` by finite differences.

    Parameters
    ----------
    conn : HamiltonianConnection
    x, y : float or ndarray
        Base point(s) in the closed unit disc.
    z : ndarray
        Unit vectors ``(..., n+1)``.
    h : float
        Base step; one Richardson extrapolation is applied.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_domain(x, y)
    z = normalize(np.asarray(z, dtype=complex))
    pb = poisson_bracket(conn, x, y, z)
    return pb + _base_derivative(conn.F, x, y, z, 1, h) - _base_derivative(conn.G, x, y, z, 0, h)


def boundary_hamiltonian(conn, t, z):
    """Generator of parallel transport along ``t -> exp(2 pi i t)``: ``2 pi (-sin F + cos G)`` at r = 1."""
    t = np.asarray(t, dtype=float)
    x, y = np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)
    return 2.0 * np.pi * (-y * conn.F(x, y, z) + x * conn.G(x, y, z))


# ---------------------------------------------------------------- fiber extrema


def gauge_pullback(conn, generator, theta, theta_grad=None, h=1e-5):
    """Pull ``conn`` back by the fiberwise map ``Psi(x, y, z) = phi_{theta(x, y)}(z)``.

    ``phi_s`` is the flow of ``generator`` (an :class:`ExactLoopSpec` with a
    time independent, mean-zero Hamiltonian ``K``).  Since ``d_x Psi =
    theta_x X_K o Psi`` the pulled-back form has ``F' = (F - theta_x K) o Psi``,
    ``G' = (G - theta_y K) o Psi`` and the same ``c``; its curvature is the
    original curvature composed with ``Psi``.

    Parameters
    ----------
    theta : callable
        Angle profile ``theta(x, y)``.
    theta_grad : callable, optional
        Returns ``(theta_x, theta_y)``; finite differences with step ``h``
        are used when omitted.
    """
    if not generator.mean_zero:
        raise MeanNotZeroError("gauge generator must have mean zero")
    if generator.n != conn.n:
        raise ValueError("generator lives on a different CP^n")

    def grad(x, y):
        if theta_grad is not None:
            return theta_grad(x, y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        off = h * RICHARDSON.reshape((4,) + (1,) * max(x.ndim, y.ndim))
        w = RICHARDSON_WEIGHTS.reshape(off.shape)
        return np.sum(w * theta(x + off, y), axis=0) / h, np.sum(w * theta(x, y + off), axis=0) / h

    def moved(x, y, z):
        s = np.asarray(theta(x, y), dtype=float)
        z = np.asarray(z, dtype=complex)
        shape = np.broadcast_shapes(s.shape, z.shape[:-1])
        return generator.flow(np.broadcast_to(s, shape), np.broadcast_to(z, shape + z.shape[-1:]))

    def F(x, y, z):
        w = moved(x, y, z)
        return conn.F(x, y, w) - grad(x, y)[0] * generator.hamiltonian(0.0, w)

    def G(x, y, z):
        w = moved(x, y, z)
        return conn.G(x, y, w) - grad(x, y)[1] * generator.hamiltonian(0.0, w)

    omega = None
    if conn.analytic_curvature is not None:
        def omega(x, y, z):
            return conn.analytic_curvature(x, y, moved(x, y, z))

    return HamiltonianConnection(
        conn.n, F, G, conn.c, f"gauge({conn.provenance}; {generator.label})", conn.mean_zero_certified,
        conn.spec, conn.rho, omega, conn.breakpoints, dict(conn.meta),
    )

@dataclass
class CurvatureExtrema:
    r: np.ndarray
    t: np.ndarray
    weights: np.ndarray
    maximum: np.ndarray
    minimum: np.ndarray
    error_estimate: float
    grid: PolarGrid

    def integral_max(self):
        return float(np.sum(self.weights * self.maximum))

    def integral_min(self):
        return float(np.sum(self.weights * self.minimum))

    def rows(self):
        """Integrand samples ``(r, t, weight, max, min)`` for CSV export."""
        rr, tt = np.meshgrid(self.r, self.t, indexing="ij")
        return np.column_stack([rr.ravel(), tt.ravel(), self.weights.ravel(), self.maximum.ravel(), self.minimum.ravel()])


def curvature_extrema(conn, grid=None, fiber_samples=24, seed=0, workers=None, chunk=1024):
    """Fiberwise max and min of the curvature at every node of a polar grid.

    Extrema over CP^n are searched on the unit sphere of C^(n+1) by the same
    sampling-plus-polish routine used for Hofer lengths.
    """
    grid = PolarGrid() if grid is None else grid
    r, t, weights = grid.nodes(conn.breakpoints)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    bx = (rr * np.cos(2 * np.pi * tt)).ravel()
    by = (rr * np.sin(2 * np.pi * tt)).ravel()
    dim = conn.n + 1

    def run(sl):
        x = bx[sl][:, None]
        y = by[sl][:, None]

        def func(v, idx):
            return curvature(conn, x[idx], y[idx], v[..., :dim] + 1j * v[..., dim:])

        opts = dict(samples=fiber_samples, line_search="zoom", indexed=True)
        hi = sphere_extremum(func, 2 * dim, (x.shape[0],), sense=1, seed=seed, **opts)
        lo = sphere_extremum(func, 2 * dim, (x.shape[0],), sense=-1, seed=seed + 1, **opts)
        return hi.values, lo.values, max(hi.error_estimate, lo.error_estimate)

    try:
        parts = ordered_map(run, chunk_slices(bx.size, chunk), workers)
    except ConvergenceError as exc:
        raise ConvergenceError(f"curvature extrema for {conn.provenance}: {exc}") from exc
    shape = rr.shape
    maximum = np.concatenate([p[0] for p in parts]).reshape(shape)
    minimum = np.concatenate([p[1] for p in parts]).reshape(shape)
    err = max(p[2] for p in parts)
    return CurvatureExtrema(r, t, weights, maximum, minimum, err * np.pi, grid)


@dataclass
class KArea:
    value: float
    error_estimate: float
    analytic: Optional[float]
    grid: dict
    provenance: str
    extrema: CurvatureExtrema = None


def separable_value(conn, t_nodes=16, fiber_samples=64):
    """``int rho' dr * int ||H_t|| dt`` for loop-built connections."""
    from .cpn import hofer_length

    if conn.spec is None or conn.rho is None:
        return None
    nodes, wts = [], []
    bps = conn.rho.breakpoints()
    for a, b in zip(bps[:-1], bps[1:]):
        x, w = gauss_legendre(8, a, b)
        nodes.append(x)
        wts.append(w)
    radial = float(np.dot(np.concatenate(wts), conn.rho.derivative(np.concatenate(nodes))))
    return radial * hofer_length(conn.spec, t_nodes, fiber_samples).value


def hofer_norm_curvature(conn, grid=None, fiber_samples=24, seed=0, workers=None, extrema=None):
    """``int_D (max_z Omega - min_z Omega) dx dy`` by polar Gauss-Legendre quadrature."""
    ext = curvature_extrema(conn, grid, fiber_samples, seed, workers) if extrema is None else extrema
    value = float(np.sum(ext.weights * (ext.maximum - ext.minimum)))
    analytic = separable_value(conn) if conn.analytic_curvature is not None and conn.rho is not None else None
    return KArea(value, 2.0 * ext.error_estimate, analytic, ext.grid.as_dict(), conn.provenance, ext)


def nondegeneracy_interval(conn, grid=None, fiber_samples=24, seed=0, workers=None, extrema=None):
    """``(int_D min_z Omega, int_D max_z Omega)`` for a connection with ``c = 0``.

    These bound the non-symplectic interval: ``eps^+ <= upper`` and
    ``eps^- >= lower``.
    """
    if conn.c is not None:
        raise ValueError("nondegeneracy interval is defined for connections with c = 0")
    ext = curvature_extrema(conn, grid, fiber_samples, seed, workers) if extrema is None else extrema
    return ext.integral_min(), ext.integral_max()


# ---------------------------------------------------------------- pairings

def _section_point(section):
    z = getattr(section, "homogeneous", section)
    return normalize(np.asarray(z, dtype=complex))


def check_admissible_constant(conn, z, samples=257, tol=1e-8):
    """Raise if the constant section at ``z`` leaves the boundary loop."""
    if conn.spec is None:
        return
    t = np.linspace(0.0, 1.0, samples)
    dist = conn.spec.fiber_distance(t, np.broadcast_to(z, (samples, z.size)))
    if np.max(dist) > tol:
        raise DomainError(f"constant section leaves the boundary loop by {np.max(dist):.2e}")


def pairing_with_class(conn, section, grid=None):
    """``<[tau], A> = -int_D (Omega(x, y, z*) - c) dx dy`` for the constant section at ``z*``."""
    z = _section_point(section)
    check_admissible_constant(conn, z)
    grid = PolarGrid() if grid is None else grid
    r, t, weights = grid.nodes(conn.breakpoints)
    rr, tt = np.meshgrid(r, t, indexing="ij")
    x = rr * np.cos(2 * np.pi * tt)
    y = rr * np.sin(2 * np.pi * tt)
    zz = np.broadcast_to(z, x.shape + z.shape)
    integrand = curvature(conn, x, y, zz) - conn.c_value(x, y)
    return -float(np.sum(weights * integrand))


def class_difference(conn1, conn0, boundary_h=None, t_nodes=32, fiber_samples=64, seed=0, tol=1e-8, grid=None):
    """``s(tau1, tau0) = int_0^1 h(t) dt + int_D (c1 - c0)``.

    ``h(t)`` is the value of the difference of boundary Hamiltonians on
    ``Lambda_t``; it is computed from samples and must be constant there.
    """
    spec = conn1.spec if conn1.spec is not None else conn0.spec
    if spec is None:
        raise ValueError("need the boundary loop of one of the connections")
    nodes, wts = gauss_legendre(t_nodes, 0.0, 1.0)
    h = np.empty(t_nodes)
    for i, t in enumerate(nodes):
        z = spec.fiber_samples(t, fiber_samples, seed)
        diff = boundary_hamiltonian(conn1, t, z) - boundary_hamiltonian(conn0, t, z)
        if np.ptp(diff) > tol:
            raise NotInTError(f"boundary Hamiltonians differ by a non-constant function on the fiber at t={t:.4f}")
        h[i] = float(np.mean(diff))
        if boundary_h is not None and abs(boundary_h(t) - h[i]) > tol:
            raise NotInTError(f"supplied boundary difference disagrees at t={t:.4f}")
    grid = PolarGrid(16, 32) if grid is None else grid
    r, tt, weights = grid.nodes()
    rr, ta = np.meshgrid(r, tt, indexing="ij")
    x, y = rr * np.cos(2 * np.pi * ta), rr * np.sin(2 * np.pi * ta)
    dc = conn1.c_value(x, y) - conn0.c_value(x, y)
    return float(np.dot(wts, h) + np.sum(weights * dc))


def class_points(n):
    """Constant sections ``[0:1:0..]`` (class A+) and ``[1:0..]`` (class A-)."""
    e = np.eye(n + 1, dtype=complex)
    return {"A+": e[1], "A-": e[0]}


@dataclass
class EpsilonCertificate:
    upper: float
    lower: Optional[float]
    certified: bool
    interval: tuple
    pairings: dict
    provenance: str


def epsilon_width_certificate(k, n, grid=None, fiber_samples=24, seed=0, workers=None, rho=None, extrema=None):
    """Upper and lower bounds for the width of the non-symplectic interval of the psi-loop.

    ``upper = int max Omega - int min Omega``; ``lower = <[tau],A^->  - <[tau],A^+>``,
    which uses the nonvanishing of the relevant section counts as an imported
    fact.  When ``k`` is a multiple of ``n + 1`` the loop is contractible to the
    constant loop; the flat connection gives ``upper = 0`` and no lower bound.
    """
    if k % (n + 1) == 0:
        conn = flat_connection(n)
        lo, hi = nondegeneracy_interval(conn, grid, fiber_samples, seed, workers, extrema)
        return EpsilonCertificate(hi - lo, None, False, (lo, hi), {}, conn.provenance)
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n or k a multiple of n + 1")
    conn = build_from_loop(psi_loop(k, n), rho)
    lo, hi = nondegeneracy_interval(conn, grid, fiber_samples, seed, workers, extrema)
    pts = class_points(n)
    pairings = {name: pairing_with_class(conn, z, grid) for name, z in pts.items()}
    lower = pairings["A-"] - pairings["A+"]
    upper = hi - lo
    return EpsilonCertificate(upper, lower, abs(upper - lower) < 1e-5, (lo, hi), pairings, conn.provenance)
