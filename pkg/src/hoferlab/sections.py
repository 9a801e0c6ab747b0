"""Verification of sections of ``D x CP^n``: Cauchy-Riemann residuals, energies, J-tilde and taming.

A section ``u: D -> CP^n`` is stored by unit representatives on a polar grid:
composite Gauss-Legendre radii (panels between the connection's breakpoints)
times uniform angles, plus a boundary ring at ``r = 1``.  Tangent vectors at
``u`` are horizontal vectors in ``C^(n+1)`` with ``J = i``, metric
``Re <v, w> / pi`` and symplectic form ``Im <v, w> / pi``.

Nothing here solves the Cauchy-Riemann equation; the module only evaluates.
"""

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .connection import CutoffRho, RICHARDSON, RICHARDSON_WEIGHTS, _base_derivative, curvature, polar
from .cpn import (
    ExactLoopSpec,
    directional_derivative,
    hamiltonian_vector_field,
    horizontal,
    loop_from_json,
    metric_h,
    normalize,
    omega_h,
)
from .errors import DomainError
from .quadrature import gauss_legendre

MIN_RADIAL = 32
MIN_ANGULAR = 64
BOUNDARY_TOL = 1e-8
SAMPLER_STEP = 1e-4


def _align(ref, w):
    """Rotate the phase of ``w`` so that ``<ref, w>`` is real and positive."""
    ip = np.sum(ref.conj() * w, axis=-1, keepdims=True)
    mag = np.abs(ip)
    return w * np.where(mag > 0.0, ip.conj() / np.where(mag > 0.0, mag, 1.0), 1.0)


def radial_nodes(breakpoints, count):
    """Composite Gauss-Legendre radii with at least ``count`` nodes; returns ``(r, weights, panel_ids)``."""
    edges = np.unique(np.asarray(breakpoints, dtype=float))
    panels = len(edges) - 1
    per_panel = max(2, -(-int(count) // panels))
    r, w, ids = [], [], []
    for p, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        x, wx = gauss_legendre(per_panel, a, b)
        r.append(x)
        w.append(wx)
        ids.append(np.full(per_panel, p))
    return np.concatenate(r), np.concatenate(w), np.concatenate(ids)


def _diff_matrix(nodes):
    """Lagrange differentiation matrix on distinct nodes (barycentric form)."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    d = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -np.sum(d, axis=1))
    return d


@dataclass
class SectionGrid:
    """Section ``u`` sampled on a polar grid with a boundary ring.

    Attributes
    ----------
    r, radial_weights, panel : ndarray
        Radii, their quadrature weights in ``dr`` and panel indices.
    t : ndarray
        Uniform angles in turns (``t_j = (j + offset) / A``).
    values : ndarray
        Unit representatives, shape ``(R, A, n+1)``.
    boundary : ndarray
        Values on ``r = 1`` at the same angles, shape ``(A, n+1)``.
    loop : ExactLoopSpec
        Boundary condition ``u(e^{2 pi i t}) in Lambda_t``.
    sampler : callable, optional
        ``sampler(x, y)`` returning unit representatives; when present,
        derivatives are taken from it instead of from grid differences.
    """

    r: np.ndarray
    radial_weights: np.ndarray
    panel: np.ndarray
    t: np.ndarray
    values: np.ndarray
    boundary: np.ndarray
    loop: ExactLoopSpec
    breakpoints: tuple = (0.0, 1.0)
    offset: float = 0.0
    sampler: Optional[Callable] = None

    def __post_init__(self):
        self.values = normalize(np.asarray(self.values, dtype=complex))
        self.boundary = normalize(np.asarray(self.boundary, dtype=complex))
        R, A = self.r.size, self.t.size
        if self.values.shape != (R, A, self.loop.n + 1) or self.boundary.shape != (A, self.loop.n + 1):
            raise ValueError("section values do not match the grid")
        if R < MIN_RADIAL or A < MIN_ANGULAR:
            raise ValueError(f"section grid must be at least {MIN_RADIAL} radial x {MIN_ANGULAR} angular")
        dist = self.loop.fiber_distance(self.t, self.boundary)
        if np.max(dist) > BOUNDARY_TOL:
            raise DomainError(f"boundary leaves the loop {self.loop.label} by {np.max(dist):.2e}")

    @property
    def n(self):
        return self.loop.n

    @property
    def shape(self):
        return self.values.shape[:2]

    def cartesian(self):
        rr, tt = np.meshgrid(self.r, self.t, indexing="ij")
        return rr * np.cos(2 * np.pi * tt), rr * np.sin(2 * np.pi * tt)

    def area_weights(self):
        return 2.0 * np.pi * np.outer(self.radial_weights * self.r, np.full(self.t.size, 1.0 / self.t.size))

    @classmethod
    def from_function(cls, func, loop, radial=MIN_RADIAL, angular=MIN_ANGULAR, breakpoints=(0.0, 1.0), offset=0.0, keep_sampler=True):
        r, wr, ids = radial_nodes(breakpoints, radial)
        t = (np.arange(angular) + offset) / angular
        rr, tt = np.meshgrid(r, t, indexing="ij")
        x, y = rr * np.cos(2 * np.pi * tt), rr * np.sin(2 * np.pi * tt)
        values = func(x, y)
        boundary = func(np.cos(2 * np.pi * t), np.sin(2 * np.pi * t))
        return cls(r, wr, ids, t, values, boundary, loop, tuple(breakpoints), float(offset), func if keep_sampler else None)

    def to_dict(self):
        def cplx(a):
            return {"re": a.real.tolist(), "im": a.imag.tolist()}

        return {
            "loop": self.loop.to_dict(),
            "breakpoints": [float(b) for b in self.breakpoints],
            "offset": self.offset,
            "r": self.r.tolist(),
            "radial_weights": self.radial_weights.tolist(),
            "panel": self.panel.tolist(),
            "angular": int(self.t.size),
            "values": cplx(self.values),
            "boundary": cplx(self.boundary),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text) if isinstance(text, str) else text
        keys = {"loop", "breakpoints", "offset", "r", "radial_weights", "panel", "angular", "values", "boundary"}
        unknown = set(doc) - keys
        missing = keys - set(doc)
        if unknown or missing:
            raise ValueError(f"section JSON: unknown keys {sorted(unknown)}, missing keys {sorted(missing)}")
        loop = loop_from_json(doc["loop"])
        angular = int(doc["angular"])
        offset = float(doc["offset"])
        t = (np.arange(angular) + offset) / angular

        def cplx(d):
            return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)

        return cls(
            np.asarray(doc["r"], dtype=float), np.asarray(doc["radial_weights"], dtype=float),
            np.asarray(doc["panel"], dtype=int), t, cplx(doc["values"]), cplx(doc["boundary"]),
            loop, tuple(doc["breakpoints"]), offset,
        )


# ---------------------------------------------------------------- generators

def constant_section(z, loop, radial=MIN_RADIAL, angular=MIN_ANGULAR, breakpoints=(0.0, 1.0), offset=0.0):
    """The constant section at ``z``; raises if ``z`` is not in every ``Lambda_t``."""
    z = normalize(np.asarray(getattr(z, "homogeneous", z), dtype=complex))

    def func(x, y):
        return np.broadcast_to(z, np.shape(x) + z.shape).copy()

    return SectionGrid.from_function(func, loop, radial, angular, breakpoints, offset)


def _bump(t):
    """``sin(pi t)^8``: periodic, vanishing to eighth order at ``t = 0``."""
    return np.sin(np.pi * t) ** 8


def admissible_section(loop, point, amplitude=0.0, seed=0, cutoff=None, radial=MIN_RADIAL, angular=MIN_ANGULAR, breakpoints=None, offset=0.0):
    """Perturbation of the constant section at a fixed point ``p`` that keeps the boundary on the loop.

    ``u(r e^{2 pi i t}) = M_{t sigma(r)} normalize(p + a sigma(r) b(t) P(x, y))``
    where ``M_s`` is the loop's linear flow, ``sigma`` a cutoff equal to 1
    near the boundary, ``b(t) = sin(pi t)^8`` and ``P`` a seeded quadratic
    vector field that is real on the unit circle.  The flow factor moves the
    boundary along the loop; ``b`` vanishes to high order on the ray
    ``t = 0``, where ``M_{t sigma}`` jumps, so ``u`` stays smooth there.
    Deforming ``a`` to 0 is a homotopy through admissible sections.
    """
    p = normalize(np.asarray(getattr(point, "homogeneous", point), dtype=complex))
    loop.fixed_point_eigenvalue(p)
    sigma = CutoffRho() if cutoff is None else cutoff
    breakpoints = sigma.breakpoints() if breakpoints is None else breakpoints
    dim = loop.n + 1
    rng = np.random.default_rng(seed)
    real = rng.standard_normal((4, dim))
    imag = rng.standard_normal((3, dim))

    def func(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        r, t = polar(x, y)
        s = sigma(r)
        xs, ys = x[..., None], y[..., None]
        field = real[0] + real[1] * xs + real[2] * ys + real[3] * xs * ys
        field = field + 1j * (1.0 - (xs**2 + ys**2)) * (imag[0] + imag[1] * xs + imag[2] * ys)
        v = normalize(p + amplitude * (s * _bump(t))[..., None] * field)
        return loop.flow(t * s, v)

    return SectionGrid.from_function(func, loop, radial, angular, breakpoints, offset)


def critical_component_points(loop, point, count=2, seed=0):
    """Real unit vectors in the eigenspace of the loop generator through ``point``.

    Constant sections at these points are admissible and lie in the same
    component of the critical real locus as ``point``.
    """
    p = np.asarray(getattr(point, "homogeneous", point), dtype=complex)
    lam = np.real(np.vdot(p, loop.Q @ p) / np.vdot(p, p))
    w, v = np.linalg.eigh(loop.Q)
    basis = v[:, np.abs(w - lam) < 1e-10]
    if np.max(np.abs(basis.imag)) > 1e-14:
        raise ValueError("eigenspace has no real basis")
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((count, basis.shape[1]))
    pts = coef @ basis.real.T
    return normalize(pts.astype(complex))


# ---------------------------------------------------------------- derivatives

def _sampler_derivatives(u, h):
    x, y = u.cartesian()
    z = u.values
    off = (h * RICHARDSON).reshape((4, 1, 1))
    out = []
    zero = np.zeros_like(off)
    for dx, dy in ((off, zero), (zero, off)):
        vals = _align(z[None], normalize(u.sampler(x[None] + dx, y[None] + dy)))
        # differencing against the node keeps constant data exact
        d = np.tensordot(RICHARDSON_WEIGHTS, vals - z[None], axes=(0, 0)) / h
        out.append(horizontal(z, d))
    return out


def _grid_derivatives(u):
    z = u.values
    A = u.t.size
    # angular: periodic central differences
    fwd = _align(z, np.roll(z, -1, axis=1))
    bwd = _align(z, np.roll(z, 1, axis=1))
    d_t = (fwd - bwd) * (A / 2.0)
    # radial: Lagrange differentiation per panel; the boundary ring joins the last panel
    d_r = np.zeros_like(z)
    last = int(u.panel.max())
    for p in np.unique(u.panel):
        idx = np.flatnonzero(u.panel == p)
        nodes = u.r[idx]
        vals = z[idx]
        if p == last:
            nodes = np.append(nodes, 1.0)
            vals = np.concatenate([vals, u.boundary[None]], axis=0)
        dmat = _diff_matrix(nodes)
        aligned = _align(vals[:, None], vals[None, :])  # [i, j]: node j aligned to node i
        d = np.einsum("ij,ija...->ia...", dmat, aligned)
        d_r[idx] = d[: idx.size]
    c = np.cos(2 * np.pi * u.t)[None, :, None]
    s = np.sin(2 * np.pi * u.t)[None, :, None]
    inv = 1.0 / (2 * np.pi * u.r)[:, None, None]
    ux = c * d_r - s * inv * d_t
    uy = s * d_r + c * inv * d_t
    return horizontal(z, ux), horizontal(z, uy)


def section_derivatives(u, h=SAMPLER_STEP, method=None):
    """Horizontal representatives of ``(d_x u, d_y u)`` at the grid nodes.

    ``method`` is ``"sampler"`` (Richardson-extrapolated central differences
    of ``u.sampler``) or ``"grid"``; by default the sampler is used when
    available.
    """
    method = method or ("sampler" if u.sampler is not None else "grid")
    if method == "sampler":
        if u.sampler is None:
            raise ValueError("section has no sampler")
        return _sampler_derivatives(u, h)
    if method != "grid":
        raise ValueError("method must be 'sampler' or 'grid'")
    return _grid_derivatives(u)


def _check_loop(u, conn):
    if conn.spec is not None and (conn.spec.n != u.n or np.max(np.abs(conn.spec.Q - u.loop.Q)) > 1e-12):
        raise DomainError(f"section boundary loop {u.loop.label} is not the loop preserved by {conn.provenance}")


def _deviations(u, conn, method=None):
    _check_loop(u, conn)
    x, y = u.cartesian()
    z = u.values
    ux, uy = section_derivatives(u, method=method)
    xf = hamiltonian_vector_field(lambda w: conn.F(x, y, w), z)
    xg = hamiltonian_vector_field(lambda w: conn.G(x, y, w), z)
    return z, ux - xf, uy - xg


def fs_norm(z, v):
    return np.sqrt(np.maximum(metric_h(z, v, v), 0.0))


def cr_residual(u, conn, sign=1, method=None):
    """``d_x u - X_F(u) + sign * J (d_y u - X_G(u))`` at the grid nodes.

    Raises
    ------
    DomainError
        The section's boundary loop is not the loop the connection preserves.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    _, dx, dy = _deviations(u, conn, method)
    return dx + sign * 1j * dy


def cr_residual_norm(u, conn, sign=1, method=None):
    """Max over the nodes of the Fubini-Study norm of :func:`cr_residual`."""
    return float(np.max(fs_norm(u.values, cr_residual(u, conn, sign, method))))


def energy(u, conn, method=None):
    """``E(u) = int_D |d_x u - X_F(u)|^2 dx dy``."""
    z, dx, _ = _deviations(u, conn, method)
    return float(np.sum(u.area_weights() * metric_h(z, dx, dx)))


def symplectic_energy(u, conn, method=None):
    """``int_D omega(d_x u - X_F, d_y u - X_G) dx dy``; equals :func:`energy` on solutions."""
    z, dx, dy = _deviations(u, conn, method)
    return float(np.sum(u.area_weights() * omega_h(z, dx, dy)))


def energy_identity_residual(u, conn, method=None):
    """``Q(u) = int omega(d_x u - X_F, d_y u - X_G) - int (Omega(u) - c)``.

    The integrand is the pullback of the connection form by ``(x, y) ->
    (x, y, u)``, so ``Q`` depends only on the relative class of ``u``.  For
    solutions the first term is the energy.
    """
    x, y = u.cartesian()
    w = u.area_weights()
    om = curvature(conn, x, y, u.values) - conn.c_value(x, y)
    return symplectic_energy(u, conn, method) - float(np.sum(w * om))


# ---------------------------------------------------------------- J-tilde and taming

@dataclass
class LiftedTangent:
    """Tangent vector ``(xi, eta, zeta)`` to ``D x CP^n``; ``zeta`` is horizontal at the base point."""

    xi: np.ndarray
    eta: np.ndarray
    zeta: np.ndarray

    def as_array(self):
        return np.concatenate([np.asarray(self.xi)[..., None], np.asarray(self.eta)[..., None], self.zeta.real, self.zeta.imag], axis=-1)


def standard_J(x, y, z, v):
    return 1j * v


def _fields(conn, x, y, z):
    xf = hamiltonian_vector_field(lambda w: conn.F(x, y, w), z)
    xg = hamiltonian_vector_field(lambda w: conn.G(x, y, w), z)
    return xf, xg


def lifted_J_apply(conn, base_point, z, v, J=None, sign=1):
    """Apply ``J~(tau, sign * J)`` to the lifted tangent ``v`` at ``(x, y, z)``.

    ``J~ (xi, eta, zeta) = (-eta, xi, xi (-J X_F + X_G) + eta (-X_F - J X_G) + J zeta)``.
    """
    x, y = base_point
    Jf = standard_J if J is None else J

    def jop(w):
        return sign * Jf(x, y, z, w)

    xf, xg = _fields(conn, x, y, z)
    xi = np.asarray(v.xi, dtype=float)[..., None]
    eta = np.asarray(v.eta, dtype=float)[..., None]
    zeta = xi * (-jop(xf) + xg) + eta * (-xf - jop(xg)) + jop(v.zeta)
    return LiftedTangent(-np.asarray(v.eta, dtype=float), np.asarray(v.xi, dtype=float), horizontal(z, zeta))


def tau_form(conn, base_point, z, a, b, h=1e-5):
    """``tau(a, b)`` for ``tau = omega + d_M F ^ dx + d_M G ^ dy + (G_x - F_y + c) dx ^ dy``."""
    x, y = (np.asarray(c, dtype=float) for c in base_point)

    def dF(w):
        return directional_derivative(lambda q: conn.F(x, y, q), z, w)

    def dG(w):
        return directional_derivative(lambda q: conn.G(x, y, q), z, w)

    base = _base_derivative(conn.G, x, y, z, 0, h) - _base_derivative(conn.F, x, y, z, 1, h) + conn.c_value(x, y)
    return (
        omega_h(z, a.zeta, b.zeta)
        + dF(a.zeta) * b.xi - dF(b.zeta) * a.xi
        + dG(a.zeta) * b.eta - dG(b.zeta) * a.eta
        + base * (a.xi * b.eta - b.xi * a.eta)
    )


@dataclass
class TamingReport:
    identity_error: float
    min_lhs: float
    tamed_samples: int
    positive: Optional[bool]
    samples: int
    sign: int


def random_lifted_tangents(z, seed=0):
    """Seeded lifted tangents at the unit vectors ``z``."""
    rng = np.random.default_rng(seed)
    shape = z.shape[:-1]
    xi = rng.standard_normal(shape)
    eta = rng.standard_normal(shape)
    zeta = horizontal(z, rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape))
    return LiftedTangent(xi, eta, zeta)


def taming_check(conn, base_point=None, z=None, samples=1000, seed=0, sign=1):
    """Compare ``sign * tau(v, J~ v)`` with ``|zeta - xi X_F - eta X_G|^2 + sign (c - Omega)(xi^2 + eta^2)``.

    ``J~ = J~(tau, sign J)``.  Base points and fiber points are drawn at
    random (seeded) unless given.  Positivity of the left side is reported
    over the samples where ``sign (c - Omega) > 0``, i.e. where the
    connection lies on the tamed side; ``positive`` is None if there are none.
    """
    rng = np.random.default_rng(seed)
    dim = conn.n + 1
    if base_point is None:
        rad = np.sqrt(rng.uniform(0.0, 1.0, samples))
        ang = rng.uniform(0.0, 2 * np.pi, samples)
        x, y = rad * np.cos(ang), rad * np.sin(ang)
    else:
        x = np.full(samples, float(base_point[0]))
        y = np.full(samples, float(base_point[1]))
    if z is None:
        z = normalize(rng.standard_normal((samples, dim)) + 1j * rng.standard_normal((samples, dim)))
    else:
        z = np.broadcast_to(normalize(np.asarray(z, dtype=complex)), (samples, dim)).copy()
    v = random_lifted_tangents(z, seed + 1)
    jv = lifted_J_apply(conn, (x, y), z, v, sign=sign)
    lhs = sign * tau_form(conn, (x, y), z, v, jv)
    xf, xg = _fields(conn, x, y, z)
    dev = v.zeta - v.xi[:, None] * xf - v.eta[:, None] * xg
    gap = sign * (conn.c_value(x, y) - curvature(conn, x, y, z))
    rhs = metric_h(z, dev, dev) + gap * (v.xi**2 + v.eta**2)
    tamed = gap > 0.0
    positive = bool(np.all(lhs[tamed] > 0.0)) if np.any(tamed) else None
    return TamingReport(
        float(np.max(np.abs(lhs - rhs))), float(np.min(lhs)), int(np.sum(tamed)), positive, samples, sign,
    )
