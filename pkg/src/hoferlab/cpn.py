"""Fubini-Study geometry of CP^n and the loops of Lagrangian real projective spaces.

Points are unit vectors of C^(n+1) modulo phase; arrays of points have shape
``(..., n+1)``.  The symplectic form is the Fubini-Study form divided by pi,
so a projective line has area 1.  For unit ``z`` and tangent vectors
represented by horizontal lifts ``v, u`` orthogonal to ``z``::

    omega(v, u) = Im <v, u> / pi,   g(v, u) = Re <v, u> / pi,   J v = i v.

Hamiltonian vector fields follow ``omega(X_H, .) = dH``.  With this
convention the quadratic Hamiltonian ``z* Q z`` generates ``exp(-2 pi i t Q)``.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import ConvergenceError, DomainError, MeanNotZeroError
from .extrema import sphere_extremum
from .parallel import chunk_slices, ordered_map
from .quadrature import gauss_legendre
from .symplin import LagrangianPath, maslov_index

POINT_TOL = 1e-12
EQUAL_TOL = 1e-10


def minimal_maslov_number(n):
    """Minimal Maslov number N = n + 1 of RP^n in CP^n."""
    return n + 1


@dataclass(frozen=True, eq=False)
class ProjectivePoint:
    homogeneous: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.homogeneous, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(z) - 1.0) > POINT_TOL:
            raise ValueError("homogeneous coordinates must have unit norm")
        object.__setattr__(self, "homogeneous", z)

    @classmethod
    def from_coords(cls, coords):
        z = np.asarray(coords, dtype=complex)
        norm = np.linalg.norm(z)
        if norm == 0.0:
            raise ValueError("zero vector is not a projective point")
        return cls(z / norm)

    @property
    def n(self):
        return self.homogeneous.size - 1

    def __eq__(self, other):
        if not isinstance(other, ProjectivePoint) or other.n != self.n:
            return NotImplemented
        return bool(abs(abs(np.vdot(self.homogeneous, other.homogeneous)) - 1.0) <= EQUAL_TOL)

    __hash__ = None

    def chart(self, j=0):
        """Affine coordinates in the chart ``z_j != 0``."""
        z = self.homogeneous
        if abs(z[j]) < 1e-14:
            raise DomainError(f"point lies outside the chart z_{j} != 0")
        return np.delete(z, j) / z[j]


def _coords(z):
    if isinstance(z, ProjectivePoint):
        return z.homogeneous
    return np.asarray(z, dtype=complex)


def normalize(z):
    z = np.asarray(z, dtype=complex)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


# ---------------------------------------------------------------- Fubini-Study

def fubini_study_form(chart_point, v, w):
    """Normalized Fubini-Study form in the affine chart ``z_0 != 0``.

    Parameters
    ----------
    chart_point, v, w : array_like
        Complex n-vectors (broadcastable): base point and two tangent vectors.

    Returns
    -------
    float or ndarray
        ``Im[(1+|p|^2) <v,w> - <v,p><p,w>] / (pi (1+|p|^2)^2)``.
    """
    p = np.asarray(chart_point, dtype=complex)
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    s = 1.0 + np.sum(np.abs(p) ** 2, axis=-1)
    vw = np.sum(v.conj() * w, axis=-1)
    vp = np.sum(v.conj() * p, axis=-1)
    pw = np.sum(p.conj() * w, axis=-1)
    return np.imag(s * vw - vp * pw) / (np.pi * s**2)


def fubini_study_metric(chart_point, v, w):
    """Riemannian metric ``omega(v, J w)`` matching :func:`fubini_study_form`."""
    p = np.asarray(chart_point, dtype=complex)
    v = np.asarray(v, dtype=complex)
    w = np.asarray(w, dtype=complex)
    s = 1.0 + np.sum(np.abs(p) ** 2, axis=-1)
    vw = np.sum(v.conj() * w, axis=-1)
    vp = np.sum(v.conj() * p, axis=-1)
    pw = np.sum(p.conj() * w, axis=-1)
    return np.real(s * vw - vp * pw) / (np.pi * s**2)


def horizontal(z, v):
    """Project ``v`` onto the orthogonal complement of the unit vector ``z``."""
    return v - np.sum(z.conj() * v, axis=-1, keepdims=True) * z


def omega_h(z, v, u):
    """Symplectic form on horizontal representatives at unit ``z``."""
    v = horizontal(z, v)
    u = horizontal(z, u)
    return np.imag(np.sum(v.conj() * u, axis=-1)) / np.pi


def metric_h(z, v, u):
    v = horizontal(z, v)
    u = horizontal(z, u)
    return np.real(np.sum(v.conj() * u, axis=-1)) / np.pi


def horizontal_basis(z):
    """Orthonormal complex basis of ``z^perp`` for each unit vector in a batch.

    Returns an array of shape ``z.shape + (n,)`` whose last axis indexes the
    basis vectors.
    """
    z = np.asarray(z, dtype=complex)
    dim = z.shape[-1]
    mat = np.zeros(z.shape[:-1] + (dim, dim + 1), dtype=complex)
    mat[..., :, 0] = z
    mat[..., :, 1:] = np.eye(dim)
    q, _ = np.linalg.qr(mat)
    return q[..., :, 1:dim]


STENCIL = np.array([-2.0, -1.0, 1.0, 2.0])
STENCIL_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0


def directional_derivative(func, z, v, h=1e-3):
    """Derivative of ``func`` at unit ``z`` along ``v`` (fourth-order stencil, one stacked call).

    The stencil runs along ``v / |v|`` so the step does not grow with ``|v|``.
    """
    v = np.asarray(v, dtype=complex)
    size = np.linalg.norm(v, axis=-1)
    unit = v / np.where(size > 0.0, size, 1.0)[..., None]
    pts = normalize(z[None] + (h * STENCIL).reshape((4,) + (1,) * z.ndim) * unit[None])
    vals = func(pts)
    return size * np.tensordot(STENCIL_WEIGHTS, vals, axes=(0, 0)) / h


def ambient_gradient(func, z, h=1e-3):
    """Complex gradient of ``w -> func(w / |w|)`` at unit ``z``, projected to ``z^perp``.

    ``Re <grad, v>`` is the derivative along ``v``.
    """
    z = np.asarray(z, dtype=complex)
    dim = z.shape[-1]
    dirs = np.concatenate([np.eye(dim), 1j * np.eye(dim)]).astype(complex)
    shape = (4, 2 * dim) + (1,) * (z.ndim - 1) + (dim,)
    offsets = (h * STENCIL)[:, None, None] * dirs[None]
    pts = normalize(z[None, None] + offsets.reshape(shape))
    vals = func(pts)
    d = np.tensordot(STENCIL_WEIGHTS, vals, axes=(0, 0)) / h
    d = np.moveaxis(d, 0, -1)
    grad = d[..., :dim] + 1j * d[..., dim:]
    return horizontal(z, grad)


def hamiltonian_vector_field(func, z, h=1e-3):
    """Horizontal representative of ``X_H`` with ``omega(X_H, .) = dH``.

    ``func`` maps unit vectors ``(..., n+1)`` to values ``(...)`` and must
    broadcast over extra leading axes.  With ``grad`` the complex gradient,
    ``omega(X, v) = Re <iX, v> / pi`` gives ``X = -i pi grad``.
    """
    return -1j * np.pi * ambient_gradient(func, z, h)


# ---------------------------------------------------------------- loop family

def hamiltonian_H(z, k, n):
    """``k/(2n+2) - (|z_1|^2 + ... + |z_k|^2)/2`` on unit representatives."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    z = _coords(z)
    if z.shape[-1] != n + 1:
        raise ValueError("point has the wrong dimension")
    return k / (2.0 * n + 2.0) - 0.5 * np.sum(np.abs(z[..., 1 : k + 1]) ** 2, axis=-1)


def flow_psi(t, z, k):
    """Multiply coordinates ``1..k`` by ``exp(pi i t)``."""
    wrap = isinstance(z, ProjectivePoint)
    w = np.array(_coords(z), dtype=complex)
    t = np.asarray(t, dtype=float)
    w[..., 1 : k + 1] *= np.exp(1j * np.pi * t)[..., None]
    return ProjectivePoint(w) if wrap else w


def flow_phi(t, z):
    """Multiply coordinate 0 by ``exp(pi i t)``."""
    wrap = isinstance(z, ProjectivePoint)
    w = np.array(_coords(z), dtype=complex)
    w[..., 0] *= np.exp(1j * np.pi * np.asarray(t, dtype=float))
    return ProjectivePoint(w) if wrap else w


def _canonical_sign(x):
    idx = np.argmax(np.abs(x) > 1e-12, axis=-1)
    lead = np.take_along_axis(x, idx[..., None], axis=-1)
    return x * np.where(lead < 0, -1.0, 1.0)


def real_locus_array(n, count, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, n + 1))
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    return _canonical_sign(x)


def real_locus_sampler(n, count, seed):
    """Seeded uniform samples of RP^n as projective points (real, sign-normalized)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [ProjectivePoint(x.astype(complex)) for x in real_locus_array(n, count, seed)]


def real_tangent_frame(x):
    """Real orthonormal basis of the tangent space of RP^n at real unit ``x`` (columns)."""
    x = np.asarray(x, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([x, np.eye(x.size)]))
    return q[:, 1 : x.size]


def distance_to_real_locus(z):
    """Smallest singular value of ``[Re z, Im z]``: zero iff ``z`` is a phase times a real vector."""
    z = np.asarray(z, dtype=complex)
    m = np.stack([z.real, z.imag], axis=-1)
    return np.linalg.svd(m, compute_uv=False)[..., -1]


@dataclass(frozen=True)
class ExactLoopSpec:
    """Loop ``Lambda_t = exp(-2 pi i t Q) RP^n`` generated by ``H = z*Qz - tr Q/(n+1)``.

    Every built-in loop has this form: the psi-loop uses
    ``Q = -diag(0, 1 x k, 0)/2`` and ``Lambda^k`` uses ``Q = -k e_0 e_0^*/2``.
    """

    n: int
    Q: np.ndarray
    label: str = "custom"
    mean_zero: bool = True
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        q = np.asarray(self.Q, dtype=complex)
        if q.shape != (self.n + 1, self.n + 1):
            raise ValueError("Q must be (n+1) x (n+1)")
        if np.max(np.abs(q - q.conj().T)) > 1e-14:
            raise ValueError("Q must be Hermitian")
        object.__setattr__(self, "Q", q)
        diag = np.real(np.diag(q)).copy()
        object.__setattr__(self, "_diagonal", diag if np.count_nonzero(q - np.diag(np.diag(q))) == 0 else None)
        m = self.flow_matrix(1.0)
        gram = m.T @ m
        phase = gram[0, 0]
        if abs(abs(phase) - 1.0) > 1e-9 or np.max(np.abs(gram - phase * np.eye(self.n + 1))) > 1e-9:
            raise DomainError("the flow at time 1 does not return RP^n to itself; loop not closed")

    @property
    def offset(self):
        return float(np.trace(self.Q).real) / (self.n + 1)

    def hamiltonian(self, t, z):
        """Mean-zero generator ``H_t(z)`` (time independent for this family)."""
        z = np.asarray(z, dtype=complex)
        if self._diagonal is not None:
            val = (z.real**2 + z.imag**2) @ self._diagonal
        else:
            val = np.real(np.sum(z.conj() * (z @ self.Q.T), axis=-1))
        return val - self.offset

    def flow_matrix(self, t):
        return expm(-2j * np.pi * float(t) * self.Q)

    def flow(self, t, z):
        """Apply the time-``t`` flow to unit vectors; ``t`` broadcasts against the batch."""
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=complex)
        w, v = np.linalg.eigh(self.Q)
        coef = np.einsum("ij,...j->...i", v.conj().T, z)
        coef = coef * np.exp(-2j * np.pi * t[..., None] * w)
        return np.einsum("ij,...j->...i", v, coef)

    def fiber_samples(self, t, count, seed=0):
        """Seeded samples of ``Lambda_t`` as unit vectors."""
        return self.flow(t, real_locus_array(self.n, count, seed).astype(complex))

    def fiber_distance(self, t, z):
        """Distance-like residual of ``z`` from ``Lambda_t``."""
        back = self.flow(-np.asarray(t, dtype=float), normalize(z))
        return distance_to_real_locus(back)

    def contains(self, t, z, tol=1e-9):
        return bool(np.all(self.fiber_distance(t, _coords(z)) <= tol))

    def fixed_point_eigenvalue(self, z, t=1.0):
        z = _coords(z)
        mz = self.flow_matrix(t) @ z
        lam = np.vdot(z, mz)
        if np.linalg.norm(mz - lam * z) > 1e-10:
            raise DomainError("point is not fixed by the flow")
        return lam

    def to_dict(self):
        terms = []
        for i in range(self.n + 1):
            for j in range(i, self.n + 1):
                c = self.Q[i, j]
                if c != 0:
                    terms.append({"i": i, "j": j, "re": float(c.real), "im": float(c.imag)})
        return {"n": self.n, "label": self.label, "terms": terms}


def psi_loop(k, n):
    """Loop of the rotation of coordinates ``1..k``; ``k = 0`` gives the constant loop."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    q = np.zeros((n + 1, n + 1))
    q[range(1, k + 1), range(1, k + 1)] = -0.5
    return ExactLoopSpec(n, q, label=f"psi:{k},{n}" if k else f"const:{n}")


def phi_loop(k, n):
    """The loop ``Lambda^k`` obtained by rotating ``z_0`` through ``exp(pi i k t)``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    q = np.zeros((n + 1, n + 1))
    q[0, 0] = -0.5 * k
    return ExactLoopSpec(n, q, label=f"phi:{k},{n}")


def constant_loop(n):
    return psi_loop(0, n)


def parse_loop(selector):
    """Parse ``psi:k,n``, ``phi:k,n`` or ``const:n``."""
    try:
        kind, _, args = selector.partition(":")
        nums = [int(a) for a in args.split(",")] if args else []
        if kind == "psi" and len(nums) == 2:
            return psi_loop(*nums)
        if kind == "phi" and len(nums) == 2:
            return phi_loop(*nums)
        if kind == "const" and len(nums) == 1:
            return constant_loop(nums[0])
    except ValueError as exc:
        raise ValueError(f"bad loop selector {selector!r}: {exc}") from None
    raise ValueError(f"bad loop selector {selector!r}; expected psi:k,n | phi:k,n | const:n")


def loop_from_json(text):
    """Custom loop from ``{"n": n, "terms": [{"i", "j", "re", "im"}, ...]}``.

    Each term adds ``c z_i^* z_j`` (plus its conjugate when ``i != j``) to the
    quadratic form.  The generator is recentred to mean zero; set
    ``"recentre": false`` to require the supplied form to be mean zero already.
    """
    doc = json.loads(text) if isinstance(text, str) else text
    unknown = set(doc) - {"n", "terms", "label", "recentre"}
    if unknown:
        raise ValueError(f"unknown keys in loop spec: {sorted(unknown)}")
    n = int(doc["n"])
    q = np.zeros((n + 1, n + 1), dtype=complex)
    for term in doc.get("terms", []):
        i, j = int(term["i"]), int(term["j"])
        c = complex(float(term.get("re", 0.0)), float(term.get("im", 0.0)))
        if i == j:
            if c.imag != 0.0:
                raise ValueError("diagonal coefficients must be real")
            q[i, i] += c.real
        else:
            q[i, j] += c
            q[j, i] += c.conjugate()
    if not doc.get("recentre", True) and abs(np.trace(q).real) > 1e-12:
        raise MeanNotZeroError("generator does not have mean zero")
    return ExactLoopSpec(n, q, label=doc.get("label", "custom"))


# ---------------------------------------------------------------- Hofer length

@dataclass
class HoferLength:
    value: float
    error_estimate: float
    t_nodes: int
    fiber_samples: int
    oscillations: np.ndarray


def fiber_oscillation(spec, t, fiber_samples=64, seed=0, workers=None, chunk=8):
    """``max - min`` of ``H_t`` over ``Lambda_t`` for each entry of ``t``.

    The extrema are searched on the real sphere ``S^n`` pulled back by the
    flow; analytic values are never used.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    dim = spec.n + 1

    def run(sl):
        ts = t[sl][:, None]

        def func(x):
            return spec.hamiltonian(ts, spec.flow(ts, x.astype(complex)))

        hi = sphere_extremum(func, dim, (ts.shape[0],), sense=1, samples=fiber_samples, seed=seed)
        lo = sphere_extremum(func, dim, (ts.shape[0],), sense=-1, samples=fiber_samples, seed=seed + 1)
        return hi.values - lo.values, max(hi.error_estimate, lo.error_estimate)

    parts = ordered_map(run, chunk_slices(t.size, chunk), workers)
    osc = np.concatenate([p[0] for p in parts])
    err = max(p[1] for p in parts)
    return osc, err


def hofer_length(spec, t_nodes=16, fiber_samples=64, seed=0, workers=None):
    """Hofer length ``int_0^1 (max H_t - min H_t) dt`` over ``Lambda_t``.

    Gauss-Legendre in ``t``; each fiber extremum by sampling plus great-circle
    polishing.

    Raises
    ------
    ConvergenceError
        A fiber extremum failed to converge.
    """
    nodes, weights = gauss_legendre(t_nodes, 0.0, 1.0)
    try:
        osc, err = fiber_oscillation(spec, nodes, fiber_samples, seed, workers)
    except ConvergenceError as exc:
        raise ConvergenceError(f"hofer_length({spec.label}): {exc}") from exc
    return HoferLength(float(np.dot(weights, osc)), 2.0 * err, t_nodes, fiber_samples, osc)


# ---------------------------------------------------------------- Maslov data

def tangent_loop_at_fixed_point(k, n, samples=64, *, spec=None, point=None):
    """Loop of tangent spaces ``T_p Lambda_t`` at a point fixed by the flow.

    The tangent map of the linear flow ``M_t`` at ``p`` with ``M_t p = lam_t p``
    acts on ``p^perp`` as ``M_t / lam_t``.  Expressed in a real orthonormal
    basis of ``T_p RP^n`` this is a loop of unitary frames.  Defaults: the
    psi-loop and ``p = [1:0:...:0]``, which gives ``diag(e^{pi i t} x k, 1)``.
    """
    spec = psi_loop(k, n) if spec is None else spec
    p = np.eye(spec.n + 1)[0] if point is None else np.asarray(_coords(point), dtype=complex)
    if distance_to_real_locus(p) > 1e-12:
        raise DomainError("base point must lie in RP^n")
    x = np.real(p * np.exp(-1j * np.angle(p[np.argmax(np.abs(p))])))
    basis = real_tangent_frame(x)
    needed = int(np.ceil(8 * max(1.0, np.max(np.abs(np.linalg.eigvalsh(spec.Q)))) * spec.n)) + 2
    count = max(samples, needed)
    times = np.linspace(0.0, 1.0, count)
    frames = []
    for t in times:
        m = spec.flow_matrix(t)
        lam = spec.fixed_point_eigenvalue(x, t)
        frames.append(basis.T @ (m @ basis) / lam)
    return LagrangianPath(times, np.array(frames))


@dataclass
class MaslovResidue:
    residue: int
    modulus: int
    witness_index: int
    witness: LagrangianPath


def maslov_residue(k, n, samples=64):
    """``mu(Lambda^k) mod (n+1)`` with the tangent loop of ``Lambda^k`` at ``[0:1:0:...]`` as witness."""
    spec = phi_loop(k, n)
    witness = tangent_loop_at_fixed_point(k, n, samples, spec=spec, point=np.eye(n + 1)[1])
    index = maslov_index(witness)
    modulus = minimal_maslov_number(n)
    return MaslovResidue(index % modulus, modulus, index, witness)


def class_maslov_indices(k, n, samples=64):
    """Maslov indices of the constant discs at ``[0:1:0..]`` (class A+) and ``[1:0..]`` (class A-)."""
    e = np.eye(n + 1)
    plus = maslov_index(tangent_loop_at_fixed_point(k, n, samples, point=e[1]))
    minus = maslov_index(tangent_loop_at_fixed_point(k, n, samples, point=e[0]))
    return plus, minus
