"""Explicit diffeomorphisms of the unit disc used to normalize discs near a point.

Points are arrays of shape ``(..., 2)``.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import OrientationError, ProfileError


def smoothstep(u):
    u = np.clip(u, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def smoothstep_integral(u):
    """Antiderivative of :func:`smoothstep` vanishing at 0 (linear beyond 1)."""
    v = np.clip(u, 0.0, 1.0)
    inside = 2.5 * v**4 - 3.0 * v**5 + v**6
    return inside + np.maximum(np.asarray(u, dtype=float) - 1.0, 0.0)


def _cutoff(r, inner=0.5, outer=0.9):
    """1 for ``r <= inner``, 0 for ``r >= outer``, smooth in between."""
    return 1.0 - smoothstep((r - inner) / (outer - inner))


def _rk4_flow(field, z, steps):
    h = 1.0 / steps
    for _ in range(steps):
        k1 = field(z)
        k2 = field(z + 0.5 * h * k1)
        k3 = field(z + 0.5 * h * k2)
        k4 = field(z + h * k3)
        z = z + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return z


@dataclass(frozen=True)
class JacobianRealization:
    """``psi = T o Q^T o psi0 o Q`` with ``d psi(0) = Psi`` and ``psi = id`` near the boundary.

    ``psi0`` is the time-one flow of ``chi(|z|) diag(log a, log b) z`` and
    ``T`` rotates the circle of radius ``r`` by ``chi(r)`` times the polar
    angle of ``Psi``.
    """

    Psi: np.ndarray
    Q: np.ndarray
    log_stretch: np.ndarray
    angle: float
    steps: int = 400

    def _psi0(self, z):
        d = self.log_stretch

        def field(w):
            chi = _cutoff(np.linalg.norm(w, axis=-1))[..., None]
            return chi * w * d

        return _rk4_flow(field, z, self.steps)

    def _twist(self, z):
        a = self.angle * _cutoff(np.linalg.norm(z, axis=-1))
        c, s = np.cos(a), np.sin(a)
        return np.stack([c * z[..., 0] - s * z[..., 1], s * z[..., 0] + c * z[..., 1]], axis=-1)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        w = z @ self.Q.T
        w = self._psi0(w)
        w = w @ self.Q
        return self._twist(w)


def realize_jacobian(Psi, steps=400):
    """Disc diffeomorphism with derivative ``Psi`` at the origin, identity near the unit circle.

    ``Psi = U P`` with ``U = Psi (Psi^T Psi)^{-1/2}`` a rotation and
    ``P = Q^T diag(a, b) Q`` symmetric positive.

    Raises
    ------
    OrientationError
        ``det Psi <= 0``.
    """
    psi = np.asarray(Psi, dtype=float)
    if psi.shape != (2, 2):
        raise ValueError("Psi must be a 2 x 2 matrix")
    if np.linalg.det(psi) <= 0.0:
        raise OrientationError("Psi must have positive determinant")
    evals, evecs = np.linalg.eigh(psi.T @ psi)
    root = np.sqrt(evals)
    inv_sqrt = evecs @ np.diag(1.0 / root) @ evecs.T
    u = psi @ inv_sqrt
    angle = float(np.arctan2(u[1, 0], u[0, 0]))
    return JacobianRealization(psi, evecs.T.copy(), np.log(root), angle, steps)


@dataclass(frozen=True)
class RadialRescale:
    """``f(z) = rho(|z|) z / |z|`` with ``rho(r) = r`` near 0 and for ``r >= 1 + delta/2``, and ``rho(eps) = 1``.

    ``rho' = 1 + c1 P1`` on ``[eps/2, eps]`` and ``rho' = 1 - c2 P2`` on
    ``[eps, 1 + delta/2]`` where ``P1, P2`` are plateau functions with
    smoothstep ramps; ``c1, c2`` are fixed by the two value constraints.
    """

    eps: float
    delta: float
    c1: float
    c2: float
    ramp1: float
    ramp2: float

    @property
    def knots(self):
        return 0.5 * self.eps, self.eps, 1.0 + 0.5 * self.delta

    def _plateau_integral(self, r, a, b, w):
        """``int_a^r P`` for the plateau on ``[a, b]`` with ramp width ``w``."""
        r = np.clip(r, a, b)
        up = w * smoothstep_integral((r - a) / w)
        down = w * smoothstep_integral((r - (b - w)) / w)
        return up - down

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        a, e, b = self.knots
        out = r + self.c1 * self._plateau_integral(r, a, e, self.ramp1)
        out = out - self.c2 * self._plateau_integral(r, e, b, self.ramp2)
        return out

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        a, e, b = self.knots

        def plateau(lo, hi, w):
            inside = (r >= lo) & (r <= hi)
            return np.where(inside, smoothstep((r - lo) / w) - smoothstep((r - (hi - w)) / w), 0.0)

        return 1.0 + self.c1 * plateau(a, e, self.ramp1) - self.c2 * plateau(e, b, self.ramp2)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        r = np.linalg.norm(z, axis=-1)
        safe = np.where(r > 0.0, r, 1.0)
        return z * (self.profile(r) / safe)[..., None]


def radial_rescale(eps, delta, check_points=10_000):
    """Radial diffeomorphism taking the disc of radius ``eps`` onto the unit disc.

    Raises
    ------
    ProfileError
        The profile fails the positivity check of its derivative on a grid of
        ``check_points`` radii.
    """
    if not (0.0 < eps < 1.0 and delta > 0.0):
        raise ValueError("need 0 < eps < 1 and delta > 0")
    a, e, b = 0.5 * eps, eps, 1.0 + 0.5 * delta
    ramp1 = 0.25 * (e - a)
    ramp2 = min(0.25 * delta, 0.25 * (b - e))
    # a plateau on [lo, hi] with ramps w integrates to (hi - lo) - w
    c1 = (1.0 - eps) / ((e - a) - ramp1)
    c2 = (1.0 - eps) / ((b - e) - ramp2)
    prof = RadialRescale(eps, delta, c1, c2, ramp1, ramp2)
    r = np.linspace(0.0, b + 0.5, check_points)
    d = prof.derivative(r)
    rho = prof.profile(r)
    if np.min(d) <= 0.0 or np.any(np.diff(rho) <= 0.0):
        raise ProfileError("radial profile is not strictly increasing; widen the transition zones")
    return prof
