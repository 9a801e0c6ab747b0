"""Moser isotopy between area forms on the flat unit torus.

Densities live on a uniform ``N x N`` periodic grid with node ``(i, j)`` at
``(x, y) = (i/N, j/N)``; arrays are indexed ``[i, j]``.  For
``omega_t = f_t dx^dy`` with ``f_t = (1-t) f0 + t f1`` the Poisson problem
``Lap phi = f1 - f0`` gives the primitive ``alpha = -phi_y dx + phi_x dy`` of
``(f1 - f0) dx^dy``.  The field ``X_t = -grad(phi) / f_t`` satisfies
``i(X_t) omega_t = -alpha``, and its flow pulls ``omega_1`` back to
``omega_0``.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates, spline_filter

from ..errors import CohomologyObstructionError, StepSizeError


@dataclass(frozen=True)
class DensityField:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("density must be a square periodic grid")
        if not np.all(np.isfinite(v)) or np.min(v) <= 0.0:
            raise ValueError("density must be strictly positive")
        object.__setattr__(self, "values", v)

    @property
    def size(self):
        return self.values.shape[0]

    @property
    def mean(self):
        return float(np.mean(self.values))

    def normalized(self):
        """Rescale to mean 1; returns ``(field, scale)`` with ``values = scale * field``."""
        m = self.mean
        return DensityField(self.values / m), m

    @classmethod
    def from_function(cls, func, size):
        x, y = grid_coordinates(size)
        return cls(np.broadcast_to(func(x, y), (size, size)).copy())

    @classmethod
    def from_csv(cls, text):
        rows = [[float(v) for v in rec] for rec in csv.reader(io.StringIO(text)) if rec and not rec[0].startswith("#")]
        return cls(np.array(rows))

    def to_csv(self):
        return "\n".join(",".join(f"{v:.17g}" for v in row) for row in self.values) + "\n"


def grid_coordinates(size):
    g = np.arange(size) / size
    return np.meshgrid(g, g, indexing="ij")


def _wavenumbers(size):
    return 2.0 * np.pi * np.fft.fftfreq(size, d=1.0 / size)


def spectral_gradient(values):
    """``(d/dx, d/dy)`` of a periodic grid function by FFT."""
    k = _wavenumbers(values.shape[0])
    spec = np.fft.fft2(values)
    dx = np.real(np.fft.ifft2(1j * k[:, None] * spec))
    dy = np.real(np.fft.ifft2(1j * k[None, :] * spec))
    return dx, dy


def solve_poisson(rhs):
    """Mean-zero solution of ``Lap phi = rhs`` on the unit torus (``rhs`` must have mean zero)."""
    k = _wavenumbers(rhs.shape[0])
    k2 = k[:, None] ** 2 + k[None, :] ** 2
    spec = np.fft.fft2(rhs)
    k2[0, 0] = 1.0
    spec = -spec / k2
    spec[0, 0] = 0.0
    return np.real(np.fft.ifft2(spec))


@dataclass
class MoserOneForm:
    """``alpha = ax dx + ay dy`` on the grid together with the potential ``phi``."""

    ax: np.ndarray
    ay: np.ndarray
    phi: np.ndarray

    def exterior_derivative(self):
        """``d alpha / (dx^dy) = d_x ay - d_y ax`` (spectral)."""
        dayx, _ = spectral_gradient(self.ay)
        _, daxy = spectral_gradient(self.ax)
        return dayx - daxy


def _check_means(f0, f1, tol=1e-12):
    if f0.size != f1.size:
        raise ValueError("densities live on different grids")
    m0, m1 = f0.mean, f1.mean
    if abs(m1 - m0) > tol * max(1.0, abs(m0)):
        raise CohomologyObstructionError(f"total areas differ ({m0:.15g} vs {m1:.15g}); no Moser isotopy exists")


def moser_one_form(f0, f1):
    """Co-exact primitive ``alpha`` of ``(f1 - f0) dx^dy`` by a spectral Poisson solve.

    Raises
    ------
    CohomologyObstructionError
        The two densities have different total areas.
    """
    _check_means(f0, f1)
    diff = f1.values - f0.values
    phi = solve_poisson(diff - diff.mean())
    px, py = spectral_gradient(phi)
    return MoserOneForm(-py, px, phi)


@dataclass
class DiffeoSample:
    """Images ``psi(p)`` of the grid nodes as unwrapped displacements."""

    size: int
    x: np.ndarray
    y: np.ndarray
    steps: int

    @property
    def displacement(self):
        gx, gy = grid_coordinates(self.size)
        return self.x - gx, self.y - gy

    def jacobian_determinant(self):
        """``det d psi`` from the spectral derivative of the periodic displacement."""
        dx, dy = self.displacement
        dxx, dxy = spectral_gradient(dx)
        dyx, dyy = spectral_gradient(dy)
        return (1.0 + dxx) * (1.0 + dyy) - dxy * dyx


class _Periodic:
    """Bicubic periodic spline interpolant of a grid function."""

    def __init__(self, values):
        self.size = values.shape[0]
        self.coef = spline_filter(values, order=3, mode="grid-wrap")

    def __call__(self, x, y):
        coords = np.array([np.ravel(x) * self.size, np.ravel(y) * self.size])
        out = map_coordinates(self.coef, coords, order=3, mode="grid-wrap", prefilter=False)
        return out.reshape(np.shape(x))


def _flow(f0, f1, steps, reverse=False):
    form = moser_one_form(f0, f1)
    gx, gy = spectral_gradient(form.phi)
    ix, iy = _Periodic(gx), _Periodic(gy)
    i0, i1 = _Periodic(f0.values), _Periodic(f1.values)
    size = f0.size
    half_cell = 0.5 / size
    dt = 1.0 / steps
    vmax = float(np.max(np.hypot(gx, gy)) / min(np.min(f0.values), np.min(f1.values)))
    if vmax * dt > half_cell:
        need = int(np.ceil(vmax / half_cell))
        raise StepSizeError(
            f"{steps} steps move points up to {vmax * dt:.3g} per step, more than half a grid cell; use at least {need}",
            suggested_steps=need,
        )

    def velocity(t, x, y):
        ft = (1.0 - t) * i0(x, y) + t * i1(x, y)
        return -ix(x, y) / ft, -iy(x, y) / ft

    x, y = grid_coordinates(size)
    x, y = x.copy(), y.copy()
    sign = -1.0 if reverse else 1.0
    for n in range(steps):
        t = n * dt if not reverse else 1.0 - n * dt
        h = sign * dt
        k1 = velocity(t, x, y)
        k2 = velocity(t + 0.5 * h, x + 0.5 * h * k1[0], y + 0.5 * h * k1[1])
        k3 = velocity(t + 0.5 * h, x + 0.5 * h * k2[0], y + 0.5 * h * k2[1])
        k4 = velocity(t + h, x + h * k3[0], y + h * k3[1])
        x = x + h * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6.0
        y = y + h * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6.0
    return DiffeoSample(size, x, y, steps)


def moser_flow(f0, f1, steps=64):
    """Time-one map ``psi_1`` of the Moser isotopy, with ``psi_1^* omega_1 = omega_0``.

    RK4 in time, bicubic periodic interpolation of the field in space.

    Raises
    ------
    StepSizeError
        A step would move some point by more than half a grid cell; the
        exception carries ``suggested_steps``.
    """
    return _flow(f0, f1, steps)


def moser_flow_inverse(f0, f1, steps=64):
    """Time-one map of the reversed isotopy, which inverts :func:`moser_flow`."""
    return _flow(f0, f1, steps, reverse=True)


def pullback_residual(sample, f0, f1):
    """``sup |det(d psi) f1(psi) - f0|`` over the grid."""
    f1_at = _Periodic(f1.values)(np.mod(sample.x, 1.0), np.mod(sample.y, 1.0))
    return float(np.max(np.abs(sample.jacobian_determinant() * f1_at - f0.values)))


def compose(outer, inner):
    """Grid samples of ``outer o inner`` (outer interpolated at the images of inner)."""
    dx, dy = outer.displacement
    px, py = np.mod(inner.x, 1.0), np.mod(inner.y, 1.0)
    return DiffeoSample(
        inner.size,
        inner.x + _Periodic(dx)(px, py),
        inner.y + _Periodic(dy)(px, py),
        outer.steps + inner.steps,
    )


def identity_error(sample):
    dx, dy = sample.displacement
    return float(np.max(np.hypot(dx, dy)))


def self_convergence_order(f0, f1, steps=(64, 128, 256)):
    """Observed RK4 order from ``|psi_h - psi_{h/2}|`` at successive halvings.

    Differences of flows on the same grid share the interpolation error, so
    they measure the time discretization alone.
    """
    maps = [moser_flow(f0, f1, s) for s in steps]
    errs = [
        float(np.max(np.hypot(a.x - b.x, a.y - b.y))) for a, b in zip(maps[:-1], maps[1:])
    ]
    orders = [float(np.log2(e0 / e1)) for e0, e1 in zip(errs[:-1], errs[1:])]
    return errs, orders


def flow_to_svg(sample, stride=16, size=480, margin=16):
    """Deformed grid lines of a flow sample (deterministic SVG text)."""
    scale = size - 2 * margin
    lines = []
    for arr_x, arr_y in ((sample.x[::stride, :], sample.y[::stride, :]), (sample.x[:, ::stride].T, sample.y[:, ::stride].T)):
        for xs, ys in zip(arr_x, arr_y):
            pts = " ".join(f"{margin + scale * a:.3f},{size - margin - scale * b:.3f}" for a, b in zip(xs, ys))
            lines.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e79" stroke-width="0.6"/>')
    head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">'
    return "\n".join([head] + lines + ["</svg>"]) + "\n"
