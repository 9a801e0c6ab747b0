"""Closed curves on the flat torus R^2/Z^2 bounding embedded discs.

A curve is stored through its lift to the plane, either as a real Fourier
series in the parameter ``theta`` in [0, 1) or as points at uniform
parameter values (a closed polygon).  Both representations are periodic, so
the lift closes up and the curve is contractible.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from shapely.affinity import translate
from shapely.geometry import Polygon

from ..errors import InvalidDiscError

GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)
CHORD_TOL = 1e-6


@dataclass(frozen=True)
class TorusCurve:
    """Periodic lift ``theta -> (x(theta), y(theta))``.

    ``kind == "fourier"``: ``x = x0 + sum_m xc[m] cos(2 pi m theta) + xs[m] sin(2 pi m theta)``
    for ``m = 1..M``, likewise for ``y``.  ``kind == "samples"``: ``points``
    has shape ``(N, 2)`` with point ``i`` at ``theta = i / N``; the curve is
    the closed polygon through them.
    """

    kind: str
    points: np.ndarray = None
    x0: float = 0.0
    y0: float = 0.0
    xc: np.ndarray = None
    xs: np.ndarray = None
    yc: np.ndarray = None
    ys: np.ndarray = None

    def __post_init__(self):
        if self.kind == "samples":
            p = np.asarray(self.points, dtype=float)
            if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 3:
                raise ValueError("need at least three (x, y) samples")
            if np.allclose(p[0], p[-1]) and p.shape[0] > 3:
                p = p[:-1]
            object.__setattr__(self, "points", p)
        elif self.kind == "fourier":
            arrays = [np.atleast_1d(np.asarray(a if a is not None else [], dtype=float)) for a in (self.xc, self.xs, self.yc, self.ys)]
            m = max(a.size for a in arrays)
            arrays = [np.pad(a, (0, m - a.size)) for a in arrays]
            for name, a in zip(("xc", "xs", "yc", "ys"), arrays):
                object.__setattr__(self, name, a)
        else:
            raise ValueError("kind must be 'fourier' or 'samples'")

    # construction ---------------------------------------------------------

    @classmethod
    def circle(cls, radius, center=(0.0, 0.0)):
        return cls("fourier", x0=center[0], y0=center[1], xc=[radius], xs=[0.0], yc=[0.0], ys=[radius])

    @classmethod
    def from_samples(cls, points):
        return cls("samples", points=points)

    @property
    def modes(self):
        return self.xc.size if self.kind == "fourier" else 0

    # evaluation -----------------------------------------------------------

    def evaluate(self, theta):
        """Points of the lift at parameters ``theta`` (shape ``theta.shape + (2,)``)."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == "fourier":
            m = np.arange(1, self.modes + 1)
            ang = 2.0 * np.pi * theta[..., None] * m
            c, s = np.cos(ang), np.sin(ang)
            x = self.x0 + c @ self.xc + s @ self.xs
            y = self.y0 + c @ self.yc + s @ self.ys
            return np.stack([x, y], axis=-1)
        p = self.points
        n = p.shape[0]
        u = np.mod(theta, 1.0) * n
        i = np.floor(u).astype(int) % n
        f = (u - np.floor(u))[..., None]
        return (1.0 - f) * p[i] + f * p[(i + 1) % n]

    def derivative(self, theta):
        """``d/dtheta`` of the lift (Fourier curves only)."""
        if self.kind != "fourier":
            raise ValueError("derivative is defined for Fourier curves")
        theta = np.asarray(theta, dtype=float)
        m = np.arange(1, self.modes + 1)
        ang = 2.0 * np.pi * theta[..., None] * m
        c, s = np.cos(ang) * (2 * np.pi * m), np.sin(ang) * (2 * np.pi * m)
        return np.stack([c @ self.xs - s @ self.xc, c @ self.ys - s @ self.yc], axis=-1)

    def polyline(self, count=4096):
        """Closed polygon approximation (exact vertices for sampled curves)."""
        if self.kind == "samples":
            return self.points
        return self.evaluate(np.arange(count) / count)

    def translated(self, dx=0.0, dy=0.0):
        if self.kind == "samples":
            return TorusCurve("samples", points=self.points + np.array([dx, dy]))
        return TorusCurve("fourier", x0=self.x0 + dx, y0=self.y0 + dy, xc=self.xc, xs=self.xs, yc=self.yc, ys=self.ys)

    def reversed(self):
        if self.kind == "samples":
            return TorusCurve("samples", points=self.points[::-1].copy())
        return TorusCurve("fourier", x0=self.x0, y0=self.y0, xc=self.xc, xs=-self.xs, yc=self.yc, ys=-self.ys)

    def reparametrized(self, shift):
        """Same curve with ``theta -> theta + shift``."""
        if self.kind == "samples":
            return TorusCurve("samples", points=np.roll(self.points, -int(shift), axis=0))
        m = np.arange(1, self.modes + 1)
        c, s = np.cos(2 * np.pi * m * shift), np.sin(2 * np.pi * m * shift)
        return TorusCurve(
            "fourier", x0=self.x0, y0=self.y0,
            xc=self.xc * c + self.xs * s, xs=self.xs * c - self.xc * s,
            yc=self.yc * c + self.ys * s, ys=self.ys * c - self.yc * s,
        )

    # serialization --------------------------------------------------------

    def to_dict(self):
        if self.kind == "samples":
            return {"kind": "samples", "points": self.points.tolist()}
        return {
            "kind": "fourier", "x0": self.x0, "y0": self.y0,
            "x_cos": self.xc.tolist(), "x_sin": self.xs.tolist(),
            "y_cos": self.yc.tolist(), "y_sin": self.ys.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        kind = doc.get("kind", "fourier")
        if kind == "samples":
            return cls("samples", points=doc["points"])
        return cls(
            "fourier", x0=float(doc.get("x0", 0.0)), y0=float(doc.get("y0", 0.0)),
            xc=doc.get("x_cos", []), xs=doc.get("x_sin", []), yc=doc.get("y_cos", []), ys=doc.get("y_sin", []),
        )


def curve_from_json(text):
    return TorusCurve.from_dict(json.loads(text) if isinstance(text, str) else text)


def curve_from_csv(text):
    """Read ``theta,x,y`` rows (header optional); rows are sorted by theta."""
    rows = []
    for rec in csv.reader(io.StringIO(text)):
        if not rec or rec[0].strip().startswith("#"):
            continue
        try:
            rows.append([float(v) for v in rec[:3]])
        except ValueError:
            if rows:
                raise
            continue
    data = np.array(rows)
    data = data[np.argsort(data[:, 0], kind="stable")]
    spacing = np.diff(np.concatenate([data[:, 0], [data[0, 0] + 1.0]]))
    if np.ptp(spacing) > 1e-9 * max(1.0, data.shape[0]):
        raise ValueError("theta values must be uniformly spaced over one period")
    return TorusCurve.from_samples(data[:, 1:3])


def curve_to_csv(curve, count=1024):
    pts = curve.polyline(count)
    theta = np.arange(pts.shape[0]) / pts.shape[0]
    lines = ["theta,x,y"] + [f"{t:.17g},{x:.17g},{y:.17g}" for t, (x, y) in zip(theta, pts)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- geometry

def signed_area(curve, count=4096):
    """``(1/2) \\oint (x dy - y dx)`` of the lift.

    Exact for Fourier curves (``pi sum m (xc_m ys_m - xs_m yc_m)``) and for
    polygons (shoelace formula).
    """
    if curve.kind == "fourier":
        m = np.arange(1, curve.modes + 1)
        return float(np.pi * np.sum(m * (curve.xc * curve.ys - curve.xs * curve.yc)))
    p = curve.points
    q = np.roll(p, -1, axis=0)
    return float(0.5 * np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def embeddedness_report(curve, count=4096, chord_tol=CHORD_TOL):
    """Discrete self-intersection guard on the torus.

    Returns ``(ok, min_chord, reason)``: the minimum distance between
    non-adjacent vertices of the polygon must exceed ``chord_tol``, the
    polygon must be simple, and it must not meet its own integer translates.
    """
    pts = curve.polyline(count)
    n = pts.shape[0]
    tree = cKDTree(pts)
    close = tree.query_pairs(max(chord_tol, 1e-300), output_type="ndarray")
    if close.size:
        gap = np.abs(close[:, 0] - close[:, 1])
        gap = np.minimum(gap, n - gap)
        if np.any(gap > 1):
            return False, 0.0, "non-adjacent boundary points closer than the chord guard"
    d, _ = tree.query(pts, k=min(4, n))
    min_chord = float(np.min(d[:, -1])) if n > 3 else float("nan")
    poly = Polygon(pts)
    if not poly.exterior.is_simple:
        return False, min_chord, "boundary polygon crosses itself"
    span = np.ptp(pts, axis=0)
    for a in range(-int(np.ceil(span[0])) - 1, int(np.ceil(span[0])) + 2):
        for b in range(-int(np.ceil(span[1])) - 1, int(np.ceil(span[1])) + 2):
            if (a, b) != (0, 0) and poly.intersects(translate(poly, a, b)):
                return False, min_chord, f"disc meets its translate by ({a}, {b}) on the torus"
    return True, min_chord, ""


@dataclass(frozen=True)
class EmbeddedDisc:
    boundary: TorusCurve
    orientation: int = 1
    chord_tol: float = CHORD_TOL

    def __post_init__(self):
        ok, _, reason = embeddedness_report(self.boundary, chord_tol=self.chord_tol)
        if not ok:
            raise InvalidDiscError(reason)
        raw = signed_area(self.boundary)
        if raw == 0.0:
            raise InvalidDiscError("boundary encloses no area")
        object.__setattr__(self, "orientation", 1 if raw > 0 else -1)
        if not 0.0 < abs(raw) < 1.0:
            raise InvalidDiscError(f"disc area {abs(raw):.6g} is not in (0, 1)")


def area(disc):
    """Area of an embedded disc; the orientation sign is kept on ``disc.orientation``."""
    if not isinstance(disc, EmbeddedDisc):
        disc = EmbeddedDisc(disc)
    return abs(signed_area(disc.boundary))


def _polish_extremum(func, theta, width, sense, iters=60):
    """Golden-section polish of ``sense * func`` on ``[theta - width, theta + width]``."""
    lo, hi = theta - width, theta + width
    a = hi - GOLDEN * (hi - lo)
    b = lo + GOLDEN * (hi - lo)
    fa, fb = sense * func(a), sense * func(b)
    for _ in range(iters):
        if fa > fb:
            hi, b, fb = b, a, fa
            a = hi - GOLDEN * (hi - lo)
            fa = sense * func(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + GOLDEN * (hi - lo)
            fb = sense * func(b)
    return max(fa, fb) * sense


def _oscillation(func, samples, count):
    """``max - min`` of a 1-periodic function via dense sampling and golden polish."""
    theta = np.arange(count) / count
    vals = samples
    out = []
    for sense in (1, -1):
        i = int(np.argmax(sense * vals))
        best = _polish_extremum(func, theta[i], 1.0 / count, sense)
        out.append(best if sense * best >= sense * vals[i] else vals[i])
    return out[0] - out[1]


def translation_loop_length(curve, count=4096):
    """Hofer length ``max x - min x`` of the loop of vertical translates of the curve."""
    if curve.kind == "samples":
        return float(np.ptp(curve.points[:, 0]))

    def x_of(theta):
        return float(curve.evaluate(np.asarray(theta))[..., 0])

    return float(_oscillation(x_of, curve.evaluate(np.arange(count) / count)[:, 0], count))


def _generator_samples(curve, t, count, dt=1e-3):
    """Cumulative integral of ``alpha_t = det[d_t iota, d_theta iota]`` along the curve at time ``t``."""
    def iota(tt, theta):
        return curve.translated(0.0, tt).evaluate(theta)

    if curve.kind == "samples":
        count = curve.points.shape[0]
    theta = np.arange(count) / count
    dtio = (iota(t + dt, theta) - iota(t - dt, theta)) / (2 * dt)
    if curve.kind == "fourier":
        dth = curve.derivative(theta)
        alpha = dtio[:, 0] * dth[:, 1] - dtio[:, 1] * dth[:, 0]
        # spectral antiderivative of the mean-zero periodic alpha
        spec = np.fft.rfft(alpha)
        k = np.arange(spec.size)
        anti = np.zeros_like(spec)
        anti[1:] = spec[1:] / (2j * np.pi * k[1:])
        if abs(spec[0]) > 1e-9 * count:
            raise ValueError("generator 1-form is not exact along the curve")
        return np.fft.irfft(anti, count), (spec, anti)
    p = curve.points
    step = np.roll(p, -1, axis=0) - p
    alpha = dtio[:, 0] * step[:, 1] - dtio[:, 1] * step[:, 0]
    return np.concatenate([[0.0], np.cumsum(alpha)[:-1]]), None


def hamiltonian_oracle_length(curve, t_nodes=8, count=4096):
    """Hofer length from the generating 1-form of the translation loop.

    At each Gauss-Legendre time the generator ``h_t`` is recovered by
    integrating ``alpha_t`` along the translated curve; its oscillation is
    integrated over ``t``.
    """
    from ..quadrature import gauss_legendre

    nodes, weights = gauss_legendre(t_nodes, 0.0, 1.0)
    osc = []
    for t in nodes:
        h, data = _generator_samples(curve, t, count)
        if data is None:
            osc.append(float(np.ptp(h)))
            continue
        _, anti = data
        k = np.arange(anti.size)

        def h_of(theta, anti=anti):
            ph = np.exp(2j * np.pi * k * theta)
            return float(2.0 * np.real(np.sum(anti[1:] * ph[1:])) / count)

        osc.append(float(_oscillation(h_of, h, count)))
    return float(np.dot(weights, osc))


# ---------------------------------------------------------------- output

def curves_to_svg(curves, size=480, margin=16, labels=None):
    """Minimal SVG drawing of closed curves inside the unit square (deterministic text)."""
    all_pts = [c.polyline(1024) for c in curves]
    stack = np.concatenate(all_pts)
    lo = np.minimum(stack.min(axis=0), 0.0)
    hi = np.maximum(stack.max(axis=0), 1.0)
    scale = (size - 2 * margin) / float(np.max(hi - lo))
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect x="{margin + scale * (0.0 - lo[0]):.3f}" y="{size - margin - scale * (1.0 - lo[1]):.3f}" '
        f'width="{scale:.3f}" height="{scale:.3f}" fill="none" stroke="#999" stroke-dasharray="4 3"/>',
    ]
    colours = ["#1f4e79", "#b03a2e", "#1e8449", "#7d3c98"]
    for i, pts in enumerate(all_pts):
        sx = margin + scale * (pts[:, 0] - lo[0])
        sy = size - margin - scale * (pts[:, 1] - lo[1])
        path = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(sx, sy))
        out.append(f'<polygon points="{path}" fill="none" stroke="{colours[i % len(colours)]}" stroke-width="1"/>')
        if labels:
            out.append(f'<text x="{margin}" y="{margin + 14 * (i + 1)}" font-size="12">{labels[i]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
