"""Serpentine discs of prescribed area and small horizontal extent.

The disc is a box ``[0, W] x [0, H]`` with ``H = 1 - delta/4`` cut by
vertical slots that alternately enter from the bottom and the top, leaving
``m`` columns joined by bridges in a boustrophedon pattern.  Slots have
semicircular ends and the outer corners are rounded by a morphological
opening, so the boundary is a C^1 curve of arcs and segments.  The boundary
is kept as a dense polygon whose area is calibrated to the target.
"""

from dataclasses import dataclass

import numpy as np
import shapely
from shapely.geometry import LineString, box
from shapely.geometry.polygon import orient
from shapely.ops import unary_union

from ..errors import ConstructionError
from .curves import EmbeddedDisc, TorusCurve, area, translation_loop_length

QUAD_SEGS = 32
MAX_COLUMNS = 512


@dataclass(frozen=True)
class SnakeLayout:
    columns: int
    column_width: float
    last_width: float
    gap: float
    height: float
    bridge: float
    radius: float
    width: float


def _shape(columns, widths, gap, height, bridge, radius):
    lefts = np.concatenate([[0.0], np.cumsum(np.asarray(widths)[:-1] + gap)])
    total = lefts[-1] + widths[-1]
    shape = box(0.0, 0.0, total, height)
    slots = []
    half = 0.5 * gap
    for j in range(columns - 1):
        xc = lefts[j] + widths[j] + half
        if j % 2 == 0:
            line = LineString([(xc, -1.0), (xc, height - bridge - half)])
        else:
            line = LineString([(xc, height + 1.0), (xc, bridge + half)])
        slots.append(line.buffer(half, quad_segs=QUAD_SEGS, cap_style="round"))
    if slots:
        shape = shape.difference(unary_union(slots))
    shape = shape.buffer(-radius, quad_segs=QUAD_SEGS).buffer(radius, quad_segs=QUAD_SEGS)
    if shape.geom_type != "Polygon" or len(shape.interiors):
        raise ConstructionError("serpentine degenerated; widen the columns or reduce the rounding radius")
    return orient(shape, 1.0)


def _boundary(poly, spacing):
    dense = shapely.segmentize(poly, spacing)
    pts = np.asarray(dense.exterior.coords)[:-1]
    start = int(np.argmin(pts[:, 0] + 1e-3 * pts[:, 1]))
    return np.roll(pts, -start, axis=0)


def snake_layout(target_area, delta, column_width=0.1):
    """Parameters of a serpentine of area about ``target_area``; the last column is trimmed later."""
    if not 0.0 < target_area < 1.0:
        raise ConstructionError("target area must lie in (0, 1)")
    if delta <= 0.0:
        raise ConstructionError("delta must be positive")
    height = 1.0 - 0.25 * delta
    if height <= 0.0:
        raise ConstructionError("delta too large: the serpentine has no height")
    radius = 0.25 * min(delta, column_width)
    if 2.0 * radius >= column_width:
        raise ConstructionError("rounding radius exceeds half the column width")
    columns = max(1, int(np.ceil(target_area / (column_width * height))))
    if columns > MAX_COLUMNS:
        raise ConstructionError(f"{columns} columns needed; widen the columns (at most {MAX_COLUMNS})")
    gap = 0.25 * delta / max(columns - 1, 1)
    gap = min(gap, 0.5 * column_width)
    bridge = column_width
    if columns > 1 and 2.0 * bridge + gap >= height:
        raise ConstructionError("columns too wide for the available height")
    width = columns * column_width + (columns - 1) * gap
    if width >= 1.0:
        raise ConstructionError("serpentine wider than the torus")
    return SnakeLayout(columns, column_width, column_width, gap, height, bridge, radius, width)


def snake_disc(target_area, delta, column_width=0.1, tol=1e-9, spacing=None):
    """Serpentine embedded disc with area ``target_area`` (within 1e-6) and width close to it.

    Parameters
    ----------
    target_area : float
        Area in (0, 1).
    delta : float
        Slack: the horizontal extent stays below ``target_area + delta``.
    column_width : float
        Width of the vertical columns.

    Raises
    ------
    ConstructionError
        Parameters do not admit a serpentine of this kind.
    """
    lay = snake_layout(target_area, delta, column_width)
    m = lay.columns
    spacing = spacing if spacing is not None else min(2e-3, 0.5 * lay.radius)

    def build(widths):
        return _shape(m, widths, lay.gap, lay.height, lay.bridge, lay.radius)

    lo_w = 2.5 * lay.radius
    full = [column_width] * m

    def with_last(w):
        return full[:-1] + [w]

    def uniform(w):
        return [w] * m

    family = with_last
    if m == 1 or build(with_last(lo_w)).area > target_area:
        family = uniform
    if build(family(column_width)).area < target_area:
        raise ConstructionError("layout cannot reach the target area")
    if build(family(lo_w)).area > target_area:
        raise ConstructionError("layout cannot get small enough for the target area")
    lo, hi = lo_w, column_width
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if build(family(mid)).area < target_area:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    widths = family(0.5 * (lo + hi))
    poly = build(widths)
    curve = TorusCurve.from_samples(_boundary(poly, spacing))
    disc = EmbeddedDisc(curve)
    achieved = area(disc)
    if abs(achieved - target_area) > 1e-6:
        raise ConstructionError(f"area calibration missed the target by {achieved - target_area:.2e}")
    return disc


def minimize_width(disc_or_area, delta_schedule, column_width=0.1):
    """Widths of serpentines with the area of the given disc, one row per slack.

    Each row holds ``delta``, the achieved horizontal width, the area, the
    gap ``width - area`` and the bound ``area + delta``.  The matching lower
    bound ``width >= area`` is a cited fact, not a computed one.
    """
    a = float(disc_or_area) if np.isscalar(disc_or_area) else area(disc_or_area)
    rows = []
    for delta in delta_schedule:
        disc = snake_disc(a, delta, column_width)
        width = translation_loop_length(disc.boundary)
        rows.append({
            "delta": float(delta),
            "width": float(width),
            "area": float(area(disc)),
            "gap": float(width - a),
            "bound": float(a + delta),
            "lower_bound_verified": False,
        })
    return rows
