"""Gauss-Legendre rules on intervals, composite panels, and the polar disc grid."""

from dataclasses import dataclass

import numpy as np


def gauss_legendre(count, a=0.0, b=1.0):
    """Nodes and weights of the ``count``-point Gauss-Legendre rule on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(int(count))
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def composite_gauss_legendre(breakpoints, count):
    """Split ``count`` nodes evenly over the panels between ``breakpoints``.

    Integrands that are only finitely smooth at a breakpoint (cutoff joins)
    keep their full Gauss-Legendre accuracy on each side.
    """
    edges = np.unique(np.asarray(breakpoints, dtype=float))
    panels = len(edges) - 1
    per_panel = max(2, int(count) // panels)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(per_panel, a, b)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class PolarGrid:
    """Tensor-product Gauss-Legendre grid on the unit disc in polar coordinates.

    The angular variable is measured in turns, ``x + iy = r exp(2 pi i t)``,
    so the area element is ``2 pi r dr dt``.
    """

    radial: int = 64
    angular: int = 128

    def __post_init__(self):
        if self.radial < 2 or self.angular < 2:
            raise ValueError("polar grid needs at least 2 nodes per direction")

    def nodes(self, breakpoints=(0.0, 1.0)):
        """Return ``(r, t, weights)`` with ``weights[i, j]`` the area weight of node (r_i, t_j)."""
        r, wr = composite_gauss_legendre(breakpoints, self.radial)
        t, wt = gauss_legendre(self.angular, 0.0, 1.0)
        weights = 2.0 * np.pi * np.outer(wr * r, wt)
        return r, t, weights

    def as_dict(self):
        return {"radial": self.radial, "angular": self.angular}
