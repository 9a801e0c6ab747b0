"""Batched extremum search for functions on round spheres.

Fiber extrema over RP^n (real unit vectors) and CP^n (complex unit vectors
viewed as real vectors of twice the length) are both found here: seeded
uniform sampling, then polishing along great circles in the direction of the
numerical gradient.  The line search is either golden section or a stacked
zoom search that needs far fewer (but wider) function calls.

``func`` receives unit vectors of shape ``lead + batch + (m, dim)`` and must
return ``lead + batch + (m,)``, where ``lead`` is zero or more extra stacking
axes (finite-difference stencils, line-search probes).  Everything is
vectorized, so thousands of independent searches advance together.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError

GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)

@dataclass
class ExtremumResult:
    values: np.ndarray
    points: np.ndarray
    error_estimate: float
    iterations: int


def uniform_sphere(rng, count, dim):
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _normalize(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _tangent_gradient(func, x, step):
    """Central-difference gradient of ``func`` extended 0-homogeneously, projected to T_x S."""
    dim = x.shape[-1]
    e = step * np.concatenate([np.eye(dim), -np.eye(dim)])
    pts = _normalize(x[None] + e.reshape((2 * dim,) + (1,) * (x.ndim - 1) + (dim,)))
    vals = func(pts)
    grad = np.moveaxis((vals[:dim] - vals[dim:]) / (2.0 * step), 0, -1)
    radial = np.sum(grad * x, axis=-1, keepdims=True)
    return grad - radial * x


def _great_circle(x, d, theta):
    theta = theta[..., None]
    return np.cos(theta) * x + np.sin(theta) * d


def _line_search(func, x, d, sfx, sense, coarse, zoom_levels):
    """Maximize ``sense * func`` along cos(t) x + sin(t) d for t in [0, pi/2].

    A coarse grid is followed by zoom levels: five points around the current
    estimate, a parabolic vertex through the best three, spacing divided by
    four.  Every level is a single stacked evaluation.  The returned angle is
    always one that was evaluated, so the value never decreases.  ``sfx`` is
    ``sense * func(x)``.
    """
    grid = np.linspace(0.0, 0.5 * np.pi, coarse)
    g = grid[1:].reshape((-1,) + (1,) * x.ndim)
    vals = np.concatenate([sfx[None], sense * func(np.cos(g) * x[None] + np.sin(g) * d[None])])
    best = np.argmax(vals, axis=0)
    theta = grid[best]
    keep = theta
    fbest = np.take_along_axis(vals, best[None], axis=0)[0]
    step = 0.25 * (grid[1] - grid[0])
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    for _ in range(zoom_levels):
        ang = np.clip(theta[None] + step * offsets.reshape((-1,) + (1,) * theta.ndim), 0.0, 0.5 * np.pi)
        a = ang[..., None]
        fv = sense * func(np.cos(a) * x[None] + np.sin(a) * d[None])
        i = np.argmax(fv, axis=0)
        improved = np.take_along_axis(fv, i[None], axis=0)[0] > fbest
        t_best = np.take_along_axis(ang, i[None], axis=0)[0]
        f_new = np.take_along_axis(fv, i[None], axis=0)[0]
        keep = np.where(improved, t_best, keep)
        fbest = np.where(improved, f_new, fbest)
        # parabolic vertex through the best interior point and its neighbours
        j = np.clip(i, 1, 3)
        f0 = np.take_along_axis(fv, (j - 1)[None], axis=0)[0]
        f1 = np.take_along_axis(fv, j[None], axis=0)[0]
        f2 = np.take_along_axis(fv, (j + 1)[None], axis=0)[0]
        t1 = np.take_along_axis(ang, j[None], axis=0)[0]
        denom = f0 - 2.0 * f1 + f2
        shift = np.where(denom < 0.0, 0.5 * (f0 - f2) / np.where(denom < 0.0, denom, -1.0), 0.0)
        vertex = np.clip(t1 + np.clip(shift, -1.0, 1.0) * step, 0.0, 0.5 * np.pi)
        # the vertex is the next centre; ``keep`` is the best angle evaluated so far
        theta = np.where(denom < 0.0, vertex, keep)
        step *= 0.25
    ang = theta[..., None]
    fv = sense * func(np.cos(ang) * x + np.sin(ang) * d)
    better = fv > fbest
    return np.where(better, theta, keep), np.where(better, fv, fbest)


def _golden_search(func, x, d, sfx, sense, coarse, golden_iters):
    """Golden-section version of :func:`_line_search`."""
    grid = np.linspace(0.0, 0.5 * np.pi, coarse)
    g = grid[1:].reshape((-1,) + (1,) * x.ndim)
    vals = np.concatenate([sfx[None], sense * func(np.cos(g) * x[None] + np.sin(g) * d[None])])
    best = np.argmax(vals, axis=0)
    h = grid[1] - grid[0]
    lo = np.clip(grid[best] - h, 0.0, None)
    hi = np.clip(grid[best] + h, None, 0.5 * np.pi)
    a = hi - GOLDEN * (hi - lo)
    b = lo + GOLDEN * (hi - lo)
    fa = sense * func(_great_circle(x, d, a))
    fb = sense * func(_great_circle(x, d, b))
    for _ in range(golden_iters):
        left = fa > fb
        hi = np.where(left, b, hi)
        lo = np.where(left, lo, a)
        probe = np.where(left, hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo))
        fp = sense * func(_great_circle(x, d, probe))
        a, b = np.where(left, probe, b), np.where(left, a, probe)
        fa, fb = np.where(left, fp, fb), np.where(left, fa, fp)
    theta = np.where(fa > fb, a, b)
    fnew = np.maximum(fa, fb)
    fbest = np.take_along_axis(vals, best[None], axis=0)[0]
    better = fnew > fbest
    return np.where(better, theta, grid[best]), np.where(better, fnew, fbest)


def sphere_extremum(
    func,
    dim,
    batch_shape=(),
    *,
    sense=1,
    samples=64,
    seed=0,
    starts=2,
    tol=1e-13,
    max_iter=100,
    grad_step=1e-5,
    coarse=9,
    zoom_levels=6,
    golden_iters=40,
    line_search="golden",
    candidates=None,
    indexed=False,
):
    """Global maximum (``sense=+1``) or minimum (``sense=-1``) of ``func`` on S^(dim-1).

    Parameters
    ----------
    func : callable
        Vectorized function, see module docstring.
    dim : int
        Ambient real dimension of the sphere.
    batch_shape : tuple
        Shape of the independent problems solved together.
    samples : int
        Number of seeded uniform samples shared by every batch element.
    starts : int
        Number of best samples polished per batch element.
    tol : float
        Polishing of a problem stops once none of its starts improves by more
        than ``tol`` (scaled by ``max(1, |f|)``) over one iteration.
    line_search : {"golden", "zoom"}
        Polishing line search; ``"zoom"`` trades wider calls for fewer of them.
    candidates : array, optional
        Extra starting points of shape ``(c, dim)`` appended to the samples.
    indexed : bool
        If true, ``batch_shape`` must be one-dimensional and ``func`` is called
        as ``func(v, idx)`` with ``v`` of shape ``lead + (len(idx), m, dim)``
        holding only the problems ``idx`` that are still being polished.

    Returns
    -------
    ExtremumResult
        ``values`` has shape ``batch_shape``; ``error_estimate`` is the largest
        final polishing improvement.
    """
    if line_search not in ("golden", "zoom"):
        raise ValueError("line_search must be 'golden' or 'zoom'")
    if sense not in (1, -1):
        raise ValueError("sense must be +1 or -1")
    batch_shape = tuple(batch_shape)
    size = int(np.prod(batch_shape, dtype=int))
    rng = np.random.default_rng(seed)
    pts = uniform_sphere(rng, samples, dim)
    if candidates is not None:
        pts = np.concatenate([pts, _normalize(np.asarray(candidates, dtype=float))], axis=0)

    if indexed:
        def call(v, idx):
            return func(v, idx)
    else:
        def call(v, idx):
            return func(v.reshape(v.shape[:-3] + batch_shape + v.shape[-2:])).reshape(v.shape[:-1])

    everyone = np.arange(size)
    grid = np.broadcast_to(pts, (size,) + pts.shape)
    vals = sense * call(grid, everyone)
    starts = min(starts, pts.shape[0])
    order = np.argsort(-vals, axis=-1, kind="stable")[..., :starts]
    x = np.take_along_axis(grid, order[..., None], axis=-2).copy()
    fx = sense * np.take_along_axis(vals, order, axis=-1)

    # each problem stops on its own improvement, so results do not depend on
    # which other problems share the batch
    last = np.zeros(size)
    active = everyone
    iterations = 0
    for it in range(1, max_iter + 1):
        if active.size == 0:
            break
        iterations = it
        idx = active if indexed else everyone

        def f(v, idx=idx):
            return call(v, idx)

        xa = x[idx]
        sfa = sense * fx[idx]
        g = sense * _tangent_gradient(f, xa, grad_step)
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
        tiny = norm[..., 0] < 1e-300
        d = np.where(norm > 1e-300, g / np.where(norm > 1e-300, norm, 1.0), 0.0)
        if line_search == "golden":
            theta, fnew = _golden_search(f, xa, d, sfa, sense, coarse, golden_iters)
        else:
            theta, fnew = _line_search(f, xa, d, sfa, sense, coarse, zoom_levels)
        live = np.isin(idx, active)
        accept = (fnew > sfa) & ~tiny & live[:, None]
        delta = np.where(accept, fnew - sfa, 0.0)
        x[idx] = np.where(accept[..., None], _normalize(_great_circle(xa, d, theta)), xa)
        fx[idx] = np.where(accept, sense * fnew, fx[idx])
        rel = np.max(delta / np.maximum(1.0, np.abs(fx[idx])), axis=-1)
        last[idx[live]] = rel[live]
        active = idx[live & (rel > tol)]
    if active.size:
        raise ConvergenceError(
            f"extremum refinement did not converge in {max_iter} iterations "
            f"for {active.size} problem(s) (last improvement {np.max(last[active]):.3e})"
        )
    pick = np.argmax(sense * fx, axis=-1)
    values = np.take_along_axis(fx, pick[..., None], axis=-1)[..., 0]
    points = np.take_along_axis(x, pick[..., None, None], axis=-2)[..., 0, :]
    return ExtremumResult(
        values=values.reshape(batch_shape),
        points=points.reshape(batch_shape + (dim,)),
        error_estimate=float(np.max(last)) if size else 0.0,
        iterations=iterations,
    )
