"""Symplectic linear algebra on R^2n = C^n and Maslov indices of Lagrangian loops.

Coordinates on R^2n are ``(x_1..x_n, y_1..y_n)`` with ``z_j = x_j + i y_j``
and ``omega_0 = sum dx_j ^ dy_j``.  A Lagrangian subspace is stored as
``U . R^n`` for a unitary frame ``U``.  The loop ``t -> exp(pi i t) R``
in C has Maslov index +1.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DegenerateBasisError, DomainError, OracleFailureError, UndersampledError

UNITARY_TOL = 1e-12
CLOSURE_TOL = 1e-9
RANK_TOL = 1e-10


@dataclass(frozen=True)
class UnitaryFrame:
    entries: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.entries, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError("frame must be a square complex matrix")
        err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
        if err > UNITARY_TOL:
            raise ValueError(f"frame is not unitary (max |U*U - I| = {err:.2e})")
        object.__setattr__(self, "entries", u)

    @property
    def n(self):
        return self.entries.shape[0]

    def real_basis(self):
        """Columns of U as vectors of R^2n."""
        return np.vstack([self.entries.real, self.entries.imag])


def orthonormalize(basis):
    """Modified Gram-Schmidt on the columns of ``basis`` (complex n x n).

    Raises
    ------
    DegenerateBasisError
        If the reciprocal condition number of the input is below 1e-10.
    """
    a = np.array(basis, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DegenerateBasisError("need n column vectors in C^n")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] / sv[0] < RANK_TOL:
        raise DegenerateBasisError("columns are (numerically) linearly dependent")
    q = a.copy()
    n = q.shape[1]
    for j in range(n):
        for i in range(j):
            q[:, j] -= np.vdot(q[:, i], q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    # one reorthogonalization pass keeps U*U - I at roundoff level
    for j in range(n):
        for i in range(j):
            q[:, j] -= np.vdot(q[:, i], q[:, j]) * q[:, i]
        q[:, j] /= np.linalg.norm(q[:, j])
    return UnitaryFrame(q)


def omega0(v, w):
    """Standard symplectic pairing of vectors in R^2n."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    n = v.shape[-1] // 2
    return np.sum(v[..., :n] * w[..., n:] - v[..., n:] * w[..., :n], axis=-1)


def is_lagrangian(vectors, tol=1e-10):
    """True iff the n given vectors of R^2n span an n-dimensional isotropic subspace."""
    vs = np.atleast_2d(np.asarray(vectors, dtype=float))
    count, dim = vs.shape
    if dim % 2 or count != dim // 2:
        return False
    if np.linalg.matrix_rank(vs, tol=tol) < count:
        return False
    n = count
    gram = vs[:, :n] @ vs[:, n:].T - vs[:, n:] @ vs[:, :n].T
    return bool(np.max(np.abs(gram)) <= tol)


def frame_from_real_basis(vectors):
    """Unitary frame spanning the Lagrangian subspace with the given real basis."""
    vs = np.atleast_2d(np.asarray(vectors, dtype=float))
    if not is_lagrangian(vs, tol=1e-8):
        raise DomainError("basis does not span a Lagrangian subspace")
    n = vs.shape[0]
    columns = (vs[:, :n] + 1j * vs[:, n:]).T
    return orthonormalize(columns)


@dataclass(frozen=True)
class LagrangianPath:
    times: np.ndarray
    frames: np.ndarray
    closed: bool = True

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.frames, dtype=complex)
        if u.ndim != 3 or u.shape[0] != t.shape[0] or u.shape[1] != u.shape[2]:
            raise ValueError("frames must have shape (samples, n, n) matching times")
        if t.shape[0] < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if abs(t[0]) > 1e-15 or abs(t[-1] - 1.0) > 1e-15:
            raise ValueError("sample times must start at 0 and end at 1")
        err = np.max(np.abs(np.einsum("sji,sjk->sik", u.conj(), u) - np.eye(u.shape[1])))
        if err > UNITARY_TOL:
            raise ValueError(f"frames are not unitary (max error {err:.2e})")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frames", u)

    @property
    def n(self):
        return self.frames.shape[1]

    def closure_error(self):
        """Distance of U(0)^-1 U(1) from the real orthogonal group."""
        m = self.frames[0].conj().T @ self.frames[-1]
        return float(np.max(np.abs(m.imag)))

    def is_closed(self):
        return self.closure_error() <= CLOSURE_TOL

    @classmethod
    def from_function(cls, frame_fn, samples, closed=True):
        t = np.linspace(0.0, 1.0, samples)
        return cls(t, np.stack([np.asarray(frame_fn(s), dtype=complex) for s in t]), closed)

    def reparametrized(self, phi):
        """Same frames at new times ``phi(t)`` for an increasing bijection phi of [0, 1]."""
        return LagrangianPath(np.asarray(phi(self.times), dtype=float), self.frames, self.closed)

    def concatenate(self, other):
        """Traverse ``self`` then ``other`` (aligned so other starts where self ends)."""
        if self.n != other.n:
            raise ValueError("paths live in different dimensions")
        shift = self.frames[-1] @ other.frames[0].conj().T
        times = np.concatenate([0.5 * self.times, 0.5 + 0.5 * other.times[1:]])
        frames = np.concatenate([self.frames, np.einsum("ij,sjk->sik", shift, other.frames[1:])])
        return LagrangianPath(times, frames, self.closed and other.closed)

    def to_json(self):
        samples = []
        for t, u in zip(self.times, self.frames):
            samples.append({"t": float(t), "frame": [[float(z.real), float(z.imag)] for z in u.reshape(-1)]})
        return json.dumps({"n": self.n, "samples": samples})

    @classmethod
    def from_json(cls, text):
        """Parse ``{"n": n, "samples": [{"t": t, "frame": [[re, im], ...]}]}``.

        ``frame`` is either n*n ``[re, im]`` pairs in row-major order or n rows of
        n pairs.  Real 2n x n bases can be given instead as ``"basis"`` (n vectors
        of R^2n) and are converted to unitary frames.
        """
        doc = json.loads(text) if isinstance(text, str) else text
        n = int(doc["n"])
        times, frames = [], []
        for s in doc["samples"]:
            times.append(float(s["t"]))
            if "basis" in s:
                frames.append(frame_from_real_basis(s["basis"]).entries)
                continue
            arr = np.asarray(s["frame"], dtype=float)
            z = arr[..., 0] + 1j * arr[..., 1]
            frames.append(z.reshape(n, n))
        return cls(np.array(times), np.array(frames))


def _det_squared(path):
    return np.linalg.det(path.frames) ** 2


def maslov_index(path):
    """Winding number of ``t -> det(U(t))^2`` by principal-branch phase increments.

    Raises
    ------
    DomainError
        The path is not closed.
    UndersampledError
        Some phase increment reaches pi/2.
    """
    if not path.closed or not path.is_closed():
        raise DomainError(f"path is not a loop (closure error {path.closure_error():.2e})")
    d = _det_squared(path)
    d = d / np.abs(d)
    steps = np.angle(d[1:] / d[:-1])
    if np.any(np.abs(steps) >= 0.5 * np.pi):
        i = int(np.argmax(np.abs(steps)))
        raise UndersampledError(
            f"phase step {steps[i]:.3f} between samples {i} and {i + 1} reaches pi/2; refine sampling"
        )
    winding = steps.sum() / (2.0 * np.pi)
    index = int(np.rint(winding))
    if abs(winding - index) >= 0.1:
        raise UndersampledError(f"unwrapped winding {winding:.4f} is not close to an integer")
    return index


def _souriau(path, reference):
    """Symmetric unitaries S(t) = (W*U)(W*U)^T whose eigenvalue 1 marks crossings with W R^n."""
    a = np.einsum("ij,sjk->sik", reference.conj().T, path.frames)
    return np.einsum("sij,skj->sik", a, a)


def _signed_crossings(eigs, degenerate_tol):
    """Count eigenvalue passages through 1, counterclockwise positive."""
    total = 0
    prev = eigs[0]
    for cur in eigs[1:]:
        cost = np.abs(prev[:, None] - cur[None, :])
        rows, cols = linear_sum_assignment(cost)
        for i, j in zip(rows, cols):
            a = np.angle(prev[i])
            step = np.angle(cur[j] / prev[i])
            b = a + step
            if min(abs(a), abs(b)) > 0.5:
                # far from 1; a swapped match cannot change the count
                continue
            if abs(step) >= 0.25 * np.pi:
                raise UndersampledError("eigenvalue step too large for crossing tracking")
            count = _passage(a, b)
            # a competing match that would count differently means the crossing is not regular
            for jj in np.flatnonzero(cost[i] < 2.0 * cost[i, j] + degenerate_tol):
                if jj != j and _passage(a, a + np.angle(cur[jj] / prev[i])) != count:
                    raise _Degenerate()
            total += count
        prev = cur
    return total


def _passage(a, b):
    if a <= 0.0 < b:
        return 1
    if b <= 0.0 < a:
        return -1
    return 0


class _Degenerate(Exception):
    pass


def maslov_crossing_oracle(path, seed=0, max_perturbations=3):
    """Maslov index as a signed count of crossings with a reference Lagrangian.

    The eigenvalues of ``S(t) = (W*U)(W*U)^T`` are tracked by optimal matching;
    each counterclockwise passage through 1 is a positive crossing.  If an
    eigenvalue sits on 1 at a sample or eigenvalues cannot be matched
    unambiguously, the count is retried with a reference ``W = diag(e^{i phi_j})``
    whose seeded phases are spread over ``[0, pi)``.
    """
    if not path.closed or not path.is_closed():
        raise DomainError(f"path is not a loop (closure error {path.closure_error():.2e})")
    n = path.n
    rng = np.random.default_rng(seed)
    reference = np.eye(n, dtype=complex)
    for attempt in range(max_perturbations + 1):
        s = _souriau(path, reference)
        eigs = np.linalg.eigvals(s)
        eigs = eigs / np.abs(eigs)
        if np.min(np.abs(np.angle(eigs))) > 1e-8:
            try:
                return _signed_crossings(eigs, 1e-9)
            except _Degenerate:
                pass
        # spread the reference phases so that eigenvalues moving together stay apart
        phases = np.pi * (np.arange(n) + rng.uniform(0.25, 0.75, n)) / n
        reference = np.diag(np.exp(1j * phases))
    raise OracleFailureError("degenerate crossings persisted after reference perturbations")


def diagonal_phase_loop(k, n, samples=64):
    """The loop t -> diag(exp(pi i t) x k, 1 x (n - k)) of Maslov index k."""
    def frame(t):
        d = np.ones(n, dtype=complex)
        d[:k] = np.exp(1j * np.pi * t)
        return np.diag(d)
    return LagrangianPath.from_function(frame, samples)


def random_lagrangian_loop(n, seed=0, samples=512, modes=2, max_shift=2, scale=0.5):
    """Seeded loop ``exp(i H(t)) diag(exp(pi i m_j t)) O`` with its Maslov index ``sum m_j``.

    ``H`` is a random periodic Hermitian trigonometric polynomial, so
    ``det exp(iH)`` does not wind; ``O`` is a random real orthogonal matrix.

    Returns
    -------
    (LagrangianPath, int)
    """
    rng = np.random.default_rng(seed)
    shifts = rng.integers(-max_shift, max_shift + 1, n)

    def herm():
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return 0.5 * scale * (a + a.conj().T) / np.sqrt(n)

    coeffs = [(herm(), herm()) for _ in range(modes)]
    orth, _ = np.linalg.qr(rng.standard_normal((n, n)))

    def frame(t):
        h = sum(c * np.cos(2 * np.pi * (j + 1) * t) + s * np.sin(2 * np.pi * (j + 1) * t) for j, (c, s) in enumerate(coeffs))
        w, v = np.linalg.eigh(h)
        rot = (v * np.exp(1j * w)) @ v.conj().T
        return rot @ np.diag(np.exp(1j * np.pi * shifts * t)) @ orth

    return LagrangianPath.from_function(frame, samples), int(shifts.sum())
