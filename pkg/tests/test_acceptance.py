"""Acceptance criteria 1-9.

Each test prints exactly one ``C<i> PASS|FAIL`` line (visible without ``-s``)
and then asserts the same condition.  Run on its own with

    pytest tests/test_acceptance.py -v
"""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from hoferlab.connection import (
    CutoffRho,
    build_from_loop,
    class_points,
    curvature,
    epsilon_width_certificate,
    hofer_norm_curvature,
    pairing_with_class,
)
from hoferlab.cpn import hofer_length, maslov_residue, phi_loop, psi_loop
from hoferlab.quadrature import PolarGrid
from hoferlab.sections import constant_section, cr_residual_norm, energy, energy_identity_residual, taming_check
from hoferlab.symplin import diagonal_phase_loop, maslov_crossing_oracle, maslov_index, random_lagrangian_loop
from hoferlab.torus import (
    DensityField,
    hamiltonian_oracle_length,
    minimize_width,
    moser_flow,
    pullback_residual,
    self_convergence_order,
    snake_disc,
    translation_loop_length,
)

ROOT = Path(__file__).resolve().parents[1]
GRID = PolarGrid(24, 32)
CASES = [(k, n) for n in range(1, 4) for k in range(1, n + 1)]

# K-area extrema shared between criteria 2 and 4
_EXTREMA = {}


def _verdict(capsys, label, ok, detail):
    with capsys.disabled():
        print(f"\n{label} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _extrema(k, n, eps):
    key = (k, n, eps)
    if key not in _EXTREMA:
        _EXTREMA[key] = hofer_norm_curvature(build_from_loop(psi_loop(k, n), CutoffRho(eps)), GRID)
    return _EXTREMA[key]


def test_c1_hofer_lengths(capsys):
    worst, slowest = 0.0, 0.0
    for k, n in CASES:
        start = time.perf_counter()
        worst = max(worst, abs(hofer_length(psi_loop(k, n)).value - 0.5), abs(hofer_length(phi_loop(k, n)).value - k / 2))
        slowest = max(slowest, time.perf_counter() - start)
    _verdict(capsys, "C1", worst <= 1e-6 and slowest < 10.0, f"max |length - closed form| = {worst:.2e}, slowest case {slowest:.2f} s")


def test_c2_karea_equals_length(capsys):
    worst = 0.0
    for k, n in CASES:
        length = hofer_length(psi_loop(k, n)).value
        for eps in (0.1, 0.2):
            worst = max(worst, abs(_extrema(k, n, eps).value - length))
    _verdict(capsys, "C2", worst <= 2e-6, f"max |karea - length| over eps 0.1, 0.2 = {worst:.2e}")


def test_c3_pairings(capsys):
    worst = 0.0
    for k, n in CASES:
        conn = build_from_loop(psi_loop(k, n))
        pts = class_points(n)
        worst = max(
            worst,
            abs(pairing_with_class(conn, pts["A+"], GRID) - (k - 1 - n) / (2 * n + 2)),
            abs(pairing_with_class(conn, pts["A-"], GRID) - k / (2 * n + 2)),
        )
    _verdict(capsys, "C3", worst <= 1e-8, f"max pairing error = {worst:.2e}")


def test_c4_epsilon_certificate(capsys):
    worst, chain = 0.0, True
    for k, n in CASES:
        cert = epsilon_width_certificate(k, n, GRID, extrema=_extrema(k, n, 0.1).extrema)
        worst = max(worst, abs(cert.upper - 0.5), abs(cert.lower - 0.5))
        chain = chain and cert.lower <= cert.upper
    _verdict(capsys, "C4", worst <= 1e-5 and chain, f"max |bound - 1/2| = {worst:.2e}, lower <= upper in every case: {chain}")


def test_c5_maslov(capsys):
    diag = all(maslov_index(diagonal_phase_loop(k, n)) == k for n in range(1, 5) for k in range(n + 1))
    disagree = 0
    for seed in range(100):
        path, expected = random_lagrangian_loop(1 + seed % 3, seed=seed)
        a = maslov_index(path)
        disagree += int(a != expected or a != maslov_crossing_oracle(path, seed=seed))
    residues = all(maslov_residue(k, n).residue == k % (n + 1) for n in range(1, 4) for k in range(0, 2 * n + 3))
    ok = diag and disagree == 0 and residues
    _verdict(capsys, "C5", ok, f"diagonal loops exact: {diag}, oracle disagreements on 100 loops: {disagree}, residues: {residues}")


def test_c6_torus(capsys):
    rows = minimize_width(0.3, [0.1, 0.05, 0.02, 0.01])
    widths = [r["width"] for r in rows]
    decreasing = all(b < a for a, b in zip(widths, widths[1:]))
    gap = widths[-1] - 0.3
    oracle = max(abs(hamiltonian_oracle_length(snake_disc(0.3, d).boundary) - translation_loop_length(snake_disc(0.3, d).boundary)) for d in (0.1, 0.01))
    cited = all(r["lower_bound_verified"] is False for r in rows)
    ok = decreasing and gap < 0.01 and oracle <= 1e-8 and cited
    detail = f"widths {', '.join(f'{w:.4f}' for w in widths)}, final gap {gap:.4f}, oracle diff {oracle:.1e}, lower bound cited only: {cited}"
    _verdict(capsys, "C6", ok, detail)


def test_c7_moser(capsys):
    size = 256
    f0 = DensityField(np.ones((size, size)))
    f1 = DensityField.from_function(lambda x, y: 1.0 + 0.3 * np.cos(2 * np.pi * x), size)
    residual = pullback_residual(moser_flow(f0, f1, 64), f0, f1)
    _, orders = self_convergence_order(f0, f1, (40, 80, 160))
    ok = residual < 1e-4 and min(orders) >= 3.5
    _verdict(capsys, "C7", ok, f"pullback residual {residual:.2e} (256^2, 64 steps), observed order {min(orders):.2f}")


def _sampled_c(conn, sign, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((4000, conn.n + 1)) + 1j * rng.standard_normal((4000, conn.n + 1))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    r = np.sqrt(rng.uniform(0, 1, 4000))
    a = rng.uniform(0, 2 * np.pi, 4000)
    om = curvature(conn, r * np.cos(a), r * np.sin(a), z)
    return om.max() + 0.1 if sign > 0 else om.min() - 0.1


def test_c8_sections(capsys):
    cr, en, qdiff, taming = 0.0, 0.0, 0.0, 0.0
    for k, n in CASES:
        spec = psi_loop(k, n)
        conn = build_from_loop(spec)
        pts = class_points(n)
        q = {}
        for cls, sign in (("A+", 1), ("A-", -1)):
            u = constant_section(pts[cls], spec, breakpoints=conn.breakpoints)
            cr = max(cr, cr_residual_norm(u, conn, sign))
            en = max(en, energy(u, conn))
            q[cls] = energy_identity_residual(u, conn)
        qdiff = max(qdiff, abs(q["A+"] - q["A-"] + 0.5))
    for n, sign in ((1, 1), (2, 1), (2, -1), (3, -1)):
        conn = build_from_loop(psi_loop(1, n))
        rep = taming_check(conn.with_c(_sampled_c(conn, sign)), samples=1000, seed=n, sign=sign)
        taming = max(taming, rep.identity_error)
    ok = cr < 1e-7 and en < 1e-10 and qdiff <= 1e-7 and taming < 1e-9
    _verdict(capsys, "C8", ok, f"CR residual {cr:.1e}, energy {en:.1e}, |Q(A+) - Q(A-) + 1/2| {qdiff:.1e}, taming identity {taming:.1e}")


C9_REPORTS = [
    ["maslov", "--k", "2", "--n", "3"],
    ["reproduce", "theorem-a", "--k", "1", "--n", "2"],
    ["verify-sections", "--loop", "psi:1,2", "--perturbations", "2"],
    ["torus", "--deltas", "0.1,0.01"],
    ["moser", "--size", "64", "--order-steps", "40,80,160"],
]


def _run(args, threads, **kw):
    env = dict(os.environ, HOFERLAB_THREADS=str(threads))
    return subprocess.run([sys.executable, *args], env=env, cwd=ROOT, capture_output=True, **kw)


def test_c9_parallelism_invariance(capsys, tmp_path):
    suites, identical = {}, True
    tests = [str(p) for p in sorted((ROOT / "tests").glob("test_*.py")) if p.name != "test_acceptance.py"]
    for threads in (1, 4):
        res = _run(["-m", "pytest", "-q", "-p", "no:cacheprovider", *tests], threads)
        suites[threads] = res.returncode == 0
    for i, argv in enumerate(C9_REPORTS):
        outputs = []
        for threads in (1, 4):
            path = tmp_path / f"r{i}_{threads}.json"
            res = _run(["-m", "hoferlab.cli", *argv, "--json", str(path)], threads)
            outputs.append(path.read_bytes() if res.returncode == 0 and path.exists() else None)
        identical = identical and outputs[0] is not None and outputs[0] == outputs[1]
    ok = all(suites.values()) and identical
    detail = f"invariant suite passes with 1 and 4 threads: {suites[1]}, {suites[4]}; {len(C9_REPORTS)} JSON reports byte-identical: {identical}"
    _verdict(capsys, "C9", ok, detail)
