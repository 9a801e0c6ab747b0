import numpy as np
import pytest

from hoferlab.connection import build_from_loop, class_points, curvature, flat_connection, pairing_with_class
from hoferlab.cpn import metric_h, psi_loop
from hoferlab.errors import DomainError
from hoferlab.quadrature import PolarGrid
from hoferlab.sections import (
    LiftedTangent,
    SectionGrid,
    admissible_section,
    constant_section,
    cr_residual,
    cr_residual_norm,
    critical_component_points,
    energy,
    energy_identity_residual,
    lifted_J_apply,
    section_derivatives,
    symplectic_energy,
    taming_check,
    tau_form,
)

K, N = 1, 2


@pytest.fixture(scope="module")
def setup():
    spec = psi_loop(K, N)
    conn = build_from_loop(spec)
    return spec, conn, class_points(N)


def _sampled_c(conn, sense, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((4000, conn.n + 1)) + 1j * rng.standard_normal((4000, conn.n + 1))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    r = np.sqrt(rng.uniform(0, 1, 4000))
    a = rng.uniform(0, 2 * np.pi, 4000)
    om = curvature(conn, r * np.cos(a), r * np.sin(a), z)
    return om.max() + 0.1 if sense > 0 else om.min() - 0.1


def test_constant_sections_are_horizontal(setup):
    spec, conn, pts = setup
    up = constant_section(pts["A+"], spec, breakpoints=conn.breakpoints)
    um = constant_section(pts["A-"], spec, breakpoints=conn.breakpoints)
    assert cr_residual_norm(up, conn, 1) < 1e-7
    assert cr_residual_norm(um, conn, -1) < 1e-7
    assert energy(up, conn) < 1e-10
    assert energy(um, conn) < 1e-10


def test_flat_connection_constant_section_exact():
    spec = psi_loop(0, 2)
    u = constant_section(np.array([0.6, 0.0, 0.8]), spec)
    conn = flat_connection(2)
    assert np.max(np.abs(cr_residual(u, conn))) == 0.0
    assert energy(u, conn) == 0.0


def test_grid_route_converges_at_second_order(setup):
    spec, conn, pts = setup
    errs = []
    for angular in (64, 128, 256):
        # enough radial nodes that the angular differences dominate
        u = admissible_section(spec, pts["A+"], 0.3, seed=1, cutoff=conn.rho, radial=96, angular=angular)
        exact = section_derivatives(u, method="sampler")
        approx = section_derivatives(u, method="grid")
        errs.append(max(np.max(np.abs(a - b)) for a, b in zip(exact, approx)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_cr_residual_of_constant_section_on_grid_route(setup):
    spec, conn, pts = setup
    u = constant_section(pts["A+"], spec, breakpoints=conn.breakpoints)
    assert cr_residual_norm(u, conn, 1, method="grid") < 1e-7


def test_energy_nonnegative_and_quadratic(setup):
    spec, conn, pts = setup
    e = {}
    for a in (1e-2, 1e-3):
        u = admissible_section(spec, pts["A+"], a, seed=3, cutoff=conn.rho, angular=128)
        e[a] = energy(u, conn)
        assert e[a] >= 0.0
    assert e[1e-2] / e[1e-3] == pytest.approx(100.0, rel=0.05)


def test_energy_independent_of_angular_offset(setup):
    spec, conn, pts = setup
    a = admissible_section(spec, pts["A+"], 0.2, seed=4, cutoff=conn.rho, angular=128)
    b = admissible_section(spec, pts["A+"], 0.2, seed=4, cutoff=conn.rho, angular=128, offset=0.37)
    assert abs(energy(a, conn) - energy(b, conn)) < 1e-9


def test_energy_identity_values(setup):
    spec, conn, pts = setup
    q = {}
    for cls in ("A+", "A-"):
        u = constant_section(pts[cls], spec, breakpoints=conn.breakpoints)
        q[cls] = energy_identity_residual(u, conn)
        assert q[cls] == pytest.approx(pairing_with_class(conn, pts[cls], PolarGrid(24, 32)), abs=1e-8)
    assert q["A+"] - q["A-"] == pytest.approx(-0.5, abs=1e-7)


def test_same_component_same_q():
    spec = psi_loop(2, 3)
    conn = build_from_loop(spec)
    p = class_points(3)["A+"]
    q0 = energy_identity_residual(constant_section(p, spec, breakpoints=conn.breakpoints), conn)
    others = critical_component_points(spec, p, 2, seed=5)
    assert not np.allclose(np.abs(others[0]), np.abs(p))
    for z in others:
        q = energy_identity_residual(constant_section(z, spec, breakpoints=conn.breakpoints), conn)
        assert q == pytest.approx(q0, abs=1e-7)


def test_q_invariant_under_perturbation(setup):
    spec, conn, pts = setup
    q0 = energy_identity_residual(constant_section(pts["A-"], spec, breakpoints=conn.breakpoints), conn)
    for seed in range(5):
        u = admissible_section(spec, pts["A-"], 0.3, seed=seed, cutoff=conn.rho, angular=128)
        assert energy(u, conn) > 1e-4
        assert energy_identity_residual(u, conn) == pytest.approx(q0, abs=1e-6)
        assert symplectic_energy(u, conn) != pytest.approx(0.0, abs=1e-6)


def test_section_rejects_other_loop(setup):
    spec, conn, pts = setup
    u = constant_section(pts["A+"], spec)
    with pytest.raises(DomainError):
        cr_residual(u, build_from_loop(psi_loop(2, 2)))


def test_boundary_violation_and_grid_size(setup):
    spec, _, _ = setup
    with pytest.raises(DomainError):
        constant_section(np.array([1.0, 1.0, 0.0]) / np.sqrt(2), spec)
    with pytest.raises(ValueError):
        constant_section(np.array([1.0, 0.0, 0.0]), spec, radial=8, angular=16)


def test_json_round_trip(setup):
    spec, conn, pts = setup
    u = admissible_section(spec, pts["A+"], 0.2, seed=2, cutoff=conn.rho)
    v = SectionGrid.from_json(u.to_json())
    assert np.max(np.abs(v.values - u.values)) < 1e-15
    assert v.sampler is None
    assert energy(v, conn) == pytest.approx(energy(u, conn, method="grid"), abs=1e-14)
    doc = u.to_dict()
    doc["extra"] = 1
    with pytest.raises(ValueError):
        SectionGrid.from_json(doc)


# ---------------------------------------------------------------- J-tilde


def _tangents(n, count, seed):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, n + 1)) + 1j * rng.standard_normal((count, n + 1))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    zeta = rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape)
    zeta -= np.sum(z.conj() * zeta, axis=-1, keepdims=True) * z
    base = (rng.uniform(-0.6, 0.6, count), rng.uniform(-0.6, 0.6, count))
    return base, z, LiftedTangent(rng.standard_normal(count), rng.standard_normal(count), zeta)


def test_lifted_J_examples(setup):
    _, conn, _ = setup
    base, z, v = _tangents(N, 20, 6)
    zero = np.zeros(20)
    vert = lifted_J_apply(conn, base, z, LiftedTangent(zero, zero, v.zeta))
    assert np.all(vert.xi == 0) and np.all(vert.eta == 0)
    assert np.max(np.abs(vert.zeta - 1j * v.zeta)) < 1e-14
    unit = lifted_J_apply(conn, base, z, LiftedTangent(np.ones(20), zero, np.zeros_like(v.zeta)))
    from hoferlab.cpn import hamiltonian_vector_field

    x, y = base
    xf = hamiltonian_vector_field(lambda w: conn.F(x, y, w), z)
    xg = hamiltonian_vector_field(lambda w: conn.G(x, y, w), z)
    assert np.all(unit.xi == 0) and np.all(unit.eta == 1)
    assert np.max(np.abs(unit.zeta - (-1j * xf + xg))) < 1e-12


@pytest.mark.parametrize("sign", [1, -1])
def test_lifted_J_squares_to_minus_one(setup, sign):
    _, conn, _ = setup
    base, z, v = _tangents(N, 200, 7)
    w = lifted_J_apply(conn, base, z, lifted_J_apply(conn, base, z, v, sign=sign), sign=sign)
    assert np.max(np.abs(w.as_array() + v.as_array())) < 1e-10


def test_taming_identity_n1():
    conn = build_from_loop(psi_loop(1, 1))
    rep = taming_check(conn.with_c(_sampled_c(conn, 1)), samples=1000, seed=0)
    assert rep.identity_error < 1e-9
    assert rep.positive is True
    assert rep.tamed_samples == 1000


def test_taming_negative_side():
    conn = build_from_loop(psi_loop(1, 2))
    rep = taming_check(conn.with_c(_sampled_c(conn, -1)), samples=1000, seed=1, sign=-1)
    assert rep.identity_error < 1e-9
    assert rep.positive is True


def test_taming_vertical_vectors(setup):
    _, conn, _ = setup
    base, z, v = _tangents(N, 30, 8)
    zero = np.zeros(30)
    vert = LiftedTangent(zero, zero, v.zeta)
    lhs = tau_form(conn, base, z, vert, lifted_J_apply(conn, base, z, vert))
    assert np.max(np.abs(lhs - metric_h(z, v.zeta, v.zeta))) < 1e-12
    assert np.all(lhs > 0)
