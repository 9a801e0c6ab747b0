import numpy as np
import pytest

from hoferlab.errors import (
    CohomologyObstructionError,
    ConstructionError,
    InvalidDiscError,
    OrientationError,
    StepSizeError,
)
from hoferlab.torus import (
    DensityField,
    EmbeddedDisc,
    TorusCurve,
    area,
    compose,
    curve_from_csv,
    curve_from_json,
    curve_to_csv,
    curves_to_svg,
    embeddedness_report,
    flow_to_svg,
    hamiltonian_oracle_length,
    identity_error,
    minimize_width,
    moser_flow,
    moser_flow_inverse,
    moser_one_form,
    pullback_residual,
    radial_rescale,
    realize_jacobian,
    self_convergence_order,
    signed_area,
    snake_disc,
    translation_loop_length,
)


def _square(a, modes):
    """Fourier truncation of the square [0, a]^2 parametrized by arc length."""
    s = np.arange(8192) / 8192
    u = 4 * s
    x = np.select([u < 1, u < 2, u < 3], [a * u, a, a * (3 - u)], 0.0)
    y = np.select([u < 1, u < 2, u < 3], [0.0, a * (u - 1), a], a * (4 - u))
    fx, fy = np.fft.rfft(x) / s.size, np.fft.rfft(y) / s.size
    m = slice(1, modes + 1)
    return TorusCurve(
        "fourier", x0=fx[0].real, y0=fy[0].real,
        xc=2 * fx[m].real, xs=-2 * fx[m].imag, yc=2 * fy[m].real, ys=-2 * fy[m].imag,
    )


# ---------------------------------------------------------------- area


def test_circle_area():
    assert area(EmbeddedDisc(TorusCurve.circle(0.2))) == pytest.approx(np.pi * 0.04, abs=1e-9)


def test_smoothed_square_area():
    curve = _square(0.3, 400)
    exact = signed_area(curve)
    poly = curve.polyline(1 << 16)
    q = np.roll(poly, -1, axis=0)
    shoelace = 0.5 * np.sum(poly[:, 0] * q[:, 1] - q[:, 0] * poly[:, 1])
    assert exact == pytest.approx(shoelace, abs=1e-8)
    assert area(EmbeddedDisc(curve)) == pytest.approx(0.09, abs=1e-4)


def test_orientation_flip():
    c = TorusCurve.circle(0.15)
    assert signed_area(c.reversed()) == pytest.approx(-signed_area(c), abs=1e-15)
    disc = EmbeddedDisc(c.reversed())
    assert disc.orientation == -1
    assert area(disc) == pytest.approx(area(EmbeddedDisc(c)), abs=1e-15)


def test_area_invariant_under_reparametrization_and_translation():
    c = _square(0.25, 64)
    a0 = signed_area(c)
    assert signed_area(c.reparametrized(0.137)) == pytest.approx(a0, abs=1e-13)
    assert signed_area(c.translated(0.4, -2.7)) == pytest.approx(a0, abs=1e-13)
    pts = c.polyline(1024)
    sampled = TorusCurve.from_samples(pts)
    assert signed_area(sampled.reparametrized(100)) == pytest.approx(signed_area(sampled), abs=1e-13)


def test_invalid_discs():
    figure_eight = TorusCurve("fourier", xc=[0.0, 0.0], xs=[0.2, 0.0], yc=[0.0, 0.0], ys=[0.0, 0.1])
    with pytest.raises(InvalidDiscError):
        EmbeddedDisc(figure_eight)
    with pytest.raises(InvalidDiscError):
        EmbeddedDisc(TorusCurve.circle(0.6))
    ok, _, _ = embeddedness_report(TorusCurve.circle(0.3))
    assert ok


# ---------------------------------------------------------------- lengths


@pytest.mark.parametrize("r", [0.05, 0.1, 0.3])
def test_circle_translation_length(r):
    c = TorusCurve.circle(r, center=(0.3, 0.7))
    assert translation_loop_length(c) == pytest.approx(2 * r, abs=1e-10)
    assert hamiltonian_oracle_length(c) == pytest.approx(2 * r, abs=1e-8)


def test_thin_disc_width():
    w = 0.03
    c = TorusCurve("fourier", xc=[w / 2], ys=[0.4])
    assert translation_loop_length(c) == pytest.approx(w, abs=1e-8)


def test_oracle_agrees_on_snake():
    disc = snake_disc(0.2, 0.05)
    assert hamiltonian_oracle_length(disc.boundary) == pytest.approx(translation_loop_length(disc.boundary), abs=1e-8)


def test_oracle_agrees_on_fourier_curves():
    c = _square(0.2, 48).translated(0.1, 0.2)
    assert hamiltonian_oracle_length(c) == pytest.approx(translation_loop_length(c), abs=1e-8)


# ---------------------------------------------------------------- snake


@pytest.mark.parametrize("delta,bound", [(0.05, 0.25), (0.01, 0.21)])
def test_snake_disc_contract(delta, bound):
    disc = snake_disc(0.2, delta)
    assert area(disc) == pytest.approx(0.2, abs=1e-6)
    assert translation_loop_length(disc.boundary) <= bound
    assert embeddedness_report(disc.boundary)[0]


def test_snake_width_monotone():
    rows = minimize_width(0.3, [0.1, 0.05, 0.02, 0.01])
    widths = [r["width"] for r in rows]
    assert all(a > b for a, b in zip(widths, widths[1:]))
    for r, cap in zip(rows, [0.4, 0.35, 0.32, 0.31]):
        assert r["width"] <= cap
        assert r["width"] > r["area"]
        assert r["lower_bound_verified"] is False
    assert rows[-1]["gap"] < 0.01


def test_minimize_width_single_row_and_disc_input():
    rows = minimize_width(EmbeddedDisc(TorusCurve.circle(0.2)), [0.05])
    assert len(rows) == 1
    assert rows[0]["area"] == pytest.approx(np.pi * 0.04, abs=1e-6)


def test_snake_infeasible():
    with pytest.raises(ConstructionError):
        snake_disc(0.2, 0.05, column_width=1e-4)
    with pytest.raises(ConstructionError):
        snake_disc(1.2, 0.05)


# ---------------------------------------------------------------- io


def test_curve_io_round_trip():
    c = _square(0.2, 8)
    again = curve_from_json(c.to_dict())
    assert np.allclose(again.evaluate(np.linspace(0, 1, 50)), c.evaluate(np.linspace(0, 1, 50)))
    from_csv = curve_from_csv(curve_to_csv(c, 256))
    assert signed_area(from_csv) == pytest.approx(signed_area(TorusCurve.from_samples(c.polyline(256))), abs=1e-12)
    svg = curves_to_svg([c])
    assert svg.startswith("<svg") and svg == curves_to_svg([c])


# ---------------------------------------------------------------- moser


def _densities(size, amp=0.3):
    return DensityField.from_function(lambda x, y: 1.0 + 0 * x, size), DensityField.from_function(
        lambda x, y: 1.0 + amp * np.cos(2 * np.pi * x), size
    )


def test_one_form_trivial():
    f0, _ = _densities(32)
    form = moser_one_form(f0, f0)
    assert np.max(np.abs(form.ax)) == 0.0 and np.max(np.abs(form.ay)) == 0.0


def test_one_form_cosine():
    f0, f1 = _densities(256)
    form = moser_one_form(f0, f1)
    x, _ = np.meshgrid(np.arange(256) / 256, np.arange(256) / 256, indexing="ij")
    assert np.max(np.abs(form.phi + 0.3 * np.cos(2 * np.pi * x) / (4 * np.pi**2))) < 1e-14
    assert np.max(np.abs(form.exterior_derivative() - (f1.values - f0.values))) < 1e-12


def test_one_form_random_smooth():
    rng = np.random.default_rng(0)
    size = 64
    x, y = np.meshgrid(np.arange(size) / size, np.arange(size) / size, indexing="ij")
    g = np.zeros_like(x)
    for a in range(1, 4):
        for b in range(-3, 4):
            g += rng.standard_normal() * np.cos(2 * np.pi * (a * x + b * y) + rng.uniform(0, 2 * np.pi))
    f0 = DensityField(np.full_like(x, 2.0))
    f1 = DensityField(2.0 + 0.1 * g)
    form = moser_one_form(f0, f1)
    assert np.max(np.abs(form.exterior_derivative() - 0.1 * g)) < 1e-10


def test_one_form_mean_mismatch():
    f0 = DensityField(np.ones((16, 16)))
    with pytest.raises(CohomologyObstructionError):
        moser_one_form(f0, DensityField(np.full((16, 16), 1.1)))


def test_density_normalization():
    f, scale = DensityField(np.full((8, 8), 3.0)).normalized()
    assert scale == 3.0 and f.mean == 1.0
    with pytest.raises(ValueError):
        DensityField(-np.ones((4, 4)))


def test_flow_identity():
    f0, _ = _densities(32)
    assert identity_error(moser_flow(f0, f0, 4)) == 0.0


def test_flow_pullback_small_grid():
    f0, f1 = _densities(64)
    psi = moser_flow(f0, f1, 64)
    assert pullback_residual(psi, f0, f1) < 1e-4
    back = moser_flow_inverse(f0, f1, 64)
    assert identity_error(compose(back, psi)) < 1e-5
    assert flow_to_svg(psi).startswith("<svg")


def test_flow_step_size_error():
    f0, f1 = _densities(256)
    with pytest.raises(StepSizeError) as info:
        moser_flow(f0, f1, 4)
    assert info.value.suggested_steps > 4


def test_rk4_order():
    f0, f1 = _densities(32)
    errs, orders = self_convergence_order(f0, f1, (40, 80, 160))
    assert errs[1] < errs[0] / 8
    assert orders[0] >= 3.5


# ---------------------------------------------------------------- disc maps


def _jacobian_at_zero(f, h=1e-5):
    return np.column_stack([
        (f(np.array([h, 0.0])) - f(np.array([-h, 0.0]))) / (2 * h),
        (f(np.array([0.0, h])) - f(np.array([0.0, -h]))) / (2 * h),
    ])


def test_realize_jacobian_identity():
    f = realize_jacobian(np.eye(2))
    z = np.random.default_rng(0).uniform(-0.7, 0.7, (50, 2))
    assert np.max(np.abs(f(z) - z)) < 1e-14


@pytest.mark.parametrize("psi", [np.diag([2.0, 0.5]), np.array([[2.0, 0.3], [-0.4, 0.7]]), np.array([[0.0, -1.5], [0.8, 0.2]])])
def test_realize_jacobian_derivative_and_boundary(psi):
    f = realize_jacobian(psi)
    assert np.max(np.abs(_jacobian_at_zero(f) - psi)) < 1e-6
    th = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    ring = np.stack([np.cos(th), np.sin(th)], axis=-1)
    assert np.max(np.abs(f(ring) - ring)) < 1e-12


def test_realize_jacobian_orientation():
    with pytest.raises(OrientationError):
        realize_jacobian(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("eps,delta", [(0.1, 0.1), (0.3, 0.05), (0.05, 0.5)])
def test_radial_rescale(eps, delta):
    g = radial_rescale(eps, delta)
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    circ = eps * np.stack([np.cos(th), np.sin(th)], axis=-1)
    assert np.max(np.abs(np.linalg.norm(g(circ), axis=-1) - 1.0)) < 1e-9
    r_out = 1 + delta / 2 + np.linspace(0, 1, 20)
    assert np.max(np.abs(g.profile(r_out) - r_out)) < 1e-12
    r_in = np.linspace(0, eps / 2, 20)
    assert np.max(np.abs(g.profile(r_in) - r_in)) < 1e-12
    r = np.linspace(0, 2, 10_000)
    assert np.all(np.diff(g.profile(r)) > 0)


def test_radial_rescale_thin_collars_stay_monotone():
    g = radial_rescale(0.01, 1e-6)
    r = np.linspace(0, 1.1, 10_000)
    assert np.min(g.derivative(r)) > 0
    with pytest.raises(ValueError):
        radial_rescale(1.5, 0.1)
