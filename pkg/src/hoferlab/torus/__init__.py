"""Translation loops of discs in the flat torus, serpentine discs, Moser isotopies and disc maps."""

from .curves import (
    EmbeddedDisc,
    TorusCurve,
    area,
    curve_from_csv,
    curve_from_json,
    curve_to_csv,
    curves_to_svg,
    embeddedness_report,
    hamiltonian_oracle_length,
    signed_area,
    translation_loop_length,
)
from .discmaps import JacobianRealization, RadialRescale, radial_rescale, realize_jacobian
from .moser import (
    DensityField,
    DiffeoSample,
    MoserOneForm,
    compose,
    flow_to_svg,
    identity_error,
    moser_flow,
    moser_flow_inverse,
    moser_one_form,
    pullback_residual,
    self_convergence_order,
    solve_poisson,
)
from .snake import SnakeLayout, minimize_width, snake_disc, snake_layout

__all__ = [
    "EmbeddedDisc", "TorusCurve", "area", "curve_from_csv", "curve_from_json", "curve_to_csv",
    "curves_to_svg", "embeddedness_report", "hamiltonian_oracle_length", "signed_area",
    "translation_loop_length", "JacobianRealization", "RadialRescale", "radial_rescale",
    "realize_jacobian", "DensityField", "DiffeoSample", "MoserOneForm", "compose", "flow_to_svg",
    "identity_error", "moser_flow", "moser_flow_inverse", "moser_one_form", "pullback_residual",
    "self_convergence_order", "solve_poisson", "SnakeLayout", "minimize_width", "snake_disc",
    "snake_layout",
]
