"""Command-line driver: ``hoferlab <command> [options]``.

Every command builds a report of rows ``(quantity, computed, reference,
tolerance, passed, provenance)`` and writes it as JSON (stdout unless
``--json`` is given), optionally also as CSV and SVG.  Reports are
deterministic for a fixed configuration: seeds are fixed and parallel work
is split and reduced in a fixed order, so the JSON is byte-identical for any
``HOFERLAB_THREADS``.

Exit status: 0 all rows pass, 1 a check failed, 2 usage or configuration
error, 3 a numerical routine failed to converge.
"""

import argparse
import csv
import io
import json
import sys
import traceback
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import reference as ref
from .connection import (
    CutoffRho,
    build_from_loop,
    class_points,
    curvature,
    epsilon_width_certificate,
    hofer_norm_curvature,
    pairing_with_class,
)
from .cpn import class_maslov_indices, hofer_length, loop_from_json, maslov_residue, parse_loop, psi_loop, phi_loop
from .errors import ConfigError, ConvergenceError, HoferlabError, OracleFailureError, UndersampledError
from .quadrature import PolarGrid
from .sections import (
    admissible_section,
    constant_section,
    cr_residual_norm,
    critical_component_points,
    energy,
    energy_identity_residual,
    taming_check,
)
from .symplin import diagonal_phase_loop, maslov_crossing_oracle, maslov_index, random_lagrangian_loop
from .torus import (
    DensityField,
    compose,
    curves_to_svg,
    flow_to_svg,
    hamiltonian_oracle_length,
    identity_error,
    moser_flow,
    moser_flow_inverse,
    pullback_residual,
    radial_rescale,
    realize_jacobian,
    self_convergence_order,
    snake_disc,
    translation_loop_length,
)
from .torus.curves import area as disc_area

SCHEMA = "hoferlab.report/1"
COMMANDS = ("maslov", "hofer-length", "karea", "pairing", "epsilon", "torus", "moser", "verify-sections", "reproduce")
TARGETS = ("theorem-a", "torus", "appendix")
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_CONVERGENCE = 0, 1, 2, 3


# ---------------------------------------------------------------- configuration

@dataclass
class RunConfig:
    """Validated run parameters.  JSON config files use the same keys."""

    command: str
    target: Optional[str] = None
    loop: Optional[str] = None
    loop_file: Optional[str] = None
    k: int = 1
    n: int = 2
    radial: Optional[int] = None
    angular: Optional[int] = None
    fiber_samples: int = 24
    t_nodes: int = 16
    eps: tuple = (0.1, 0.2)
    seed: int = 0
    random_loops: int = 100
    section_class: Optional[str] = None
    perturbations: int = 5
    area: float = 0.3
    deltas: tuple = (0.1, 0.05, 0.02, 0.01)
    column_width: float = 0.1
    size: int = 256
    steps: int = 64
    amplitude: float = 0.3
    order_steps: tuple = (40, 80, 160)
    json: Optional[str] = None
    csv: Optional[str] = None
    svg: Optional[str] = None

    def report_dict(self):
        """Parameters that determine the results (output paths excluded)."""
        out = asdict(self)
        for key in ("json", "csv", "svg"):
            out.pop(key)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


_POSITIVE_INT = {"k": 0, "n": 1, "radial": 2, "angular": 2, "fiber_samples": 1, "t_nodes": 1, "random_loops": 1, "perturbations": 1, "size": 8, "steps": 1}
_POSITIVE_FLOAT = {"area", "column_width", "amplitude"}
_FLOAT_LISTS = {"eps", "deltas"}
_INT_LISTS = {"order_steps"}
_STRINGS = {"command", "target", "loop", "loop_file", "section_class", "json", "csv", "svg"}


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in _STRINGS:
            if not isinstance(value, str):
                raise TypeError("expected a string")
            return value
        if key == "seed":
            if isinstance(value, bool) or int(value) != value or int(value) < 0:
                raise ValueError("expected a nonnegative integer")
            return int(value)
        if key in _POSITIVE_INT:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError("expected an integer")
            if int(value) < _POSITIVE_INT[key]:
                raise ValueError(f"must be at least {_POSITIVE_INT[key]}")
            return int(value)
        if key in _POSITIVE_FLOAT:
            v = float(value)
            if not v > 0.0:
                raise ValueError("must be positive")
            return v
        if key in _FLOAT_LISTS or key in _INT_LISTS:
            items = value.split(",") if isinstance(value, str) else list(value)
            conv = [float(x) for x in items if str(x).strip() != ""]
            if key in _INT_LISTS:
                if any(int(x) != x for x in conv):
                    raise ValueError("expected integers")
                conv = [int(x) for x in conv]
            if any(x <= 0 for x in conv):
                raise ValueError("entries must be positive")
            return tuple(conv)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key {key!r}: {exc} (got {value!r})") from None
    raise ConfigError(f"unknown key {key!r}")


def parse_config(doc, source="<config>"):
    """Build a :class:`RunConfig` from a dict, rejecting unknown keys."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    names = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(map(repr, unknown))}")
    if not doc.get("command"):
        raise ConfigError(f"{source}: no command given (one of {', '.join(COMMANDS)})")
    values = {key: _coerce(key, val) for key, val in doc.items()}
    cfg = RunConfig(**values)
    if cfg.command not in COMMANDS:
        raise ConfigError(f"{source}: key 'command': unknown command {cfg.command!r}")
    if cfg.command == "reproduce" and cfg.target not in TARGETS:
        raise ConfigError(f"{source}: reproduce needs a target in {', '.join(TARGETS)}")
    if cfg.section_class not in (None, "A+", "A-"):
        raise ConfigError(f"{source}: key 'section_class' must be 'A+' or 'A-'")
    if cfg.area >= 1.0:
        raise ConfigError(f"{source}: key 'area' must be below 1")
    return cfg


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if not text.strip():
        raise ConfigError(f"{path}: empty config")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


# ---------------------------------------------------------------- report

@dataclass
class ReportRow:
    quantity: str
    computed: Optional[float]
    reference: Optional[float]
    tolerance: Optional[float]
    passed: bool
    provenance: str

    def as_dict(self):
        return asdict(self)


def check_row(quantity, computed, reference, tolerance, provenance):
    """Row that passes iff ``|computed - reference| <= tolerance``."""
    computed = float(computed)
    reference = float(reference)
    return ReportRow(quantity, computed, reference, float(tolerance), bool(abs(computed - reference) <= tolerance), provenance)


def condition_row(quantity, computed, passed, provenance, reference=None, tolerance=None):
    return ReportRow(
        quantity, None if computed is None else float(computed),
        None if reference is None else float(reference),
        None if tolerance is None else float(tolerance), bool(passed), provenance,
    )


@dataclass
class Report:
    command: str
    config: dict
    rows: list
    tables: dict = field(default_factory=dict)
    figure: Optional[str] = None

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def as_dict(self):
        return {
            "schema": SCHEMA,
            "reference_table_version": ref.TABLE_VERSION,
            "command": self.command,
            "config": self.config,
            "rows": [r.as_dict() for r in self.rows],
            "tables": self.tables,
            "passed": self.passed,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_json(report):
    return json.dumps(_jsonable(report.as_dict()), indent=2, sort_keys=True) + "\n"


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["quantity", "computed", "reference", "tolerance", "passed", "provenance"])
    for r in report.rows:
        writer.writerow([r.quantity, _fmt(r.computed), _fmt(r.reference), _fmt(r.tolerance), "true" if r.passed else "false", r.provenance])
    return buf.getvalue()


def _fmt(v):
    return "" if v is None else repr(float(v))


def emit(report, fmt, path):
    """Write the report as ``json``, ``csv`` or ``svg`` to ``path``."""
    if fmt == "json":
        text = report_json(report)
    elif fmt == "csv":
        text = report_csv(report)
    elif fmt == "svg":
        if report.figure is None:
            raise ConfigError(f"command {report.command!r} produces no SVG figure")
        text = report.figure
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def line_plot_svg(xs, series, xlabel, ylabel, size=(480, 320), margin=40):
    """Polyline chart of ``series = {name: ys}`` against ``xs`` (deterministic text)."""
    w, h = size
    allx = np.asarray(xs, dtype=float)
    ally = np.concatenate([np.asarray(v, dtype=float) for v in series.values()])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    pad = 0.05 * (y1 - y0 if y1 > y0 else 1.0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return margin + (w - 2 * margin) * (x - x0) / (x1 - x0)

    def py(y):
        return h - margin - (h - 2 * margin) * (y - y0) / (y1 - y0)

    colors = ["#1f4e79", "#b03a2e", "#1e8449", "#7d3c98"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">']
    out.append(f'<rect x="{margin}" y="{margin}" width="{w - 2 * margin}" height="{h - 2 * margin}" fill="none" stroke="#888"/>')
    for i, (name, ys) in enumerate(series.items()):
        pts = " ".join(f"{px(a):.3f},{py(b):.3f}" for a, b in zip(allx, ys))
        color = colors[i % len(colors)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{w - margin - 4}" y="{margin + 14 * (i + 1)}" text-anchor="end" font-size="11" fill="{color}">{name}</text>')
    out.append(f'<text x="{w / 2:.1f}" y="{h - 8}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="12" y="{h / 2:.1f}" font-size="12" transform="rotate(-90 12 {h / 2:.1f})" text-anchor="middle">{ylabel}</text>')
    out.append(f'<text x="{margin}" y="{h - margin + 14}" font-size="10">{x0:.3g}</text>')
    out.append(f'<text x="{w - margin}" y="{h - margin + 14}" font-size="10" text-anchor="end">{x1:.3g}</text>')
    out.append(f'<text x="{margin - 4}" y="{h - margin}" font-size="10" text-anchor="end">{y0:.3g}</text>')
    out.append(f'<text x="{margin - 4}" y="{margin + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- commands

def _grid(cfg, radial, angular):
    return PolarGrid(cfg.radial or radial, cfg.angular or angular)


def _loop(cfg, default=None):
    if cfg.loop_file:
        try:
            with open(cfg.loop_file, encoding="utf-8") as fh:
                return loop_from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read loop file {cfg.loop_file}: {exc.strerror}") from None
    selector = cfg.loop or default or f"psi:{cfg.k},{cfg.n}"
    try:
        return parse_loop(selector)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _length_reference(spec):
    kind, _, args = spec.label.partition(":")
    nums = [int(a) for a in args.split(",")] if args else []
    if kind == "psi":
        return ref.lookup("hofer_length.psi"), {"k": nums[0], "n": nums[1]}
    if kind == "phi":
        return ref.lookup("hofer_length.phi"), {"k": nums[0], "n": nums[1]}
    if kind == "const":
        return ref.lookup("hofer_length.const"), {"k": 0, "n": nums[0]}
    return None, {}


def _psi_params(cfg, spec):
    kind, _, args = spec.label.partition(":")
    if kind != "psi":
        raise ConfigError(f"this command needs a psi:k,n loop (got {spec.label})")
    k, n = (int(a) for a in args.split(","))
    return k, n


def rows_maslov(cfg):
    k, n = cfg.k, cfg.n
    rows = []
    r = ref.lookup("maslov.diagonal")
    if k <= n:
        rows.append(check_row(f"maslov(diagonal loop k={k}, n={n})", maslov_index(diagonal_phase_loop(k, n)), r.value(k=k, n=n), 0, r.anchor))
    disagree = 0
    for s in range(cfg.random_loops):
        dim = 1 + s % 3
        path, expected = random_lagrangian_loop(dim, cfg.seed + s)
        a = maslov_index(path)
        b = maslov_crossing_oracle(path, seed=cfg.seed + s)
        disagree += int(a != b or a != expected)
    rows.append(check_row(f"winding vs crossing oracle disagreements ({cfg.random_loops} loops, n<=3)", disagree, 0, 0, "independent oracle: crossing-form count"))
    res = maslov_residue(k, n)
    r = ref.lookup("maslov.residue")
    rows.append(check_row(f"maslov(Lambda^{k}) mod {n + 1}", res.residue, r.value(k=k, n=n), 0, r.anchor))
    if 1 <= k <= n:
        plus, minus = class_maslov_indices(k, n)
        for name, val in (("A+", plus), ("A-", minus)):
            r = ref.lookup(f"maslov.{name}")
            rows.append(check_row(f"maslov({name}) for psi:{k},{n}", val, r.value(k=k, n=n), 0, r.anchor))
    return rows, {}


def rows_hofer_length(cfg):
    spec = _loop(cfg)
    hl = hofer_length(spec, cfg.t_nodes, max(cfg.fiber_samples, 64), cfg.seed)
    entry, params = _length_reference(spec)
    if entry is None:
        return [condition_row(f"hofer_length({spec.label})", hl.value, True, "custom loop: no closed form")], {}
    return [check_row(f"hofer_length({spec.label})", hl.value, entry.value(**params), 1e-6, entry.anchor)], {}


def _karea_rows(spec, cfg, eps_list, grid, keep=None):
    hl = hofer_length(spec, cfg.t_nodes, max(cfg.fiber_samples, 64), cfg.seed)
    entry, params = _length_reference(spec)
    rows, table = [], []
    ka = ref.lookup("karea")
    for eps in eps_list:
        conn = build_from_loop(spec, CutoffRho(eps))
        k_area = hofer_norm_curvature(conn, grid, cfg.fiber_samples, cfg.seed)
        if keep is not None:
            keep[eps] = k_area.extrema
        if entry is not None:
            rows.append(check_row(f"karea({spec.label}, eps={eps:g})", k_area.value, entry.value(**params), 2e-6, ka.anchor))
        rows.append(check_row(f"karea - hofer_length ({spec.label}, eps={eps:g})", k_area.value - hl.value, 0.0, 2e-6, ka.anchor))
        table.append({"eps": eps, "karea": k_area.value, "hofer_length": hl.value, "separable": k_area.analytic})
    return rows, table


def rows_karea(cfg):
    spec = _loop(cfg)
    rows, table = _karea_rows(spec, cfg, cfg.eps, _grid(cfg, 64, 128))
    return rows, {"karea": table}


def _pairing_rows(k, n, grid, conn=None, only=None):
    conn = build_from_loop(psi_loop(k, n)) if conn is None else conn
    rows = []
    for name, z in class_points(n).items():
        if only is not None and name != only:
            continue
        r = ref.lookup(f"pairing.{name}")
        rows.append(check_row(f"pairing({name}) psi:{k},{n}", pairing_with_class(conn, z, grid), r.value(k=k, n=n), 1e-8, r.anchor))
    return rows


def rows_pairing(cfg):
    k, n = _psi_params(cfg, _loop(cfg))
    return _pairing_rows(k, n, _grid(cfg, 64, 128), only=cfg.section_class), {}


def _epsilon_rows(k, n, cfg, grid, extrema=None):
    cert = epsilon_width_certificate(k, n, grid, cfg.fiber_samples, cfg.seed, extrema=extrema)
    r = ref.lookup("epsilon")
    if cert.lower is None:
        return [
            check_row(f"epsilon upper bound (k={k}, n={n})", cert.upper, 0.0, 1e-5, "constant loop: flat connection"),
            condition_row("epsilon lower bound", None, True, "not available for contractible loops"),
        ], cert
    return [
        check_row(f"epsilon upper bound (k={k}, n={n})", cert.upper, r.value(k=k, n=n), 1e-5, r.anchor + "; curvature integrals"),
        check_row(f"epsilon lower bound (k={k}, n={n})", cert.lower, r.value(k=k, n=n), 1e-5, r.anchor + "; pairing difference, nonvanishing section counts imported"),
        condition_row("chain: lower <= upper", cert.upper - cert.lower, cert.lower <= cert.upper + 1e-12, "epsilon <= K-area <= length"),
    ], cert


def rows_epsilon(cfg):
    k, n = (cfg.k, cfg.n) if cfg.loop is None and cfg.loop_file is None else _psi_params(cfg, _loop(cfg))
    rows, cert = _epsilon_rows(k, n, cfg, _grid(cfg, 64, 128))
    return rows, {"interval": list(cert.interval), "pairings": cert.pairings}


def rows_torus(cfg):
    a = cfg.area
    rows, table, discs = [], [], []
    for delta in cfg.deltas:
        disc = snake_disc(a, delta, cfg.column_width)
        width = translation_loop_length(disc.boundary)
        oracle = hamiltonian_oracle_length(disc.boundary)
        discs.append(disc)
        table.append({"delta": delta, "width": width, "area": disc_area(disc), "gap": width - a, "oracle": oracle})
        rows.append(condition_row(f"snake width (area={a:g}, delta={delta:g}) < area + delta", width, width < a + delta, "serpentine upper bound", a + delta))
        rows.append(check_row(f"translation length vs generator oracle (delta={delta:g})", width - oracle, 0.0, 1e-8, "independent oracle: oscillation of the generating Hamiltonian"))
    widths = [t["width"] for t in table]
    dec = all(w1 < w0 for w0, w1 in zip(widths[:-1], widths[1:]))
    rows.append(condition_row("snake widths decrease along the schedule", None, dec, "serpentine upper bound"))
    rows.append(check_row(f"final gap to area {a:g}", widths[-1] - a, 0.0, 0.01, "serpentine upper bound"))
    cited = ref.lookup("torus.nu")
    rows.append(condition_row("lower bound nu >= area (not computed)", None, True, cited.anchor + "; cited, energy-capacity inequality not reproduced", cited.value(area=a)))
    svg = curves_to_svg([d.boundary for d in discs[-1:]])
    return rows, {"torus": table}, svg


def _moser_densities(cfg):
    size = cfg.size
    f0 = DensityField(np.ones((size, size)))
    f1 = DensityField.from_function(lambda x, y: 1.0 + cfg.amplitude * np.cos(2 * np.pi * x), size)
    return f0, f1


def rows_moser(cfg):
    f0, f1 = _moser_densities(cfg)
    fwd = moser_flow(f0, f1, cfg.steps)
    rows = [check_row(f"pullback residual ({cfg.size}^2, {cfg.steps} steps)", pullback_residual(fwd, f0, f1), 0.0, 1e-4, "Moser isotopy: psi_1^* omega_1 = omega_0")]
    back = moser_flow_inverse(f0, f1, cfg.steps)
    rows.append(check_row("inverse composition identity error", identity_error(compose(back, fwd)), 0.0, 1e-6, "reversed isotopy inverts the flow"))
    table = {}
    if cfg.order_steps:
        errs, orders = self_convergence_order(f0, f1, cfg.order_steps)
        rows.append(condition_row(f"observed RK4 order (steps {','.join(map(str, cfg.order_steps))})", min(orders), min(orders) >= 3.5, "step-halving self-convergence", 4.0))
        table = {"order": {"steps": list(cfg.order_steps), "differences": errs, "orders": orders}}
    return rows, table, flow_to_svg(fwd)


def _section_rows(k, n, cls, cfg, conn=None):
    spec = psi_loop(k, n)
    conn = build_from_loop(spec) if conn is None else conn
    radial, angular = cfg.radial or 32, cfg.angular or 64
    pts = class_points(n)
    sign = 1 if cls == "A+" else -1
    other = "A-" if cls == "A+" else "A+"
    rows = []
    u = constant_section(pts[cls], spec, radial, angular, conn.breakpoints)
    rows.append(check_row(f"CR residual ({cls} constant section, sign {'+' if sign > 0 else '-'})", cr_residual_norm(u, conn, sign), 0.0, 1e-7, "constant sections at the critical real points are horizontal"))
    rows.append(check_row(f"energy ({cls} constant section)", energy(u, conn), 0.0, 1e-10, "constant horizontal sections have zero energy"))
    q = energy_identity_residual(u, conn)
    pr = ref.lookup(f"pairing.{cls}")
    rows.append(check_row(f"Q({cls}) = pairing", q, pr.value(k=k, n=n), 1e-8, "energy identity with E = 0; " + pr.anchor))
    for j, p in enumerate(critical_component_points(spec, pts[cls], 2, cfg.seed)):
        v = constant_section(p, spec, radial, angular, conn.breakpoints)
        rows.append(check_row(f"Q({cls}) at another point of the same component [{j}]", energy_identity_residual(v, conn) - q, 0.0, 1e-7, "Q depends only on the class"))
    q_other = energy_identity_residual(constant_section(pts[other], spec, radial, angular, conn.breakpoints), conn)
    diff = ref.lookup("sections.Q_difference")
    q_plus, q_minus = (q, q_other) if cls == "A+" else (q_other, q)
    rows.append(check_row("Q(A+) - Q(A-)", q_plus - q_minus, diff.value(k=k, n=n), 1e-7, diff.anchor))
    for s in range(cfg.perturbations):
        w = admissible_section(spec, pts[cls], cfg.amplitude, seed=cfg.seed + s, cutoff=conn.rho, radial=radial, angular=max(angular, 128))
        rows.append(check_row(f"Q invariance under perturbation [{s}]", energy_identity_residual(w, conn) - q, 0.0, 1e-6, "Q depends only on the class"))
    rng = np.random.default_rng(cfg.seed)
    probe = rng.standard_normal((4000, n + 1)) + 1j * rng.standard_normal((4000, n + 1))
    rad = np.sqrt(rng.uniform(0, 1, 4000))
    ang = rng.uniform(0, 2 * np.pi, 4000)
    om = curvature(conn, rad * np.cos(ang), rad * np.sin(ang), probe / np.linalg.norm(probe, axis=-1, keepdims=True))
    c = float(om.max() + 0.1) if sign > 0 else float(om.min() - 0.1)
    tam = taming_check(conn.with_c(c), samples=1000, seed=cfg.seed, sign=sign)
    rows.append(check_row(f"taming identity error (sign {'+' if sign > 0 else '-'}, 1000 samples)", tam.identity_error, 0.0, 1e-9, "tau(v, J~v) = |zeta - xi X_F - eta X_G|^2 + (c - Omega)(xi^2 + eta^2)"))
    rows.append(condition_row("taming positivity on the tamed side", tam.min_lhs, bool(tam.positive), "J~ is tamed when c exceeds the curvature"))
    return rows


def rows_verify_sections(cfg):
    k, n = _psi_params(cfg, _loop(cfg))
    return _section_rows(k, n, cfg.section_class or "A+", cfg), {}


def rows_theorem_a(cfg):
    k, n = cfg.k, cfg.n
    if not 1 <= k <= n:
        raise ConfigError("reproduce theorem-a needs 1 <= k <= n")
    rows = []
    psi = psi_loop(k, n)
    phi = phi_loop(k, n)
    for spec in (psi, phi):
        entry, params = _length_reference(spec)
        rows.append(check_row(f"hofer_length({spec.label})", hofer_length(spec, cfg.t_nodes, max(cfg.fiber_samples, 64), cfg.seed).value, entry.value(**params), 1e-6, entry.anchor))
    grid = _grid(cfg, 24, 32)
    keep = {}
    krows, table = _karea_rows(psi, cfg, cfg.eps, grid, keep)
    rows += krows
    rows += _pairing_rows(k, n, grid)
    eps0 = cfg.eps[0]
    erows, cert = _epsilon_rows(k, n, cfg, grid, keep.get(eps0) if abs(eps0 - 0.1) < 1e-15 else None)
    rows += erows
    nu = ref.lookup("nu")
    rows.append(condition_row(
        f"nu(Lambda^{k}) pinned: lower bound and length agree", cert.lower,
        abs(cert.lower - nu.value(k=k, n=n)) <= 1e-5 and abs(table[0]["hofer_length"] - nu.value(k=k, n=n)) <= 1e-5,
        nu.anchor + "; epsilon <= K-area = length", nu.value(k=k, n=n), 1e-5,
    ))
    res = maslov_residue(k, n)
    r = ref.lookup("maslov.residue")
    rows.append(check_row(f"maslov(Lambda^{k}) mod {n + 1}", res.residue, r.value(k=k, n=n), 0, r.anchor))
    return rows, {"karea": table, "epsilon_interval": list(cert.interval)}


def rows_appendix(cfg):
    rows, tables, svg = rows_moser(cfg)
    for psi in (np.array([[2.0, 0.3], [-0.4, 0.7]]), np.array([[0.0, -1.5], [0.8, 0.2]])):
        f = realize_jacobian(psi)
        h = 1e-5
        jac = np.column_stack([
            (f(np.array([h, 0.0])) - f(np.array([-h, 0.0]))) / (2 * h),
            (f(np.array([0.0, h])) - f(np.array([0.0, -h]))) / (2 * h),
        ])
        th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        ring = 0.95 * np.stack([np.cos(th), np.sin(th)], axis=-1)
        rows.append(check_row("realize_jacobian: d psi(0) - Psi", float(np.max(np.abs(jac - psi))), 0.0, 1e-6, "disc map with prescribed derivative at the centre"))
        rows.append(check_row("realize_jacobian: identity near the boundary", float(np.max(np.abs(f(ring) - ring))), 0.0, 1e-12, "disc map supported away from the boundary"))
    for eps, delta in ((0.1, 0.1), (0.3, 0.05)):
        g = radial_rescale(eps, delta)
        th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        circ = eps * np.stack([np.cos(th), np.sin(th)], axis=-1)
        rows.append(check_row(f"radial_rescale(eps={eps:g}): |f(eps-circle)| - 1", float(np.max(np.abs(np.linalg.norm(g(circ), axis=-1) - 1.0))), 0.0, 1e-12, "radial map of the eps-disc onto the unit disc"))
        r_out = 1.0 + 0.5 * delta + np.array([0.0, 0.01, 0.5])
        rows.append(check_row(f"radial_rescale(eps={eps:g}): identity beyond 1 + delta/2", float(np.max(np.abs(g.profile(r_out) - r_out))), 0.0, 1e-12, "radial map is the identity outside a collar"))
    return rows, tables, svg


def run(cfg):
    """Execute a validated configuration and return its :class:`Report`."""
    handlers = {
        "maslov": rows_maslov,
        "hofer-length": rows_hofer_length,
        "karea": rows_karea,
        "pairing": rows_pairing,
        "epsilon": rows_epsilon,
        "torus": rows_torus,
        "moser": rows_moser,
        "verify-sections": rows_verify_sections,
    }
    if cfg.command == "reproduce":
        handler = {"theorem-a": rows_theorem_a, "torus": rows_torus, "appendix": rows_appendix}[cfg.target]
    else:
        handler = handlers[cfg.command]
    out = handler(cfg)
    rows, tables = out[0], out[1]
    figure = out[2] if len(out) > 2 else None
    if figure is None and "torus" in tables:
        figure = line_plot_svg([t["delta"] for t in tables["torus"]], {"width": [t["width"] for t in tables["torus"]]}, "delta", "width")
    return Report(cfg.command if cfg.target is None else f"{cfg.command} {cfg.target}", cfg.report_dict(), rows, tables, figure)


# ---------------------------------------------------------------- argument parsing

def _common(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON config file (keys as in RunConfig)")
    parser.add_argument("--json", default=default, help="write the JSON report here instead of stdout")
    parser.add_argument("--csv", default=default, help="also write report rows as CSV")
    parser.add_argument("--svg", default=default, help="also write the command's SVG figure")
    parser.add_argument("--seed", type=int, default=default)


def _grid_arg(text):
    try:
        r, a = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be R,A (two integers)") from None
    return r, a


def build_parser():
    parser = argparse.ArgumentParser(prog="hoferlab", description="Numerical checks for Hofer lengths of Lagrangian loops.")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command")
    S = argparse.SUPPRESS

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=S)
        _common(p, suppress=True)
        return p

    def kn(p):
        p.add_argument("--k", type=int)
        p.add_argument("--n", type=int)

    def grid(p):
        p.add_argument("--grid", type=_grid_arg, help="polar grid R,A")
        p.add_argument("--radial", type=int)
        p.add_argument("--angular", type=int)
        p.add_argument("--fiber-samples", dest="fiber_samples", type=int)

    def loop(p):
        p.add_argument("--loop", help="psi:k,n | phi:k,n | const:n")
        p.add_argument("--loop-file", dest="loop_file", help="custom loop JSON")

    p = add("maslov", "Maslov indices, residues and oracle agreement")
    kn(p)
    p.add_argument("--random-loops", dest="random_loops", type=int)
    p = add("hofer-length", "Hofer length of a loop")
    loop(p)
    p.add_argument("--t-nodes", dest="t_nodes", type=int)
    p.add_argument("--fiber-samples", dest="fiber_samples", type=int)
    p = add("karea", "Hofer norm of the curvature of the loop-built connection")
    loop(p)
    grid(p)
    p.add_argument("--eps", help="comma-separated cutoff widths")
    p = add("pairing", "pairings with the classes A+ and A-")
    loop(p)
    grid(p)
    p.add_argument("--class", dest="section_class", choices=["A+", "A-"])
    p = add("epsilon", "bounds on the width of the non-symplectic interval")
    kn(p)
    loop(p)
    grid(p)
    p = add("torus", "serpentine discs and translation-loop lengths")
    p.add_argument("--area", type=float)
    p.add_argument("--deltas")
    p.add_argument("--column-width", dest="column_width", type=float)
    p = add("moser", "Moser isotopy on the torus")
    p.add_argument("--size", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--order-steps", dest="order_steps")
    p = add("verify-sections", "constant and perturbed sections: CR residual, energy, Q, taming")
    loop(p)
    p.add_argument("--class", dest="section_class", choices=["A+", "A-"])
    p.add_argument("--grid", type=_grid_arg)
    p.add_argument("--radial", type=int)
    p.add_argument("--angular", type=int)
    p.add_argument("--perturbations", type=int)
    p.add_argument("--amplitude", type=float)
    p = add("reproduce", "headline checks")
    p.add_argument("target", choices=TARGETS)
    kn(p)
    grid(p)
    p.add_argument("--eps")
    p.add_argument("--area", type=float)
    p.add_argument("--deltas")
    p.add_argument("--size", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--order-steps", dest="order_steps")
    return parser


def config_from_args(args):
    ns = dict(vars(args))
    doc = {}
    path = ns.pop("config", None)
    if path:
        doc = load_config_file(path)
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    cli = {k: v for k, v in ns.items() if v is not None}
    if "grid" in cli:
        cli["radial"], cli["angular"] = cli.pop("grid")
    if cli.get("command") is None:
        cli.pop("command", None)
    merged = {**doc, **cli}
    return parse_config(merged, path or "<command line>")


def _module_of(exc):
    tb = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(tb):
        parts = frame.filename.replace("\\", "/").split("/")
        if "hoferlab" in parts:
            i = len(parts) - 1 - parts[::-1].index("hoferlab")
            return ".".join(["hoferlab"] + [p[:-3] if p.endswith(".py") else p for p in parts[i + 1:]])
    return "hoferlab"


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"hoferlab: usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        report = run(cfg)
    except ConfigError as exc:
        print(f"hoferlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, OracleFailureError, UndersampledError) as exc:
        print(f"hoferlab: numerical failure in {_module_of(exc)}: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except HoferlabError as exc:
        print(f"hoferlab: {type(exc).__name__} in {_module_of(exc)}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    try:
        if cfg.json:
            emit(report, "json", cfg.json)
        else:
            sys.stdout.write(report_json(report))
        if cfg.csv:
            emit(report, "csv", cfg.csv)
        if cfg.svg:
            emit(report, "svg", cfg.svg)
    except ConfigError as exc:
        print(f"hoferlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"hoferlab: cannot write output: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if cfg.json:
        for r in report.rows:
            mark = "PASS" if r.passed else "FAIL"
            print(f"{mark}  {r.quantity}: {r.computed!r} (reference {r.reference!r}, tol {r.tolerance!r})")
    return EXIT_PASS if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
