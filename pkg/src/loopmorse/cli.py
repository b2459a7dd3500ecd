"""Command-line front end: ``python -m loopmorse {analyze,verify,export-tables}``.

Exit codes: 0 success, 2 a check failed, 3 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, LoopMorseError, MissingCohomologyError
from .jacobi import (
    JacobiField,
    broken_jacobi,
    commutation_residual,
    commuting_jacobi_endpoint_ratio,
    conjugate_points,
    curvature_spectrum,
)
from .lie import GroupSpec, group_from_name
from .morse import (
    CriticalComponent,
    classify_all,
    component_ok,
    enumerate_critical,
    morse_series,
    perfection_check,
    poincare_target,
    valid_comparison_degree,
)
from .pathspace import (
    directional_derivative,
    fd_directional,
    fd_hessian,
    gradient_norm,
    hessian,
    random_config,
    random_tangent,
    y_n_bound,
)
from .spaces import (
    QHSpace,
    make_space,
    verify_commuting,
    verify_first_order_image,
    verify_invar,
    verify_nondeg,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 2, 3

DEFAULT_TOLERANCES = {
    "gradient_fd": 1e-6,
    "gradient_critical": 1e-8,
    "hessian_fd": 1e-4,
    "lemma": 1e-5,
    "jacobi_continuity": 1e-12,
    "jacobi_commutation": 1e-10,
    "null_containment": 1e-6,
}


@dataclass
class RunConfig:
    group: str = "su2"
    metric_scale: float = 1.0
    space: str = "point"
    eta: list[float] | None = None
    genus: int = 1
    n: int = 16
    degree: int = 4
    tolerances: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    format: str = "json"
    seed: int = 42
    samples: int = 10
    cohomology: dict[str, list[int]] | None = None

    def validate(self) -> None:
        if self.group not in ("su2", "su3"):
            raise ConfigError(f"unknown group {self.group!r}")
        if not self.metric_scale > 0:
            raise ConfigError("metric scale c must be positive")
        if self.n < 1:
            raise ConfigError("n must be at least 1")
        if self.degree < 0:
            raise ConfigError("degree cap must be nonnegative")
        if self.genus < 1:
            raise ConfigError("genus must be at least 1")
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if self.space == "conjugacy" and not self.eta:
            raise ConfigError("the conjugacy space needs --eta")
        if self.space == "double" and self.group != "su2":
            raise ConfigError("critical-set enumeration for the double is available for su2 only")

    def build(self) -> tuple[GroupSpec, QHSpace]:
        G = group_from_name(self.group, self.metric_scale)
        try:
            return G, make_space(G, self.space, self.eta, self.genus)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# -- JSON output ---------------------------------------------------------------


def _plain(obj):
    """Convert to JSON-ready values; floats are kept for later formatting."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON with floats printed to 17 significant digits (non-finite -> null)."""

    def emit(v, depth):
        pad, inner = " " * (indent * depth), " " * (indent * (depth + 1))
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{inner}{json.dumps(k)}: {emit(x, depth + 1)}" for k, x in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + pad + "}"
        if isinstance(v, list):
            if not v:
                return "[]"
            if all(not isinstance(x, (dict, list)) for x in v):
                return "[" + ", ".join(emit(x, depth + 1) for x in v) + "]"
            return "[\n" + ",\n".join(inner + emit(x, depth + 1) for x in v) + "\n" + pad + "]"
        if isinstance(v, float):
            return format(v, ".17g") if math.isfinite(v) else "null"
        return json.dumps(v)

    return emit(_plain(obj), 0) + "\n"


# -- report pieces -------------------------------------------------------------


def _check(name, passed, residual, tolerance, condition, vacuous=False, **details):
    return {
        "name": name,
        "condition": condition,
        "passed": bool(passed),
        "vacuous": bool(vacuous),
        "residual": float(residual),
        "tolerance": float(tolerance),
        **({"details": details} if details else {}),
    }


def component_row(comp: CriticalComponent) -> dict:
    return {
        "label": comp.label,
        "k": comp.lattice_k,
        "xi_angles": comp.xi_angles,
        "critical_value": comp.critical_value,
        "index": comp.index,
        "orbit_type": comp.orbit_type,
        "centralizer_dim": comp.centralizer_dim,
        "stabilizer_dim": comp.stabilizer_dim,
        "null_dim": comp.null_dim,
        "null_angle": comp.null_angle,
        "min_check": comp.min_check,
        "min_margin": comp.min_margin,
        "index_samples": comp.index_samples,
        "torus_fixed": comp.torus_fixed,
        "torus_fixed_margin": comp.torus_fixed_margin,
    }


def _base_report(cfg: RunConfig, command: str, G: GroupSpec) -> dict:
    echo = asdict(cfg)
    return {
        "tool": "loopmorse",
        "version": __version__,
        "command": command,
        "config": echo,
        "rho_bar": G.injectivity_radius(),
        "y_n_bound": y_n_bound(G, cfg.n),
    }


def _series_block(comps, cfg, space, equivariant):
    try:
        series = morse_series(comps, cfg.degree, equivariant, cfg.cohomology)
    except MissingCohomologyError as exc:
        return {"available": False, "reason": str(exc)}, None
    block = {"available": True, "coefficients": series.coefficients, "text": str(series)}
    perf = None
    target = poincare_target(space, cfg.degree, equivariant)
    if target is not None:
        rep = perfection_check(series, target, valid_comparison_degree(space, cfg.n))
        perf = {
            "target": target.coefficients,
            "difference": rep.difference,
            "compared_degree": rep.compared_degree,
            "verdict": rep.verdict,
        }
    block["perfection"] = perf
    return block, perf


def run_analyze(cfg: RunConfig, timings: dict | None = None) -> dict:
    cfg.validate()
    G, space = cfg.build()
    report = _base_report(cfg, "analyze", G)
    t0 = time.perf_counter()
    comps = enumerate_critical(space, cfg.n, np.random.default_rng(cfg.seed))
    t1 = time.perf_counter()
    classify_all(comps, cfg.n, seed=cfg.seed)
    t2 = time.perf_counter()
    report["components"] = [component_row(c) for c in comps]
    checks = []
    tol = cfg.tolerances["null_containment"]
    for c in comps:
        checks.append(_check(f"minimum[{c.label}]", c.min_check, max(0.0, -c.min_margin), 1e-9,
                             "Morse-Kirwan condition: f_n attains its minimum on Sigma_C at C"))
        checks.append(_check(f"null_containment[{c.label}]", c.null_angle < tol, c.null_angle, tol,
                             "Morse-Kirwan condition: Hessian null space lies in T Sigma_C"))
        constant = all(i == c.index for i in c.index_samples)
        checks.append(_check(f"index_constancy[{c.label}]", constant, 0.0 if constant else 1.0, 0.5,
                             "index is constant along the component"))
        checks.append(_check(f"torus_fixed[{c.label}]", c.torus_fixed,
                             c.torus_fixed_margin if math.isfinite(c.torus_fixed_margin) else 0.0, 1e-6,
                             "negative normal bundle has no torus-fixed vectors",
                             vacuous=c.index == 0))
    report["series"], perf = _series_block(comps, cfg, space, False)
    report["equivariant_series"], perf_eq = _series_block(comps, cfg, space, True)
    for name, p in (("perfection", perf), ("equivariant_perfection", perf_eq)):
        if p is not None:
            checks.append(_check(name, p["verdict"] == "perfect",
                                 float(sum(abs(v) for v in p["difference"])), 0.5,
                                 "Morse series equals the Poincare series up to the valid degree"))
    report["checks"] = checks
    report["passed"] = all(ch["passed"] for ch in checks) and all(component_ok(c, tol) for c in comps)
    if timings is not None:
        timings.update({"enumerate": t1 - t0, "classify": t2 - t1, "total": time.perf_counter() - t0})
    return report


def _relative(a, b, floor=1e-12):
    return abs(a - b) / max(abs(b), floor)


def run_verify(cfg: RunConfig, timings: dict | None = None) -> dict:
    cfg.validate()
    G, space = cfg.build()
    tol = cfg.tolerances
    rng = np.random.default_rng(cfg.seed)
    report = _base_report(cfg, "verify", G)
    checks = []
    t0 = time.perf_counter()

    # first variation at random configurations
    worst = 0.0
    for _ in range(cfg.samples):
        c = random_config(space, cfg.n, rng)
        eta = random_tangent(c, rng)
        worst = max(worst, _relative(directional_derivative(c, eta), fd_directional(c, eta)))
    checks.append(_check("gradient_fd", worst < tol["gradient_fd"], worst, tol["gradient_fd"],
                         "first variation formula matches finite differences"))

    comps = enumerate_critical(space, cfg.n, rng)
    worst_grad, worst_hess = 0.0, 0.0
    for comp in comps:
        c = comp.config(cfg.n)
        worst_grad = max(worst_grad, gradient_norm(c) / cfg.n)
        for _ in range(cfg.samples):
            e1, e2 = random_tangent(c, rng), random_tangent(c, rng)
            worst_hess = max(worst_hess, _relative(hessian(c, e1, e2), fd_hessian(c, e1, e2)))
    checks.append(_check("gradient_critical", worst_grad < tol["gradient_critical"], worst_grad,
                         tol["gradient_critical"], "gradient vanishes on lattice critical configurations"))
    checks.append(_check("hessian_fd", worst_hess < tol["hessian_fd"], worst_hess, tol["hessian_fd"],
                         "Jacobi-field Hessian formula matches finite differences"))

    # moment-map lemmas
    vacuous = space.kind == "point"
    lemma = {"first_order_image": 0.0, "commuting": 0.0, "nondeg": 0.0, "invar": 0.0}
    conds = {
        "first_order_image": "image of the moment-map differential is the annihilator of the stabilizer",
        "commuting": "fixed-set directions lie in the null space of the moment-map Hessian",
        "nondeg": "null directions of the moment-map Hessian in ker(Phi_*) are tangent to the fixed set",
        "invar": "conjugation Jacobi field identity for the moment-map Hessian",
    }
    if not vacuous:
        for _ in range(cfg.samples):
            m = space.random_point(rng)
            r = verify_first_order_image(space, m, tol["lemma"])
            lemma["first_order_image"] = max(lemma["first_order_image"], r.residual)
        nonzero = [c for c in comps if G.norm(c.xi) > 0] or comps
        for i in range(cfg.samples):
            comp = nonzero[i % len(nonzero)]
            g = G.random_element(rng)
            m, xi = space.act(g, comp.sample_point), G.Ad(g, comp.xi)
            lemma["commuting"] = max(lemma["commuting"], verify_commuting(space, m, xi, rng, 2).residual)
            lemma["nondeg"] = max(lemma["nondeg"], verify_nondeg(space, m, xi).residual)
            lemma["invar"] = max(lemma["invar"], verify_invar(space, m, xi, rng, 2).residual)
    for name, value in lemma.items():
        checks.append(_check(name, value < tol["lemma"], value, tol["lemma"], conds[name], vacuous=vacuous))

    # Jacobi fields
    worst_comm, worst_ratio, worst_cont = 0.0, np.inf, 0.0
    times = np.linspace(0, 1, 11)
    for _ in range(cfg.samples):
        g = G.random_element(rng)
        x, y = rng.normal(size=(2, G.matrix_dim))
        xi = G.Ad(g, G.torus_element(2 * (x - x.mean())))
        d0 = G.Ad(g, G.torus_element(y - y.mean()))
        f = JacobiField.vanishing_at_zero(curvature_spectrum(G, xi), d0)
        worst_comm = max(worst_comm, commutation_residual(f, times) / max(1.0, float(G.norm(d0 @ xi))))
        worst_ratio = min(worst_ratio, abs(commuting_jacobi_endpoint_ratio(f)))
        nodes = np.array([G.random_algebra(rng) for _ in range(cfg.n)])
        worst_cont = max(worst_cont, broken_jacobi(G, xi / 4, cfg.n, nodes).continuity_residual())
    checks.append(_check("jacobi_commutation", worst_comm < tol["jacobi_commutation"], worst_comm,
                         tol["jacobi_commutation"], "Jacobi fields with commuting initial data keep commuting"))
    checks.append(_check("jacobi_terminal_ratio", worst_ratio > 0.5, worst_ratio, 0.5,
                         "terminal value is a nonzero multiple of the terminal derivative"))
    checks.append(_check("jacobi_continuity", worst_cont < tol["jacobi_continuity"], worst_cont,
                         tol["jacobi_continuity"], "broken Jacobi field is continuous through the nodes"))

    report["checks"] = checks
    report["passed"] = all(ch["passed"] for ch in checks)
    if timings is not None:
        timings["total"] = time.perf_counter() - t0
    return report


# -- CSV tables ----------------------------------------------------------------

INDEX_COLUMNS = ["label", "k", "xi_angles", "critical_value_c_units", "index", "orbit_type", "torus_fixed"]
SERIES_COLUMNS = ["degree", "morse", "equivariant_morse", "target", "equivariant_target"]
SCHEDULE_COLUMNS = ["label", "conjugate_time", "multiplicity"]


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, list):
        return " ".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in columns])


def index_rows(report: dict) -> list[dict]:
    return [
        {**c, "critical_value_c_units": c["critical_value"]} for c in report.get("components", [])
    ]


def series_rows(report: dict) -> list[dict]:
    s, e = report.get("series") or {}, report.get("equivariant_series") or {}
    degree = report["config"]["degree"] if report.get("config") else -1
    rows = []
    for d in range(degree + 1):
        row = {"degree": d}
        if s.get("available"):
            row["morse"] = s["coefficients"][d]
            if s.get("perfection"):
                row["target"] = s["perfection"]["target"][d]
        if e.get("available"):
            row["equivariant_morse"] = e["coefficients"][d]
            if e.get("perfection"):
                row["equivariant_target"] = e["perfection"]["target"][d]
        rows.append(row)
    return rows


def schedule_rows(report: dict, G: GroupSpec | None) -> list[dict]:
    rows = []
    if G is None:
        return rows
    for c in report.get("components", []):
        if max(abs(a) for a in c["xi_angles"]) == 0:
            continue
        xi = G.torus_element(c["xi_angles"])
        for t, mult in conjugate_points(G, xi, 1.0):
            rows.append({"label": c["label"], "conjugate_time": float(t), "multiplicity": mult})
    return rows


def export_tables(report: dict, outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    cfg = report.get("config") or {}
    G = group_from_name(cfg["group"], cfg["metric_scale"]) if cfg else None
    paths = [outdir / "index_table.csv", outdir / "morse_series.csv", outdir / "conjugate_schedule.csv"]
    write_csv(paths[0], INDEX_COLUMNS, index_rows(report))
    write_csv(paths[1], SERIES_COLUMNS, series_rows(report))
    write_csv(paths[2], SCHEDULE_COLUMNS, schedule_rows(report, G))
    return paths


# -- argument parsing ----------------------------------------------------------


def _angles(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"cannot parse angles {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loopmorse", description="Broken-geodesic Morse analysis on SU(2)/SU(3) path spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--group", choices=["su2", "su3"], default="su2")
        p.add_argument("--metric-scale", type=float, default=1.0, help="c in <X,Y> = -c Re tr(XY)")
        p.add_argument("--space", choices=["point", "conjugacy", "double"], default="point")
        p.add_argument("--eta", type=_angles, help="diagonal angles of eta (comma separated)")
        p.add_argument("--genus", type=int, default=1)
        p.add_argument("--n", type=int, default=16, help="number of broken-geodesic segments")
        p.add_argument("--degree", type=int, default=4, help="degree cap for Morse series")
        p.add_argument("--tolerance", type=float, help="override every check tolerance")
        p.add_argument("--format", choices=["json", "csv"], default="json")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--samples", type=int, default=10, help="random samples per property check")
        p.add_argument("--cohomology", type=Path, help="JSON file mapping component labels to P_t coefficients")
        p.add_argument("--output", type=Path, help="output file (analyze/verify) or directory (export-tables)")
        p.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")

    common(sub.add_parser("analyze", help="enumerate and classify critical components"))
    common(sub.add_parser("verify", help="run the property-check suites"))
    exp = sub.add_parser("export-tables", help="write plot-ready CSV tables")
    common(exp)
    exp.add_argument("--from-report", type=Path, help="reuse a JSON report from analyze")
    return parser


def config_from_args(args) -> RunConfig:
    tolerances = dict(DEFAULT_TOLERANCES)
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        tolerances = {k: args.tolerance for k in tolerances}
    cohomology = None
    if args.cohomology is not None:
        try:
            cohomology = {str(k): [int(x) for x in v] for k, v in json.loads(args.cohomology.read_text()).items()}
        except (OSError, ValueError, AttributeError, TypeError) as exc:
            raise ConfigError(f"cannot read cohomology file {args.cohomology}: {exc}") from exc
    return RunConfig(
        group=args.group, metric_scale=args.metric_scale, space=args.space, eta=args.eta,
        genus=args.genus, n=args.n, degree=args.degree, tolerances=tolerances,
        format=args.format, seed=args.seed, samples=args.samples, cohomology=cohomology,
    )


def _emit(report: dict, cfg: RunConfig, output: Path | None) -> None:
    if cfg.format == "csv":
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if "components" in report:
            w.writerow(INDEX_COLUMNS)
            for row in index_rows(report):
                w.writerow([_fmt(row.get(c)) for c in INDEX_COLUMNS])
        else:
            cols = ["name", "passed", "vacuous", "residual", "tolerance"]
            w.writerow(cols)
            for ch in report["checks"]:
                w.writerow([_fmt(ch[c]) for c in cols])
        text = buf.getvalue()
    else:
        text = dumps(report)
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text)


def _failures(report: dict) -> list[str]:
    return [f"{ch['name']}: {ch['condition']} (residual {ch['residual']:.3e}, tolerance {ch['tolerance']:.1e})"
            for ch in report.get("checks", []) if not ch["passed"]]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    timings = {} if args.timings else None
    try:
        cfg = config_from_args(args)
        if args.command == "analyze":
            report = run_analyze(cfg, timings)
        elif args.command == "verify":
            report = run_verify(cfg, timings)
        else:
            if args.from_report is not None:
                try:
                    report = json.loads(args.from_report.read_text())
                except (OSError, ValueError) as exc:
                    print(f"error: cannot read report {args.from_report}: {exc}", file=sys.stderr)
                    return EXIT_CONFIG
            else:
                report = run_analyze(cfg, timings)
            outdir = args.output if args.output is not None else Path(".")
            try:
                paths = export_tables(report, outdir)
            except OSError as exc:
                print(f"error: cannot write tables to {outdir}: {exc}", file=sys.stderr)
                return EXIT_CONFIG
            for p in paths:
                print(p)
            return EXIT_OK if report.get("passed", True) else EXIT_CHECK
    except (ConfigError, MissingCohomologyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LoopMorseError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK
    if timings is not None:
        report["timings"] = timings
    _emit(report, cfg, args.output)
    for line in _failures(report):
        print(f"check failed: {line}", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_CHECK


def main_entry() -> None:
    sys.exit(main())
