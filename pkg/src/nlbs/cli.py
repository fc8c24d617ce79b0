"""Command-line front end: run scenario files and write plot-ready CSV.

Subcommands
-----------
price        run the scenario's method and write the requested outputs
closed-form  evaluate the explicit family on the scenario grid
greeks       central-difference Greeks of the explicit family
compare      nonlinear result next to the linear Black-Scholes reference
validate     run validation checks and write a report

Exit codes: 0 success (a diverged explicit run is a result, not a failure),
2 invalid input or domain error, 3 Newton failure, 4 singular denominator,
1 anything else raised by the package.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from dataclasses import asdict, fields, is_dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .closed_form import family_surface, greeks, invariant_u
from .errors import (DegenerateFamily, DomainError, NLBSError, NoConvergence, ScenarioError,
                     SingularDenominator, SingularJacobian, UnknownCheck)
from .fd import (closed_form_field, explicit_solve_backward, implicit_solve_backward,
                 linear_analytic_field, linear_fd_solve)
from .model import ClosedFormSnapshot, SolutionField
from .scenario import Scenario, parse_scenario, scenario_help
from .validation import CHECKS, run_all

OUT_ENV = "NLBS_OUT_DIR"
DEFAULT_OUT = "out"

EXIT_OK, EXIT_ERROR, EXIT_DOMAIN, EXIT_NO_CONVERGENCE, EXIT_SINGULAR = 0, 1, 2, 3, 4


# -- solving -------------------------------------------------------------------


def solve(s: Scenario, method: str | None = None) -> SolutionField:
    """Run one (non-sweep) scenario with its method or an override."""
    method = method or s.method
    if method == "implicit":
        return implicit_solve_backward(s.payoff, s.grid, s.market, s.solver)
    if method == "explicit":
        cfg = s.solver if s.solver.scheme == "explicit" else replace(s.solver, scheme="explicit")
        return explicit_solve_backward(s.payoff, s.grid, s.market, cfg)
    if method == "closed-form":
        return closed_form_field(s.closed_form, s.grid, s.market)
    if isinstance(s.payoff, ClosedFormSnapshot):
        raise ScenarioError(f"method = {method} needs a call, strangle or bull-spread payoff", field="payoff.type")
    if method == "linear-fd":
        return linear_fd_solve(s.payoff, s.grid, s.market)
    if method == "linear-analytic":
        return linear_analytic_field(s.payoff, s.grid, s.market)
    raise ScenarioError(f"unknown method {method!r}", field="method")


# -- CSV output ------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (list, tuple)):
        return ",".join(_fmt(v) for v in x)
    return str(x)


def _flatten(prefix, obj, out):
    if is_dataclass(obj):
        out[f"{prefix}.kind"] = type(obj).__name__
        for f in fields(obj):
            _flatten(f"{prefix}.{f.name}", getattr(obj, f.name), out)
    elif isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}", obj[k], out)
    else:
        out[prefix] = obj


def metadata(s: Scenario, command: str, label: str, extra=None) -> dict:
    """Everything needed to reproduce a file, without timestamps so reruns are bit-identical."""
    meta = {"generator": f"nlbs {__version__}", "command": command, "scenario": s.name,
            "source": s.source or "", "variant": label or "base", "method": s.method}
    _flatten("market", s.market, meta)
    _flatten("grid", s.grid, meta)
    _flatten("payoff", s.payoff, meta)
    if s.closed_form is not None:
        _flatten("closed_form", s.closed_form, meta)
    if s.method in ("implicit", "explicit"):
        _flatten("solver", s.solver, meta)
    meta.update(extra or {})
    return meta


def write_csv(path: Path, meta: dict, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={_fmt(value)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _window(s: Scenario, S):
    if s.s_window is None:
        return np.ones(S.shape, dtype=bool)
    lo, hi = s.s_window
    return (S >= lo) & (S <= hi)


def field_rows(s: Scenario, field: SolutionField, t0_only=False):
    S, t = field.grid.s, field.grid.t
    keep = _window(s, S)
    layers = [0] if t0_only else range(len(t))
    for j in layers:
        for i in np.flatnonzero(keep):
            yield S[i], t[j], field.values[j, i]


def field_meta(field: SolutionField) -> dict:
    meta = {"scheme": field.scheme}
    if field.scheme == "explicit":
        meta["diverged"] = field.diverged
        meta["diverged_at_layer"] = field.meta.get("diverged_at_layer")
        meta["mesh_ratio"] = field.meta.get("mesh_ratio")
    if field.scheme == "implicit":
        meta["newton_iterations_max"] = max(field.iterations, default=0)
        meta["layer_residual_max"] = max(field.residual_norms, default=0.0)
        meta["branch_used"] = field.meta.get("branch_used")
        meta["fallback_layers"] = list(field.meta.get("fallback_layers", []))
    if "boundary_policy" in field.meta:
        meta["boundary_policy"] = field.meta["boundary_policy"]
    return meta


def _stem(s: Scenario, label: str) -> str:
    safe = label.replace("=", "").replace(" ", "")
    return f"{s.name}_{safe}" if safe else s.name


def greek_rows(s: Scenario):
    surface = family_surface(s.closed_form)
    S, t = s.grid.s, s.grid.t
    S = S[_window(s, S)]
    SS, TT = np.meshgrid(S, t)
    g = greeks(surface, SS.ravel(), TT.ravel(), s.market)
    vega = s.vega_sign * np.asarray(g["vega"]) + 0.0  # no negative zeros in the file
    return zip(SS.ravel(), TT.ravel(), g["delta"], g["gamma"], g["theta"], vega)


# -- subcommands ------------------------------------------------------------------


def run_scenario(s: Scenario, out_dir, command="price") -> list[Path]:
    """Write the files a subcommand produces for every sweep point; return their paths."""
    out_dir = Path(out_dir)
    written = []
    if command == "validate" or (command == "price" and "validation" in s.outputs):
        written.append(_validate(s.checks or None, out_dir, s.name))
        if command == "validate":
            return written
    for label, variant in s.variants():
        stem = _stem(variant, label)
        if command == "greeks" or (command == "price" and "greeks" in variant.outputs):
            extra = {"vega_sign": variant.vega_sign,
                     "theta_convention": "theta=-du/dt",
                     "vega_convention": "vega=du/dsigma" if variant.vega_sign == 1 else "vega=-du/dsigma"}
            written.append(write_csv(out_dir / f"{stem}_greeks.csv",
                                     metadata(variant, command, label, extra),
                                     ("S", "t", "delta", "gamma", "theta", "vega"), greek_rows(variant)))
            if command == "greeks":
                continue
        if command == "compare":
            written.append(_compare(variant, label, out_dir / f"{stem}_compare.csv"))
            continue
        method = "closed-form" if command == "closed-form" else variant.method
        if command == "closed-form" and variant.closed_form is None:
            raise ScenarioError("closed-form needs closed_form.m in the scenario", field="closed_form.m")
        wants = [o for o in variant.outputs if o in ("surface", "slice-at-t0")]
        if command == "closed-form" and not wants:
            wants = ["surface"]
        if not wants:
            continue
        field = solve(variant, method)
        meta = metadata(replace(variant, method=method), command, label, field_meta(field))
        if "surface" in wants:
            written.append(write_csv(out_dir / f"{stem}_surface.csv", meta, ("S", "t", "u"),
                                     field_rows(variant, field)))
        if "slice-at-t0" in wants:
            written.append(write_csv(out_dir / f"{stem}_slice.csv", meta, ("S", "t", "u"),
                                     field_rows(variant, field, t0_only=True)))
    return written


def _compare(s: Scenario, label: str, path: Path) -> Path:
    if s.method.startswith("linear"):
        raise ScenarioError("compare needs a nonlinear method (implicit, explicit or closed-form)", field="method")
    if isinstance(s.payoff, ClosedFormSnapshot):
        raise ScenarioError("compare needs a call, strangle or bull-spread payoff for the linear reference",
                            field="payoff.type")
    nonlinear = solve(s)
    linear = solve(s, s.linear)
    keep = _window(s, s.grid.s)
    rows = []
    for j, t in enumerate(s.grid.t):
        for i in np.flatnonzero(keep):
            a, b = nonlinear.values[j, i], linear.values[j, i]
            rows.append((s.grid.s[i], t, a, b, a - b))
    extra = {**field_meta(nonlinear), "linear_reference": s.linear}
    return write_csv(path, metadata(s, "compare", label, extra),
                     ("S", "t", "u_nonlinear", "u_linear", "difference"), rows)


def _validate(checks, out_dir: Path, name="validation") -> Path:
    reports = run_all(checks)
    path = out_dir / f"{name}_report.txt"
    from .validation import write_reports

    write_reports(reports, path)
    for r in reports:
        print(f"{r.name}: {r.status}")
    return path


# -- argument handling ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlbs",
        description="Hedge costs under the illiquid-market Black-Scholes model.",
        epilog=scenario_help() + f"\n\noutput directory: --out, else ${OUT_ENV}, else ./{DEFAULT_OUT}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario file (key = value lines)")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.add_argument("--format", choices=("csv",), default="csv", help="output format (only csv)")

    for name, text in (("price", "run the scenario's method and write its outputs"),
                       ("closed-form", "evaluate the explicit family on the scenario grid"),
                       ("greeks", "write delta, gamma, theta and vega of the explicit family"),
                       ("compare", "write the nonlinear result, the linear reference and their difference")):
        common(sub.add_parser(name, help=text, description=text))
    val = sub.add_parser("validate", help="run validation checks and write a report",
                         description=f"checks: {', '.join(CHECKS)}")
    common(val, scenario_required=False)
    val.add_argument("--check", action="append",
                     help="check name or 'all'; repeat or comma-separate for several (default: all)")
    val.add_argument("--strict", action="store_true", help="exit 1 when any check fails")
    return parser


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _selected_checks(values):
    if not values:
        return None
    names = [n.strip() for v in values for n in v.split(",") if n.strip()]
    return None if "all" in names else names


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out_dir = _out_dir(args)
    try:
        if args.command == "validate":
            checks = _selected_checks(args.check)
            if args.scenario:
                s = parse_scenario(args.scenario)
                if checks is not None:
                    s = replace(s, checks=checks)
                paths = run_scenario(s, out_dir, "validate")
            else:
                paths = [_validate(checks, out_dir)]
            if args.strict:
                failed = [ln for ln in paths[0].read_text().splitlines() if " status=fail " in ln]
                if failed:
                    print(f"wrote {paths[0]}")
                    return EXIT_ERROR
        else:
            paths = run_scenario(parse_scenario(args.scenario), out_dir, args.command)
    except (ScenarioError, DomainError, DegenerateFamily, UnknownCheck) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NoConvergence, SingularJacobian) as exc:
        layer = getattr(exc, "layer", None)
        where = f" at layer {layer}" if layer is not None else ""
        print(f"error: {type(exc).__name__}{where}: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except SingularDenominator as exc:
        print(f"error: SingularDenominator: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except NLBSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
