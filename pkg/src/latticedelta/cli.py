"""Command-line front end.

    latticedelta classify   --psi fractional --alpha 1 --dim 3
    latticedelta thresholds --psi identity --dim 3
    latticedelta eigencurve --psi identity --dim 1 --v 0.5:4:8
    latticedelta integral   --psi identity --dim 3 --E 2 --kind J
    latticedelta table      --psi fractional --alpha 1 --dims 1:5
    latticedelta oracle     --psi identity --dim 1 --v 1 --grid 16,64,256

Exit codes: 0 success, 2 usage/config error, 3 numeric non-convergence,
4 oracle mismatch.  JSON output carries ``"schema": 1``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .multiplier import EstimationError, InvalidSpecError, MultiplierSpec, spec_from_dict, with_defaults
from .oracle import GridSizeError, convergence_study
from .spectral import (
    BracketError,
    behavior_table,
    classify_edge,
    eigencurve,
    exponent_table,
    table_to_csv,
    thresholds,
)
from .torus_quadrature import InteriorEnergyError, QuadratureOptions, integral_I, integral_J

SCHEMA = 1

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_ORACLE = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


def _common(p: argparse.ArgumentParser, *, need_dim: bool = True, spec_optional: bool = False):
    g = p.add_argument_group("multiplier")
    g.add_argument("--psi", help="catalogue kind (identity, fractional, relativistic, ...)")
    g.add_argument("--alpha", type=float)
    g.add_argument("--mass", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--bcoef", type=float)
    g.add_argument("--drift", type=float)
    g.add_argument("--spec-file", type=Path, help="JSON multiplier encoding")
    if need_dim:
        p.add_argument("--dim", type=int, required=True)
    p.add_argument("--tol-int", type=float, default=1e-8)
    p.add_argument("--tol-edge", type=float, default=1e-4)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.set_defaults(spec_optional=spec_optional)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticedelta",
        description="Spectral edges of non-local lattice Schroedinger operators with a delta potential.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="edge behaviour and thresholds for one dimension")
    _common(p)

    p = sub.add_parser("thresholds", help="critical couplings v0 and v2")
    _common(p)

    p = sub.add_parser("eigencurve", help="eigenvalue branch E(v) over a coupling range")
    _common(p)
    p.add_argument("--v", dest="vrange", required=True, help="min:max:steps (v0/v2 allowed as endpoints)")

    p = sub.add_parser("integral", help="J(E) or I(E) with error estimate")
    _common(p)
    p.add_argument("--E", dest="energy", type=float, required=True)
    p.add_argument("--kind", choices=("J", "I"), default="J")
    p.add_argument("--cross-check", action="store_true", help="also extrapolate edge values from outside")

    p = sub.add_parser("table", help="mode/resonance table over dimensions")
    _common(p, need_dim=False, spec_optional=True)
    p.add_argument("--dims", default="1:5", help="first:last dimension, inclusive")
    p.add_argument("--exponents", help="a,b edge exponents instead of a multiplier")

    p = sub.add_parser("oracle", help="finite-grid convergence against the continuum eigenvalue")
    _common(p)
    p.add_argument("--v", dest="coupling", type=float, required=True)
    p.add_argument("--grid", default="16,64,256", help="comma separated N values")
    p.add_argument("--max-error", type=float, help="also fail when the final error exceeds this")
    return parser


def load_spec(args) -> MultiplierSpec | None:
    inline = args.psi is not None
    from_file = args.spec_file is not None
    if inline and from_file:
        raise ConfigError("give either --psi or --spec-file, not both")
    if from_file:
        try:
            data = json.loads(args.spec_file.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read spec file: {exc}") from None
        return spec_from_dict(data)
    if inline:
        return with_defaults(
            args.psi,
            [
                ("alpha", args.alpha),
                ("mass", args.mass),
                ("beta", args.beta),
                ("bcoef", args.bcoef),
                ("drift", args.drift),
            ],
        )
    if args.spec_optional:
        return None
    raise ConfigError("a multiplier is required (--psi or --spec-file)")


def _options(args) -> QuadratureOptions:
    if not (args.tol_int > 0 and args.tol_edge > 0):
        raise ConfigError("tolerances must be positive")
    return QuadratureOptions(tol_int=args.tol_int, tol_edge=args.tol_edge)


def _dim(args) -> int:
    if not 1 <= args.dim <= 8:
        raise ConfigError(f"--dim must be in 1..8, got {args.dim}")
    return args.dim


def _json(payload: dict) -> str:
    return json.dumps({"schema": SCHEMA, **payload}, indent=2, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if x is None else (repr(x) if isinstance(x, float) else x) for x in row])
    return buf.getvalue()


def _finite_or_none(x: float | None):
    return x if x is not None and math.isfinite(x) else None


def cmd_classify(args) -> tuple[str, int]:
    spec, d, opts = load_spec(args), _dim(args), _options(args)
    report = thresholds(spec, d, opts)
    top = classify_edge(spec, d, +1, opts, with_threshold=False)
    bottom = classify_edge(spec, d, -1, opts, with_threshold=False)
    ex = spec.exponents()
    win = spec.window()
    if args.format == "csv":
        text = _csv(
            ["dim", "window_lo", "window_hi", "a", "b", "v0", "v2", "bottom", "top"],
            [[d, win.lo, win.hi, ex.a, ex.b, report.v0, report.v2, bottom.behavior.value, top.behavior.value]],
        )
    else:
        text = _json(
            {
                "spec": spec.to_dict(),
                "dim": d,
                "window": {"lo": win.lo, "hi": win.hi},
                "exponents": {"a": ex.a, "b": ex.b},
                "v0": report.v0,
                "v2": report.v2,
                "bottom": bottom.behavior.value,
                "top": top.behavior.value,
            }
        )
    return text, EXIT_OK


def cmd_thresholds(args) -> tuple[str, int]:
    spec, d, opts = load_spec(args), _dim(args), _options(args)
    report = thresholds(spec, d, opts)
    if args.format == "csv":
        text = _csv(["dim", "v0", "v2"], [[d, report.v0, report.v2]])
    else:
        payload = {"spec": spec.to_dict(), "dim": d}
        payload.update(report.to_dict())
        text = _json(payload)
    return text, EXIT_OK


def parse_vrange(text: str, v0: float | None = None, v2: float | None = None) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--v expects min:max:steps, got {text!r}")
    named = {"v0": v0, "v2": v2}

    def endpoint(tok: str) -> float:
        tok = tok.strip()
        if tok in named:
            if named[tok] is None:
                raise ConfigError(f"{tok} is not available here")
            return named[tok]
        try:
            return float(tok)
        except ValueError:
            raise ConfigError(f"bad coupling {tok!r}") from None

    lo, hi = endpoint(parts[0]), endpoint(parts[1])
    try:
        steps = int(parts[2])
    except ValueError:
        raise ConfigError(f"bad step count {parts[2]!r}") from None
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    if steps == 1:
        return [lo]
    return [float(x) for x in np.linspace(lo, hi, steps)]


def _status(v, point, top_behavior, bottom_behavior) -> str:
    if point is None:
        behavior = top_behavior if v > 0 else bottom_behavior
        if v != 0 and behavior.threshold is not None and math.isclose(v, behavior.threshold, rel_tol=1e-10):
            return "resonance"
        return "absent"
    if point.at_edge:
        return "mode"
    return "eigenvalue" if point.resolved else "unresolved"


def cmd_eigencurve(args) -> tuple[str, int]:
    spec, d, opts = load_spec(args), _dim(args), _options(args)
    report = thresholds(spec, d, opts)
    couplings = parse_vrange(args.vrange, report.v0, report.v2)
    top = classify_edge(spec, d, +1, opts, with_threshold=False)
    bottom = classify_edge(spec, d, -1, opts, with_threshold=False)
    top = type(top)(top.edge, top.energy, top.behavior, report.v2)
    bottom = type(bottom)(bottom.edge, bottom.energy, bottom.behavior, report.v0)
    points = eigencurve(spec, d, couplings, opts)
    rows = []
    for v, pt in points:
        rows.append((v, None if pt is None else pt.E, _status(v, pt, top, bottom)))
    if args.format == "csv":
        text = _csv(["v", "E", "status"], rows)
    else:
        text = _json(
            {
                "spec": spec.to_dict(),
                "dim": d,
                "v0": report.v0,
                "v2": report.v2,
                "bottom": bottom.behavior.value,
                "top": top.behavior.value,
                "points": [{"v": v, "E": E, "status": s} for v, E, s in rows],
            }
        )
    return text, EXIT_OK


def cmd_integral(args) -> tuple[str, int]:
    spec, d, opts = load_spec(args), _dim(args), _options(args)
    fn = integral_J if args.kind == "J" else integral_I
    est = fn(spec, d, args.energy, opts, cross_check=args.cross_check)
    code = EXIT_OK if (not est.finite or est.converged) else EXIT_NUMERIC
    if args.format == "csv":
        text = _csv(
            ["kind", "E", "finite", "value", "abs_error"],
            [[args.kind, args.energy, est.finite, est.value, _finite_or_none(est.abs_error)]],
        )
    else:
        payload = {"spec": spec.to_dict(), "dim": d, "kind": args.kind, "E": args.energy}
        payload.update(est.to_dict())
        if args.cross_check:
            payload["cross_check"] = est.cross_check
        text = _json(payload)
    return text, code


def _parse_dims(text: str) -> list[int]:
    try:
        if ":" in text:
            first, last = (int(x) for x in text.split(":"))
        else:
            first = last = int(text)
    except ValueError:
        raise ConfigError(f"bad --dims {text!r}") from None
    if not (1 <= first <= last <= 8):
        raise ConfigError("--dims must satisfy 1 <= first <= last <= 8")
    return list(range(first, last + 1))


def cmd_table(args) -> tuple[str, int]:
    spec = load_spec(args)
    dims = _parse_dims(args.dims)
    if args.exponents:
        if spec is not None:
            raise ConfigError("give either a multiplier or --exponents")
        try:
            a, b = (float(x) for x in args.exponents.split(","))
        except ValueError:
            raise ConfigError(f"--exponents expects a,b, got {args.exponents!r}") from None
        if not (a > 0 and b > 0):
            raise ConfigError("exponents must be positive")
        rows = exponent_table(a, b, dims)
        source = {"exponents": {"a": a, "b": b}}
    else:
        if spec is None:
            raise ConfigError("a multiplier or --exponents is required")
        rows = behavior_table(spec, dims)
        source = {"spec": spec.to_dict()}
    if args.format == "csv":
        return table_to_csv(rows), EXIT_OK
    payload = dict(source)
    payload["rows"] = [
        {
            "d": r.d,
            "top_mode": r.top_mode,
            "top_resonance": r.top_resonance,
            "bottom_mode": r.bottom_mode,
            "bottom_resonance": r.bottom_resonance,
        }
        for r in rows
    ]
    return _json(payload), EXIT_OK


def cmd_oracle(args) -> tuple[str, int]:
    spec, d, opts = load_spec(args), _dim(args), _options(args)
    try:
        grid = [int(x) for x in args.grid.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --grid {args.grid!r}") from None
    if not grid:
        raise ConfigError("--grid needs at least one N")
    study = convergence_study(spec, d, args.coupling, grid, opts)
    ok = study.monotone
    if args.max_error is not None and study.final_error > args.max_error:
        ok = False
    if args.format == "csv":
        text = study.to_csv()
    else:
        text = _json(
            {
                "spec": spec.to_dict(),
                "dim": d,
                "v": args.coupling,
                "reference": study.reference,
                "absorbed": study.absorbed,
                "monotone": study.monotone,
                "rows": [{"N": r.N, "E_N": r.E_N, "abs_error": r.abs_error} for r in study.rows],
            }
        )
    return text, EXIT_OK if ok else EXIT_ORACLE


COMMANDS = {
    "classify": cmd_classify,
    "thresholds": cmd_thresholds,
    "eigencurve": cmd_eigencurve,
    "integral": cmd_integral,
    "table": cmd_table,
    "oracle": cmd_oracle,
}


def _attach_negative_ranges(argv: list[str]) -> list[str]:
    """Join ``--v -3:-0.1:30`` into ``--v=-3:-0.1:30``.

    argparse treats a dash-led token as an option unless it looks like a plain
    negative number, which a colon range never does.
    """
    out: list[str] = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--v" and i + 1 < len(argv) and argv[i + 1].startswith("-") and ":" in argv[i + 1]:
            out.append(f"--v={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_attach_negative_ranges(sys.argv[1:] if argv is None else list(argv)))
    try:
        text, code = COMMANDS[args.command](args)
    except (ConfigError, InvalidSpecError, InteriorEnergyError, GridSizeError) as exc:
        print(f"latticedelta: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BracketError, EstimationError, NumericError, FloatingPointError) as exc:
        print(f"latticedelta: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
