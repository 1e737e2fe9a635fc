"""Command-line front end.

Subcommands::

    check      validate a scenario or action file (bracket homomorphism residual)
    lift       lift a group path from a start point; CSV trace + JSON summary
    holonomy   reconstruct the group element over a manifold loop
    classify   leaf invariants for helicoid graph points, grouped by leaf

Exit codes: 0 success, 1 check failure, 2 escape, 3 invalid input/config,
4 numerical failure.  All file formats are JSON in, CSV/JSON out; unknown
keys in input files are hard errors so that typos never silently change a
run.  Outputs are byte-deterministic for fixed inputs and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional

import numpy as np

from .algebra import (
    AbelianGroup,
    AlgebraError,
    LieAlgebra,
    MatrixGroup,
    structure_constants_from_matrix_basis,
)
from .completion import (
    FrameConditionError,
    LoopGeometryError,
    LoopOutsideOrbitError,
    loop_to_group,
)
from .expr import ExprSyntaxError, parse as parse_expr
from .flow import COMPLETE, ESCAPED, STEP_LIMIT, IntegratorConfig
from .lift import ExpSeg, GPath, LinearSeg, PathError, lift_path
from .manifold import ActionError, Domain, DomainError, GAction, OutsideDomainError, check_homomorphism
from .scenarios import ScenarioError, Scenario, build, circle_loop_path, leaf_invariant, invariants_match

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ESCAPED = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4

CHECK_RESIDUAL_LIMIT = 1e-6

_CONFIG_ERRORS = (
    ScenarioError,
    ExprSyntaxError,
    AlgebraError,
    DomainError,
    ActionError,
    PathError,
    OutsideDomainError,
    FrameConditionError,
    LoopGeometryError,
    LoopOutsideOrbitError,
)


class ConfigError(ValueError):
    pass


def _fail(msg: str) -> "ConfigError":
    return ConfigError(msg)


def _check_keys(obj: dict, required, optional, where: str):
    if not isinstance(obj, dict):
        raise _fail(f"{where} must be a JSON object")
    for k in required:
        if k not in obj:
            raise _fail(f"{where}: missing required key {k!r}")
    allowed = set(required) | set(optional)
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise _fail(f"{where}: unknown key(s) {unknown}")


def _load_json(path: str, where: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise _fail(f"{where}: file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise _fail(f"{where}: invalid JSON ({e})") from None


def _floats(seq, where: str) -> list:
    if not isinstance(seq, list):
        raise _fail(f"{where} must be a list of numbers")
    out = []
    for v in seq:
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise _fail(f"{where} must contain only numbers")
        out.append(float(v))
    return out


# ---------------------------------------------------------------------------
# scenario / action loading


def _action_from_file(path: str) -> Scenario:
    spec = _load_json(path, "action file")
    _check_keys(spec, ["group", "manifold", "fields"], ["name", "params"], "action file")
    gspec = spec["group"]
    _check_keys(gspec, ["type", "dim"], ["basis"], "group")
    mspec = spec["manifold"]
    _check_keys(mspec, ["dim", "coords"], ["box", "exclusions"], "manifold")

    d = gspec["dim"]
    if not isinstance(d, int) or d < 1:
        raise _fail("group.dim must be a positive integer")
    if gspec["type"] == "abelian":
        if "basis" in gspec:
            raise _fail("abelian group model takes no basis")
        algebra = LieAlgebra.abelian(d)
        group = AbelianGroup(d)
    elif gspec["type"] == "matrix":
        if "basis" not in gspec:
            raise _fail("matrix group model requires a basis")
        basis = np.asarray(gspec["basis"], dtype=float)
        if basis.ndim != 3 or basis.shape[0] != d or basis.shape[1] != basis.shape[2]:
            raise _fail("basis must be d matrices of equal square shape")
        algebra = LieAlgebra(structure_constants_from_matrix_basis(basis))
        group = MatrixGroup(basis)
    else:
        raise _fail("group.type must be 'abelian' or 'matrix'")

    n = mspec["dim"]
    coords = mspec["coords"]
    if not isinstance(n, int) or not isinstance(coords, list) or len(coords) != n:
        raise _fail("manifold.coords must list exactly manifold.dim names")
    box = None
    if "box" in mspec:
        raw = mspec["box"]
        if not isinstance(raw, list) or len(raw) != n:
            raise _fail("manifold.box must give one entry per coordinate")
        box = []
        for b in raw:
            if b is None:
                box.append(None)
            else:
                pair = _floats(b, "box bound")
                if len(pair) != 2:
                    raise _fail("box bounds must be [lo, hi] pairs")
                box.append((pair[0], pair[1]))
        box = tuple(box)
    margins = tuple(
        parse_expr(s) for s in mspec.get("exclusions", [])
    )
    params = spec.get("params", {})
    if not isinstance(params, dict):
        raise _fail("params must be an object")
    fields_raw = spec["fields"]
    if not isinstance(fields_raw, list) or len(fields_raw) != d:
        raise _fail(f"fields must list {d} rows (one per algebra basis vector)")
    fields = []
    for i, row in enumerate(fields_raw):
        if not isinstance(row, list) or len(row) != n:
            raise _fail(f"fields[{i}] must list {n} component expressions")
        fields.append([parse_expr(s) for s in row])
    action = GAction(
        algebra,
        group,
        Domain(tuple(coords), box=box, margins=margins),
        fields,
        params={k: float(v) for k, v in params.items()},
        name=spec.get("name", "custom"),
    )
    return Scenario(spec.get("name", "custom"), dict(params), action)


def _scenario_from_args(args) -> Scenario:
    if getattr(args, "scenario_file", None):
        if getattr(args, "scenario", None):
            raise _fail("give either --scenario or --scenario-file, not both")
        return _action_from_file(args.scenario_file)
    if not getattr(args, "scenario", None):
        raise _fail("a scenario is required (--scenario NAME or --scenario-file FILE)")
    params = {}
    if getattr(args, "alpha", None) is not None:
        params["alpha"] = args.alpha
    if getattr(args, "n", None) is not None:
        params["n"] = args.n
    for item in getattr(args, "param", None) or []:
        if "=" not in item:
            raise _fail(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            params[k] = float(v)
        except ValueError:
            raise _fail(f"--param {k}: value {v!r} is not a number") from None
    return build(args.scenario, params)


def _integrator_config(args) -> IntegratorConfig:
    kwargs = {}
    if getattr(args, "rel_tol", None) is not None:
        kwargs["rel_tol"] = args.rel_tol
    if getattr(args, "abs_tol", None) is not None:
        kwargs["abs_tol"] = args.abs_tol
    try:
        return IntegratorConfig(**kwargs)
    except ValueError as e:
        raise _fail(str(e)) from None


def _parse_vector(text: str, where: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise _fail(f"{where} must be comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# path / loop loading


def _path_from_file(path: str, group) -> GPath:
    spec = _load_json(path, "path file")
    _check_keys(spec, ["start", "segments"], [], "path file")
    if group.kind == "abelian":
        start = _floats(spec["start"], "path start")
    else:
        start = np.asarray(spec["start"], dtype=float)
    segs = []
    raw = spec["segments"]
    if not isinstance(raw, list):
        raise _fail("segments must be a list")
    for i, s in enumerate(raw):
        where = f"segments[{i}]"
        _check_keys(s, ["type"], ["delta", "X", "duration"], where)
        dur = s.get("duration", 1.0)
        if not isinstance(dur, (int, float)) or isinstance(dur, bool) or dur <= 0:
            raise _fail(f"{where}: duration must be a positive number")
        if s["type"] == "linear":
            if "delta" not in s or "X" in s:
                raise _fail(f"{where}: linear segments take 'delta'")
            segs.append(LinearSeg(tuple(_floats(s["delta"], where)), float(dur)))
        elif s["type"] == "exp":
            if "X" not in s or "delta" in s:
                raise _fail(f"{where}: exp segments take 'X'")
            segs.append(ExpSeg(tuple(_floats(s["X"], where)), float(dur)))
        else:
            raise _fail(f"{where}: type must be 'linear' or 'exp'")
    return GPath(group, start, segs)


def _loop_from_file(path: str) -> np.ndarray:
    spec = _load_json(path, "loop file")
    _check_keys(spec, ["points"], [], "loop file")
    pts = spec["points"]
    if not isinstance(pts, list) or len(pts) < 2:
        raise _fail("loop file needs at least two points")
    return np.asarray([_floats(p, "loop point") for p in pts], dtype=float)


# ---------------------------------------------------------------------------
# output


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def _write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Optional[str], payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _group_columns(action) -> list:
    if action.group.kind == "abelian":
        return [f"g_{name}" for name in action.algebra.basis_names]
    n = action.group.n
    return [f"g_{i + 1}{j + 1}" for i in range(n) for j in range(n)]


def _flatten_g(action, g) -> list:
    if action.group.kind == "abelian":
        return [float(v) for v in g]
    return [float(v) for row in np.asarray(g, dtype=float) for v in row]


def _jsonable_g(action, g):
    return action.group.to_jsonable(g)


def _nan_to_none(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return v


# ---------------------------------------------------------------------------
# subcommands


def cmd_check(args) -> int:
    scenario = _scenario_from_args(args)
    action = scenario.action
    residual = check_homomorphism(action, sample_count=args.samples, seed=args.seed)
    jacobi = action.algebra.jacobi_residual()
    print(f"scenario: {scenario.name}")
    print(f"samples: {args.samples} (seed {args.seed})")
    print(f"jacobi residual: {_fmt(jacobi)}")
    print(f"bracket homomorphism residual: {_fmt(residual)}")
    if residual < CHECK_RESIDUAL_LIMIT:
        print("check: PASS")
        return EXIT_OK
    print(f"check: FAIL (residual >= {CHECK_RESIDUAL_LIMIT:g})")
    return EXIT_CHECK_FAILED


def cmd_lift(args) -> int:
    scenario = _scenario_from_args(args)
    action = scenario.action
    cfg = _integrator_config(args)
    x0 = _parse_vector(args.x0, "--x0")
    if len(x0) != action.dim_manifold:
        raise _fail(f"--x0 must have {action.dim_manifold} coordinates")

    if args.path and args.circle_turns is not None:
        raise _fail("give either --path or --circle-turns, not both")
    if args.path:
        path = _path_from_file(args.path, action.group)
    elif args.circle_turns is not None:
        if action.group.kind != "abelian" or action.group.dim != 2:
            raise _fail("--circle-turns requires a planar abelian group model")
        start = (
            _parse_vector(args.start_g, "--start-g")
            if args.start_g
            else [0.0, 0.0]
        )
        path = circle_loop_path(
            start,
            x0[:2],
            turns=args.circle_turns,
            chords_per_turn=args.chords_per_turn,
            clockwise=args.clockwise,
        )
    else:
        raise _fail("a path is required (--path FILE or --circle-turns T)")

    result = lift_path(action, path, x0, cfg)

    header = ["t"] + _group_columns(action) + list(action.domain.coords)
    rows = (
        [t] + _flatten_g(action, g) + list(m)
        for (t, g, m) in result.trace
    )
    _write_csv(args.out + ".trace.csv", header, rows)
    if args.plot:
        _write_csv(
            args.out + ".polyline.csv",
            list(action.domain.coords),
            (list(m) for (_, _, m) in result.trace),
        )
    summary = {
        "status": result.status,
        "endpoint_g": _jsonable_g(action, result.endpoint_g),
        "endpoint_m": [float(v) for v in result.endpoint_m],
        "escape_time": _nan_to_none(result.escape_time),
        "failed_segment": result.failed_segment,
        "winding": _nan_to_none(result.winding),
        "low_confidence": bool(result.low_confidence),
    }
    _write_json(args.out + ".summary.json", summary)
    print(f"status: {result.status}")
    if result.status == ESCAPED:
        print(f"escape time: {_fmt(result.escape_time)}")
        return EXIT_ESCAPED
    if result.status == STEP_LIMIT:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_holonomy(args) -> int:
    scenario = _scenario_from_args(args)
    action = scenario.action
    cfg = _integrator_config(args)
    x0 = _parse_vector(args.x0, "--x0")
    loop = _loop_from_file(args.loop)
    if args.frame:
        frame = [
            _parse_vector(row, "--frame") for row in args.frame.split(";")
        ]
    else:
        from .completion import isotropy as _iso

        k = _iso(action, x0).orbit_dim
        frame = [
            [1.0 if i == j else 0.0 for j in range(action.dim_algebra)]
            for i in range(k)
        ]
    hol = loop_to_group(
        action,
        frame,
        loop,
        x0,
        cfg,
        closed=not args.open,
        substeps=args.substeps,
    )
    payload = {
        "element": _jsonable_g(action, hol.element),
        "round_trip_residual": _nan_to_none(hol.round_trip_residual),
        "loop_points": hol.loop_points,
        "closed": hol.closed,
        "note": hol.note,
    }
    _write_json(args.out + ".holonomy.json" if args.out else None, payload)
    if hol.round_trip_residual is None or not math.isfinite(hol.round_trip_residual):
        print("round trip: escaped", file=sys.stderr)
        return EXIT_ESCAPED
    return EXIT_OK


def cmd_classify(args) -> int:
    scenario = _scenario_from_args(args)
    if scenario.name != "example6_helicoid":
        raise _fail("classify requires the example6_helicoid scenario")
    alpha = scenario.params["alpha"]
    spec = _load_json(args.points, "points file")
    _check_keys(spec, ["points"], [], "points file")
    raw = spec["points"]
    if not isinstance(raw, list) or not raw:
        raise _fail("points file needs a non-empty 'points' list")
    invariants = []
    records = []
    for i, entry in enumerate(raw):
        _check_keys(entry, ["g", "x"], [], f"points[{i}]")
        g = _floats(entry["g"], f"points[{i}].g")
        x = _floats(entry["x"], f"points[{i}].x")
        try:
            inv = leaf_invariant(alpha, g, x)
        except ScenarioError as e:
            raise _fail(f"points[{i}]: {e}") from None
        invariants.append(inv)
        records.append(
            {
                "index": i,
                "g": g,
                "x": x,
                "base": list(inv.base),
                "kind": inv.kind,
                "value": inv.value,
            }
        )
    groups: list = []
    reps: list = []
    for i, inv in enumerate(invariants):
        for gi, rep in enumerate(reps):
            if invariants_match(rep, inv, tol=args.tol):
                groups[gi].append(i)
                break
        else:
            reps.append(inv)
            groups.append([i])
    payload = {"alpha": alpha, "points": records, "groups": groups}
    _write_json(args.out + ".classes.json" if args.out else None, payload)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    # usage errors must exit with the config-error code, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_scenario_args(p: argparse.ArgumentParser):
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--scenario-file", help="JSON action description")
    p.add_argument("--alpha", type=float, help="shear rate parameter (helicoid)")
    p.add_argument("--n", type=int, help="dimension parameter (translations)")
    p.add_argument(
        "--param",
        action="append",
        metavar="KEY=VALUE",
        help="generic scenario parameter override (repeatable)",
    )


def _add_numeric_args(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p.add_argument("--rel-tol", type=float, default=None, help="integrator relative tolerance")
    p.add_argument("--abs-tol", type=float, default=None, help="integrator absolute tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="liecomplete",
        description="Complete Lie algebra actions numerically: lift, check, classify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="validate an action's bracket homomorphism")
    _add_scenario_args(p)
    _add_numeric_args(p)
    p.add_argument("--samples", type=int, default=200, help="sample points (default 200)")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("lift", help="lift a group path from a start point")
    _add_scenario_args(p)
    _add_numeric_args(p)
    p.add_argument("--x0", required=True, help="start point, comma-separated")
    p.add_argument("--path", help="path file (JSON)")
    p.add_argument("--circle-turns", type=float, default=None,
                   help="instead of --path: wind the projection this many turns")
    p.add_argument("--chords-per-turn", type=int, default=4096,
                   help="chord density for --circle-turns (default 4096)")
    p.add_argument("--clockwise", action="store_true", help="wind clockwise")
    p.add_argument("--start-g", help="group start for --circle-turns (default origin)")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--plot", action="store_true",
                   help="also write a manifold-projection polyline CSV")
    p.set_defaults(fn=cmd_lift)

    p = sub.add_parser("holonomy", help="group element over a manifold loop")
    _add_scenario_args(p)
    _add_numeric_args(p)
    p.add_argument("--loop", required=True, help="loop file (JSON)")
    p.add_argument("--x0", required=True, help="loop base point, comma-separated")
    p.add_argument("--frame", help="semicolon-separated algebra vectors, e.g. '1,0;0,1'")
    p.add_argument("--open", action="store_true", help="allow a non-closed curve")
    p.add_argument("--substeps", type=int, default=4, help="sub-chords per chord (default 4)")
    p.add_argument("--out", help="output prefix (default: JSON to stdout)")
    p.set_defaults(fn=cmd_holonomy)

    p = sub.add_parser("classify", help="leaf invariants of helicoid graph points")
    _add_scenario_args(p)
    _add_numeric_args(p)
    p.add_argument("--points", required=True, help="points file (JSON)")
    p.add_argument("--tol", type=float, default=1e-6, help="grouping tolerance")
    p.add_argument("--out", help="output prefix (default: JSON to stdout)")
    p.set_defaults(fn=cmd_classify)

    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as e:          # argparse --help
        return int(e.code or 0)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _CONFIG_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
