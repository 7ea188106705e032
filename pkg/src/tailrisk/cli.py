"""Command-line front end.

Subcommands
-----------
lln             typical default and loss rates of a pool
rate-curve      decay rates of P(loss >= ell) over a grid of loss levels
recovery-curve  implied (most-likely default rate, effective recovery) pairs
tail            tail-probability estimates (naive | tilted | exact) next to
                the asymptotic rate
reproduce       the four reference figure data sets for presets 1-6, plus a
                manifest recording the ordering checks

Pools come either from a preset (``--case N``) or from a TOML config file
(``--config PATH``) with a ``[pool]`` table and one ``[[pool.types]]`` entry
per type; see ``parse_pool_config``.  Output is CSV (metadata in leading
``# key=value`` comment lines) or JSON (``{"metadata": ..., "rows": ...}``),
written to ``--out`` or stdout.  No output line ever depends on wall-clock
state: runs with the same arguments and an explicit ``--seed`` are
byte-identical.

Exit codes: 0 success; 1 usage or config error; 2 numerical failure;
3 ordering/acceptance check failure (reproduce only).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, ConvergenceError, SamplingError
from .montecarlo import tail_exact_pointmass, tail_naive, tail_tilted
from .pool import PoolSpec, TypeSpec, lln, preset
from .rates import RatePoint, RateCurve, effective_recovery_curve, rate_at
from .recovery import BetaFamily, MeanMap, PointMass

__all__ = ["main", "parse_pool_config", "format_pool_config"]

_VERSION = "0.1.0"
_ORDERING_TOL = 1e-6


# ---------------------------------------------------------------------------
# Pool config format
# ---------------------------------------------------------------------------

_RECOVERY_KINDS = ("point_mass", "beta_constant", "beta_affine", "beta_quadratic")


def _required(table: dict, key: str, where: str) -> object:
    if key not in table:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return table[key]


def _number(value: object, where: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: field {key!r} must be a number, got {value!r}")
    return float(value)


def _parse_recovery(table: object, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: 'recovery' must be a table")
    kind = _required(table, "kind", where)
    if kind not in _RECOVERY_KINDS:
        raise ConfigError(
            f"{where}: unknown recovery kind {kind!r}; expected one of {_RECOVERY_KINDS}"
        )
    known = {"kind", "r0", "base", "slope", "curvature", "anchor", "quad_nodes"}
    for key in table:
        if key not in known:
            raise ConfigError(f"{where}: unknown recovery field {key!r}")
    try:
        if kind == "point_mass":
            for key in ("base", "slope", "curvature", "anchor", "quad_nodes"):
                if key in table:
                    raise ConfigError(f"{where}: field {key!r} does not apply to point_mass")
            return PointMass(r0=_number(_required(table, "r0", where), where, "r0"))
        if "r0" in table:
            raise ConfigError(f"{where}: field 'r0' only applies to point_mass")
        anchor = _number(table.get("anchor", 0.08), where, "anchor")
        quad_nodes = table.get("quad_nodes", 64)
        if isinstance(quad_nodes, bool) or not isinstance(quad_nodes, int):
            raise ConfigError(f"{where}: field 'quad_nodes' must be an integer")
        base = _number(_required(table, "base", where), where, "base")
        if kind == "beta_constant":
            for key in ("slope", "curvature"):
                if key in table:
                    raise ConfigError(f"{where}: field {key!r} does not apply to beta_constant")
            mean_map = MeanMap.constant(base, anchor)
        elif kind == "beta_affine":
            if "curvature" in table:
                raise ConfigError(f"{where}: field 'curvature' does not apply to beta_affine")
            slope = _number(_required(table, "slope", where), where, "slope")
            mean_map = MeanMap.affine(base, slope, anchor)
        else:
            slope = _number(_required(table, "slope", where), where, "slope")
            curvature = _number(_required(table, "curvature", where), where, "curvature")
            mean_map = MeanMap.quadratic(base, slope, curvature, anchor)
        return BetaFamily(mean_map=mean_map, quad_nodes=quad_nodes)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_pool_config(text: str) -> PoolSpec:
    """Parse the TOML pool grammar; raises ConfigError with field diagnostics."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    if "pool" not in doc or not isinstance(doc["pool"], dict):
        raise ConfigError("config must contain a [pool] table")
    entries = doc["pool"].get("types")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("[pool] must contain at least one [[pool.types]] entry")
    types = []
    for i, entry in enumerate(entries):
        where = f"pool.types[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where}: must be a table")
        for key in entry:
            if key not in ("weight", "default_prob", "recovery"):
                raise ConfigError(f"{where}: unknown field {key!r}")
        weight = _number(_required(entry, "weight", where), where, "weight")
        p = _number(_required(entry, "default_prob", where), where, "default_prob")
        model = _parse_recovery(_required(entry, "recovery", where), where)
        try:
            types.append(TypeSpec(weight=weight, default_prob=p, recovery=model))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
    try:
        return PoolSpec(types=tuple(types))
    except ValueError as exc:
        raise ConfigError(f"pool: {exc}") from exc


def format_pool_config(spec: PoolSpec) -> str:
    """Inverse of parse_pool_config: parse(format(spec)) == spec, field for field."""
    lines = ["[pool]"]
    for t in spec.types:
        lines += ["", "[[pool.types]]"]
        lines.append(f"weight = {t.weight!r}")
        lines.append(f"default_prob = {t.default_prob!r}")
        lines += ["", "[pool.types.recovery]"]
        model = t.recovery
        if isinstance(model, PointMass):
            lines.append('kind = "point_mass"')
            lines.append(f"r0 = {model.r0!r}")
            continue
        mm = model.mean_map
        lines.append(f'kind = "beta_{mm.kind}"')
        lines.append(f"base = {mm.base!r}")
        if mm.kind in ("affine", "quadratic"):
            lines.append(f"slope = {mm.slope!r}")
        if mm.kind == "quadratic":
            lines.append(f"curvature = {mm.curvature!r}")
        lines.append(f"anchor = {mm.anchor!r}")
        lines.append(f"quad_nodes = {model.quad_nodes}")
    return "\n".join(lines) + "\n"


def _pool_hash(spec: PoolSpec) -> str:
    return hashlib.sha256(format_pool_config(spec).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Output rendering
# ---------------------------------------------------------------------------


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def _json_safe(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if isinstance(value, (float, np.floating)):
        f = float(value)
        return f if math.isfinite(f) else repr(f)
    return value


def _render(metadata: dict, columns: list[str], rows: list[list], fmt: str) -> str:
    if fmt == "json":
        payload = {
            "metadata": {k: _json_safe(v) for k, v in metadata.items()},
            "rows": [
                {c: _json_safe(v) for c, v in zip(columns, row)} for row in rows
            ],
        }
        return json.dumps(payload, indent=2) + "\n"
    lines = [f"# {k}={_cell(v)}" for k, v in metadata.items()]
    lines.append(",".join(columns))
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Shared command plumbing
# ---------------------------------------------------------------------------


def _resolve_pool(args) -> tuple[PoolSpec, dict]:
    if args.case is not None:
        try:
            spec = preset(args.case)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        source = {"case": args.case}
    else:
        path = Path(args.config)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        spec = parse_pool_config(text)
        source = {"config": str(path)}
    return spec, source


def _resolve_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return int(np.random.SeedSequence().entropy)


def _metadata(args, command: str, source: dict, **extra) -> dict:
    meta = {"version": _VERSION, "command": command}
    meta.update(source)
    meta.update(extra)
    return meta


def _grid(args) -> np.ndarray:
    if not 0.0 <= args.lmin < args.lmax <= 1.0:
        raise ConfigError(
            f"need 0 <= lmin < lmax <= 1, got lmin={args.lmin!r} lmax={args.lmax!r}"
        )
    if args.steps < 2:
        raise ConfigError(f"--steps must be >= 2, got {args.steps}")
    return np.linspace(args.lmin, args.lmax, args.steps)


def _error_point(ell: float, n_types: int) -> RatePoint:
    nan = math.nan
    return RatePoint(
        ell=ell,
        rate=nan,
        d_star=nan,
        r_star=nan,
        lambda1=nan,
        lambda2=nan,
        phi=(nan,) * n_types,
        psi=(nan,) * n_types,
        status="error",
    )


def _curve_points(spec: PoolSpec, grid: np.ndarray) -> list[RatePoint]:
    """rate_at along the grid; solver failures become status="error" rows."""
    points: list[RatePoint] = []
    warm = None
    for ell in grid:
        try:
            point = rate_at(spec, float(ell), warm=warm)
        except ConvergenceError as exc:
            print(f"warning: ell={float(ell)!r}: {exc}", file=sys.stderr)
            point = _error_point(float(ell), len(spec.types))
        else:
            if point.status == "ok" and math.isfinite(point.lambda1):
                warm = (point.lambda1, point.lambda2)
        points.append(point)
    return points


def _rate_columns(spec: PoolSpec) -> list[str]:
    k = len(spec.types)
    return (
        ["ell", "rate", "d_star", "r_star", "lambda1", "lambda2"]
        + [f"phi_{i + 1}" for i in range(k)]
        + [f"psi_{i + 1}" for i in range(k)]
        + ["status"]
    )


def _rate_row(point: RatePoint) -> list:
    return (
        [point.ell, point.rate, point.d_star, point.r_star, point.lambda1, point.lambda2]
        + list(point.phi)
        + list(point.psi)
        + [point.status]
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_lln(args) -> int:
    spec, source = _resolve_pool(args)
    summary = lln(spec)
    meta = _metadata(args, "lln", source, pool=_pool_hash(spec), seed=_resolve_seed(args))
    text = _render(meta, ["d_bar", "l_bar"], [[summary.d_bar, summary.l_bar]], args.format)
    _emit(text, args.out)
    return 0


def _cmd_rate_curve(args) -> int:
    spec, source = _resolve_pool(args)
    grid = _grid(args)
    points = _curve_points(spec, grid)
    meta = _metadata(
        args,
        "rate-curve",
        source,
        pool=_pool_hash(spec),
        seed=_resolve_seed(args),
        lmin=args.lmin,
        lmax=args.lmax,
        steps=args.steps,
    )
    rows = [_rate_row(p) for p in points]
    _emit(_render(meta, _rate_columns(spec), rows, args.format), args.out)
    return 0


def _cmd_recovery_curve(args) -> int:
    spec, source = _resolve_pool(args)
    grid = _grid(args)
    points = _curve_points(spec, grid)
    curve = RateCurve(points=tuple(points), pool=spec)
    rows = [list(r) for r in effective_recovery_curve(curve)]
    meta = _metadata(
        args,
        "recovery-curve",
        source,
        pool=_pool_hash(spec),
        seed=_resolve_seed(args),
        lmin=args.lmin,
        lmax=args.lmax,
        steps=args.steps,
    )
    _emit(_render(meta, ["d_star", "r_star", "ell"], rows, args.format), args.out)
    return 0


def _cmd_tail(args) -> int:
    spec, source = _resolve_pool(args)
    if not 0.0 <= args.ell <= 1.0:
        raise ConfigError(f"--ell must lie in [0, 1], got {args.ell!r}")
    if args.n < 1:
        raise ConfigError(f"--n must be >= 1, got {args.n}")
    if args.trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {args.trials}")
    seed = _resolve_seed(args)
    rate_point = rate_at(spec, args.ell)
    if args.method == "exact":
        try:
            estimate = tail_exact_pointmass(spec, args.ell, args.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif args.method == "naive":
        estimate = tail_naive(spec, args.ell, args.n, args.trials, seed)
    else:
        try:
            estimate = tail_tilted(spec, args.ell, args.n, args.trials, rate_point, seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    empirical = (
        math.inf if estimate.p_hat <= 0.0 else -math.log(estimate.p_hat) / estimate.n
    )
    meta = _metadata(
        args,
        "tail",
        source,
        pool=_pool_hash(spec),
        seed=seed,
        method=args.method,
        n=args.n,
        trials=estimate.trials,
    )
    columns = ["method", "ell", "n", "trials", "p_hat", "std_err", "empirical_rate", "rate_function"]
    row = [
        estimate.method,
        estimate.ell,
        estimate.n,
        estimate.trials,
        estimate.p_hat,
        estimate.std_err,
        empirical,
        rate_point.rate,
    ]
    _emit(_render(meta, columns, [row], args.format), args.out)
    return 0


def _interp_recovery(rows: list[tuple[float, float, float]], d: float) -> float:
    ds = np.array([r[0] for r in rows])
    rs = np.array([r[1] for r in rows])
    return float(np.interp(d, ds, rs))


def _cmd_reproduce(args) -> int:
    out_dir = Path(args.out if args.out is not None else ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = _grid(args)
    seed = _resolve_seed(args)

    pools = {case: preset(case) for case in range(1, 7)}
    points = {case: _curve_points(pools[case], grid) for case in pools}
    recovery_rows = {
        case: effective_recovery_curve(RateCurve(points=tuple(points[case]), pool=pools[case]))
        for case in pools
    }

    def rate_table(cases: list[int]) -> tuple[list[str], list[list]]:
        columns = ["ell"] + [f"rate_case_{c}" for c in cases]
        rows = []
        for i, ell in enumerate(grid):
            rows.append([float(ell)] + [points[c][i].rate for c in cases])
        return columns, rows

    def recovery_table(cases: list[int]) -> tuple[list[str], list[list]]:
        columns = ["case", "d_star", "r_star", "ell"]
        rows = []
        for c in cases:
            rows.extend([c, d, r, ell] for d, r, ell in recovery_rows[c])
        return columns, rows

    meta_common = {
        "version": _VERSION,
        "command": "reproduce",
        "seed": seed,
        "lmin": args.lmin,
        "lmax": args.lmax,
        "steps": args.steps,
    }
    files = {
        "fig51.csv": rate_table([1, 2, 3, 4]),
        "fig52.csv": recovery_table([1, 2, 3, 4]),
        "fig53a.csv": rate_table([5, 6]),
        "fig53b.csv": recovery_table([5, 6]),
    }
    for name, (columns, rows) in files.items():
        meta = dict(meta_common)
        meta["file"] = name
        (out_dir / name).write_text(_render(meta, columns, rows, "csv"), encoding="utf-8")

    # Ordering checks.  Rates compare with slack; missing (nan) rows fail.
    def rates_ordered(lo_case: int, hi_case: int) -> bool:
        ok = True
        for i in range(len(grid)):
            lo, hi = points[lo_case][i].rate, points[hi_case][i].rate
            if math.isnan(lo) or math.isnan(hi):
                return False
            if not (lo <= hi + _ORDERING_TOL or (math.isinf(lo) and math.isinf(hi))):
                ok = False
        return ok

    orderings = {
        "rate_case_3_le_4": rates_ordered(3, 4),
        "rate_case_4_le_2": rates_ordered(4, 2),
        "rate_case_2_le_1": rates_ordered(2, 1),
        "rate_case_5_le_6": rates_ordered(5, 6),
    }
    r5, r6 = recovery_rows[5], recovery_rows[6]
    if r5 and r6:
        d_common = min(r5[-1][0], r6[-1][0])
        orderings["recovery_case_5_lt_6_at_largest_common_d"] = _interp_recovery(
            r5, d_common
        ) < _interp_recovery(r6, d_common)
    else:
        orderings["recovery_case_5_lt_6_at_largest_common_d"] = False
    r2 = recovery_rows[2]
    orderings["case_2_r_star_strictly_decreasing"] = len(r2) >= 2 and all(
        b[1] < a[1] for a, b in zip(r2, r2[1:])
    )

    manifest = {
        "version": _VERSION,
        "seed": seed,
        "grid": {"lmin": args.lmin, "lmax": args.lmax, "steps": args.steps},
        "ordering_tolerance": _ORDERING_TOL,
        "lln": {
            f"case_{c}": {"d_bar": lln(pools[c]).d_bar, "l_bar": lln(pools[c]).l_bar}
            for c in pools
        },
        "orderings": orderings,
        "files": sorted(files),
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )

    if not all(orderings.values()):
        failed = sorted(name for name, ok in orderings.items() if not ok)
        print(f"ordering checks failed: {', '.join(failed)}", file=sys.stderr)
        return 3
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit 2; the contract is exit 1
        raise _UsageError(message)


def _add_pool_arguments(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--case", type=int, help="preset pool 1-6")
    group.add_argument("--config", help="path to a TOML pool config")


def _add_output_arguments(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tailrisk",
        description="Large-deviations rates and tail estimators for credit-pool losses.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {_VERSION}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("lln", help="typical default and loss rates")
    _add_pool_arguments(p)
    _add_output_arguments(p)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_lln)

    p = sub.add_parser("rate-curve", help="rate function over a loss grid")
    _add_pool_arguments(p)
    p.add_argument("--lmin", type=float, required=True)
    p.add_argument("--lmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int)
    _add_output_arguments(p)
    p.set_defaults(func=_cmd_rate_curve)

    p = sub.add_parser("recovery-curve", help="effective recovery vs optimal defaults")
    _add_pool_arguments(p)
    p.add_argument("--lmin", type=float, required=True)
    p.add_argument("--lmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int)
    _add_output_arguments(p)
    p.set_defaults(func=_cmd_recovery_curve)

    p = sub.add_parser("tail", help="tail probability estimate at one loss level")
    _add_pool_arguments(p)
    p.add_argument("--ell", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--method", choices=("naive", "tilted", "exact"), default="naive")
    p.add_argument("--seed", type=int)
    _add_output_arguments(p)
    p.set_defaults(func=_cmd_tail)

    p = sub.add_parser("reproduce", help="write the reference figure data sets")
    p.add_argument("--lmin", type=float, default=0.064)
    p.add_argument("--lmax", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (default: current)")
    p.set_defaults(func=_cmd_reproduce)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return int(args.func(args))
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, SamplingError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
