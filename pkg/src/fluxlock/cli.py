"""Command-line front end: ``run``, ``sweep`` and ``compare``.

Seed precedence is flag > config > default (0).  The output directory
follows flag > ``FLUXLOCK_OUT`` environment variable > config > default;
the environment variable can only redirect output, it never changes
numerics.  Exit status is 0 only when every requested comparison passed,
1 when any failed (or compared exports differ), 2 for unusable input.
"""

from __future__ import annotations

import argparse
import filecmp
import json
import os
import sys

from .core import FluxlockError, ScenarioValidationError
from .scenario import SCHEMA_VERSION, _jsonable, export, parse_scenario, run

__all__ = ["main"]

_EXPORT_FILES = ("traces.csv", "psd.csv", "reports.json", "manifest.json")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ScenarioValidationError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except FluxlockError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxlock",
        description="simulate phase-locked laser scenarios from sectioned config files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and export its results")
    p_run.add_argument("config", help="path to a scenario file")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--out", default=None, help="output directory (default: FLUXLOCK_OUT, then the config's)")
    p_run.set_defaults(handler=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a scenario once per value of one parameter")
    p_sweep.add_argument("config", help="path to a scenario file")
    p_sweep.add_argument(
        "--param",
        required=True,
        metavar="ELEMENT.KEY=V1,V2,...",
        help="parameter path and comma-separated values, e.g. lock.gain_scale=0.5,1.0,1.5",
    )
    p_sweep.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_sweep.add_argument("--out", default=None, help="parent directory for the per-point outputs")
    p_sweep.set_defaults(handler=_cmd_sweep)

    p_cmp = sub.add_parser("compare", help="byte-compare the exports of two runs")
    p_cmp.add_argument("out_a", help="first export directory")
    p_cmp.add_argument("out_b", help="second export directory")
    p_cmp.set_defaults(handler=_cmd_compare)
    return parser


def _read_config(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise FluxlockError(f"cannot read scenario file {path!r}: {exc}") from exc


def _resolve_out(flag: str | None, config_out: str) -> str:
    if flag:
        return flag
    env = os.environ.get("FLUXLOCK_OUT")
    if env:
        return env
    return config_out


def _print_reports(reports: dict, indent: str = "") -> tuple[int, int]:
    """Print one verdict line per report; return (verdicts, failures)."""
    verdicts = failures = 0
    for name in sorted(reports):
        rep = reports[name]
        passed = rep.get("passed")
        if passed is None:
            detail = {k: v for k, v in rep.items() if k not in ("type", "passed")}
            body = ", ".join(f"{k}={_short(v)}" for k, v in detail.items())
            print(f"{indent}INFO {name} [{rep['type']}]: {body}")
            continue
        verdicts += 1
        if rep["type"] == "comparison":
            body = (
                f"measured {rep['measured_mean']:.6g} vs reference {rep['reference_mean']:.6g}"
                f" (ratio {rep['ratio']:.4f}, band {rep['band']}, tol {rep['tolerance']:g})"
            )
        else:
            body = (
                f"exponent {rep['exponent']:.4f} vs expected {rep['expected_exponent']:g}"
                f" (r2 {rep['r_squared']:.5f}, tol {rep['tolerance']:g})"
            )
        if passed:
            print(f"{indent}PASS {name}: {body}")
        else:
            failures += 1
            print(f"{indent}FAIL {name}: {body}")
    return verdicts, failures


def _short(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


def _cmd_run(args) -> int:
    config = parse_scenario(_read_config(args.config))
    result = run(config, seed=args.seed)
    out_dir = _resolve_out(args.out, config.out_dir)
    export(result, out_dir)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    _, failures = _print_reports(result.reports)
    print(f"exported to {out_dir} (seed {result.seed})")
    return 1 if failures else 0


def _parse_param(raw: str) -> tuple[str, str, list[str]]:
    if "=" not in raw:
        raise FluxlockError(f"--param must look like element.key=v1,v2,..., got {raw!r}")
    path, _, joined = raw.partition("=")
    if "." not in path:
        raise FluxlockError(f"--param path must be element.key, got {path!r}")
    element, _, key = path.strip().partition(".")
    values = [v.strip() for v in joined.split(",") if v.strip()]
    if not values:
        raise FluxlockError(f"--param {raw!r} lists no values")
    return element.strip(), key.strip(), values


def _override(text: str, element: str, key: str, value: str) -> str:
    """Rewrite one key in one section of a scenario document.

    Works on the text itself so the swept config is an ordinary document
    and line numbers in any validation message still point at real lines.
    """
    lines = text.splitlines()
    section_at = None
    for i, raw in enumerate(lines):
        stripped = raw.split("#", 1)[0].strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            parts = stripped[1:-1].split()
            name = parts[-1] if parts else ""
            section_at = i if name == element else None
            continue
        if section_at is None:
            continue
        if "=" in stripped and stripped.split("=", 1)[0].strip() == key:
            lines[i] = f"{key} = {value}"
            return "\n".join(lines) + "\n"
    # key not present: insert right below the section header
    for i, raw in enumerate(lines):
        stripped = raw.split("#", 1)[0].strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            parts = stripped[1:-1].split()
            if parts and parts[-1] == element:
                lines.insert(i + 1, f"{key} = {value}")
                return "\n".join(lines) + "\n"
    raise FluxlockError(f"--param: no section named {element!r} in the scenario")


def _cmd_sweep(args) -> int:
    text = _read_config(args.config)
    element, key, values = _parse_param(args.param)
    base = parse_scenario(text)  # surface config problems before any point runs
    parent = _resolve_out(args.out, base.out_dir)
    os.makedirs(parent, exist_ok=True)

    failures = 0
    points = []
    for i, value in enumerate(values):
        cfg = parse_scenario(_override(text, element, key, value))
        result = run(cfg, seed=args.seed)
        safe = value.replace(os.sep, "_")
        point_dir = os.path.join(parent, f"{i:02d}_{key}={safe}")
        export(result, point_dir)
        print(f"[{element}.{key} = {value}] -> {point_dir}")
        for warning in result.warnings:
            print(f"  warning: {warning}", file=sys.stderr)
        _, point_failures = _print_reports(result.reports, indent="  ")
        failures += point_failures
        points.append(
            {
                "value": value,
                "dir": os.path.basename(point_dir),
                "seed": result.seed,
                "reports": result.reports,
            }
        )

    summary = {
        "schema_version": SCHEMA_VERSION,
        "param": f"{element}.{key}",
        "values": values,
        "points": points,
    }
    with open(os.path.join(parent, "sweep.json"), "w", newline="\n") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return 1 if failures else 0


def _cmd_compare(args) -> int:
    for d in (args.out_a, args.out_b):
        if not os.path.isdir(d):
            raise FluxlockError(f"{d!r} is not a directory")
    present = [
        name
        for name in _EXPORT_FILES
        if os.path.exists(os.path.join(args.out_a, name)) or os.path.exists(os.path.join(args.out_b, name))
    ]
    if not present:
        raise FluxlockError("neither directory holds any export files")
    different = 0
    for name in present:
        pa = os.path.join(args.out_a, name)
        pb = os.path.join(args.out_b, name)
        if not (os.path.exists(pa) and os.path.exists(pb)):
            print(f"DIFFER {name}: present in only one directory")
            different += 1
            continue
        if filecmp.cmp(pa, pb, shallow=False):
            print(f"MATCH  {name}")
        else:
            different += 1
            print(f"DIFFER {name}")
    if different:
        print(f"{different} file(s) differ")
        return 1
    print("exports are byte-identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
