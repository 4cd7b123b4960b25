"""Command-line front end.

Exit codes: 0 success, 1 a scenario check or acceptance criterion failed,
2 bad configuration, 3 physics error, 4 resource limit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, validation
from .errors import ConfigError, GhostSimError
from .experiments import RUNNERS, Result
from .io import atomic_write_bytes, atomic_write_text
from .scenario import builtin_scenarios, load_scenario

log = logging.getLogger("ghostsim")


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _scan_spec(text: str) -> tuple[float, int]:
    try:
        rmax, steps = text.split(",")
        return float(rmax), int(steps)
    except ValueError:
        raise argparse.ArgumentTypeError("expected RMAX,STEPS, e.g. 2e-4,9") from None


def _tolerance(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected NAME=VALUE, e.g. 5.branch1_removed_cv=1e-8")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {value!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostsim", description="Ghost-imaging simulator.")
    parser.add_argument("--version", action="version", version=f"ghostsim {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True,
                       help="scenario file, or the name of a shipped one (see 'ghostsim list')")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")

    p = sub.add_parser("image", help="coincidence image R(x1)")
    common(p)
    p.add_argument("--path", choices=("analytic", "bruteforce", "both"))
    p.add_argument("--branch1-lens", type=_on_off, metavar="on|off")
    p.add_argument("--branch2-lens", type=_on_off, metavar="on|off")

    p = sub.add_parser("interfere", help="coincidence rate against relative delay tau")
    common(p)
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-max", type=float)
    p.add_argument("--steps", type=int)

    p = sub.add_parser("correlate", help="spatial correlator g(r)")
    common(p)
    p.add_argument("--scan", type=_scan_spec, metavar="RMAX,STEPS")
    p.add_argument("--deinvert", action="store_true", default=None,
                   help="undo the reflection of the branch-2 intensity")

    p = sub.add_parser("lens-study", help="brute-force maps with each detection lens removed")
    common(p)
    p.add_argument("--both-off", action="store_true", help="also compute the map without either lens")

    p = sub.add_parser("validate", help="run the built-in acceptance suite")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--criteria", type=int, nargs="+", choices=range(1, 12), metavar="N",
                   help="run only these criteria (default: all 11)")
    p.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                   help="override one pinned tolerance (repeatable)")

    sub.add_parser("list", help="list shipped scenarios")
    return parser


def _write_result(result: Result, out: Path) -> None:
    for name, data in result.artifacts.items():
        atomic_write_bytes(out / name, data)
        log.info("wrote %s", out / name)


def _run_experiment(args) -> int:
    sc = load_scenario(args.scenario)
    if args.command == "image":
        result = RUNNERS["image"](sc, args.path, args.branch1_lens, args.branch2_lens)
    elif args.command == "interfere":
        result = RUNNERS["interfere"](sc, args.tau_min, args.tau_max, args.steps)
    elif args.command == "correlate":
        rmax, steps = args.scan if args.scan else (None, None)
        result = RUNNERS["correlate"](sc, rmax, steps, args.deinvert)
    else:
        result = RUNNERS["lens-study"](sc, args.both_off)
    _write_result(result, args.out)
    print(json.dumps(result.metrics, indent=2, sort_keys=True))
    for name in result.failed_checks:
        print(f"check failed: {name}", file=sys.stderr)
    return 0 if result.ok else 1


def _run_validate(args) -> int:
    overrides = dict(args.tolerance)
    unknown = sorted(set(overrides) - set(validation.TOLERANCES))
    if unknown:
        raise ConfigError(f"unknown tolerance name(s): {', '.join(unknown)}")
    report = validation.run_all(overrides, args.criteria)
    for entry in report["criteria"]:
        mark = "PASS" if entry["passed"] else "FAIL"
        print(f"[{mark}] criterion {entry['number']}: {entry['title']}", file=sys.stderr)
    atomic_write_text(args.out / "validation.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["passed"] else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.command == "list":
            print("\n".join(builtin_scenarios()))
            return 0
        if args.command == "validate":
            return _run_validate(args)
        return _run_experiment(args)
    except GhostSimError as exc:
        print(f"ghostsim: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
