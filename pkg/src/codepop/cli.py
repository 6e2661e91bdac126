"""Command-line entry point.

One binary, nine subcommands: five run scenarios from a config file
(evolve honors the config's kind; attack, respond, synonyms and multi
force theirs), four operate directly on stored snapshots (measure, mds,
probe-shift, validate). Exit codes: 0 success, 1 validation failure,
2 usage error. Progress goes to standard error, machine output to files
or standard output, and no subcommand ever rewrites its inputs.

Relative output directories resolve against $CODEPOP_OUTPUT_DIR when it
is set, so batch scripts can redirect whole pipelines with one variable.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import CodepopError, UsageError
from .metrics import measure_report
from .popmodel import load_snapshot, validate
from .reportkit import _json_text
from .scenarios import (
    _embedding_payload,
    apply_shift_probe,
    parse_scenario_config,
    run_scenario,
)

OUTPUT_DIR_VAR = "CODEPOP_OUTPUT_DIR"


def _default_jobs() -> int:
    return os.cpu_count() or 1


def _resolve_output(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_VAR)
    if base and not Path(path).is_absolute():
        return str(Path(base) / path)
    return path


def _progress(verbosity: int):
    if verbosity < 1:
        return None
    step = 1 if verbosity >= 2 else 100

    def report(rec):
        if rec.generation % step == 0:
            print(f"generation {rec.generation} best {rec.best_fitness:.6f}",
                  file=sys.stderr)

    return report


def _cmd_scenario(args, forced_kind: str | None) -> int:
    cfg = parse_scenario_config(args.config)
    if forced_kind is not None and cfg.kind != forced_kind:
        cfg = replace(cfg, kind=forced_kind)
    if args.snapshot is not None:
        cfg = replace(cfg, input_snapshot=args.snapshot)
    cfg = replace(cfg, output_dir=_resolve_output(args.output or cfg.output_dir))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    result = run_scenario(cfg, jobs=args.jobs, progress=_progress(args.verbose))
    if args.verbose:
        print(f"wrote {result.output_dir}", file=sys.stderr)
    return 0


def _cmd_measure(args) -> int:
    report = measure_report(load_snapshot(args.snapshot))
    sys.stdout.write(_json_text(report.to_dict()) + "\n")
    return 0


def _cmd_mds(args) -> int:
    payload = _embedding_payload(load_snapshot(args.snapshot))
    sys.stdout.write(_json_text(payload) + "\n")
    return 0


def _cmd_probe_shift(args) -> int:
    pop = load_snapshot(args.snapshot)
    shift = args.shift if args.shift is not None else pop.alphabet_size // 2
    before, after = apply_shift_probe(pop, shift)
    sys.stdout.write(_json_text({
        "shift": shift,
        "env_info_before": before,
        "env_info_after": after,
        "gain": after - before,
    }) + "\n")
    return 0


def _cmd_validate(args) -> int:
    try:
        pop = load_snapshot(args.snapshot)
    except OSError:
        raise
    except (CodepopError, ValueError, KeyError, TypeError) as exc:
        print(f"snapshot: {exc}")
        return 1
    problems = validate(pop)
    if problems:
        for violation in problems:
            print(violation)
        return 1
    print("valid")
    return 0


def _add_scenario_parser(sub, name: str, forced_kind: str | None, help_text: str):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, metavar="FILE",
                   help="scenario configuration file (INI)")
    p.add_argument("--snapshot", metavar="FILE",
                   help="input snapshot, overriding the config")
    p.add_argument("--output", metavar="DIR",
                   help="output directory, overriding the config")
    p.add_argument("--seed", type=int, metavar="N",
                   help="seed override, recorded in the manifest")
    p.add_argument("--jobs", type=int, default=_default_jobs(), metavar="N",
                   help="fitness evaluation workers; never affects results "
                        "(default: available parallelism)")
    p.add_argument("-v", "--verbose", action="count", default=0,
                   help="progress to stderr; repeat for every generation")
    p.set_defaults(func=lambda a: _cmd_scenario(a, forced_kind))


def _add_snapshot_parser(sub, name: str, func, help_text: str):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--snapshot", required=True, metavar="FILE",
                   help="population snapshot to read")
    p.set_defaults(func=func)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="codepop",
        description="evolve, attack and measure populations of communicating agents",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="COMMAND")
    _add_scenario_parser(sub, "evolve", None,
                         "run the scenario described by the config (any kind)")
    _add_scenario_parser(sub, "attack", "attack",
                         "evolve parasites against a host snapshot")
    _add_scenario_parser(sub, "respond", "respond",
                         "re-evolve host codes against a parasitized snapshot")
    _add_scenario_parser(sub, "synonyms", "synonym_series",
                         "attack variants with 1, 2, 4, ... synonym types")
    _add_scenario_parser(sub, "multi", "multi_parasite",
                         "attack with several parasites evolved jointly")
    _add_snapshot_parser(sub, "measure", _cmd_measure,
                         "print the snapshot's measurement report as JSON")
    _add_snapshot_parser(sub, "mds", _cmd_mds,
                         "print a 2D embedding of the snapshot's code types")
    probe = _add_snapshot_parser(sub, "probe-shift", _cmd_probe_shift,
                                 "report env-information before/after shifting host codes")
    probe.add_argument("--shift", type=int, metavar="N",
                       help="relabeling offset (default: half the alphabet)")
    _add_snapshot_parser(sub, "validate", _cmd_validate,
                         "check a snapshot against every population invariant")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CodepopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
