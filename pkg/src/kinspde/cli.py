"""Command line entry point: ``kinspde run|list|validate|dump-field``.

Exit codes: 0 when every assertion passes, 1 on assertion failures, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .errors import ConfigurationError
from .experiments import catalog, load_config, resolve_config, run_experiment
from .io import field_to_csv, read_field

log = logging.getLogger("kinspde")

OUTPUT_ENV = "KINSPDE_OUTPUT_DIR"


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kinspde", description="Stochastic kinetic equation laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a YAML configuration")
    run.add_argument("config", help="YAML file, or the bare name of a catalogue experiment")
    run.add_argument("--output-dir", help=f"bundle directory (default: config output_dir, ${OUTPUT_ENV}, "
                                          "or ./runs/<name>)")
    run.add_argument("--threads", type=int, default=1, help="FFT worker threads (results do not depend on it)")
    run.add_argument("--seed-override", type=int, help="replace the configured seed")

    sub.add_parser("list", help="list catalogue experiments")

    val = sub.add_parser("validate", help="check a configuration without running it")
    val.add_argument("config")

    dump = sub.add_parser("dump-field", help="convert a binary field dump to CSV")
    dump.add_argument("file")
    dump.add_argument("-o", "--output", help="CSV path (default: alongside the input)")
    return ap


def _read_config(arg: str) -> dict:
    names = {e.name for e in catalog()}
    if arg in names and not Path(arg).exists():
        return {"name": arg}
    return load_config(arg)


def _cmd_run(args) -> int:
    cfg = _read_config(args.config)
    if args.seed_override is not None:
        cfg["seed"] = args.seed_override
    full = resolve_config(cfg)
    out = args.output_dir or full.get("output_dir") or os.environ.get(OUTPUT_ENV)
    out = Path(out) if out else Path("runs") / full["name"]
    log.info("running %s into %s", full["name"], out)
    result = run_experiment(full, out, threads=args.threads)
    for a in result.assertions:
        print(a.line())
    print(f"{result.name}: {'PASS' if result.passed else 'FAIL'} ({out})")
    return 0 if result.passed else 1


def _cmd_list(_args) -> int:
    width = max(len(e.name) for e in catalog())
    for e in catalog():
        print(f"{e.name:<{width}}  criterion {e.criterion:>2}  {e.runtime:>7}  {e.description}")
    return 0


def _cmd_validate(args) -> int:
    full = resolve_config(_read_config(args.config))
    print(f"{full['name']}: configuration OK")
    return 0


def _cmd_dump(args) -> int:
    src = Path(args.file)
    try:
        fld = read_field(src)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read field dump {src}: {exc}") from exc
    dst = Path(args.output) if args.output else src.with_suffix(".csv")
    field_to_csv(dst, fld)
    print(dst)
    return 0


COMMANDS = {"run": _cmd_run, "list": _cmd_list, "validate": _cmd_validate, "dump-field": _cmd_dump}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
