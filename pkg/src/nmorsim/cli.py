"""Command line entry point: ``nmorsim run|preset|sweep|rerun``.

Successful commands print a JSON summary on stdout and exit 0.  Failures
print one JSON object on stderr and exit 2 (invalid configuration) or 1
(anything else).
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import yaml

from . import __version__
from .scenarios import ConfigError, load, preset, preset_names, rerun, run, sweep
from .scenarios.config import Scenario, load_file, resolve, set_path

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--out-dir", help="output directory (default: output.dir or runs/<name>)")
    p.add_argument("--format", choices=("csv", "jsonl"), help="table format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nmorsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nmorsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("preset", help="run a built-in scenario or print its config")
    p.add_argument("name", help=f"one of {', '.join(preset_names())}")
    p.add_argument("--emit-config", action="store_true", help="print the resolved config as YAML and exit")
    _common(p)

    p = sub.add_parser("sweep", help="run a scenario once per value of one parameter")
    p.add_argument("config")
    p.add_argument("--param", required=True, help="dotted key path, e.g. waveform.amplitude_nt or arms[0].probe.rabi_hz")
    p.add_argument("--values", required=True, help="comma-separated values or a JSON list")
    _common(p)

    p = sub.add_parser("rerun", help="re-execute the scenario recorded in a manifest")
    p.add_argument("manifest", help="manifest.json or the run directory holding it")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"))
    return parser


def parse_values(text: str) -> list:
    text = text.strip()
    if text.startswith("["):
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([("--values", f"invalid JSON list: {exc}")]) from exc
        if not isinstance(values, list):
            raise ConfigError([("--values", "expected a JSON list")])
        return values
    return [yaml.safe_load(v) for v in text.split(",") if v.strip()]


def _scenario(args, source) -> Scenario:
    """Resolve ``source`` (a Scenario or raw mapping), applying ``--seed`` first."""
    if isinstance(source, Scenario):
        if args.seed is None:
            return source
        return Scenario(resolve(set_path(source.config, "seed", args.seed)))
    raw = dict(source)
    if args.seed is not None:
        raw["seed"] = args.seed
    return load(raw)


def _summary(bundle) -> dict:
    return {"status": "complete", "out_dir": str(bundle.out_dir), "files": sorted(bundle.files)}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            out = _summary(run(_scenario(args, load_file(args.config)), args.out_dir, args.format))
        elif args.command == "preset":
            scn = _scenario(args, preset(args.name))
            if args.emit_config:
                sys.stdout.write(yaml.safe_dump(scn.to_dict(), sort_keys=False))
                return 0
            out = _summary(run(scn, args.out_dir, args.format))
        elif args.command == "sweep":
            values = parse_values(args.values)
            if not values:
                raise ConfigError([("--values", "no values given")])
            scn = _scenario(args, load_file(args.config))
            bundles = sweep(scn, args.param, values, args.out_dir, args.format)
            out = {"status": "complete", "param": args.param, "points": [str(b.out_dir) for b in bundles]}
        else:
            out = _summary(rerun(args.manifest, args.out_dir, args.format))
    except ConfigError as exc:
        json.dump(exc.to_dict(), sys.stderr)
        sys.stderr.write("\n")
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_RUNTIME
    json.dump(out, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
