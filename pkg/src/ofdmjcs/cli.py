"""Command line entry point: ``ofdmjcs {radar,ber,papr,alias-check}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import ExperimentSpec, ebn0_at_ber, ber_curve, run_alias_check, run_ber, run_papr, run_radar

COMMANDS = {
    "radar": ("radar", run_radar),
    "ber": ("ber", run_ber),
    "papr": ("papr", run_papr),
    "alias-check": ("alias", run_alias_check),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ofdmjcs", description="OFDM joint radar-communication simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON experiment file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", type=Path, help="output directory (overrides the config)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_spec(args) -> ExperimentSpec:
    kind = COMMANDS[args.command][0]
    data = {}
    if args.config is not None:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = str(args.out)
    return ExperimentSpec.from_dict(data, kind)


def _summarize(kind: str, result) -> None:
    if kind == "radar":
        for rule, rep in result.items():
            labels = sorted({p.classification for p in rep.peaks})
            print(f"{rule}: {len(rep)} peaks, floor {rep.noise_floor_db:.1f} dB, classes {labels}")
    elif kind == "ber":
        seen = []
        for r in result:
            if (r.rule, r.condition) not in seen:
                seen.append((r.rule, r.condition))
        for rule, cond in seen:
            x, b = ber_curve(result, rule, cond)
            print(f"{rule} {cond}: Eb/N0 at BER 1e-4 = {ebn0_at_ber(x, b):.2f} dB")
    elif kind == "papr":
        for rule, s in result["rules"].items():
            print(f"{rule}: PAPR at CCDF {result['probability']:g} = {s['papr_db_at_probability']:.2f} dB")
        for w in result["warnings"]:
            print(f"warning: {w}")
    else:
        for r in result:
            status = "ok" if r["passed"] else "FAIL"
            print(f"Nc={r['Nc']} mu={r['mu']} Na={r['Na']} N_f={r['N_f']} max_rel_error={r['max_rel_error']:.2e} {status}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    kind, runner = COMMANDS[args.command]
    try:
        spec = load_spec(args)
        result = runner(spec, jobs=max(1, args.jobs))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": args.command}), file=sys.stderr)
        return 2
    _summarize(kind, result)
    if kind == "alias" and not all(r["passed"] for r in result):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
