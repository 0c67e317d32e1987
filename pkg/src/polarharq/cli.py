"""``polarharq`` command line: ``construct``, ``fer`` and ``harq``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harq import PlanError
from .sim import CampaignAborted, ConfigError, SimConfig, run_construct, run_fer

EXIT_CONFIG = 2
EXIT_ABORTED = 1


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarharq", description="Polar-code IR-HARQ construction and FER simulation")
    sub = p.add_subparsers(dest="mode", required=True)
    for mode, text in (
        ("construct", "design the HARQ chain and dump it as JSON"),
        ("fer", "FER sweep of the first-transmission code"),
        ("harq", "FER sweep of every HARQ stage"),
    ):
        s = sub.add_parser(mode, help=text)
        s.add_argument("--config", type=Path, help="flat JSON config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--workers", type=int)
        s.add_argument("--out", type=Path, help="CSV output (default: stdout)")
        s.add_argument("--plan-out", type=Path, help="write the plan JSON here")
        s.add_argument("--k", type=int, help="message bits (CRC excluded)")
        s.add_argument("--n", dest="n_list", type=int, nargs="+", help="transmission lengths in bits")
        s.add_argument("--design", dest="design_points", type=float, nargs="+", help="design SNRs in dB")
        s.add_argument("--modulation", type=int, help="bits per ASK symbol")
        s.add_argument("--list-size", dest="list_size", type=int)
        s.add_argument("--no-crc", dest="crc", action="store_const", const=False)
        s.add_argument("--snr", nargs=3, type=float, metavar=("START", "STOP", "STEP"))
        s.add_argument("--min-errors", dest="min_errors", type=int)
        s.add_argument("--min-frames", dest="min_frames", type=int)
        s.add_argument("--max-frames", dest="max_frames", type=int)
        s.add_argument("--batch-size", dest="batch_size", type=int)
        s.add_argument("--stages", type=int, nargs="+", help="HARQ stages to decode and report")
        s.add_argument("--no-timing", dest="timing", action="store_const", const=False)
    return p


def load_config(args: argparse.Namespace) -> SimConfig:
    doc = {}
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
    doc["mode"] = args.mode
    for key in (
        "seed", "workers", "k", "n_list", "design_points", "modulation", "list_size", "crc",
        "min_errors", "min_frames", "max_frames", "batch_size", "stages", "timing",
    ):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    if args.snr is not None:
        doc["snr_start"], doc["snr_stop"], doc["snr_step"] = args.snr
    return SimConfig.from_dict(doc)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args)
        if cfg.mode == "construct":
            plan, estimates = run_construct(cfg)
        else:
            plan = cfg.plan()
    except (ConfigError, PlanError, TypeError) as exc:
        print(f"polarharq: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.plan_out is not None:
        args.plan_out.write_text(plan.to_json(indent=1))
    if cfg.mode == "construct":
        if args.plan_out is None:
            print(plan.to_json())
        for t, est in enumerate(estimates, start=1):
            print(f"stage {t}: n={sum(plan.n[:t])} SC FER estimate {est:.3e}", file=sys.stderr)
        return 0

    def progress(rec):
        print(f"stage {rec.stage} snr {rec.snr_db:g} dB: {rec.errors}/{rec.frames} (fer {rec.fer:.3e})", file=sys.stderr)

    code = 0
    try:
        result = run_fer(cfg, progress=progress)
    except CampaignAborted as exc:
        print(f"polarharq: {exc}; writing finished points", file=sys.stderr)
        result, code = exc.partial, EXIT_ABORTED
    text = result.to_csv(timing=cfg.timing)
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
