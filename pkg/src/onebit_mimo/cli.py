"""Command-line front end: ``onebit-mimo <subcommand> --config FILE [options]``."""

import argparse
import itertools
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from .channel import SNR_CONVENTION
from .exceptions import ConfigError, OneBitMimoError
from .harness import (
    DETECTOR_NAMES,
    ESTIMATORS,
    ExperimentSpec,
    run_sweep,
    write_results,
)

SUBCOMMANDS = ("estimate-sweep", "ber-sweep", "coded-sweep", "near-far", "validate")
EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 2, 3, 4
SEED_ENV = "ONEBIT_MIMO_SEED"

CONFIG_HELP = f"""\
Config files are JSON objects whose keys are ExperimentSpec fields:
  M, K, tau, data_len, symbol_energy, sweep (list of dB points),
  sweep_axis (snr|ebn0), estimator ({'|'.join(ESTIMATORS)}),
  detector ({'|'.join(DETECTOR_NAMES)}|null), coded, trials, rls_lambda,
  delta (log-linear|matched|number|list), near_far_db, pilot_mode
  (orthogonal|random), quantize, ldpc_n, ldpc_rate, ldpc_column_weight,
  ldpc_seed, ldpc_max_iter, base_seed.
'estimator' and 'detector' may be lists; every combination is run.
Unknown keys are rejected.

{SNR_CONVENTION}.

Exit codes: 0 ok, 2 configuration error, 3 runtime error, 4 I/O error.
"""


@dataclass
class CliCommand:
    subcommand: str
    config: Path
    overrides: List[str] = field(default_factory=list)
    out: Optional[Path] = None
    fmt: str = "csv"
    workers: int = 1
    seed: Optional[int] = None
    quiet: bool = False


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="onebit-mimo",
        description="Monte-Carlo sweeps for 1-bit massive MIMO channel estimation and detection.",
        epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    helps = {
        "estimate-sweep": "channel-estimation NMSE (defaults to ls, blmmse and lra-rls)",
        "ber-sweep": "uncoded BER",
        "coded-sweep": "LDPC-coded BER (soft detectors, Eb/N0 axis by default)",
        "near-far": "per-user BER with one boosted user (needs near_far_db)",
        "validate": "check a config without running it",
    }
    for name in SUBCOMMANDS:
        s = sub.add_parser(name, help=helps[name], description=helps[name],
                           epilog=CONFIG_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        s.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        s.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (value parsed as JSON); repeatable")
        s.add_argument("--out", type=Path, help="output file (default: <subcommand>.<format>)")
        s.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
        s.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
        s.add_argument("--seed", type=int, help=f"base seed (default: config base_seed, then ${SEED_ENV})")
        s.add_argument("--quiet", action="store_true", help="suppress per-point summary lines")
    return p


def parse_args(argv=None) -> CliCommand:
    ns = _parser().parse_args(argv)
    if ns.workers < 1:
        _parser().error("--workers must be >= 1")
    return CliCommand(ns.subcommand, ns.config, ns.overrides, ns.out, ns.fmt,
                      ns.workers, ns.seed, ns.quiet)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def load_config(cmd: CliCommand) -> dict:
    """Read the JSON config, apply overrides and seed precedence
    (--seed, then --set/config base_seed, then the environment)."""
    try:
        text = cmd.config.read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {cmd.config}: {exc.strerror or exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{cmd.config}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{cmd.config}: top level must be a JSON object")
    cfg.pop("description", None)
    for item in cmd.overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not KEY=VALUE")
        cfg[key.strip()] = _parse_value(value)
    if cmd.seed is not None:
        cfg["base_seed"] = cmd.seed
    elif "base_seed" not in cfg and os.environ.get(SEED_ENV):
        try:
            cfg["base_seed"] = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer") from exc
    return cfg


def expand_specs(subcommand: str, cfg: dict) -> List[ExperimentSpec]:
    cfg = dict(cfg)
    if subcommand == "estimate-sweep":
        if cfg.get("detector") is not None:
            raise ConfigError("estimate-sweep measures NMSE only; remove 'detector'")
        cfg["detector"] = None
        cfg.setdefault("estimator", ["ls", "blmmse", "lra-rls"])
    elif subcommand == "ber-sweep":
        if cfg.get("coded"):
            raise ConfigError("ber-sweep is uncoded; use coded-sweep")
        cfg["coded"] = False
    elif subcommand == "coded-sweep":
        cfg["coded"] = True
        cfg.setdefault("sweep_axis", "ebn0")
        cfg.setdefault("detector", ["lra-mmse", "sic-soft"])
    elif subcommand == "near-far":
        if cfg.get("near_far_db") is None:
            raise ConfigError("near-far needs 'near_far_db'")
    estimators = _as_list(cfg.pop("estimator", "perfect-csi"))
    detectors = _as_list(cfg.pop("detector", "lra-mmse"))
    try:
        return [ExperimentSpec.from_dict({**cfg, "estimator": est, "detector": det})
                for est, det in itertools.product(estimators, detectors)]
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _summary(rec) -> str:
    who = f"{rec.estimator}/{rec.detector}"
    if rec.user_index >= 0:
        who += f" user {rec.user_index}"
    return (f"{rec.point_db:+7.2f} dB  {rec.metric:<12} {rec.value:.4e} +- {rec.stderr:.1e}"
            f"  [{who}]  {rec.wall_time:.1f}s")


def main(argv=None) -> int:
    cmd = parse_args(argv)
    try:
        specs = expand_specs(cmd.subcommand, load_config(cmd))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if cmd.subcommand == "validate":
        if not cmd.quiet:
            print(f"{cmd.config}: OK ({len(specs)} experiment(s))")
        return 0
    out = cmd.out or Path(f"{cmd.subcommand}.{cmd.fmt}")
    progress = None if cmd.quiet else (lambda rec: print(_summary(rec), flush=True))
    records = []
    try:
        for spec in specs:
            records.extend(run_sweep(spec, workers=cmd.workers, progress=progress))
    except OneBitMimoError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        write_results(records, out, cmd.fmt, specs)
    except OSError as exc:
        print(f"I/O error: cannot write {out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    if not cmd.quiet:
        print(f"wrote {len(records)} records to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
