"""Command-line entry point: ``dtcforge <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical divergence, 4 I/O error.
Log verbosity comes from the ``DTCFORGE_LOG`` environment variable (default WARNING).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import yaml

from . import workbench as wb
from .config import ConfigError, ExperimentConfig, default_chain_config, default_dicke_config, load_config, set_value
from .dicke import DivergenceError
from .optimizer import InvalidProblemError
from .pulse import PulseError
from .spectral import SpectralError

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "dicke-optimize": default_dicke_config,
    "dicke-sweep": default_dicke_config,
    "classify": default_dicke_config,
    "chain-optimize": default_chain_config,
    "chain-spectrum": default_chain_config,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dtcforge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="YAML experiment config (defaults used when omitted)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value, e.g. --set dicke.kappa=0.1; flags win over the file")
        return p

    p = add("dicke-optimize", "optimize a Dicke pulse and write the guess/optimized bundle")
    p.add_argument("--workers", type=int, help="parallel objective evaluations")
    p.add_argument("--seed", type=int, help="optimizer seed")

    p = add("dicke-sweep", "classify a fixed pulse over a list of detunings")
    p.add_argument("--pulse", required=True, help="pulse JSON (e.g. optimized_pulse.json)")
    p.add_argument("--epsilons", help="start:stop:step (inclusive) or comma list; default from config")

    p = add("chain-optimize", "optimize the chain theta pulse and write spectra before/after")
    p.add_argument("--workers", type=int, help="parallel objective evaluations")
    p.add_argument("--seed", type=int, help="optimizer seed")

    p = add("chain-spectrum", "autocorrelation spectrum for one theta pulse")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pulse", help="gated pulse JSON")
    g.add_argument("--theta0", type=float, help="constant theta over the gate")

    p = add("classify", "classify a trajectory CSV")
    p.add_argument("--trajectory", required=True, help="CSV with columns t,jx,jy,jz,x,p,lambda")
    p.add_argument("--period", type=float, help="drive period (default from config)")
    p.add_argument("--burn-in", type=int, default=0, help="periods to drop before classifying")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else DEFAULTS[args.command]()
    cfg.kind = args.command
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            parsed = yaml.safe_load(value)
        except yaml.YAMLError:
            parsed = value
        set_value(cfg, key.strip(), parsed)
    for flag, key in (("workers", "optimizer.workers"), ("seed", "optimizer.seed")):
        if getattr(args, flag, None) is not None:
            set_value(cfg, key, getattr(args, flag))
    if args.out:
        cfg.output_dir = args.out
    return cfg.check()


def run(args) -> None:
    cfg = resolve_config(args)
    out = cfg.output_dir
    if args.command == "dicke-optimize":
        wb.run_dicke_optimize(cfg, out)
    elif args.command == "dicke-sweep":
        eps = cfg.dicke.sweep_epsilons if args.epsilons is None else wb.parse_epsilons(args.epsilons)
        for row in wb.run_dicke_sweep(cfg, args.pulse, eps, out):
            print(f"{row.epsilon:g}\t{row.label}")
    elif args.command == "chain-optimize":
        wb.run_chain_optimize(cfg, out)
    elif args.command == "chain-spectrum":
        pulse = args.pulse if args.pulse else wb.constant_theta(cfg, args.theta0)
        tests = wb.run_chain_spectrum(cfg, pulse, out)
        for which, t in tests.items():
            print(f"{which}\tpeak={t['peak_mag']:.6g}\t{'PASS' if t['passed'] else 'FAIL'}")
    elif args.command == "classify":
        label = wb.run_classify(cfg, args.trajectory, out, args.period, args.burn_in)
        print(label["label"])
    print(f"artifacts written to {out}", file=sys.stderr)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("DTCFORGE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run(args)
    except (ConfigError, PulseError, SpectralError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, InvalidProblemError) as exc:
        # a non-finite objective at the guess means the guess trajectory diverged
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
