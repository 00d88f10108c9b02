"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 fixed-point non-convergence,
4 I/O error, 1 failed selftest.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .detequiv import FixedPointError, closed_form_uncorrelated, deterministic_equivalent
from .estimation import estimation_statistics
from .harness import (FIG1_COLUMNS, FIG2_COLUMNS, emit, fig1_rows, fig2_rows, run_detequiv, run_monte_carlo,
                      sweep)
from .network import ConfigError, NetworkConfig
from .synthetic import uncorrelated_set

EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 2, 3, 4


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (key = value lines)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--blocks", type=int, default=500, help="coherence blocks per drop (default 500)")
    common.add_argument("--drops", type=int, help="UE drops (default 1 for mc/detequiv, 10 for figures)")
    common.add_argument("--out", default="-", help="output path, '-' for stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--shadow-as-std", action="store_true",
                        help="read shadow_var_db2 as a standard deviation in dB")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mmse-largesys", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("mc", parents=[common], help="Monte Carlo SINR and SE per UE")
    s = sub.add_parser("detequiv", parents=[common], help="deterministic-equivalent SINR and SE per UE")
    s.add_argument("--spectral", action="store_true",
                   help="solve in the shared eigenbasis of the correlation model (large networks)")
    for name, text in (("fig1", "sum SE versus K at fixed M/K"), ("fig2", "SINR term strengths versus K")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--k-values", type=_int_list, default=[4, 8, 16])
        s.add_argument("--ratios", type=_float_list, default=[2, 4])
    s = sub.add_parser("closedform", parents=[common], help="uncorrelated-fading closed form vs general solver")
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--M", type=int, default=64)
    s.add_argument("--K", type=int, default=16)
    s.add_argument("--L", type=int, default=2)
    s.add_argument("--snr-db", type=float, default=0.0, help="per-antenna uplink SNR")
    s.add_argument("--pilot-snr-db", type=float, default=10.0)
    sub.add_parser("selftest", parents=[common], help="quick internal consistency checks")
    return p


def _load(args):
    overrides = {"seed": args.seed, "shadow_is_std": True if args.shadow_as_std else None}
    if args.config:
        return load_config(args.config, **overrides)
    return NetworkConfig(**{k: v for k, v in overrides.items() if v is not None})


def _closedform(args):
    M, K, L, a = args.M, args.K, args.L, args.alpha
    rho, rho_tr = 10 ** (args.snr_db / 10), 10 ** (args.pilot_snr_db / 10)
    cf = closed_form_uncorrelated(M, K, L, a, rho, rho_tr)
    general = deterministic_equivalent(estimation_statistics(uncorrelated_set(L, K, M, a), rho_tr), M * rho)
    g = float(general.gamma_bar[0, 0])
    return [{"M": M, "K": K, "L": L, "alpha": a, "nu": cf.nu, "mu_star": cf.mu_star, "eta_star": cf.eta_star,
             "noise": cf.noise, "noncoherent": cf.noncoherent, "coherent": cf.coherent,
             "gamma_bar_closed_form": cf.gamma_bar, "gamma_bar_general": g,
             "relative_difference": abs(g - cf.gamma_bar) / cf.gamma_bar}]


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "selftest":
        from .selftest import run_selftest
        return 0 if run_selftest(seed=args.seed or 0) else 1
    try:
        config = _load(args)
        if args.blocks < 1 or (args.drops is not None and args.drops < 1) or args.threads < 1:
            raise ConfigError("--blocks, --drops and --threads must be positive")
    except (ConfigError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    columns = None
    try:
        if args.command == "mc":
            result = run_monte_carlo(config, args.blocks, args.drops or 1, threads=args.threads)
        elif args.command == "detequiv":
            result = run_detequiv(config, n_drops=args.drops or 1, spectral=args.spectral)
        elif args.command in ("fig1", "fig2"):
            points = sweep(config, k_values=args.k_values, ratios=args.ratios, n_blocks=args.blocks,
                           n_drops=args.drops or 10, threads=args.threads)
            if args.command == "fig1":
                result, columns = fig1_rows(points), FIG1_COLUMNS
            else:
                result, columns = fig2_rows(points), FIG2_COLUMNS
        else:
            result = _closedform(args)
    except FixedPointError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        emit(result, args.out, args.format, columns=columns)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
