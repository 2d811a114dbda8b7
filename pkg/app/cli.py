"""Command-line entry point: `python -m app.cli <subcommand> ...`.

Exit status is 0 when every compared row is within tolerance, 2 when a
comparison fails, 1 on configuration or domain errors.
"""

import argparse
import sys

from app.config import settings
from app.errors import ConfigError, DomainError
from app.harness import run
from app.logging_config import get_logger, setup_logging
from app.models import ChannelConfig, load_config
from app.report_io import render, write_report

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors surface as ConfigError so they share exit status 1."""

    def error(self, message):
        raise ConfigError(message, "argv")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="aqd", description="Adaptive quadrature detection simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    common = _ArgumentParser(add_help=False)
    common.add_argument("--trials", type=int, default=100_000)
    common.add_argument("--seed", type=int, required=True, help="64-bit master seed")
    common.add_argument("--snr-grid", type=_float_list, required=True, help="linear SNR values, e.g. 1,4,10")
    common.add_argument("--snr-convention", choices=["snr", "snr_hat"], default=None)
    common.add_argument("--model", default="rayleigh:1", help="rayleigh:VAR or bounded:t0,t1,...")
    common.add_argument("--out", default=None, help="report path (stdout when omitted)")
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--log-level", default=None)

    estimate = sub.add_parser("estimate", parents=[common], help="pilot estimation error and deep fades")
    estimate.add_argument("--l", type=_int_list, default=[1], help="good sub-channel counts")

    spread = sub.add_parser("spread", parents=[common], help="subcarrier spreading")
    spread.add_argument("--n", type=int, required=True)
    spread.add_argument("--l", type=int, required=True)
    spread.add_argument("--g", type=int, default=None)
    spread.add_argument("--k", type=_int_list, default=[1], help="repetition counts")

    detect = sub.add_parser("detect", parents=[common], help="single or collective detection")
    detect.add_argument("--l", type=int, default=1, help="sub-channels averaged per component")
    detect.add_argument("--d", type=int, default=2)
    detect.add_argument("--codewords", type=int, default=2)
    detect.add_argument("--measurement", default=None, help="hom-x, hom-p, het or het:c (single detection)")

    multiuser = sub.add_parser("multiuser", parents=[common], help="per-user block detection")
    multiuser.add_argument("--l", type=int, default=1)
    multiuser.add_argument("--rk", type=_int_list, required=True, help="per-user dimensions, e.g. 2,2,4")
    multiuser.add_argument("--k-in", type=int, default=None)

    fig3 = sub.add_parser("fig3", parents=[common], help="analytic estimation-error curves")
    fig3.add_argument("--l", type=_int_list, default=[1, 2, 4, 8])
    fig3.add_argument("--k", type=_int_list, default=[1, 2])
    return parser


def _channel(args, n: int | None = None) -> dict:
    channel = ChannelConfig.parse_spec(args.model)
    if n is not None and channel["kind"] == "rayleigh":
        channel["n"] = n
    return channel


def config_from_args(args) -> dict:
    """Translate parsed arguments into a raw SimulationConfig mapping."""
    data = {
        "trials": args.trials,
        "master_seed": args.seed,
        "snr_grid": args.snr_grid,
        "snr_convention": args.snr_convention,
        "output_path": args.out,
        "output_format": args.format or settings.OUTPUT_FORMAT,
    }
    if args.command == "estimate":
        data.update(experiment="pilot-estimation", channel=_channel(args), l_grid=args.l)
    elif args.command == "spread":
        data.update(
            experiment="spreading",
            channel=_channel(args, args.n),
            plan={"n": args.n, "l": args.l, "g": args.g},
            k_grid=args.k,
        )
    elif args.command == "detect":
        data["channel"] = _channel(args, args.l)
        if args.measurement is not None:
            data.update(experiment="single-detection", measurement=args.measurement)
        else:
            data.update(
                experiment="collective-detection",
                codebook={"d": args.d, "n_codewords": args.codewords, "codeword_seed": args.seed},
            )
    elif args.command == "multiuser":
        data.update(
            experiment="multiuser",
            channel=_channel(args, args.l),
            allocation={"dims": args.rk, "k_in": args.k_in},
        )
    else:
        data.update(experiment="fig3", channel=_channel(args), l_grid=args.l, k_grid=args.k)
    return data


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as e:
        setup_logging()
        logger.error("invalid arguments", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    setup_logging(level=args.log_level)
    try:
        config = load_config(config_from_args(args))
        report = run(config)
        if config.output_path:
            write_report(report, config.output_path, config.output_format)
        else:
            sys.stdout.write(render(report, config.output_format))
    except ConfigError as e:
        logger.error("invalid configuration", extra={"field": e.field_path, "error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except DomainError as e:
        logger.error("domain error", extra={"error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR

    if not report.passed:
        failed = [row for row in report.rows if not row.passed]
        logger.warning("comparison failed", extra={"failed_rows": len(failed)})
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
