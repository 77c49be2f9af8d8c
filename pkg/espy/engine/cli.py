import argparse
import logging
import sys
import typing

from ..data import DataError
from .config import ConfigError, load_config, override, validate_config
from .reports import emit_reports
from .study import run_study
from .synth import PRESETS, write_synth


logger = logging.getLogger("engine")


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def _csv_list(value: str) -> typing.List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="espy", description="Rolling ES and SES forecasting, backtesting and scoring")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a study and write its reports")
    run.add_argument("--config", required=True)
    run.add_argument("--models", type=_csv_list, help="comma-separated model ids")
    run.add_argument("--metrics", type=_csv_list, help="comma-separated metrics (es, ses)")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")

    validate = commands.add_parser("validate", help="check a config file")
    validate.add_argument("--config", required=True)

    synth = commands.add_parser("synth", help="write a synthetic panel")
    synth.add_argument("--preset", required=True, choices=PRESETS)
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--seed", type=int, required=True)
    synth.add_argument("--out", required=True)

    return parser


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "synth":
            write_synth(args.preset, args.n, args.seed, args.out)
            return EXIT_OK

        config = load_config(args.config)

        if args.command == "validate":
            validate_config(config)
            print(f"{args.config}: ok")
            return EXIT_OK

        config = override(config, args.models, args.metrics, args.seed, args.out)
        result = run_study(config)
        emit_reports(result, config.out_dir)
    except ConfigError as e:
        key = f" [{e.key}]" if e.key else ""
        print(f"config error{key}: {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e.message}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot write outputs: {e}", file=sys.stderr)
        return EXIT_CONFIG

    if result.failures:
        logger.warning(f"{len(result.failures)} forecasts or backtests failed, see failures.csv")
        return EXIT_PARTIAL

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
