# desk/cli.py
import argparse
import json
import logging
import sys

from .config import REPORT_KINDS, Config, load_config
from .errors import ConfigError, DataError
from .runner import cmd_evaluate, cmd_replay_seniority, cmd_simulate, cmd_validate_data

logger = logging.getLogger("desk")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SKIPPED = 4


def setup_logging(level):
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        force=True,
    )


def build_parser():
    p = argparse.ArgumentParser(prog="desk", description="Hierarchical LLM trading-desk simulator")
    p.add_argument("--log-level", default=Config.LOG_LEVEL)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", "-c", required=True, help="run configuration (YAML)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field, e.g. --set workers=8")
        sp.add_argument("--cache-dir")
        sp.add_argument("--output-dir")
        sp.add_argument("--workers", type=int)

    sim = sub.add_parser("simulate", help="run the configured strategies over the news corpus")
    common(sim)
    sim.add_argument("--log", help="outcome log path (default <output-dir>/<run_name>/outcomes.jsonl)")

    ev = sub.add_parser("evaluate", help="compute report tables from outcome logs")
    common(ev)
    ev.add_argument("logs", nargs="+")
    ev.add_argument("--kinds", help=f"comma-separated subset of {','.join(REPORT_KINDS)}; '' for none")
    ev.add_argument("--out")

    rp = sub.add_parser("replay-seniority", help="re-run the head trader as junior and senior on a frozen log")
    common(rp)
    rp.add_argument("log")

    vd = sub.add_parser("validate-data", help="check the corpus files and report coverage")
    common(vd)
    return p


def _load(args):
    overrides = list(args.overrides)
    for flag, key in (("cache_dir", "cache_dir"), ("output_dir", "output_dir"), ("workers", "workers")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return load_config(args.config, overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        cfg = _load(args)
        if args.command == "simulate":
            result = cmd_simulate(cfg, log_path=args.log)
            if result.skipped:
                logger.warning("%d outcome(s) skipped; see skip_reason in %s", result.skipped, result.log_path)
                return EXIT_SKIPPED
        elif args.command == "evaluate":
            kinds = None
            if args.kinds is not None:
                kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
                unknown = [k for k in kinds if k not in REPORT_KINDS]
                if unknown:
                    raise ConfigError(f"unknown report kinds {unknown}")
            for path in cmd_evaluate(cfg, args.logs, kinds, args.out):
                logger.info("wrote %s", path)
        elif args.command == "replay-seniority":
            for seniority, path in cmd_replay_seniority(cfg, args.log).items():
                logger.info("%s log: %s", seniority.value, path)
        elif args.command == "validate-data":
            summary = cmd_validate_data(cfg)
            sys.stdout.write(json.dumps(summary, indent=2, default=str) + "\n")
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("data error: %s", e)
        return EXIT_DATA
    except Exception:
        logger.exception("unexpected error")
        return EXIT_UNEXPECTED
    return EXIT_OK
