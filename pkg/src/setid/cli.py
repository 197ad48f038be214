"""Command line entry point: ``setid <command> --config FILE --out DIR``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import parse_run_config
from .errors import SetIdError
from .pipeline import COMMANDS, run_pipeline, write_bundle

EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setid", description="Set-identified wedge estimation and testing.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--workers", type=int, default=1, help="worker threads for chains and bootstrap")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("SETID_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    log = logging.getLogger("setid")
    if args.workers < 1:
        print("setid: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_run_config(args.config, require_data=args.command in ("estimate", "wedges", "test", "filter"))
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out = args.out or cfg.out_dir
        if out is None:
            print("setid: no output directory; pass --out or set [output] dir", file=sys.stderr)
            return EXIT_USAGE
        bundle = run_pipeline(cfg, args.command, workers=args.workers)
        write_bundle(bundle, cfg, out)
    except SetIdError as exc:
        log.debug("failure", exc_info=True)
        print(f"setid: [{exc.stage}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"setid: [io] {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
