"""コマンドラインのエントリポイント

    python -m gdrf <command> [--config FILE] [--key value ...]

設定キーは全て --key-name フラグとしても指定できる（ファイルより優先）。
終了コード: 0 成功 / 1 想定外 / 2 設定 / 3 データ取込 / 4 数値計算
"""

import argparse
import logging
import sys
from pathlib import Path

from gdrf import __version__
from gdrf.commands import compare, evaluate, fit, holdout, schema, simulate
from gdrf.config import RunConfig, load_config
from gdrf.errors import GdrfError

logger = logging.getLogger(__name__)

COMMANDS = {
    "simulate": simulate,
    "fit": fit,
    "evaluate": evaluate,
    "holdout": holdout,
    "compare": compare,
    "schema": schema,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdrf",
        description="Gaussian-Dirichlet random field topic models",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, module in COMMANDS.items():
        summary = (module.__doc__ or "").strip().splitlines()[0] if module.__doc__ else None
        p = sub.add_parser(name, help=summary, description=module.__doc__)
        p.add_argument("--config", type=Path, default=None, help="key = value の設定ファイル")
        p.add_argument("-v", "--verbose", action="store_true", help="DEBUGログを出す")
        for key in RunConfig.model_fields:
            p.add_argument(
                "--" + key.replace("_", "-"),
                dest=key,
                default=argparse.SUPPRESS,
                metavar="VALUE",
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    overrides = {key: value for key, value in vars(args).items() if key in RunConfig.model_fields}
    try:
        config = load_config(args.config, overrides)
        logger.info("gdrf %s: %s", __version__, args.command)
        COMMANDS[args.command].run(config)
    except GdrfError as exc:
        logger.error("%s failed: %s", args.command, exc)
        return exc.exit_code
    except Exception:
        logger.exception("%s failed unexpectedly", args.command)
        return 1
    logger.info("%s finished", args.command)
    return 0
