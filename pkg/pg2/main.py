import logging
import sys
import traceback
from typing import List, Optional

from pg2.cli.router import build_parser
from pg2.core import settings
from pg2.core.errors import PG2Error, UsageError
from pg2.core.manifest import record_command

logger = logging.getLogger("pg2")


def configure_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, str(settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    argv = sys.argv[1:] if argv is None else list(argv)
    record_command(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "handler", None) is None:
            raise UsageError("no command given; try --help")
        return args.handler(args)
    # Global exception handler: known errors carry their exit code
    except PG2Error as exc:
        print(f"[ERROR] {type(exc).__name__}: {exc.detail}", file=sys.stderr)
        if settings.DEBUG:
            traceback.print_exc()
        return exc.exit_code
    except KeyboardInterrupt:
        print("[ERROR] interrupted", file=sys.stderr)
        return 1
    except Exception as exc:
        logger.error(f"Unhandled {type(exc).__name__}: {exc}\n{traceback.format_exc()}")
        print(f"[ERROR] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
