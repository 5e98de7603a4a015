"""Entry point: ``mhqg-host [--config host.json] [--port N]``."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import create_app
from .config import ConfigError, HostConfig
from .engines import EngineError


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Serve the question-synthesis backend verbs.")
    parser.add_argument("--config", default=None, help="JSON config file; defaults to heuristic engines.")
    parser.add_argument("--port", type=int, default=None, help="Override the configured port.")
    parser.add_argument("--bind", default=None, help="Override the configured bind address.")
    args = parser.parse_args(argv)

    try:
        config = HostConfig.from_file(args.config) if args.config else HostConfig.default()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    bind = args.bind or config.bind
    port = args.port if args.port is not None else config.port
    try:
        app = create_app(config)
    except EngineError as exc:
        print(f"startup failure: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=bind, port=port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
