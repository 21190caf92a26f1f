"""Run the scoring service: `scoreadapter --port 8099 --anchors anchors.json`."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .service import AdapterConfig, create_app


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8099)
    parser.add_argument("--model", default="embedlex-v1")
    parser.add_argument("--anchors", default=None, help="anchor registry the model scores against")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)
    config = AdapterConfig(
        model=args.model,
        anchors_path=args.anchors,
        device=args.device,
        host=args.host,
        port=args.port,
    )
    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
