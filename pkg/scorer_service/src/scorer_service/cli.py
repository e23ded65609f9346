from __future__ import annotations

import argparse
import sys

from .session import DEFAULT_MODEL, ModelSession


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorer-service",
        description="Serve a masked language model behind the scorer wire protocol")
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="model id or local checkpoint directory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--no-lowercase", action="store_true",
                        help="keep the context's original casing")
    mode = parser.add_mutually_exclusive_group(required=True)
    mode.add_argument("--stdio", action="store_true", help="speak JSONL on stdin/stdout")
    mode.add_argument("--serve", action="store_true", help="start the HTTP server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8041)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    session = ModelSession(args.model, device=args.device,
                           batch_size=args.batch_size,
                           lowercase=not args.no_lowercase)
    if args.stdio:
        from .stdio import serve_stdio
        serve_stdio(session)
        return 0
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(session), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
