"""Command-line client for the service: simulate, bench, certify, dwell, serve.

The CLI is a thin client.  It reads the config file, posts it to the
service, and writes whatever artifact comes back to --out.  By default it
talks to the service app in-process (no network); --server points it at a
running instance instead.  Exit codes: 0 success, 1 validation or run
failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path

import httpx

__all__ = ["main"]

_TIMEOUT = httpx.Timeout(600.0)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etcsim",
        description="Event-triggered control simulation and certification toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, needs_out: bool):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the config file")
        if needs_out:
            p.add_argument("--out", required=True, help="output file path")
        else:
            p.add_argument("--out", default=None, help="optional report file path")
        p.add_argument("--server", default=None,
                       help="base URL of a running service (default: in-process)")
        return p

    add("simulate", "solve one run and write the trajectory CSV", True)
    add("bench", "run the Monte-Carlo benchmark and write the summary CSV", True)
    add("certify", "grid-check the certificate and write the report", True)
    add("dwell", "print the analytic inter-transmission lower bound", False)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


async def _post(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server is None:
        from .server import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://etcsim", timeout=_TIMEOUT
        ) as client:
            return await client.post(path, json=payload)
    async with httpx.AsyncClient(base_url=server, timeout=_TIMEOUT) as client:
        return await client.post(path, json=payload)


def _run_command(args) -> int:
    try:
        config_text = Path(args.config).read_text()
    except OSError as exc:
        print(f"etcsim: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        response = asyncio.run(_post(args.server, f"/{args.command}", {"config": config_text}))
    except httpx.HTTPError as exc:
        print(f"etcsim: request failed: {exc}", file=sys.stderr)
        return 1
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        print(f"etcsim: {detail}", file=sys.stderr)
        return 1
    body = response.json()
    if args.command == "simulate":
        text = body["csv"]
    elif args.command == "bench":
        text = body["csv"]
    elif args.command == "certify":
        text = body["report"]
        if not body["passed"]:
            _write_out(args.out, text)
            print("etcsim: certification failed", file=sys.stderr)
            return 1
    else:
        text = body["report"]
        print(f"tau = {body['tau']:.17g} s (inflated-constants tau = "
              f"{body['tau_inflated']:.17g} s)")
    if args.out is not None:
        _write_out(args.out, text)
    return 0


def _write_out(path: str | None, text: str) -> None:
    if path is not None:
        Path(path).write_text(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .server import app

        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    return _run_command(args)


if __name__ == "__main__":
    sys.exit(main())
