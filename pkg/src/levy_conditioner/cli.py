"""Command-line client for the job service.

The CLI is a thin client: it validates the config file, sends a
RunRequest to the service (in-process by default, over HTTP when
--server is given) and writes the returned output files.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 diagnostics flagged the run.
"""
from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import sys
from pathlib import Path

import httpx
from pydantic import ValidationError

from .schemas import JobConfig, RunRequest, RunResponse

log = logging.getLogger("levy_conditioner")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _setup_logging() -> None:
    name = os.environ.get("LEVY_COND_LOG", "warn").strip().lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        print(
            f"levy-conditioner: unknown LEVY_COND_LOG value {name!r} "
            "(use error, warn, info or debug)",
            file=sys.stderr,
        )
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s"
    )


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="levy-conditioner",
        description="harmonic functions and conditioned dynamics for "
        "recurrent one-dimensional Levy processes",
    )
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a job described by a JSON config")
    run.add_argument("--config", required=True, help="path to the job JSON")
    run.add_argument("--out-dir", default=".", help="directory for output files")
    run.add_argument(
        "--seed-override", type=int, default=None,
        help="replace the config's root seed",
    )
    run.add_argument(
        "--threads", type=int, default=None,
        help="worker threads for simulation jobs (results do not depend on it)",
    )
    run.add_argument(
        "--server", default=None,
        help="base URL of a running service; default runs in process",
    )
    return p


def _load_config(path: str) -> JobConfig:
    raw = Path(path).read_text()
    data = json.loads(raw)
    return JobConfig.model_validate(data)


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


async def _post(request: RunRequest, server: str | None) -> RunResponse:
    payload = request.model_dump(mode="json")
    if server is None:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://service", timeout=None
        ) as client:
            resp = await client.post("/jobs/run", json=payload)
    else:
        async with httpx.AsyncClient(
            base_url=server, timeout=None
        ) as client:
            resp = await client.post("/jobs/run", json=payload)
    resp.raise_for_status()
    return RunResponse.model_validate(resp.json())


def _run(args: argparse.Namespace) -> int:
    try:
        cfg = _load_config(args.config)
    except FileNotFoundError:
        print(f"levy-conditioner: config file not found: {args.config}",
              file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"levy-conditioner: config is not valid JSON: {exc}",
              file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(
            "levy-conditioner: invalid config: "
            + _format_validation_error(exc),
            file=sys.stderr,
        )
        return 2

    request = RunRequest(
        config=cfg, seed_override=args.seed_override, threads=args.threads
    )
    log.info("submitting %s job", cfg.job)
    try:
        response = asyncio.run(_post(request, args.server))
    except httpx.HTTPStatusError as exc:
        if exc.response.status_code == 422:
            print(f"levy-conditioner: service rejected the config: "
                  f"{exc.response.text}", file=sys.stderr)
            return 2
        print(f"levy-conditioner: service error: {exc}", file=sys.stderr)
        return 3
    except httpx.HTTPError as exc:
        print(f"levy-conditioner: cannot reach service: {exc}",
              file=sys.stderr)
        return 3

    for warning in response.warnings:
        print(f"levy-conditioner: warning: {warning}", file=sys.stderr)
    if response.error:
        print(f"levy-conditioner: {response.error}", file=sys.stderr)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for output in response.outputs:
        target = out_dir / output.name
        target.write_text(output.content)
        print(target)
    return response.exit_code


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
