"""Command line interface; a thin client of the HTTP service.

Commands talk to the FastAPI app through an in-process ASGI transport by
default, or to a remote instance via ``--server URL``.  Exit codes: 0 on
success, 1 for usage problems, 2 for validation failures, 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx

from .config import load_config
from .errors import ConfigError

USAGE_EXIT = 1
VALIDATION_EXIT = 2
NUMERICAL_EXIT = 3

_VALIDATION_KINDS = {"MeshFormatError", "ValidationError", "ConfigError",
                     "FingerprintMismatchError", "BundleFormatError",
                     "RequestValidationError"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _call(server, path, payload):
    """POST to the service, in process unless a server URL is given."""
    async def go():
        if server:
            async with httpx.AsyncClient(base_url=server,
                                         timeout=None) as client:
                resp = await client.post(path, json=payload)
                return resp.status_code, resp.json()
        from .service import app
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, timeout=None,
                                     base_url="http://sketchfem") as client:
            resp = await client.post(path, json=payload)
            return resp.status_code, resp.json()

    try:
        return asyncio.run(go())
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _handle_error(status, body):
    kind = body.get("kind", "")
    message = body.get("error") or body.get("detail") or str(body)
    print(f"error [{kind or status}]: {message}", file=sys.stderr)
    if status == 409:
        raise SystemExit(NUMERICAL_EXIT)
    if kind in _VALIDATION_KINDS or status == 422:
        raise SystemExit(VALIDATION_EXIT)
    raise SystemExit(USAGE_EXIT)


def cmd_offline(args):
    payload = {"mesh_path": args.mesh, "rho": args.rho,
               "bundle_path": args.out, "forcing": args.forcing}
    status, body = _call(args.server, "/offline", payload)
    if status != 200:
        _handle_error(status, body)
    print(f"bundle written to {body['bundle_path']}")
    print(f"  n = {body['n']}  k = {body['k']}  kd = {body['kd']}  "
          f"rho = {body['rho']}")
    print(f"  eigenvalues [{body['eigenvalue_min']:.6g}, "
          f"{body['eigenvalue_max']:.6g}]  "
          f"leverage sum {body['leverage_sum']:.9f}")
    print(f"  elapsed {body['elapsed_s']:.3f} s")
    return 0


def cmd_online(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error [ConfigError]: {exc}", file=sys.stderr)
        return VALIDATION_EXIT
    threads = args.threads if args.threads is not None else cfg.threads
    payload = {
        "mesh_path": cfg.mesh_path,
        "bundle_path": cfg.bundle_path,
        "n_queries": cfg.n_queries,
        "seed": cfg.seed,
        "c": cfg.c,
        "epsilon": cfg.epsilon,
        "beta": cfg.beta,
        "rho": cfg.rho,
        "field": {"kind": cfg.field.kind, **cfg.field.params},
        "forcing": cfg.forcing,
        "threads": threads,
    }
    status, body = _call(args.server, "/benchmark", payload)
    if status != 200:
        _handle_error(status, body)
    with open(cfg.output_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write(body["csv"])
    print(f"ran {body['rows']} queries (c = {body['c']}, "
          f"epsilon = {body['epsilon']:.4g})")
    print(f"  singular runs excluded from means: {body['singular_count']}")
    mean = body["mean"]
    if mean:
        print(f"  mean proj_err {mean['proj_err']:.6g}  "
              f"sketch_dev {mean['sketch_dev']:.6g}  "
              f"reg_err {mean['reg_err']:.6g}  "
              f"total_err {mean['total_err']:.6g}")
    ref = body["reference_median_s"]
    online = body["online_median_s"]
    if online and online > 0:
        print(f"  median online {online:.6g} s  reference {ref:.6g} s  "
              f"speedup {ref / online:.1f}x")
    print(f"report written to {cfg.output_csv}")
    return 0


def cmd_verify(args):
    status, body = _call(args.server, "/verify", {})
    if status != 200:
        _handle_error(status, body)
    width = max(len(c["name"]) for c in body["checks"])
    failures = 0
    for check in body["checks"]:
        tag = "PASS" if check["passed"] else "FAIL"
        failures += not check["passed"]
        print(f"[{tag}] {check['name']:<{width}}  {check['detail']}")
    total = len(body["checks"])
    print(f"{total - failures}/{total} checks passed")
    return 0 if body["all_passed"] else NUMERICAL_EXIT


def cmd_serve(args):
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser():
    parser = _Parser(prog="sketchfem",
                     description="Sketched finite element solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("offline", help="build an offline bundle",
                       description="Eigenbasis, leverage scores, reduced load")
    p.add_argument("--mesh", required=True, help="mesh file")
    p.add_argument("--rho", required=True, type=int, help="basis size")
    p.add_argument("--out", required=True, help="bundle output path")
    p.add_argument("--forcing", default="ball", choices=["ball", "uniform"])
    p.add_argument("--server", default=None, help="remote service URL")
    p.set_defaults(fn=cmd_offline)

    p = sub.add_parser("online", help="run a benchmark stream of queries",
                       description="Sketched solves with full diagnostics")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--threads", type=int, default=None,
                   help="cap worker threads (0 = machine parallelism)")
    p.add_argument("--server", default=None, help="remote service URL")
    p.set_defaults(fn=cmd_online)

    p = sub.add_parser("verify", help="run the built-in oracle battery")
    p.add_argument("--server", default=None, help="remote service URL")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT
    try:
        return args.fn(args)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
