"""Command-line front end: a thin client of the HTTP service.

All computation happens behind the service endpoints; the CLI builds
requests, renders curve files and reports, and maps outcomes to exit
codes (0 success, 1 validation failure, 2 configuration error).  Without
``--server`` the service runs in-process over an ASGI test transport, so no
network or separate process is needed.
"""

from __future__ import annotations

import argparse
import json
import sys

import httpx

from .config import load_config
from .exceptions import ConfigError
from .sweeps import CSV_COLUMNS, PROTOCOLS

EXIT_OK = 0
EXIT_VALIDATION_FAILED = 1
EXIT_CONFIG_ERROR = 2

DEFAULT_SEED = 20240817


def make_client(server: str | None):
    """HTTP client against a remote server or the in-process app."""
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=None)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _scenario_overrides(args) -> dict:
    overrides = dict(load_config(args.config)) if args.config else {}
    if args.fidelity is not None:
        overrides["fidelity_target"] = args.fidelity
    if getattr(args, "distance", None) is not None:
        overrides["total_distance_km"] = args.distance
    return overrides


def _post(client, path: str, payload: dict) -> dict:
    resp = client.post(path, json=payload)
    if resp.status_code == 400 or resp.status_code == 422:
        raise ConfigError(resp.json().get("detail", resp.text))
    resp.raise_for_status()
    return resp.json()


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return f"{value:.12g}"


def _write_rows(rows: list[dict], path: str | None, fmt: str, meta: dict) -> None:
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        lines += [",".join(_fmt(row.get(c)) for c in CSV_COLUMNS) for row in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps({"columns": list(CSV_COLUMNS), "rows": rows, "meta": meta},
                          indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args) -> int:
    if not args.distances:
        raise ConfigError("distance list must not be empty", field="distances_km")
    payload = {
        "protocol": args.protocol,
        "distances_km": args.distances,
        "scenario": _scenario_overrides(args),
        "seed": args.seed,
        "threads": args.threads,
    }
    with make_client(args.server) as client:
        body = _post(client, "/api/sweep", payload)
    meta = {"protocol": args.protocol, "seed": args.seed}
    _write_rows(body["rows"], args.out, args.format, meta)
    if args.out:
        print(f"wrote {len(body['rows'])} rows to {args.out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    payload = {
        "protocol": args.protocol,
        "scenario": _scenario_overrides(args),
        "seed": args.seed,
    }
    with make_client(args.server) as client:
        body = _post(client, "/api/optimize", payload)
    text = json.dumps(body, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    payload: dict = {}
    if args.checks:
        payload["checks"] = args.checks
    if args.cutoff is not None:
        payload["fock_cutoff"] = args.cutoff
    with make_client(args.server) as client:
        body = _post(client, "/api/validate", payload)
    width = max(len(c["name"]) for c in body["checks"])
    for c in body["checks"]:
        mark = "PASS" if c["passed"] else "FAIL"
        line = (f"[{mark}] {c['name']:<{width}}  measured {c['measured']:.3e}"
                f"  tolerance {c['tolerance']:.3e}")
        if c.get("detail"):
            line += f"  ({c['detail']})"
        print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(body, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if body["all_passed"]:
        print("all checks passed")
        return EXIT_OK
    print("validation FAILED")
    return EXIT_VALIDATION_FAILED


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("ionlink.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionlink",
        description="Hybrid ion / SPDC+memory entanglement-link simulator and optimizer",
    )
    parser.add_argument("--server", default=None,
                        help="URL of a running ionlink service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON scenario config file")
    common.add_argument("--fidelity", type=float, default=None,
                        help="override the fidelity target")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="optimizer seed")
    common.add_argument("--out", default=None, help="output file (default: stdout)")

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="optimize a protocol over a list of distances")
    p_sweep.add_argument("--protocol", choices=PROTOCOLS, default="hybrid-repeater")
    p_sweep.add_argument("--distances", type=float, nargs="+", default=None,
                         help="distances in km (positive, increasing)")
    p_sweep.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sweep.add_argument("--threads", type=int, default=1,
                         help="worker processes for distance points")
    p_sweep.set_defaults(func=cmd_sweep)

    p_opt = sub.add_parser("optimize", parents=[common],
                           help="optimize emission probabilities at a single point")
    p_opt.add_argument("--protocol", choices=PROTOCOLS, default="hybrid-repeater")
    p_opt.add_argument("--distance", type=float, default=None,
                       help="total distance in km (overrides the config)")
    p_opt.set_defaults(func=cmd_optimize)

    p_val = sub.add_parser("validate", parents=[common],
                           help="run the physics validation suites")
    p_val.add_argument("--checks", nargs="+", default=None,
                       help="subset of suites to run (default: all)")
    p_val.add_argument("--cutoff", type=int, default=None,
                       help="force a Fock cutoff (misconfiguration is detected)")
    p_val.set_defaults(func=cmd_validate)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except httpx.HTTPError as exc:
        print(f"service error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION_FAILED


if __name__ == "__main__":
    sys.exit(main())
