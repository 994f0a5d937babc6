"""Command line front end.

Every command is a thin client over the HTTP service: the request is built
from flags, posted to an in-process application instance (or to a running
server with ``--server``), and the response payload is written out.  All
computation happens behind the service boundary, so the CLI and a remote
deployment cannot drift apart.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from typing import Optional

__all__ = ["main"]

_KIND_CODES = {"usage": 1, "data": 2, "numerical": 3}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad flags; the contract here says 1."""

    def error(self, message: str):
        raise _UsageError(message)


class _ServiceClient:
    """Posts to the in-process app by default, or a real server over HTTP."""

    def __init__(self, server: Optional[str]):
        if server:
            import httpx

            def post(path, payload):
                try:
                    return _split(
                        httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
                    )
                except httpx.HTTPError as exc:
                    raise _ServiceError(1, f"cannot reach {server}: {exc}") from None

            self._post = post
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                from fastapi.testclient import TestClient

                from .service import app

            client = TestClient(app, raise_server_exceptions=False)
            self._post = lambda path, payload: _split(client.post(path, json=payload))

    def post(self, path: str, payload: dict) -> dict:
        status, body = self._post(path, payload)
        if status == 200:
            return body
        detail = body.get("detail", {}) if isinstance(body, dict) else {}
        kind = detail.get("kind", "data") if isinstance(detail, dict) else "data"
        message = detail.get("message", str(detail)) if isinstance(detail, dict) else str(detail)
        raise _ServiceError(_KIND_CODES.get(kind, 2), f"{kind} error: {message}")


def _split(response) -> tuple[int, dict]:
    try:
        return response.status_code, response.json()
    except ValueError:
        return response.status_code, {"detail": {"kind": "data", "message": response.text}}


class _ServiceError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read_csv(path: str, expect_cols: Optional[int] = None) -> tuple[list[str], list[list[float]]]:
    """Read a numeric CSV with a header row; report bad cells by row/column."""
    if not os.path.exists(path):
        raise _DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise _DataError(f"{path}: empty file, expected a header row") from None
        rows: list[list[float]] = []
        for r, row in enumerate(reader, start=2):
            if not row:
                continue
            if expect_cols is not None and len(row) != expect_cols:
                raise _DataError(f"{path}: row {r} has {len(row)} columns, expected {expect_cols}")
            if len(row) != len(header):
                raise _DataError(
                    f"{path}: row {r} has {len(row)} columns, header has {len(header)}"
                )
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise _DataError(
                        f"{path}: row {r}, column {c}: {cell!r} is not a number"
                    ) from None
            rows.append(vals)
    if not rows:
        raise _DataError(f"{path}: no data rows")
    return header, rows


class _DataError(Exception):
    pass


def _bound_side(text: Optional[str]):
    """A bound flag value: absent, a constant, or an expression string."""
    if text is None:
        return None
    try:
        return float(text)
    except ValueError:
        return text


def _inference_payload(args, with_seed: bool = True) -> Optional[dict]:
    mapping = {
        "mode": args.mode,
        "c_l": args.c_l,
        "c_u": args.c_u,
        "cma_population": args.population,
        "cma_generations": args.generations,
        "cma_initial_step": args.step,
        "restarts": args.restarts,
        "nugget": args.nugget,
        "variance_cap": args.variance_cap,
        "plateau": args.plateau,
        "refine_step": args.refine_step,
        "anchor_margin": args.anchor_margin,
    }
    if with_seed:
        mapping["seed"] = args.seed
    payload = {k: v for k, v in mapping.items() if v is not None}
    return payload or None


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise _UsageError(f"expected comma-separated integers, got {text!r}") from None


def _cmd_fit(args, client: _ServiceClient) -> int:
    header, rows = _read_csv(args.train)
    if len(header) < 2:
        raise _DataError(f"{args.train}: need at least one input column and one output column")
    inputs = [row[:-1] for row in rows]
    outputs = [row[-1] for row in rows]
    bounds = None
    lower, upper = _bound_side(args.lower), _bound_side(args.upper)
    if lower is not None or upper is not None:
        bounds = {"lower": lower, "upper": upper}
    payload = {
        "inputs": inputs,
        "outputs": outputs,
        "bounds": bounds,
        "normalize": not args.no_normalize,
        "config": _inference_payload(args),
    }
    if args.no_project:
        payload["project"] = False
    body = client.post("/fit", payload)
    path = _write(args.out, "model.txt", body["model_file"])
    params = body["params"]
    ls = ",".join(repr(v) for v in params["lengthscales"])
    print(f"model written to {path}")
    print(f"mode: {body['mode']}  project: {body['project']}")
    print(f"press: {repr(body['press'])}  evaluations: {body['evaluations']}")
    print(f"sigma2: {repr(params['sigma2'])}  lengthscales: {ls}  nugget: {repr(params['nugget'])}")
    return 0


def _cmd_predict(args, client: _ServiceClient) -> int:
    try:
        with open(args.model, "r", encoding="utf-8") as fh:
            model_text = fh.read()
    except OSError as exc:
        raise _DataError(f"cannot read model file: {exc}") from None
    header, rows = _read_csv(args.data)
    body = client.post("/predict", {"model_file": model_text, "points": rows})
    cols = [
        "mu_f", "sigma_f", "lower", "upper", "mu_g", "sigma_g",
        "q025", "q500", "q975", "mass_lower", "mass_upper",
    ]
    lines = [",".join(header) + "," + ",".join(cols)]
    for row in body["rows"]:
        cells = [repr(float(v)) for v in row["x"]]
        for col in cols:
            val = row[col]
            cells.append("" if val is None else repr(float(val)))
        lines.append(",".join(cells))
    path = _write(args.out, "predictions.csv", "\n".join(lines) + "\n")
    print(f"predictions written to {path} ({len(body['rows'])} rows)")
    return 0


def _cmd_benchmark(args, client: _ServiceClient) -> int:
    payload = {
        "problem": args.problem,
        "variants": [v for v in args.variants.split(",") if v],
        "replications": args.reps,
        "n_test": args.n_test,
        "base_seed": args.seed if args.seed is not None else 0,
    }
    if args.n:
        payload["n_train"] = _int_list(args.n)
    # The base seed drives the replications; per-fit seeds derive from it.
    overrides = _inference_payload(args, with_seed=False)
    if overrides:
        payload["config"] = overrides
    body = client.post("/benchmark", payload)
    csv_path = _write(args.out, "trials.csv", body["trials_csv"])
    md_path = _write(args.out, "summary.md", body["summary_markdown"])
    for cell in body["cells"]:
        r2 = cell["r2"]
        print(
            f"{cell['problem']} {cell['variant']} N={cell['n_train']}: "
            f"R2x100 {100 * r2['mean']:.1f} +- {100 * r2['std']:.2f} "
            f"({cell['trials']} trials, {cell['failures']} failures)"
        )
    print(f"reports written to {csv_path} and {md_path}")
    return 0


def _cmd_density(args, client: _ServiceClient) -> int:
    payload = {
        "target": args.target,
        "variants": [v for v in args.variants.split(",") if v],
        "n_train": _int_list(args.n),
        "replications": args.reps,
        "mc_samples": args.mc_samples,
        "base_seed": args.seed if args.seed is not None else 0,
        "contour": args.contour,
        "contour_resolution": args.contour_resolution,
    }
    overrides = _inference_payload(args, with_seed=False)
    if overrides:
        payload["config"] = overrides
    body = client.post("/density", payload)
    csv_path = _write(args.out, "density.csv", body["density_csv"])
    md_path = _write(args.out, "density_summary.md", body["summary_markdown"])
    written = [csv_path, md_path]
    if body.get("contour_csv"):
        written.append(_write(args.out, "contour.csv", body["contour_csv"]))
    for cell in body["cells"]:
        h2 = cell["h2"]
        print(
            f"{cell['target']} {cell['variant']} N={cell['n_train']}: "
            f"H2 {h2['mean']:.4f} +- {h2['std']:.4f} "
            f"({cell['trials']} trials, {cell['failures']} failures)"
        )
    print("reports written to " + ", ".join(written))
    return 0


def _add_inference_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["bounded", "unbounded"], default=None,
                   help="inference mode (default: bounded iff bounds are declared)")
    p.add_argument("--generations", type=int, default=None, help="CMA generation cap")
    p.add_argument("--population", type=int, default=None, help="CMA population size")
    p.add_argument("--restarts", type=int, default=None, help="additional CMA restarts")
    p.add_argument("--step", type=float, default=None, help="initial CMA step size")
    p.add_argument("--c-l", dest="c_l", type=float, default=None,
                   help="lower variance box factor")
    p.add_argument("--c-u", dest="c_u", type=float, default=None,
                   help="upper variance box factor")
    p.add_argument("--nugget", type=float, default=None, help="relative diagonal nugget")
    p.add_argument("--variance-cap", type=float, default=None,
                   help="reject candidates whose variance estimate exceeds this")
    p.add_argument("--plateau", type=float, default=None,
                   help="relative PRESS slack for the final variance choice")
    p.add_argument("--refine-step", dest="refine_step", type=float, default=None,
                   help="initial CMA step for the bounded refinement stage")
    p.add_argument("--anchor-margin", dest="anchor_margin", type=float, default=None,
                   help="slack favoring the refined classical solution in bounded mode")


def _build_parser() -> _Parser:
    parser = _Parser(prog="boundedgp", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="JSON file of flag defaults, overridden by explicit flags")
    parser.add_argument("--server", default=None, metavar="URL",
                        help="POST to a running service instead of in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model on CSV data and write a model file")
    p.add_argument("--train", required=True, help="training CSV: input columns then one output column")
    p.add_argument("--lower", default=None, help="lower bound: a constant or an expression over x1..xd")
    p.add_argument("--upper", default=None, help="upper bound: a constant or an expression over x1..xd")
    p.add_argument("--no-project", action="store_true", help="keep the Gaussian predictor")
    p.add_argument("--no-normalize", action="store_true", help="fit in raw data units")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    _add_inference_flags(p)
    p.set_defaults(run=_cmd_fit)

    p = sub.add_parser("predict", help="evaluate a model file at query points")
    p.add_argument("--model", required=True, help="model file from fit")
    p.add_argument("--data", required=True, help="query CSV of input rows")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(run=_cmd_predict, seed=None)

    p = sub.add_parser("benchmark", help="run catalog benchmark experiments")
    p.add_argument("--problem", required=True, help="catalog problem name, or 'all'")
    p.add_argument("--variants", default="bGP,bGP_I,bGP_P,GP",
                   help="comma-separated method variants")
    p.add_argument("--n", default=None, help="comma-separated training sizes")
    p.add_argument("--reps", type=int, default=50, help="replications per cell")
    p.add_argument("--n-test", dest="n_test", type=int, default=1000)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="base seed for replications")
    _add_inference_flags(p)
    p.set_defaults(run=_cmd_benchmark, mode=None)

    p = sub.add_parser("density", help="run density approximation experiments")
    p.add_argument("--target", required=True, help="nonlinear or multimodal")
    p.add_argument("--variants", default="bGP", help="comma-separated method variants")
    p.add_argument("--n", default="50,100,200,500", help="comma-separated training sizes")
    p.add_argument("--reps", type=int, default=50, help="replications per cell")
    p.add_argument("--mc-samples", dest="mc_samples", type=int, default=1_000_000,
                   help="Monte Carlo stream size")
    p.add_argument("--contour", action="store_true",
                   help="also write contour grid data for the first variant")
    p.add_argument("--contour-resolution", dest="contour_resolution", type=int, default=200)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="base seed for replications")
    _add_inference_flags(p)
    p.set_defaults(run=_cmd_density, mode=None)

    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Splice --config FILE contents in as defaults ahead of explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise _UsageError("--config requires a file path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2 :]
    try:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
    except OSError as exc:
        raise _DataError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise _DataError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(loaded, dict):
        raise _DataError(f"{path}: config must be a JSON object of flag values")
    front: list[str] = []
    if "server" in loaded:
        front = ["--server", str(loaded.pop("server"))]
    injected: list[str] = []
    for key, value in loaded.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                injected.append(flag)
        elif isinstance(value, list):
            injected.extend([flag, ",".join(str(v) for v in value)])
        else:
            injected.extend([flag, str(value)])
    # Defaults go right after the command token so later explicit flags win.
    cmd = _command_index(rest)
    return front + rest[: cmd + 1] + injected + rest[cmd + 1 :]


def _command_index(tokens: list[str]) -> int:
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok == "--server":
            i += 2
        elif tok.startswith("-"):
            i += 1
        else:
            return i
    raise _UsageError("a command is required")


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _expand_config(argv)
        args = parser.parse_args(argv)
        client = _ServiceClient(args.server)
        return args.run(args, client)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except _ServiceError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
