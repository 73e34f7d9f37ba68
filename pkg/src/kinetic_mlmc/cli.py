"""Command line front end.

Every subcommand assembles a request model from an optional key=value
config file plus flag overrides, runs it either in-process or against a
running service (--server), and writes CSV/JSON outputs.  Exit codes:
0 success, 2 invalid configuration or parameters, 3 budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Callable

import httpx
from pydantic import BaseModel, ValidationError

from .errors import BudgetError, ConfigError, ParameterError, StabilityError
from .service import runner, schemas

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3

LEVEL_STUDY_COLUMNS = [
    "level", "dt", "n_samples", "mean_fine", "var_fine", "stderr_fine",
    "mean_diff", "abs_mean_diff", "var_diff", "stderr_diff",
]
MLMC_COLUMNS = [
    "level", "dt", "n_samples", "var_fine", "mean_diff", "var_diff",
    "estimator_variance", "cost_per_sample", "level_cost",
]
TRAJECTORY_COLUMNS = [
    "t", "x_fine", "sign_fine", "collided_fine",
    "x_coarse", "sign_coarse", "collided_coarse",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinetic-mlmc",
        description="Particle Monte Carlo experiments for a two-speed kinetic "
        "model in diffusive scaling: level studies, adaptive multilevel runs, "
        "classical-cost comparisons and coupled trajectory traces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file; flags override its entries")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--server", help="base URL of a running service to POST to "
                       "instead of computing in-process")

    p = sub.add_parser("level-study", help="fixed-sample per-level moment table")
    common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--t-star", type=float)
    p.add_argument("--dt0", type=float, help="coarsest time step; must divide t_star")
    p.add_argument("--max-levels", type=int, help="number of levels in the study")
    p.add_argument("--samples-per-level", type=int)
    p.add_argument("--M", type=int, help="refinement factor between levels")
    p.add_argument("--qoi")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--cost-ceiling", type=float,
                   help="abort before running if the study needs more particle steps")

    for name, help_text in (
        ("mlmc-run", "adaptive multilevel run emitting a level table and summary"),
        ("compare-classical", "adaptive run reported as classical-vs-multilevel cost"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--t-star", type=float)
        p.add_argument("--rmse", type=float, help="root-mean-square error target")
        p.add_argument("--M", type=int, help="refinement factor between levels")
        p.add_argument("--strategy", choices=["geometric", "coarse-horizon"])
        p.add_argument("--qoi")
        p.add_argument("--seed", type=int)
        p.add_argument("--max-levels", type=int, help="cap on adaptively added levels")
        p.add_argument("--workers", type=int)
        p.add_argument("--cost-ceiling", type=float,
                       help="abort once the planned particle steps exceed this")

    p = sub.add_parser("trajectory", help="one coupled fine/coarse path trace")
    common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--dt-fine", type=float)
    p.add_argument("--dt-coarse", type=float)
    p.add_argument("--t-star", type=float)
    p.add_argument("--mode", choices=["full", "diffusion-only", "transport-only"])
    p.add_argument("--seed", type=int)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value lines; blank lines and # comments allowed."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{lineno}: empty key or value in {raw.strip()!r}")
        entries[key] = value
    return entries


def _build_request(args: argparse.Namespace, request_cls: type[BaseModel]) -> BaseModel:
    fields = request_cls.model_fields
    payload: dict = {}
    if args.config:
        file_entries = parse_config_file(args.config)
        unknown = sorted(set(file_entries) - set(fields))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        payload.update(file_entries)
    for name in fields:
        value = getattr(args, name, None)
        if value is not None:
            payload[name] = value
    try:
        return request_cls(**payload)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _call_server(base_url: str, path: str, request: BaseModel, response_cls: type[BaseModel]):
    try:
        with httpx.Client(base_url=base_url, timeout=None) as client:
            resp = client.post(path, json=request.model_dump())
    except httpx.HTTPError as exc:
        raise ConfigError(f"cannot reach server {base_url}: {exc}") from exc
    if resp.status_code == 200:
        return response_cls.model_validate(resp.json())
    try:
        body = resp.json()
    except ValueError:
        body = {}
    detail = body.get("detail", resp.text)
    if resp.status_code == 400 and body.get("kind") == "budget":
        raise BudgetError(str(detail))
    raise ConfigError(f"server rejected request ({resp.status_code}): {detail}")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def level_study_csv(response: schemas.LevelStudyResponse) -> str:
    rows = [[getattr(r, c) for c in LEVEL_STUDY_COLUMNS] for r in response.rows]
    return _csv_text(LEVEL_STUDY_COLUMNS, rows)


def mlmc_csv(response: schemas.MlmcRunResponse) -> str:
    rows = [[getattr(r, c) for c in MLMC_COLUMNS] for r in response.rows]
    totals = ["total", "", "", "", "", "", response.variance_total, "", response.total_cost]
    return _csv_text(MLMC_COLUMNS, rows + [totals])


def trajectory_csv(response: schemas.TrajectoryResponse) -> str:
    rows = [[getattr(r, c) for c in TRAJECTORY_COLUMNS] for r in response.rows]
    return _csv_text(TRAJECTORY_COLUMNS, rows)


def _json_text(model: BaseModel) -> str:
    return json.dumps(model.model_dump(), indent=2) + "\n"


def _write_level_study(response: schemas.LevelStudyResponse, out: str | None) -> None:
    _emit(level_study_csv(response), out)


def _mlmc_paths(out: str) -> tuple[str, str]:
    csv_path = out if out.endswith(".csv") else out + ".csv"
    return csv_path, csv_path[: -len(".csv")] + ".json"


def _write_mlmc(response: schemas.MlmcRunResponse, out: str | None) -> None:
    if out is None:
        sys.stdout.write(mlmc_csv(response))
        sys.stdout.write("\n")
        sys.stdout.write(_json_text(response))
        return
    csv_path, json_path = _mlmc_paths(out)
    _emit(mlmc_csv(response), csv_path)
    _emit(_json_text(response), json_path)


def _write_compare(response: schemas.CompareClassicalResponse, out: str | None) -> None:
    _emit(_json_text(response), out)


def _write_trajectory(response: schemas.TrajectoryResponse, out: str | None) -> None:
    _emit(trajectory_csv(response), out)


COMMANDS: dict[str, tuple[type[BaseModel], type[BaseModel], Callable, str, Callable]] = {
    "level-study": (
        schemas.LevelStudyRequest, schemas.LevelStudyResponse,
        runner.run_level_study, "/level-study", _write_level_study,
    ),
    "mlmc-run": (
        schemas.MlmcRunRequest, schemas.MlmcRunResponse,
        runner.run_mlmc, "/mlmc-run", _write_mlmc,
    ),
    "compare-classical": (
        schemas.CompareClassicalRequest, schemas.CompareClassicalResponse,
        runner.run_compare_classical, "/compare-classical", _write_compare,
    ),
    "trajectory": (
        schemas.TrajectoryRequest, schemas.TrajectoryResponse,
        runner.run_trajectory, "/trajectory", _write_trajectory,
    ),
}


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    request_cls, response_cls, run_local, path, write = COMMANDS[args.command]
    try:
        request = _build_request(args, request_cls)
        if args.server:
            response = _call_server(args.server, path, request, response_cls)
        else:
            response = run_local(request)
        write(response, args.out)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ParameterError, StabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def run() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
