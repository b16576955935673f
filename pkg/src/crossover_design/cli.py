"""Batch front-end: config ingestion, command dispatch, CSV/JSON emission.

The CLI is a thin client over the service layer: each subcommand builds
the same pydantic request models the HTTP endpoints accept, runs them
in process (or against a running server with ``--server``), and writes
the declared outputs.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 nonconvergence. Failures emit a machine-readable JSON error on
stderr.

Config files are JSON with a ``schema_version`` key; see the README for
the documented schema. Command-line flags override single config keys.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
import sys
from pathlib import Path

import click
import pydantic

from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionMismatch,
    NumericalError,
    RankDeficientDesign,
)
from .service import handlers
from .service import schemas as sc

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGENCE = 4

_HTTP_EXIT = {400: EXIT_CONFIG, 409: EXIT_NONCONVERGENCE, 422: EXIT_NUMERICAL}


class _CliFailure(Exception):
    def __init__(self, code: int, error: str, detail: str):
        self.code = code
        self.error = error
        self.detail = detail
        super().__init__(detail)


def _fail_from_exception(exc: Exception) -> _CliFailure:
    if isinstance(exc, ConfigError):
        return _CliFailure(EXIT_CONFIG, type(exc).__name__, str(exc))
    if isinstance(exc, pydantic.ValidationError):
        first = exc.errors()[0]
        path = ".".join(str(part) for part in first["loc"]) or "config"
        return _CliFailure(EXIT_CONFIG, "ConfigError", f"{path}: {first['msg']}")
    if isinstance(exc, json.JSONDecodeError):
        return _CliFailure(EXIT_CONFIG, "ConfigError", f"config is not valid JSON: {exc}")
    if isinstance(exc, ConvergenceError):
        return _CliFailure(EXIT_NONCONVERGENCE, type(exc).__name__, str(exc))
    if isinstance(exc, (NumericalError, DimensionMismatch, RankDeficientDesign)):
        return _CliFailure(EXIT_NUMERICAL, type(exc).__name__, str(exc))
    raise exc


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}")
    return raw


def _parse_floats(text: str, path: str) -> list[float]:
    try:
        return [float(part) for part in text.replace(" ", "").split(",") if part]
    except ValueError:
        raise ConfigError(path, f"expected comma-separated numbers, got {text!r}") from None


def _fixture_section(config: dict, fixture, structure, rho, true_structure):
    section = dict(config.get("fixture") or {})
    if fixture is not None:
        section["name"] = fixture
    if "name" not in section:
        return None
    if structure is not None:
        section["structure"] = structure
    if rho is not None:
        section["rho"] = rho
    if true_structure is not None:
        section["true_structure"] = true_structure
    return section


def _structure_json(t: int, structure: int, rho: float | None) -> dict:
    """Correlation config block for a numbered structure on a direct problem."""
    from .correlation import FIXED_KINDS, KIND_BY_NUMBER, default_rho_tables

    kind = KIND_BY_NUMBER.get(structure)
    if kind is None:
        raise ConfigError("structure", f"structure must be 1..6, got {structure}")
    if kind in FIXED_KINDS and rho is not None:
        return {"kind": kind, "rho": rho}
    scenario = {2: "two_treatment", 4: "latin_square_4"}.get(t)
    if scenario is None:
        raise ConfigError(
            "structure",
            f"no default parameters for structure {structure} with t={t}; "
            "give rho (structures 1..3) or a full correlation block",
        )
    spec = default_rho_tables(scenario)[structure]
    if spec.rho is not None:
        return {"kind": spec.kind, "rho": rho if rho is not None else spec.rho}
    letters = {pair: "".join(chr(ord("A") + s - 1) for s in pair) for pair in spec.rho_table}
    return {"kind": spec.kind,
            "rho_table": {letters[pair]: v for pair, v in spec.rho_table.items()}}


def _problem_section(config: dict, theta, sequences, family, t, p,
                     structure=None, rho=None, true_structure=None):
    section = config.get("problem")
    section = dict(section) if section else {}
    if theta is not None:
        section["theta"] = _parse_floats(theta, "problem.theta")
    if sequences is not None:
        section["sequences"] = [s for s in sequences.replace(" ", "").split(",") if s]
    if family is not None:
        section["family"] = family
    if t is not None:
        section["t"] = t
    if p is not None:
        section["p"] = p
    if section:
        n_treat = section.get("t")
        if structure is not None and n_treat is not None:
            section["correlation"] = _structure_json(n_treat, structure, rho)
        elif rho is not None and isinstance(section.get("correlation"), dict):
            section["correlation"] = dict(section["correlation"], rho=rho)
        if true_structure is not None and n_treat is not None:
            section["true_correlation"] = _structure_json(n_treat, true_structure, None)
    return section or None


def _optimizer_section(config: dict, seed) -> dict:
    section = dict(config.get("optimizer") or {})
    if seed is not None:
        section["seed"] = seed
    return section


def _timestamp_enabled(config: dict, no_timestamp: bool) -> bool:
    if no_timestamp:
        return False
    output = config.get("output") or {}
    return bool(output.get("timestamp", True))


def _write_csv(path: str, header: list[str], rows: list[list], timestamp: bool):
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated: {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())


def _write_json(path: str, payload: dict, timestamp: bool):
    body = dict(payload)
    if timestamp:
        body["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    Path(path).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")


def _fmt_weight(w: float) -> str:
    return f"{w:.6f}"


def _fmt_obj(v: float) -> str:
    return f"{v:.6e}"


def _post(server: str, endpoint: str, request_model) -> dict:
    import httpx

    response = httpx.post(
        server.rstrip("/") + endpoint,
        json=json.loads(request_model.model_dump_json()),
        timeout=600.0,
    )
    if response.status_code != 200:
        try:
            body = response.json()
            error, detail = body.get("error", "HTTPError"), str(body.get("detail", body))
        except ValueError:
            error, detail = "HTTPError", response.text
        raise _CliFailure(
            _HTTP_EXIT.get(response.status_code, EXIT_NUMERICAL), error, detail
        )
    return response.json()


def _run(request_model, endpoint: str, handler, server: str | None, response_cls):
    if server:
        return response_cls.model_validate(_post(server, endpoint, request_model))
    return handler(request_model)


def _execute(fn):
    try:
        fn()
    except _CliFailure as failure:
        click.echo(
            json.dumps({"error": failure.error, "detail": failure.detail}), err=True
        )
        sys.exit(failure.code)
    except Exception as exc:  # translate domain errors into exit codes
        failure = _fail_from_exception(exc)
        click.echo(
            json.dumps({"error": failure.error, "detail": failure.detail}), err=True
        )
        sys.exit(failure.code)
    sys.exit(EXIT_OK)


def _common_options(fn):
    decorators = [
        click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                     help="JSON config file; flags override its keys."),
        click.option("--fixture", default=None, help="Named built-in fixture."),
        click.option("--structure", type=int, default=None,
                     help="Correlation structure number 1..6 (fixtures only)."),
        click.option("--rho", type=float, default=None,
                     help="Scalar correlation override for structures 1..3."),
        click.option("--true-structure", type=int, default=None,
                     help="Differing true structure number (sandwich evaluation)."),
        click.option("--theta", default=None, help="Comma-separated parameter vector."),
        click.option("--sequences", default=None, help="Comma-separated sequence labels."),
        click.option("--family", type=click.Choice(["binary", "poisson"]), default=None),
        click.option("--t", type=int, default=None, help="Number of treatments."),
        click.option("--p", type=int, default=None, help="Number of periods."),
        click.option("--seed", type=int, default=None, help="Optimizer seed override."),
        click.option("--out-csv", default=None, help="CSV output path."),
        click.option("--out-json", default=None, help="JSON output path."),
        click.option("--no-timestamp", is_flag=True, help="Omit timestamp lines from outputs."),
        click.option("--server", default=None,
                     help="Base URL of a running service; run there instead of in-process."),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


@click.group()
@click.version_option(package_name="crossover-design")
def main():
    """Locally D-optimal crossover designs for correlated GLM responses."""


@main.command()
@_common_options
def optimize(config_path, fixture, structure, rho, true_structure, theta, sequences,
             family, t, p, seed, out_csv, out_json, no_timestamp, server):
    """Find the optimal sequence weights for one problem."""

    def body():
        config = _load_config(config_path)
        req = sc.OptimizeRequest(
            problem=_problem_section(config, theta, sequences, family, t, p,
                                     structure, rho, true_structure),
            fixture=_fixture_section(config, fixture, structure, rho, true_structure),
            optimizer=_optimizer_section(config, seed),
        )
        res = _run(req, "/optimize", handlers.handle_optimize, server, sc.OptimizeResponse)
        stamp = _timestamp_enabled(config, no_timestamp)
        if out_csv:
            rows = [
                [pt.sequence, _fmt_weight(pt.weight), _fmt_obj(res.objective),
                 str(res.converged).lower(), res.restarts]
                for pt in res.design
            ]
            _write_csv(out_csv, ["sequence", "weight", "objective", "converged", "restarts"],
                       rows, stamp)
        if out_json:
            _write_json(out_json, json.loads(res.model_dump_json()), stamp)
        click.echo(f"objective det Var(tau_hat) = {_fmt_obj(res.objective)} "
                   f"(converged={res.converged}, iterations={res.iterations})")
        for pt in res.design:
            click.echo(f"  {pt.sequence}  {_fmt_weight(pt.weight)}")

    _execute(body)


@main.command()
@_common_options
@click.option("--assumed-theta", default=None, help="Comma-separated assumed parameter vector.")
@click.option("--assumed-structure", type=int, default=None,
              help="Assumed working structure number 1..6 (fixtures only).")
def efficiency(config_path, fixture, structure, rho, true_structure, theta, sequences,
               family, t, p, seed, out_csv, out_json, no_timestamp, server,
               assumed_theta, assumed_structure):
    """Sensitivity and relative D-efficiency against an assumed problem."""

    def body():
        config = _load_config(config_path)
        section = dict(config.get("efficiency") or {})
        if assumed_theta is not None:
            section["assumed_theta"] = _parse_floats(assumed_theta, "efficiency.assumed_theta")
        if assumed_structure is not None:
            name = fixture or (config.get("fixture") or {}).get("name")
            if not name:
                raise ConfigError("assumed_structure", "requires a fixture")
            from .correlation import default_rho_tables
            from .fixtures import get_fixture

            tables = default_rho_tables(get_fixture(name).scenario)
            if assumed_structure not in tables:
                raise ConfigError("assumed_structure", "structure must be 1..6")
            chosen = tables[assumed_structure]
            section["assumed_correlation"] = {
                "kind": chosen.kind,
                "rho": chosen.rho,
                "rho_table": None if chosen.rho_table is None else {
                    "".join(chr(ord("A") + x - 1) for x in pair): v
                    for pair, v in chosen.rho_table.items()
                },
            }
        req = sc.EfficiencyRequest(
            problem=_problem_section(config, theta, sequences, family, t, p,
                                     structure, rho, true_structure),
            fixture=_fixture_section(config, fixture, structure, rho, true_structure),
            optimizer=_optimizer_section(config, seed),
            **section,
        )
        res = _run(req, "/efficiency", handlers.handle_efficiency, server, sc.EfficiencyResponse)
        stamp = _timestamp_enabled(config, no_timestamp)
        if out_csv:
            _write_csv(out_csv, ["metric", "value"],
                       [["sensitivity", _fmt_obj(res.sensitivity)],
                        ["relative_d_efficiency", _fmt_weight(res.relative_d_efficiency)]],
                       stamp)
        if out_json:
            _write_json(out_json, json.loads(res.model_dump_json()), stamp)
        click.echo(f"sensitivity           = {res.sensitivity:.6f}")
        click.echo(f"relative D-efficiency = {res.relative_d_efficiency:.6f}")

    _execute(body)


@main.command(name="misspec-table")
@_common_options
@click.option("--theta1", default=None, help="Comma-separated non-uniform parameter vector.")
@click.option("--theta2", default=None, help="Comma-separated near-uniform parameter vector.")
@click.option("--scenario", type=click.Choice(["two_treatment", "latin_square_4"]),
              default=None)
def misspec_table_cmd(config_path, fixture, structure, rho, true_structure, theta, sequences,
                      family, t, p, seed, out_csv, out_json, no_timestamp, server,
                      theta1, theta2, scenario):
    """Re-optimized designs and efficiencies for every misspecified pair."""

    def body():
        config = _load_config(config_path)
        section = dict(config.get("misspec") or {})
        if theta1 is not None:
            section["theta1"] = _parse_floats(theta1, "misspec.theta1")
        if theta2 is not None:
            section["theta2"] = _parse_floats(theta2, "misspec.theta2")
        if scenario is not None:
            section["scenario"] = scenario
        if sequences is not None:
            section["sequences"] = [s for s in sequences.replace(" ", "").split(",") if s]
        if family is not None:
            section["family"] = family
        if t is not None:
            section["t"] = t
        if p is not None:
            section["p"] = p
        section["optimizer"] = _optimizer_section(config, seed)
        req = sc.MisspecTableRequest(**section)
        res = _run(req, "/misspec-table", handlers.handle_misspec_table, server,
                   sc.MisspecTableResponse)
        stamp = _timestamp_enabled(config, no_timestamp)
        header = ["true_structure", "working_structure"]
        header += [f"w_{lbl}_theta1" for lbl in res.sequences]
        header += [f"w_{lbl}_theta2" for lbl in res.sequences]
        header += ["efficiency_theta1", "efficiency_theta2"]
        rows = [
            [r.true_structure, r.working_structure]
            + [_fmt_weight(w) for w in r.weights_theta1]
            + [_fmt_weight(w) for w in r.weights_theta2]
            + [_fmt_weight(r.efficiency_theta1), _fmt_weight(r.efficiency_theta2)]
            for r in res.rows
        ]
        if out_csv:
            _write_csv(out_csv, header, rows, stamp)
        if out_json:
            _write_json(out_json, json.loads(res.model_dump_json()), stamp)
        click.echo(f"{len(res.rows)} (true, working) pairs over sequences "
                   f"{', '.join(res.sequences)}")
        worst = min(min(r.efficiency_theta1, r.efficiency_theta2) for r in res.rows)
        click.echo(f"minimum relative D-efficiency = {worst:.6f}")

    _execute(body)


@main.command()
@_common_options
@click.option("--n-total", type=int, default=None)
@click.option("--pilot-fraction", type=float, default=None)
@click.option("--replications", type=int, default=None)
@click.option("--working-kind", default=None)
@click.option("--out-replications-csv", default=None,
              help="Per-replication CSV output path.")
def simulate(config_path, fixture, structure, rho, true_structure, theta, sequences,
             family, t, p, seed, out_csv, out_json, no_timestamp, server,
             n_total, pilot_fraction, replications, working_kind, out_replications_csv):
    """Two-stage pilot-then-reoptimize simulation against a uniform design."""

    def body():
        config = _load_config(config_path)
        section = dict(config.get("simulation") or {})
        for key, val in [("n_total", n_total), ("pilot_fraction", pilot_fraction),
                         ("replications", replications), ("working_kind", working_kind)]:
            if val is not None:
                section[key] = val
        if seed is not None:
            section["seed"] = seed
        section.setdefault("optimizer", dict(config.get("optimizer") or {}) or
                           {"restarts": 3, "max_iters": 500})
        req = sc.SimulateRequest(
            problem=_problem_section(config, theta, sequences, family, t, p,
                                     structure, rho, true_structure),
            fixture=_fixture_section(config, fixture, structure, rho, true_structure),
            **section,
        )
        res = _run(req, "/simulate", handlers.handle_simulate, server, sc.SimulateResponse)
        stamp = _timestamp_enabled(config, no_timestamp)
        if out_json:
            _write_json(out_json, json.loads(res.model_dump_json()), stamp)
        rep_csv = out_replications_csv or out_csv
        if rep_csv:
            rows = [
                [r.index,
                 "" if r.mse_uniform is None else _fmt_obj(r.mse_uniform),
                 "" if r.mse_optimal is None else _fmt_obj(r.mse_optimal),
                 "" if r.rho_hat_pilot is None else _fmt_weight(r.rho_hat_pilot),
                 "" if r.pilot_converged is None else str(r.pilot_converged).lower(),
                 r.excluded or ""]
                for r in res.replications
            ]
            _write_csv(rep_csv,
                       ["replication", "mse_uniform", "mse_optimal",
                        "rho_hat_pilot", "pilot_converged", "excluded"],
                       rows, stamp)
        click.echo(f"mse_uniform = {res.mse_uniform:.6f}")
        click.echo(f"mse_optimal = {res.mse_optimal:.6f}")
        click.echo(f"ratio       = {res.mse_ratio:.4f}  "
                   f"({res.n_excluded} of {res.n_replications} replications excluded)")

    _execute(body)


@main.command(name="dump-matrices")
@_common_options
@click.option("--out-dir", default=None, help="Directory for per-sequence dump files.")
def dump_matrices(config_path, fixture, structure, rho, true_structure, theta, sequences,
                  family, t, p, seed, out_csv, out_json, no_timestamp, server, out_dir):
    """Emit X, eta, mu, D, W-inverse and dmu/dtheta per sequence."""

    def body():
        config = _load_config(config_path)
        req = sc.DumpMatricesRequest(
            problem=_problem_section(config, theta, sequences, family, t, p,
                                     structure, rho, true_structure),
            fixture=_fixture_section(config, fixture, structure, rho, true_structure),
        )
        res = _run(req, "/dump-matrices", handlers.handle_dump_matrices, server,
                   sc.DumpMatricesResponse)
        stamp = _timestamp_enabled(config, no_timestamp)
        if out_json:
            _write_json(out_json, json.loads(res.model_dump_json()), stamp)
        target = Path(out_dir or config.get("output", {}).get("dir") or "matrix-dump")
        target.mkdir(parents=True, exist_ok=True)
        for dump in res.sequences:
            lines = [f"sequence {dump.sequence}", f"theta layout: {res.theta_layout}", ""]
            for title, block in [
                ("X (constrained coding)", dump.x),
                ("X (full indicators, debug)", dump.x_full_indicator),
                ("eta", [dump.eta]),
                ("mu", [dump.mu]),
                ("D diagonal", [dump.variance_diag]),
                ("working correlation", dump.correlation),
                ("W inverse", dump.w_inverse),
                ("dmu/dtheta", dump.dmu_dtheta),
            ]:
                lines.append(title)
                for row in block:
                    lines.append(",".join(f"{v:.6f}" for v in row))
                lines.append("")
            (target / f"{dump.sequence}.txt").write_text("\n".join(lines))
        _write_json(str(target / "problem.json"), json.loads(res.model_dump_json()), stamp)
        click.echo(f"wrote {len(res.sequences)} sequence dumps to {target}/")

    _execute(body)


@main.command()
@click.option("--server", default=None, help="Query a running service instead.")
def fixtures(server):
    """List the built-in named fixtures."""

    def body():
        if server:
            import httpx

            rows = httpx.get(server.rstrip("/") + "/fixtures", timeout=60.0).json()
            infos = [sc.FixtureInfo.model_validate(row) for row in rows]
        else:
            infos = handlers.list_fixtures()
        for info in infos:
            click.echo(f"{info.name:28s} t={info.t} p={info.p} "
                       f"{info.family:8s} {','.join(info.sequences) if len(info.sequences) <= 4 else f'{len(info.sequences)} sequences'}"
                       f"  - {info.description}")

    _execute(body)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the HTTP service (requires uvicorn)."""
    try:
        import uvicorn
    except ImportError:
        click.echo(json.dumps({"error": "ConfigError",
                               "detail": "uvicorn is not installed; pip install crossover-design[server]"}),
                   err=True)
        sys.exit(EXIT_CONFIG)
    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
