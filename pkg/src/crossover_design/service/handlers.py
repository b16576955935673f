"""Request-model handlers shared by the FastAPI app and the CLI.

Each handler converts a pydantic request into domain objects, runs the
core machinery, and returns a pydantic response. Semantic validation
beyond shape (theta length, sequence alphabet, correlation parameters)
raises ConfigError with a path to the offending key.
"""

from __future__ import annotations

from ..correlation import CorrelationSpec, default_rho_tables, spec_from_config
from ..efficiency import misspec_table, relative_d_efficiency, sensitivity
from ..errors import ConfigError, CrossoverDesignError, DimensionMismatch
from ..families import Family
from ..fixtures import fixture_names, fixture_problem, get_fixture
from ..gee import assemble
from ..optimizer import OptimizerConfig, optimize
from ..problem import DesignProblem, ParamVector
from ..sequences import build_full_indicator_matrix, parse_sequences, tau_selector
from ..simulation import TwoStageConfig, two_stage_run
from . import schemas as sc


def to_correlation(model: sc.CorrelationModel, t: int, path: str) -> CorrelationSpec:
    try:
        return spec_from_config(
            model.kind, rho=model.rho, rho_table=model.rho_table, custom=model.custom, t=t
        )
    except ConfigError:
        raise
    except CrossoverDesignError as exc:
        raise ConfigError(path, str(exc)) from exc


def to_problem(model: sc.ProblemModel) -> DesignProblem:
    try:
        sequences = parse_sequences(model.sequences, model.t)
    except CrossoverDesignError as exc:
        raise ConfigError("problem.sequences", str(exc)) from exc
    try:
        theta = ParamVector.from_array(model.theta, model.p, model.t)
    except DimensionMismatch as exc:
        raise ConfigError("problem.theta", str(exc)) from exc
    working = to_correlation(model.correlation, model.t, "problem.correlation")
    true_corr = (
        to_correlation(model.true_correlation, model.t, "problem.true_correlation")
        if model.true_correlation is not None
        else None
    )
    try:
        return DesignProblem(
            n_treatments=model.t,
            n_periods=model.p,
            sequences=sequences,
            family=Family.from_name(model.family),
            theta=theta,
            working_correlation=working,
            true_correlation=true_corr,
        )
    except DimensionMismatch as exc:
        raise ConfigError("problem", str(exc)) from exc


def resolve_problem(
    problem: sc.ProblemModel | None,
    fixture: sc.FixtureSelector | None,
    path: str = "problem",
) -> DesignProblem:
    if (problem is None) == (fixture is None):
        raise ConfigError(path, "provide exactly one of 'problem' or 'fixture'")
    if problem is not None:
        return to_problem(problem)
    return fixture_problem(
        fixture.name,
        structure=fixture.structure,
        rho=fixture.rho,
        true_structure=fixture.true_structure,
    )


def to_optimizer_config(model: sc.OptimizerModel) -> OptimizerConfig:
    return OptimizerConfig(
        restarts=model.restarts,
        max_iters=model.max_iters,
        tol_obj=model.tol_obj,
        tol_weight=model.tol_weight,
        zero_clip=model.zero_clip,
        seed=model.seed,
    )


def _design_points(design) -> list[sc.DesignPoint]:
    return [sc.DesignPoint(sequence=lbl, weight=w) for lbl, w in design.as_pairs()]


def handle_optimize(req: sc.OptimizeRequest) -> sc.OptimizeResponse:
    problem = resolve_problem(req.problem, req.fixture)
    result = optimize(problem, to_optimizer_config(req.optimizer))
    return sc.OptimizeResponse(
        design=_design_points(result.design),
        objective=result.objective_value,
        log_det=result.log_det,
        converged=result.converged,
        iterations=result.iterations,
        restarts=req.optimizer.restarts,
        restart_spread=result.restart_spread,
    )


def handle_efficiency(req: sc.EfficiencyRequest) -> sc.EfficiencyResponse:
    problem_true = resolve_problem(req.problem, req.fixture)
    if req.assumed_theta is None and req.assumed_correlation is None:
        raise ConfigError(
            "assumed_theta", "provide assumed_theta and/or assumed_correlation"
        )
    assumed = problem_true
    if req.assumed_theta is not None:
        try:
            theta_c = ParamVector.from_array(
                req.assumed_theta, problem_true.n_periods, problem_true.n_treatments
            )
        except DimensionMismatch as exc:
            raise ConfigError("assumed_theta", str(exc)) from exc
        assumed = assumed.with_theta(theta_c)
    if req.assumed_correlation is not None:
        working = to_correlation(
            req.assumed_correlation, problem_true.n_treatments, "assumed_correlation"
        )
        # misspecified structure: the assumed problem weights with it while
        # the true structure still drives Cov(Y)
        assumed = assumed.with_correlation(
            working=working, true=problem_true.working_correlation
        )
    cfg = to_optimizer_config(req.optimizer)
    res_true = optimize(problem_true, cfg)
    res_assumed = optimize(assumed, cfg)
    s = sensitivity(problem_true, assumed, res_true.design)
    e = relative_d_efficiency(problem_true, assumed, cfg)
    return sc.EfficiencyResponse(
        sensitivity=s,
        relative_d_efficiency=e,
        design_true=_design_points(res_true.design),
        design_assumed=_design_points(res_assumed.design),
    )


def handle_misspec_table(req: sc.MisspecTableRequest) -> sc.MisspecTableResponse:
    from ..fixtures import (
        LATIN_SQUARE_LABELS,
        THETA_LATIN_NONUNIFORM,
        THETA_LATIN_UNIFORM,
    )

    labels = req.sequences
    theta1_vals = req.theta1
    theta2_vals = req.theta2
    if labels is None and req.scenario == "latin_square_4" and req.t == 4 and req.p == 4:
        labels = list(LATIN_SQUARE_LABELS)
        theta1_vals = theta1_vals or list(THETA_LATIN_NONUNIFORM)
        theta2_vals = theta2_vals or list(THETA_LATIN_UNIFORM)
    if labels is None:
        raise ConfigError("sequences", "sequences required unless using the latin_square_4 defaults")
    if theta1_vals is None or theta2_vals is None:
        raise ConfigError("theta1", "theta1 and theta2 required unless using the latin_square_4 defaults")
    try:
        sequences = parse_sequences(labels, req.t)
        theta1 = ParamVector.from_array(theta1_vals, req.p, req.t)
        theta2 = ParamVector.from_array(theta2_vals, req.p, req.t)
    except CrossoverDesignError as exc:
        raise ConfigError("misspec", str(exc)) from exc
    tables = default_rho_tables(req.scenario)
    numbers = req.structures or sorted(tables)
    unknown = [n for n in numbers if n not in tables]
    if unknown:
        raise ConfigError("structures", f"unknown structure numbers {unknown}")
    base = DesignProblem(
        n_treatments=req.t,
        n_periods=req.p,
        sequences=sequences,
        family=Family.from_name(req.family),
        theta=theta1,
        working_correlation=tables[numbers[0]],
    )
    table = misspec_table(
        base, theta1, theta2, {n: tables[n] for n in numbers},
        to_optimizer_config(req.optimizer),
    )
    return sc.MisspecTableResponse(
        sequences=list(table.sequence_labels),
        rows=[
            sc.MisspecRowModel(
                true_structure=r.true_structure,
                working_structure=r.working_structure,
                weights_theta1=list(r.weights_theta1),
                weights_theta2=list(r.weights_theta2),
                efficiency_theta1=r.efficiency_theta1,
                efficiency_theta2=r.efficiency_theta2,
            )
            for r in table.rows
        ],
    )


def handle_simulate(req: sc.SimulateRequest) -> sc.SimulateResponse:
    problem = resolve_problem(req.problem, req.fixture)
    config = TwoStageConfig(
        problem=problem,
        working_kind=req.working_kind,
        n_total=req.n_total,
        pilot_fraction=req.pilot_fraction,
        replications=req.replications,
        seed=req.seed,
        optimizer=to_optimizer_config(req.optimizer),
    )
    report = two_stage_run(config)
    return sc.SimulateResponse(
        mse_uniform=report.mse_uniform,
        mse_optimal=report.mse_optimal,
        mse_ratio=report.mse_ratio,
        n_replications=report.n_replications,
        n_excluded=report.n_excluded,
        seed=report.seed,
        replications=[
            sc.ReplicationModel(
                index=r.index,
                mse_uniform=r.mse_uniform,
                mse_optimal=r.mse_optimal,
                rho_hat_pilot=r.rho_hat_pilot,
                pilot_converged=r.pilot_converged,
                excluded=r.excluded,
            )
            for r in report.records
        ],
    )


def handle_dump_matrices(req: sc.DumpMatricesRequest) -> sc.DumpMatricesResponse:
    problem = resolve_problem(req.problem, req.fixture)
    assembly = assemble(problem)
    p, t = problem.n_periods, problem.n_treatments
    dumps = []
    for s in assembly.per_sequence:
        dumps.append(
            sc.SequenceDump(
                sequence=s.sequence.label,
                x=s.x.tolist(),
                x_full_indicator=build_full_indicator_matrix(s.sequence, p, t).tolist(),
                eta=s.eta.tolist(),
                mu=s.mu.tolist(),
                variance_diag=s.var_diag.tolist(),
                correlation=s.corr.tolist(),
                w_inverse=s.w_inv.tolist(),
                dmu_dtheta=s.dmu.tolist(),
            )
        )
    layout = (
        "intercept | period 2..p | direct 2..t | carryover 2..t "
        f"(m = {problem.param_dimension})"
    )
    return sc.DumpMatricesResponse(
        theta_layout=layout,
        tau_selector=tau_selector(p, t).tolist(),
        sequences=dumps,
    )


def list_fixtures() -> list[sc.FixtureInfo]:
    out = []
    for name in fixture_names():
        spec = get_fixture(name)
        out.append(
            sc.FixtureInfo(
                name=spec.name,
                description=spec.description,
                t=spec.t,
                p=spec.p,
                sequences=list(spec.sequence_labels),
                family=spec.family.value,
                theta=list(spec.theta),
                default_structure=spec.default_structure,
            )
        )
    return out
