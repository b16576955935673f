"""Design-quality metrics under parameter or correlation misspecification.

Two scalar summaries compare a pair of problems sharing one design
space:

* ``sensitivity`` -- relative loss in the k-th-root information scale
  when the assumed problem replaces the true one at a fixed design;
* ``relative_d_efficiency`` -- how much direct-effect information the
  design optimized under the assumed problem retains when judged under
  the true problem, against the true problem's own optimal design.

``misspec_table`` sweeps every ordered (true, working) structure pair,
re-optimizing under the sandwich variance and reporting weights and
efficiencies for two nominal parameter vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

from .correlation import CorrelationSpec
from .errors import DimensionMismatch
from .gee import assemble, objective
from .optimizer import OptimizerConfig, optimize
from .problem import Design, DesignProblem, ParamVector


def _check_shared_frame(a: DesignProblem, b: DesignProblem):
    if (
        a.n_treatments != b.n_treatments
        or a.n_periods != b.n_periods
        or a.sequences != b.sequences
        or a.family is not b.family
    ):
        raise DimensionMismatch(
            "problems must share treatments, periods, sequences and family"
        )


def sensitivity(
    problem_true: DesignProblem, problem_assumed: DesignProblem, design: Design
) -> float:
    """Relative information loss of the assumed problem at a fixed design.

    Zero when both problems agree; positive when the assumed problem
    claims more direct-effect information than the truth delivers.
    """
    _check_shared_frame(problem_true, problem_assumed)
    k = problem_true.n_treatments - 1
    det_true = objective(assemble(problem_true), design)
    det_assumed = objective(assemble(problem_assumed), design)
    info_true = det_true ** (-1.0 / k)
    info_assumed = det_assumed ** (-1.0 / k)
    return float((info_true - info_assumed) / info_true)


def relative_d_efficiency(
    problem_true: DesignProblem,
    problem_assumed: DesignProblem,
    cfg: OptimizerConfig | None = None,
) -> float:
    """Efficiency of the assumed-optimal design, judged under the truth.

    Both determinants are evaluated under the true problem: at the
    design optimized for the assumed problem, and at the true problem's
    own optimum. Equals 1 when the problems coincide; at most 1 up to
    optimizer precision otherwise.
    """
    _check_shared_frame(problem_true, problem_assumed)
    cfg = cfg or OptimizerConfig()
    k = problem_true.n_treatments - 1
    design_assumed = optimize(problem_assumed, cfg).design
    result_true = optimize(problem_true, cfg)
    assembly_true = assemble(problem_true)
    det_at_assumed = objective(
        assembly_true, Design(problem_true.sequences, design_assumed.weights)
    )
    return float((det_at_assumed / result_true.objective_value) ** (-1.0 / k))


@dataclass(frozen=True)
class MisspecRow:
    true_structure: int
    working_structure: int
    weights_theta1: tuple[float, ...]
    weights_theta2: tuple[float, ...]
    efficiency_theta1: float
    efficiency_theta2: float


@dataclass(frozen=True)
class MisspecTable:
    sequence_labels: tuple[str, ...]
    rows: tuple[MisspecRow, ...]

    def csv_header(self) -> list[str]:
        cols = ["true_structure", "working_structure"]
        cols += [f"w_{lbl}_theta1" for lbl in self.sequence_labels]
        cols += [f"w_{lbl}_theta2" for lbl in self.sequence_labels]
        cols += ["efficiency_theta1", "efficiency_theta2"]
        return cols

    def csv_rows(self) -> list[list]:
        out = []
        for r in self.rows:
            out.append(
                [r.true_structure, r.working_structure]
                + list(r.weights_theta1)
                + list(r.weights_theta2)
                + [r.efficiency_theta1, r.efficiency_theta2]
            )
        return out


def misspec_table(
    base_problem: DesignProblem,
    theta1: ParamVector,
    theta2: ParamVector,
    structures: dict[int, CorrelationSpec],
    cfg: OptimizerConfig | None = None,
) -> MisspecTable:
    """Optimal designs and efficiencies for every misspecified pair.

    For each ordered pair (true, working) with true != working the
    design is re-optimized under the sandwich variance (working
    structure weights the estimating equations, true structure drives
    Cov(Y)); its efficiency is judged under the true structure against
    the true structure's own optimum. Diagonal pairs are skipped.
    """
    cfg = cfg or OptimizerConfig()
    rows = []
    numbers = sorted(structures)
    true_optima: dict[tuple[int, int], tuple] = {}
    for idx, theta in ((1, theta1), (2, theta2)):
        for num in numbers:
            pr = base_problem.with_theta(theta).with_correlation(
                working=structures[num], true=None
            )
            true_optima[(idx, num)] = (optimize(pr, cfg), assemble(pr))

    k = base_problem.n_treatments - 1
    for true_num in numbers:
        for work_num in numbers:
            if true_num == work_num:
                continue
            per_theta = {}
            for idx, theta in ((1, theta1), (2, theta2)):
                pr = base_problem.with_theta(theta).with_correlation(
                    working=structures[work_num], true=structures[true_num]
                )
                res = optimize(pr, cfg)
                opt_true, asm_true = true_optima[(idx, true_num)]
                det_at = objective(
                    asm_true, Design(pr.sequences, res.design.weights)
                )
                eff = (det_at / opt_true.objective_value) ** (-1.0 / k)
                per_theta[idx] = (tuple(float(w) for w in res.design.weights), float(eff))
            rows.append(
                MisspecRow(
                    true_structure=true_num,
                    working_structure=work_num,
                    weights_theta1=per_theta[1][0],
                    weights_theta2=per_theta[2][0],
                    efficiency_theta1=per_theta[1][1],
                    efficiency_theta2=per_theta[2][1],
                )
            )
    labels = tuple(s.label for s in base_problem.sequences)
    return MisspecTable(sequence_labels=labels, rows=tuple(rows))
