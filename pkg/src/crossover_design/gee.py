"""Per-sequence GEE moment assembly and the D-optimality objective.

For every sequence the mean vector, variance weights, inverse working
covariance and mean derivative are computed once and cached; evaluating
the information matrix, the variance of the direct-effect estimators,
or the objective for any candidate weight vector is then a cheap sum of
small matrices over that cache.

The estimator variance is

    Var(theta_hat) = U^-1                (working structure correct)
    Var(theta_hat) = U^-1 V U^-1         (sandwich, truth differs)

with U the weighted sum of per-sequence information kernels and V the
matching sum with Cov(Y) evaluated under the true structure. The design
criterion is det of the direct-effect block of Var(theta_hat), extracted
with the tau selector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .correlation import CorrelationSpec, build_correlation
from .errors import (
    DimensionMismatch,
    SingularInformation,
    SingularWorkingCovariance,
)
from .families import mean, variance_fn
from .problem import Design, DesignProblem
from .sequences import Sequence, build_design_matrix, tau_selector

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class SequenceAssembly:
    """Cached matrices for one sequence at the nominal parameters."""

    sequence: Sequence
    x: np.ndarray          # p x m design matrix
    eta: np.ndarray        # p linear predictors
    mu: np.ndarray         # p means
    var_diag: np.ndarray   # p variance-function values (diagonal of D)
    corr: np.ndarray       # p x p working correlation
    w: np.ndarray          # p x p working covariance D^1/2 C D^1/2
    w_inv: np.ndarray      # its inverse
    dmu: np.ndarray        # p x m derivative of mu wrt theta (rows d_i x_i')
    kernel: np.ndarray     # m x m information kernel dmu' W^-1 dmu
    true_cov: np.ndarray | None    # p x p Cov(Y) under the true structure
    bread: np.ndarray | None       # m x m dmu' W^-1 Cov(Y) W^-1 dmu


@dataclass(frozen=True)
class GeeAssembly:
    """Assembly for every sequence of a problem, in problem order."""

    problem: DesignProblem
    per_sequence: tuple[SequenceAssembly, ...]
    selector: np.ndarray   # (t-1) x m direct-effect selector

    @property
    def kernels(self) -> np.ndarray:
        return np.stack([s.kernel for s in self.per_sequence])

    @property
    def breads(self) -> np.ndarray:
        return np.stack([s.bread for s in self.per_sequence])


def _working_pieces(problem: DesignProblem, seq: Sequence, x: np.ndarray):
    theta = problem.theta.to_array()
    eta = x @ theta
    mu = np.asarray(mean(problem.family, eta))
    var_diag = np.asarray(variance_fn(problem.family, mu))
    corr = build_correlation(problem.working_correlation, seq, problem.n_periods)
    sd = np.sqrt(var_diag)
    w = corr * np.outer(sd, sd)
    try:
        cho = linalg.cho_factor(w, lower=True)
        w_inv = linalg.cho_solve(cho, np.eye(problem.n_periods))
    except linalg.LinAlgError:
        raise SingularWorkingCovariance(
            f"working covariance for sequence {seq.label} is not invertible"
        ) from None
    return eta, mu, var_diag, corr, w, 0.5 * (w_inv + w_inv.T)


def assemble(problem: DesignProblem) -> GeeAssembly:
    """Compute and cache all per-sequence matrices for a problem."""
    per_seq = []
    for seq in problem.sequences:
        x = build_design_matrix(seq, problem.n_periods, problem.n_treatments)
        eta, mu, var_diag, corr, w, w_inv = _working_pieces(problem, seq, x)
        dmu = var_diag[:, None] * x
        kernel = dmu.T @ w_inv @ dmu
        true_cov = bread = None
        if problem.true_correlation is not None:
            true_corr = build_correlation(problem.true_correlation, seq, problem.n_periods)
            sd = np.sqrt(var_diag)
            true_cov = true_corr * np.outer(sd, sd)
            half = w_inv @ dmu
            bread = half.T @ true_cov @ half
        per_seq.append(
            SequenceAssembly(
                sequence=seq,
                x=x,
                eta=eta,
                mu=mu,
                var_diag=var_diag,
                corr=corr,
                w=w,
                w_inv=w_inv,
                dmu=dmu,
                kernel=0.5 * (kernel + kernel.T),
                true_cov=true_cov,
                bread=None if bread is None else 0.5 * (bread + bread.T),
            )
        )
    selector = tau_selector(problem.n_periods, problem.n_treatments)
    return GeeAssembly(problem=problem, per_sequence=tuple(per_seq), selector=selector)


def info_matrix(assembly: GeeAssembly, design: Design, n: int = 1) -> np.ndarray:
    """Information matrix U = sum over sequences of n p_w kernel_w."""
    weights = _aligned_weights(assembly, design)
    return float(n) * np.tensordot(weights, assembly.kernels, axes=1)


def _aligned_weights(assembly: GeeAssembly, design: Design) -> np.ndarray:
    seqs = tuple(s.sequence for s in assembly.per_sequence)
    if design.sequences == seqs:
        return np.asarray(design.weights, dtype=float)
    try:
        order = [design.sequences.index(s) for s in seqs]
    except ValueError:
        raise DimensionMismatch("design is over a different sequence set") from None
    if len(design.sequences) != len(seqs):
        raise DimensionMismatch("design is over a different sequence set")
    return np.asarray(design.weights, dtype=float)[order]


def _solve_spd(matrix: np.ndarray, rhs: np.ndarray, context: str) -> np.ndarray:
    try:
        cho = linalg.cho_factor(matrix, lower=True)
        return linalg.cho_solve(cho, rhs)
    except linalg.LinAlgError:
        raise SingularInformation(f"{context} is numerically singular") from None


def _check_condition(u: np.ndarray):
    eigs = np.linalg.eigvalsh(u)
    if eigs[0] <= 0 or eigs[-1] / eigs[0] > MAX_CONDITION:
        raise SingularInformation(
            "information matrix condition number exceeds "
            f"{MAX_CONDITION:.0e}; the design does not keep all parameters estimable"
        )


@dataclass(frozen=True)
class VarianceReport:
    """Variance matrices of the parameter and direct-effect estimators."""

    var_theta: np.ndarray
    var_tau: np.ndarray
    log_det_tau: float
    used_sandwich: bool

    @property
    def det_tau(self) -> float:
        return float(np.exp(self.log_det_tau))


def _true_breads(assembly: GeeAssembly, true_corr: CorrelationSpec) -> np.ndarray:
    problem = assembly.problem
    out = []
    for s in assembly.per_sequence:
        corr = build_correlation(true_corr, s.sequence, problem.n_periods)
        sd = np.sqrt(s.var_diag)
        cov = corr * np.outer(sd, sd)
        half = s.w_inv @ s.dmu
        b = half.T @ cov @ half
        out.append(0.5 * (b + b.T))
    return np.stack(out)


def variance_report(
    assembly: GeeAssembly,
    design: Design,
    n: int = 1,
    true_corr: CorrelationSpec | None = None,
) -> VarianceReport:
    """Var(theta_hat) and its direct-effect block for a given design.

    ``true_corr`` overrides the problem's own true-correlation choice for
    this evaluation; passing the working structure reproduces the plain
    inverse information (the sandwich collapses).
    """
    problem = assembly.problem
    weights = _aligned_weights(assembly, design)
    u = float(n) * np.tensordot(weights, assembly.kernels, axes=1)
    _check_condition(u)
    m = problem.param_dimension
    u_inv = _solve_spd(u, np.eye(m), "information matrix")

    if true_corr is not None:
        breads = _true_breads(assembly, true_corr)
        sandwich = True
    elif problem.true_correlation is not None:
        breads = assembly.breads
        sandwich = True
    else:
        breads = None
        sandwich = False

    if sandwich:
        v = float(n) * np.tensordot(weights, breads, axes=1)
        var_theta = u_inv @ v @ u_inv
    else:
        var_theta = u_inv
    var_theta = 0.5 * (var_theta + var_theta.T)
    h = assembly.selector
    var_tau = h @ var_theta @ h.T
    sign, log_det = np.linalg.slogdet(var_tau)
    if sign <= 0:
        raise SingularInformation("variance of direct effects is not positive definite")
    return VarianceReport(
        var_theta=var_theta,
        var_tau=var_tau,
        log_det_tau=float(log_det),
        used_sandwich=sandwich,
    )


def objective(assembly: GeeAssembly, design: Design) -> float:
    """det Var(tau_hat) at one subject; the quantity the optimizer minimizes."""
    return variance_report(assembly, design, n=1).det_tau


def log_det_objective(
    assembly: GeeAssembly, weights: np.ndarray, with_gradient: bool = False
):
    """log det Var(tau_hat) for a raw weight vector, optionally with gradient.

    The gradient is analytic, via the adjoint identity on U (and on V in
    the sandwich case). Used by the optimizer; raises SingularInformation
    at weight vectors that kill estimability.
    """
    problem = assembly.problem
    weights = np.asarray(weights, dtype=float)
    kernels = assembly.kernels
    u = np.tensordot(weights, kernels, axes=1)
    _check_condition(u)
    m = problem.param_dimension
    h = assembly.selector
    u_inv = _solve_spd(u, np.eye(m), "information matrix")
    if problem.uses_sandwich:
        breads = assembly.breads
        v = np.tensordot(weights, breads, axes=1)
        var_tau = h @ u_inv @ v @ u_inv @ h.T
    else:
        var_tau = h @ u_inv @ h.T
    sign, log_det = np.linalg.slogdet(var_tau)
    if sign <= 0:
        raise SingularInformation("variance of direct effects is not positive definite")
    if not with_gradient:
        return float(log_det)

    var_tau_inv = _solve_spd(var_tau, np.eye(h.shape[0]), "direct-effect variance")
    if problem.uses_sandwich:
        # d/dw log det(H U^-1 V U^-1 H') = tr(A N_w) - 2 tr(A M_w U^-1 V),
        # A = U^-1 H' S^-1 H U^-1.
        a = u_inv @ h.T @ var_tau_inv @ h @ u_inv
        b = u_inv @ v
        term1 = np.einsum("ij,kij->k", a, breads)
        term2 = np.einsum("ij,kjl,li->k", a, kernels, b)
        grad = term1 - 2.0 * term2
    else:
        g = u_inv @ h.T
        core = g @ var_tau_inv @ g.T
        grad = -np.einsum("ij,kij->k", core, kernels)
    return float(log_det), grad
