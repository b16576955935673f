"""Minimizing det Var(tau_hat) over the probability simplex.

Projected gradient descent with Barzilai-Borwein steps and an Armijo
backtracking safeguard, run from several random restarts. Works on the
log-determinant internally; the raw determinant is reported. A returned
point must pass the simplex KKT test: the gradient is constant across
supported sequences and no zero-weight sequence has a strictly smaller
gradient (an inward descent direction).

``grid_oracle_2seq`` is the independent check for two-sequence problems:
a brute-force scan over the weight grid with no gradients involved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DidNotConverge, DimensionMismatch, SingularInformation
from .gee import GeeAssembly, assemble, log_det_objective, variance_report
from .problem import Design, DesignProblem

# Relative stationarity tolerance for the simplex KKT test.
KKT_RTOL = 1e-5


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 8
    max_iters: int = 2000
    tol_obj: float = 1e-10     # relative objective change declared a stall
    tol_weight: float = 1e-8   # weight movement declared a stall
    zero_clip: float = 1e-6    # weights below this are snapped to zero
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise DimensionMismatch("restarts must be >= 1")
        if min(self.tol_obj, self.tol_weight, self.zero_clip) <= 0:
            raise DimensionMismatch("tolerances must be positive")


@dataclass(frozen=True)
class OptimizationResult:
    design: Design
    objective_value: float
    log_det: float
    converged: bool
    iterations: int
    restart_spread: float
    kkt_residual: float


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum w = 1}.

    Sort-based algorithm; afterwards the largest coordinate absorbs the
    rounding residual so the weights sum to exactly 1.0.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    lam = css[rho] / (rho + 1)
    w = np.maximum(v - lam, 0.0)
    w[int(np.argmax(w))] += 1.0 - w.sum()
    return w


def _kkt_residual(weights: np.ndarray, grad: np.ndarray) -> float:
    """Scaled stationarity residual on the simplex.

    Zero when the gradient is constant over the support and no
    zero-weight coordinate undercuts that common value.
    """
    support = weights > 0
    nu = float(np.dot(weights, grad))
    scale = max(1.0, float(np.max(np.abs(grad))))
    interior = float(np.max(np.abs(grad[support] - nu)))
    boundary = 0.0
    if np.any(~support):
        boundary = max(0.0, float(np.max(nu - grad[~support])))
    return max(interior, boundary) / scale


def _minimize_on_simplex(fg, w0: np.ndarray, cfg: OptimizerConfig):
    """One projected-gradient run from w0. Returns (w, f, grad, iters, stalled)."""

    def safe_fg(w):
        try:
            return fg(w)
        except SingularInformation:
            return np.inf, None

    w = project_to_simplex(w0)
    f, g = safe_fg(w)
    if not np.isfinite(f):
        raise SingularInformation("objective is singular at the starting design")
    step = 1.0 / max(1.0, float(np.max(np.abs(g))))
    iters = 0
    stalled = False
    for iters in range(1, cfg.max_iters + 1):
        trial_step = step
        accepted = None
        for _ in range(60):
            w_new = project_to_simplex(w - trial_step * g)
            g_dot_d = float(np.dot(g, w_new - w))
            f_new, g_new = safe_fg(w_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * g_dot_d + 1e-15:
                accepted = (w_new, f_new, g_new)
                break
            trial_step *= 0.5
        if accepted is None:
            stalled = True
            break
        w_new, f_new, g_new = accepted
        s = w_new - w
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-16:
            step = float(np.clip(np.dot(s, s) / sy, 1e-12, 1e8))
        else:
            step = min(step * 2.0, 1e8)
        moved = float(np.max(np.abs(s)))
        rel_drop = abs(f - f_new) / max(1.0, abs(f))
        w, f, g = w_new, f_new, g_new
        if _kkt_residual(w, g) < KKT_RTOL:
            break
        if moved < cfg.tol_weight and rel_drop < cfg.tol_obj:
            stalled = True
            break
    return w, f, g, iters, stalled


def _clip_and_renormalize(w: np.ndarray, zero_clip: float) -> np.ndarray:
    w = np.where(w < zero_clip, 0.0, w)
    w = w / w.sum()
    w[int(np.argmax(w))] += 1.0 - w.sum()
    return w


def optimize(
    problem: DesignProblem,
    cfg: OptimizerConfig | None = None,
    assembly: GeeAssembly | None = None,
) -> OptimizationResult:
    """Best design over all restarts, with exact simplex feasibility.

    Raises DidNotConverge when no restart reaches an acceptable
    stationary point, and propagates SingularInformation when the
    problem itself is degenerate.
    """
    cfg = cfg or OptimizerConfig()
    if len(problem.sequences) < 2:
        raise DimensionMismatch("need at least two sequences to optimize over")
    assembly = assembly or assemble(problem)
    k = len(problem.sequences)

    def fg(w):
        return log_det_objective(assembly, w, with_gradient=True)

    rng = np.random.default_rng(cfg.seed)
    starts = [np.full(k, 1.0 / k)]
    for _ in range(cfg.restarts - 1):
        starts.append(rng.dirichlet(np.ones(k)))

    best = None
    objectives = []
    total_iters = 0
    for idx, w0 in enumerate(starts):
        try:
            w, f, g, iters, _ = _minimize_on_simplex(fg, w0, cfg)
            w = _clip_and_renormalize(w, cfg.zero_clip)
            f, g = fg(w)
        except SingularInformation:
            if idx == 0:
                raise
            continue
        total_iters += iters
        objectives.append(f)
        if best is None or f < best[1]:
            best = (w, f, g)
    if best is None:
        raise DidNotConverge("every restart failed")
    w, f, g = best
    residual = _kkt_residual(w, g)
    converged = residual < KKT_RTOL
    if not converged:
        raise DidNotConverge(
            f"no restart reached stationarity (KKT residual {residual:.2e})"
        )
    dets = np.exp(np.asarray(objectives))
    design = Design(problem.sequences, w)
    report = variance_report(assembly, design)
    return OptimizationResult(
        design=design,
        objective_value=report.det_tau,
        log_det=report.log_det_tau,
        converged=converged,
        iterations=total_iters,
        restart_spread=float(dets.max() - dets.min()),
        kkt_residual=residual,
    )


def grid_oracle_2seq(problem: DesignProblem, step: float = 1e-4) -> Design:
    """Exhaustive scan over two-sequence designs; the optimizer's oracle.

    Evaluates the objective at every grid point of the first sequence's
    weight and returns the argmin. No gradients, no projections.
    """
    if len(problem.sequences) != 2:
        raise DimensionMismatch("grid oracle only handles two-sequence problems")
    if not 0 < step <= 1e-3:
        raise DimensionMismatch("step must be in (0, 1e-3]")
    assembly = assemble(problem)
    grid = np.arange(0.0, 1.0 + step / 2, step)
    grid[-1] = 1.0
    best_w, best_f = None, np.inf
    for w1 in grid:
        weights = np.array([w1, 1.0 - w1])
        try:
            f = log_det_objective(assembly, weights)
        except SingularInformation:
            continue
        if f < best_f:
            best_w, best_f = weights, f
    if best_w is None:
        raise SingularInformation("objective singular over the whole grid")
    return Design(problem.sequences, best_w)
