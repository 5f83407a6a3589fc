"""Conjugate-gradient ascent on the block unitary manifold with Armijo
backtracking and Polak-Ribiere momentum.

Sign conventions: this is a maximization, so the search direction starts
at the Riemannian gradient itself and momentum updates combine as
``r_new + beta * xi_old`` (re-projected onto the new tangent space); the
non-ascent reset replaces the direction by the gradient whenever their
inner product is not positive. The line search and the convergence test
both use the full penalized objective, whichever gradient mode drives the
direction.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .gradient import GradientMode, euclidean_gradient
from .manifold import (
    RetractionError,
    TangentDirection,
    project_unitary_symmetric,
    random_unitary_symmetric,
    retract,
    riemannian_inner,
    tangent_project,
)
from .model import (
    Beamformer,
    ChannelSet,
    ScatteringMatrix,
    SystemDims,
    penalized_objective,
    symmetry_penalty,
)

__all__ = [
    "SolverConfig",
    "IterationRecord",
    "OptimizationTrace",
    "optimize",
    "armijo_search",
    "polak_ribiere_beta",
]

TRACE_CSV_HEADER = "iteration,objective,sum_rate,grad_norm,alpha,beta,armijo_steps"


@dataclass(frozen=True)
class SolverConfig:
    """Solver constants; the defaults reproduce the reference experiment
    settings.

    nu:            symmetry penalty weight.
    epsilon:       convergence tolerance on the objective delta.
    max_iters:     iteration cap.
    max_armijo:    line-search trial cap per iteration.
    armijo_sigma:  sufficient-increase coefficient.
    alpha_init:    first trial step size each line search.
    alpha_shrink:  backtracking contraction factor, in (0, 1).
    gradient_mode: which objective the direction differentiates.
    seed:          seed for the random feasible starting point.
    """

    nu: float = 1.0
    epsilon: float = 1e-8
    max_iters: int = 8000
    max_armijo: int = 200
    armijo_sigma: float = 2e-11
    alpha_init: float = 1.0
    alpha_shrink: float = 0.75
    gradient_mode: GradientMode = GradientMode.EXACT_COUPLED
    seed: int = 0

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1 or self.max_armijo < 1:
            raise ValueError("iteration caps must be >= 1")
        if not 0 < self.alpha_shrink < 1:
            raise ValueError("alpha_shrink must lie in (0, 1)")
        if not self.alpha_init > 0:
            raise ValueError("alpha_init must be > 0")
        if self.armijo_sigma < 0:
            raise ValueError("armijo_sigma must be >= 0")


@dataclass(frozen=True)
class IterationRecord:
    """State after one accepted iteration (iteration 0 is the start point).

    dir_deriv is the inner product <r, xi> at line-search entry, kept so
    the sufficient-increase condition can be re-verified from the trace.
    """

    iteration: int
    objective: float
    sum_rate: float
    grad_norm: float
    alpha: float
    beta: float
    armijo_steps: int
    dir_deriv: float


@dataclass
class OptimizationTrace:
    """Per-iteration history of one run plus its termination summary."""

    records: list = field(default_factory=list)
    termination: str = "max-iters"
    wall_time_s: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        """Accepted iterations, excluding the initial record."""
        return max(len(self.records) - 1, 0)

    def objectives(self) -> np.ndarray:
        return np.array([rec.objective for rec in self.records])

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(TRACE_CSV_HEADER + "\n")
            for rec in self.records:
                fh.write(
                    f"{rec.iteration},{rec.objective!r},{rec.sum_rate!r},"
                    f"{rec.grad_norm!r},{rec.alpha!r},{rec.beta!r},{rec.armijo_steps}\n"
                )


def armijo_search(
    objective,
    theta: ScatteringMatrix,
    direction: TangentDirection,
    grad: TangentDirection,
    config: SolverConfig,
    f_current: float | None = None,
):
    """Backtracking line search for a sufficient objective increase.

    Tries alpha = alpha_init * alpha_shrink^m for m = 0 .. max_armijo-1 and
    accepts the first step with
    f(retract(theta, direction, alpha)) >= f(theta) + sigma * alpha * <grad, direction>.
    A failed retraction counts as a rejected trial. Returns
    (alpha, theta_new, f_new, steps_used); on exhaustion alpha is 0 and
    theta is returned unchanged.
    """
    if f_current is None:
        f_current = objective(theta)
    slope = riemannian_inner(grad, direction)
    for m in range(config.max_armijo):
        alpha = config.alpha_init * config.alpha_shrink**m
        try:
            candidate = retract(theta, direction, alpha)
        except RetractionError:
            continue
        f_candidate = objective(candidate)
        if f_candidate >= f_current + config.armijo_sigma * alpha * slope:
            return alpha, candidate, f_candidate, m + 1
    return 0.0, theta, f_current, config.max_armijo


def polak_ribiere_beta(
    r_new: TangentDirection, r_old: TangentDirection, xi_old: TangentDirection
) -> float:
    """Momentum coefficient max(0, <r_new, r_new - r_old> / <r_old, xi_old>).

    A zero denominator restarts the direction (beta = 0).
    """
    denom = riemannian_inner(r_old, xi_old)
    if denom == 0.0:
        return 0.0
    numer = riemannian_inner(r_new, r_new - r_old)
    return max(0.0, numer / denom)


def optimize(
    channels: ChannelSet,
    bf: Beamformer,
    groups: int,
    config: SolverConfig,
    theta0: ScatteringMatrix | None = None,
):
    """Design a feasible scattering matrix by conjugate-gradient ascent.

    Starts from a random symmetric-unitary point (or ``theta0``), iterates
    retraction steps accepted by the Armijo rule until the penalized
    objective stalls within ``config.epsilon``, then projects each block
    onto the symmetric-unitary set. Returns (theta, trace); the returned
    matrix is feasible and the trace holds one record per accepted
    iteration.
    """
    dims = SystemDims(channels.users, channels.antennas, channels.elements, groups)
    start = time.perf_counter()
    theta = theta0 if theta0 is not None else random_unitary_symmetric(dims, config.seed)
    if theta.groups != groups or theta.elements != channels.elements:
        raise ValueError("theta0 does not match the requested block structure")

    def objective(th):
        return penalized_objective(channels, th, bf, config.nu)

    def gradient(th):
        return tangent_project(
            th, euclidean_gradient(channels, th, bf, config.nu, config.gradient_mode)
        )

    f = objective(theta)
    r = gradient(theta)
    xi = r  # steepest ascent start
    trace = OptimizationTrace(
        metadata={
            "gradient_mode": config.gradient_mode.value,
            "line_search_objective": "penalized",
            "convergence_metric": "penalized objective delta",
            "direction_update": "r_new + beta * xi_old, re-projected",
            "initial_objective": f,
        }
    )

    def record(i, alpha, beta, steps, dd):
        trace.records.append(
            IterationRecord(
                iteration=i,
                objective=f,
                sum_rate=f + config.nu * symmetry_penalty(theta),
                grad_norm=r.norm(),
                alpha=alpha,
                beta=beta,
                armijo_steps=steps,
                dir_deriv=dd,
            )
        )

    record(0, 0.0, 0.0, 0, 0.0)
    for i in range(1, config.max_iters + 1):
        if riemannian_inner(r, xi) <= 0.0:
            xi = r
        dir_deriv = riemannian_inner(r, xi)
        alpha, theta_new, f_new, steps = armijo_search(
            objective, theta, xi, r, config, f_current=f
        )
        if alpha == 0.0:
            record(i, 0.0, 0.0, steps, dir_deriv)
            trace.termination = "stalled"
            break
        r_new = gradient(theta_new)
        beta = polak_ribiere_beta(r_new, r, xi)
        # combine previous-iterate quantities as raw ambient matrices, then
        # re-project so the next search direction is tangent at theta_new
        xi = tangent_project(theta_new, r_new.blocks + beta * xi.blocks)
        converged = abs(f_new - f) < config.epsilon
        theta, f, r = theta_new, f_new, r_new
        record(i, alpha, beta, steps, dir_deriv)
        if converged:
            trace.termination = "tolerance"
            break

    final_blocks = np.stack(
        [project_unitary_symmetric(theta.blocks[g]) for g in range(groups)]
    )
    theta_final = ScatteringMatrix(final_blocks, theta.feasibility_tol)
    trace.wall_time_s = time.perf_counter() - start
    final_objective = objective(theta_final)
    trace.metadata["final_objective"] = final_objective
    trace.metadata["final_sum_rate"] = (
        final_objective + config.nu * symmetry_penalty(theta_final)
    )
    return theta_final, trace
