"""Self-consistent steady states of the mean-field master equations.

The spin-exchange term makes each generator depend on <S_z>. For a fixed
value s the generator is linear, and its null vector normalized to unit
trace is found by replacing one redundant population row with the trace
condition. The scalar s is then updated by damped fixed-point iteration,
with a bracketing root search on f(s) = Tr[S_z ρ(s)] - s as the fallback
when the iteration oscillates.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from opm_lightshift.config import Settings, get_settings
from opm_lightshift.effective_master import (
    EffectiveRates,
    assemble_effective_liouvillian,
    compact_form_liouvillian,
    rate_equations,
)
from opm_lightshift.exceptions import ConvergenceError
from opm_lightshift.full_master import assemble_full_liouvillian, evolve_full
from opm_lightshift.models import AtomSpec, ExperimentParams
from opm_lightshift.spin_basis import HyperfineBasis, Level, build_basis
from opm_lightshift.superoperators import Liouvillian, MeanFields

logger = logging.getLogger(__name__)

NULLITY_THRESHOLD = 1e-10
TRANSVERSE_TOLERANCE = 1e-10
PRECISION_FACTOR = 100.0


@dataclass(frozen=True, eq=False)
class SteadyStateSolution:
    """Converged mean-field steady state.

    Attributes:
        rho0: Density matrix (ground space, or full space for the full equation)
        mean_Sz: Self-consistent <S_z>
        iterations: Generator solves used
        residual: ||L ρ|| / (||L||_F ||ρ||) at convergence
        levels: Level labels matching the rows of rho0
        generator: Generator evaluated at the converged mean field
        history: Mean-field values visited by the iteration
        degenerate: True when the null space was not one-dimensional
        method: "fixed-point", "bracketing" or "degenerate"
        tolerance: <S_z> convergence tolerance used, including the round-off floor
    """
    rho0: np.ndarray
    mean_Sz: float
    iterations: int
    residual: float
    levels: tuple[Level, ...]
    generator: Liouvillian
    history: tuple[float, ...] = field(default_factory=tuple)
    degenerate: bool = False
    method: str = "fixed-point"
    tolerance: float = 0.0

    @property
    def mean_Sp(self) -> complex:
        return self.generator.mean_fields_of(self.generator.reduce(self.rho0))[1]

    @property
    def excited_population(self) -> float:
        """Total population outside the ground manifold (0 for ground solutions)."""
        return float(
            sum(np.real(self.rho0[i, i]) for i, lv in enumerate(self.levels) if lv.manifold == "excited")
        )

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho0 + self.rho0.conj().T)).min())


def populations(solution: SteadyStateSolution) -> dict[tuple[float, float], float]:
    """Ground-state populations keyed by (F, M)."""
    return {
        (float(lv.F), float(lv.M)): float(np.real(solution.rho0[i, i]))
        for i, lv in enumerate(solution.levels)
        if lv.manifold == "ground"
    }


def manifold_populations(solution: SteadyStateSolution) -> dict[float, float]:
    """Total ground population of each multiplet F."""
    totals: dict[float, float] = {}
    for (F, _), p in populations(solution).items():
        totals[F] = totals.get(F, 0.0) + p
    return totals


def relative_residual(generator: Liouvillian, x: np.ndarray) -> float:
    """||L x|| / (||L||_F ||x||)."""
    scale = np.linalg.norm(generator.matrix) * np.linalg.norm(x)
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(generator.matrix @ x) / scale)


def nullity(generator: Liouvillian, threshold: float = NULLITY_THRESHOLD) -> int:
    """Number of singular values below threshold · σ_max."""
    return _nullity_of(scipy.linalg.svdvals(generator.matrix), threshold)


def _nullity_of(sigma: np.ndarray, threshold: float = NULLITY_THRESHOLD) -> int:
    if sigma.size == 0 or sigma[0] == 0:
        return sigma.size
    return int(np.sum(sigma < threshold * sigma[0]))


def precision_floor(sigma: np.ndarray) -> float:
    """Round-off level of <S_z> for a generator with singular values sigma.

    The bordered solve loses about log10(σ_max / σ_gap) digits, σ_gap being
    the smallest nonzero singular value.
    """
    if sigma.size < 2 or sigma[-2] == 0:
        return 0.0
    return PRECISION_FACTOR * float(np.finfo(float).eps) * float(sigma[0] / sigma[-2])


def solve_null_space(generator: Liouvillian) -> tuple[np.ndarray, float]:
    """Unit-trace null vector of a generator.

    The first population row is redundant (columns of population rows sum
    to zero) and is replaced by the trace condition. Rows are scaled to unit
    max-norm before the LU factorization and one step of iterative
    refinement follows.

    Returns:
        (rho, residual) with rho Hermitian and of unit trace.
    """
    a = generator.matrix.copy()
    b = np.zeros(generator.size, dtype=complex)
    pivot = generator.diagonal_positions[0]
    a[pivot, :] = generator.trace_row
    b[pivot] = 1.0
    scale = np.abs(a).max(axis=1)
    scale[scale == 0] = 1.0
    a /= scale[:, None]
    b /= scale
    lu = scipy.linalg.lu_factor(a)
    x = scipy.linalg.lu_solve(lu, b)
    x += scipy.linalg.lu_solve(lu, b - a @ x)
    rho = generator.expand(x)
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    return rho, relative_residual(generator, generator.reduce(rho))


def _oscillating(history: list[float], window: int = 6) -> bool:
    if len(history) < window + 1:
        return False
    steps = np.diff(history[-(window + 1):])
    if np.any(steps == 0):
        return False
    alternating = np.all(np.sign(steps[1:]) != np.sign(steps[:-1]))
    shrinking = abs(steps[-1]) < 0.95 * abs(steps[0])
    return bool(alternating and not shrinking)


def self_consistent_solve(
    generator: Liouvillian,
    levels: tuple[Level, ...],
    fallback: np.ndarray,
    settings: Optional[Settings] = None,
    mixing: Optional[float] = None,
    initial_sz: float = 0.0,
) -> SteadyStateSolution:
    """Solve L(s) ρ = 0 with s = Tr[S_z ρ] for any mean-field generator.

    Args:
        generator: Generator whose mean fields are replaced during the solve
        levels: Level labels for the solution
        fallback: Representative returned when the null space is degenerate
        settings: Solver tolerances and iteration limit
        mixing: Damping α, overriding settings.mixing
        initial_sz: Starting value of <S_z>

    Raises:
        ConvergenceError: If neither the iteration nor the root search converges.
    """
    settings = settings or get_settings()
    alpha = mixing if mixing is not None else settings.mixing

    def evaluate(s: float) -> tuple[Liouvillian, np.ndarray, float, float]:
        current = generator.at(MeanFields(sz=s))
        rho, residual = solve_null_space(current)
        s_new = current.mean_fields_of(current.reduce(rho))[0]
        return current, rho, residual, s_new

    start = generator.at(MeanFields(sz=initial_sz))
    sigma = scipy.linalg.svdvals(start.matrix)
    tolerance = max(settings.sz_tolerance, precision_floor(sigma))
    if tolerance > settings.sz_tolerance:
        logger.debug(f"<S_z> tolerance raised to the round-off floor {tolerance:.2e}")
    if _nullity_of(sigma) > 1:
        logger.warning("Steady state is not unique; returning the maximally mixed representative")
        return SteadyStateSolution(
            rho0=fallback,
            mean_Sz=start.mean_fields_of(start.reduce(fallback))[0],
            iterations=0,
            residual=relative_residual(start, start.reduce(fallback)),
            levels=levels,
            generator=start,
            history=(initial_sz,),
            degenerate=True,
            method="degenerate",
            tolerance=tolerance,
        )

    s = initial_sz
    history = [s]
    for iteration in range(1, settings.max_iter + 1):
        current, rho, residual, s_new = evaluate(s)
        logger.debug(f"iteration {iteration}: <S_z> {s:+.15f} -> {s_new:+.15f}, residual {residual:.2e}")
        if abs(s_new - s) < tolerance and residual < settings.residual_tolerance:
            return _finish(rho, s_new, iteration, residual, levels, current, history, "fixed-point", tolerance)
        s = float(np.clip((1 - alpha) * s + alpha * s_new, -0.5, 0.5))
        history.append(s)
        if _oscillating(history):
            logger.info(f"Mean-field iteration oscillates after {iteration} steps; bracketing instead")
            break
    else:
        raise ConvergenceError(
            f"<S_z> did not converge in {settings.max_iter} iterations", history
        )

    calls = [0]

    def excess(value: float) -> float:
        calls[0] += 1
        return evaluate(value)[3] - value

    try:
        root = brentq(excess, -0.5, 0.5, xtol=tolerance, maxiter=settings.max_iter)
    except (ValueError, RuntimeError) as e:
        raise ConvergenceError(f"Bracketing search for <S_z> failed: {e}", history) from e
    current, rho, residual, s_new = evaluate(root)
    history.append(root)
    if residual >= settings.residual_tolerance:
        raise ConvergenceError(
            f"Residual {residual:.2e} above tolerance at the bracketed root", history
        )
    return _finish(
        rho, s_new, len(history) + calls[0], residual, levels, current, history, "bracketing", tolerance
    )


def _finish(
    rho: np.ndarray,
    sz: float,
    iterations: int,
    residual: float,
    levels: tuple[Level, ...],
    generator: Liouvillian,
    history: list[float],
    method: str,
    tolerance: float = 0.0,
) -> SteadyStateSolution:
    transverse = abs(generator.mean_fields_of(generator.reduce(rho))[1])
    if transverse > TRANSVERSE_TOLERANCE:
        logger.warning(f"|<S_+>| = {transverse:.2e} in the steady state with the transverse field pinned to 0")
    logger.debug(f"Steady state: <S_z> = {sz:+.12f} after {iterations} solves ({method})")
    return SteadyStateSolution(
        rho0=rho,
        mean_Sz=sz,
        iterations=iterations,
        residual=residual,
        levels=levels,
        generator=generator,
        history=tuple(history),
        method=method,
        tolerance=tolerance,
    )


def solve_steady_state(
    atom: AtomSpec,
    params: ExperimentParams,
    *,
    basis: Optional[HyperfineBasis] = None,
    rates: Optional[EffectiveRates] = None,
    settings: Optional[Settings] = None,
    mixing: Optional[float] = None,
) -> SteadyStateSolution:
    """Steady state of the effective ground-state master equation.

    Raises:
        ConvergenceError: If the mean-field iteration fails.
        SingularDetuningError: If Γ_pb = 0 and some Δ_FF' vanishes.
    """
    basis = basis or build_basis(atom)
    generator = assemble_effective_liouvillian(atom, params, rates=rates, basis=basis)
    return self_consistent_solve(
        generator,
        basis.ground_levels,
        basis.maximally_mixed_ground(),
        settings=settings,
        mixing=mixing,
    )


def solve_rate_equations(
    atom: AtomSpec,
    params: ExperimentParams,
    *,
    basis: Optional[HyperfineBasis] = None,
    rates: Optional[EffectiveRates] = None,
    settings: Optional[Settings] = None,
) -> SteadyStateSolution:
    """Steady state of the population-only rate equations."""
    basis = basis or build_basis(atom)
    generator = rate_equations(atom, params, rates=rates, basis=basis)
    return self_consistent_solve(
        generator, basis.ground_levels, basis.maximally_mixed_ground(), settings=settings
    )


def solve_compact_steady_state(
    atom: AtomSpec,
    params: ExperimentParams,
    *,
    basis: Optional[HyperfineBasis] = None,
    settings: Optional[Settings] = None,
) -> SteadyStateSolution:
    """Steady state of the compact Γ_OP / Δ_LS equation."""
    basis = basis or build_basis(atom)
    generator = compact_form_liouvillian(atom, params, basis=basis)
    return self_consistent_solve(
        generator, basis.ground_levels, basis.maximally_mixed_ground(), settings=settings
    )


def solve_full_steady_state(
    atom: AtomSpec,
    params: ExperimentParams,
    *,
    basis: Optional[HyperfineBasis] = None,
    settings: Optional[Settings] = None,
    method: Literal["null-space", "integrate"] = "null-space",
    settle_time_constants: float = 20.0,
) -> SteadyStateSolution:
    """Steady state of the full D1 master equation.

    With method="integrate" the equation is first integrated from the
    maximally mixed ground state for settle_time_constants / (2π γ) seconds,
    and the final <S_z> seeds the null-space polish.

    Raises:
        ConvergenceError: If the mean-field iteration fails.
        IntegrationError: If the time integration fails.
    """
    settings = settings or get_settings()
    basis = basis or build_basis(atom)
    generator = assemble_full_liouvillian(atom, params, basis=basis)
    fallback = basis.embed_ground(basis.maximally_mixed_ground())
    initial_sz = 0.0
    if method == "integrate":
        slowest = params.gamma_total or params.gamma_pb or 1.0
        t_final = settle_time_constants / (2 * np.pi * slowest)
        trajectory = evolve_full(atom, params, fallback, t_final, basis=basis, settings=settings)
        initial_sz = float(np.clip(trajectory.mean_sz[-1], -0.5, 0.5))
        logger.info(f"Integrated full equation to {t_final:.3g} s: <S_z> = {initial_sz:+.6f}")
    return self_consistent_solve(
        generator, basis.levels, fallback, settings=settings, initial_sz=initial_sz
    )


def check_multistability(
    solve: Callable[[float], SteadyStateSolution],
    mixings: tuple[float, ...] = (0.3, 0.5, 1.0),
    tolerance: float = 1e-9,
) -> list[float]:
    """Solve with several damping factors and report distinct fixed points.

    Args:
        solve: Callable taking α and returning a solution
        mixings: Damping factors to try
        tolerance: Values closer than this are considered the same

    Returns:
        Distinct <S_z> values found (one entry when the fixed point is unique).
    """
    found: list[float] = []
    for alpha in mixings:
        try:
            value = solve(alpha).mean_Sz
        except ConvergenceError as e:
            logger.info(f"α = {alpha}: no convergence ({e})")
            continue
        if all(abs(value - other) > tolerance for other in found):
            found.append(value)
    if len(found) > 1:
        logger.warning(f"Distinct fixed points found: {', '.join(f'{v:+.9f}' for v in found)}")
    return found
