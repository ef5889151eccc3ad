"""Full D1 master equation on the 8I+4 dimensional ground + excited space.

The generator is the sum of the pump interaction with spontaneous decay,
the hyperfine and Zeeman Hamiltonians, and the collisional terms (spin
exchange, spin destruction and pressure-broadening quench). The transverse
RF field enters separately as a time-dependent generator. This equation is
the reference the effective ground-state equation is validated against.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from opm_lightshift.config import Settings, get_settings
from opm_lightshift.exceptions import IntegrationError
from opm_lightshift.models import AtomSpec, ExperimentParams
from opm_lightshift.spin_basis import (
    HyperfineBasis,
    build_basis,
    electron_spin_ops,
    optical_jump_ops,
    pump_coupling,
    quench_jump_ops,
)
from opm_lightshift.superoperators import (
    TWO_PI,
    Liouvillian,
    MeanFields,
    commutator,
    dissipator,
    hamiltonian,
    spin_collision_terms,
)

logger = logging.getLogger(__name__)


def larmor_frequency(atom: AtomSpec, params: ExperimentParams) -> float:
    """ω_L = γ_e B_z / (2I+1) in Hz, with the pump handedness applied."""
    return atom.gyromagnetic_ratio_e * params.signed_field / (2 * atom.nuclear_spin_I + 1)


def ground_hamiltonian(basis: HyperfineBasis, params: ExperimentParams) -> np.ndarray:
    """Hyperfine and Zeeman energies of the ground levels (Hz), diagonal.

    F = a sits at Δ_S above F = b; the Zeeman term is ω_a M in F = a and
    ω_b M = -ω_a M in F = b.
    """
    a, _ = basis.multiplets
    omega_l = larmor_frequency(basis.atom, params)
    energies = [
        (basis.atom.delta_S + omega_l * float(lv.M)) if lv.F == a else -omega_l * float(lv.M)
        for lv in basis.ground_levels
    ]
    return np.diag(energies).astype(complex)


def full_hamiltonian(basis: HyperfineBasis, params: ExperimentParams) -> np.ndarray:
    """Rotating-frame Hamiltonian H_hf + H_Zee + H_lm on the full space (Hz).

    Excited F = b lies Δ_P below F = a, and every excited level is shifted
    by the pump detuning Δ. Excited-state Zeeman splitting is neglected.
    """
    n = basis.ground_dim
    a, _ = basis.multiplets
    h = np.zeros((2 * n, 2 * n), dtype=complex)
    h[:n, :n] = ground_hamiltonian(basis, params)
    for k, lv in enumerate(basis.levels[n:]):
        h[n + k, n + k] = params.detuning - (basis.atom.delta_P if lv.F != a else 0.0)
    return h + pump_coupling(basis, params.rabi_prime)


def assemble_full_liouvillian(
    atom: AtomSpec,
    params: ExperimentParams,
    mean_fields: Optional[MeanFields] = None,
    basis: Optional[HyperfineBasis] = None,
) -> Liouvillian:
    """Full master-equation generator at fixed mean fields (Hz units).

    Args:
        atom: Atom species
        params: Pump, field and collision parameters
        mean_fields: <S_z> and <S_+> for the spin-exchange term
        basis: Prebuilt basis for `atom`

    Raises:
        MeanFieldRangeError: If a mean field exceeds 1/2 in magnitude.
    """
    basis = basis or build_basis(atom)
    spin = {k: basis.embed_ground(op) for k, op in electron_spin_ops(basis).items()}

    l_light = hamiltonian(full_hamiltonian(basis, params))
    if params.gamma_sd_optical > 0:
        for d in optical_jump_ops(basis).values():
            l_light = l_light + params.gamma_sd_optical * dissipator(d)

    constant, pieces = spin_collision_terms(spin, params.gamma_total, params.gamma_se)
    if params.gamma_pb > 0:
        for quench in quench_jump_ops(basis).values():
            constant = constant + params.gamma_pb * dissipator(quench)

    if params.weak_driving_warning:
        logger.warning(
            f"Ω = {params.rabi:.3g} Hz exceeds a tenth of the excited width "
            f"(ratio {params.weak_driving_ratio:.3g})"
        )
    return Liouvillian.from_parts(
        dim=basis.full_dim,
        constant=l_light + constant,
        feedback=pieces,
        spin=spin,
        mean_fields=mean_fields,
    )


@dataclass(frozen=True, eq=False)
class RFDrive:
    """Time-dependent generator -i γ_e B_x cos(ωt) [S_x, ·] in s^-1.

    Attributes:
        amplitude_hz: γ_e B_x (Hz)
        frequency_hz: ω / 2π (Hz)
        structure: Superoperator of ρ -> -i[S_x, ρ] on the full space
    """
    amplitude_hz: float
    frequency_hz: float
    structure: np.ndarray

    def __call__(self, t: float) -> np.ndarray:
        return self.coefficient(t) * self.structure

    def coefficient(self, t: float) -> float:
        return TWO_PI * self.amplitude_hz * float(np.cos(TWO_PI * self.frequency_hz * t))


def rf_drive_generator(
    atom: AtomSpec,
    params: ExperimentParams,
    basis: Optional[HyperfineBasis] = None,
) -> RFDrive:
    """Transverse RF drive as a callable t -> superoperator (angular units)."""
    basis = basis or build_basis(atom)
    sx = basis.embed_ground(electron_spin_ops(basis)["x"])
    return RFDrive(
        amplitude_hz=atom.gyromagnetic_ratio_e * params.B_x,
        frequency_hz=params.rf_frequency,
        structure=-1j * commutator(sx),
    )


@dataclass(frozen=True, eq=False)
class FullTrajectory:
    """Sampled solution of the full master equation.

    Attributes:
        times: Sample times (s)
        states: Density matrices at each sample, shape (n_t, D, D)
        mean_sz: Tr[S_z ρ(t)]
        mean_sp: Tr[S_+ ρ(t)]
        ground_dim: Number of ground levels
    """
    times: np.ndarray
    states: np.ndarray
    mean_sz: np.ndarray
    mean_sp: np.ndarray
    ground_dim: int

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def traces(self) -> np.ndarray:
        return np.real(np.trace(self.states, axis1=1, axis2=2))

    @property
    def excited_population(self) -> np.ndarray:
        n = self.ground_dim
        return np.real(np.trace(self.states[:, n:, n:], axis1=1, axis2=2))


def evolve_full(
    atom: AtomSpec,
    params: ExperimentParams,
    rho0: np.ndarray,
    t_final: float,
    dt_control: Optional[float] = None,
    *,
    basis: Optional[HyperfineBasis] = None,
    settings: Optional[Settings] = None,
    include_drive: bool = False,
    samples: int = 201,
    on_step: Optional[Callable[[float, float], None]] = None,
) -> FullTrajectory:
    """Integrate the full master equation with self-consistent mean fields.

    The mean fields are recomputed from the current state at every
    right-hand-side evaluation; the Jacobian handed to the stiff solver
    freezes them.

    Args:
        atom: Atom species
        params: Scenario parameters
        rho0: Initial density matrix on the full space
        t_final: Final time (s)
        dt_control: Largest allowed step (s); None leaves it to the solver
        basis: Prebuilt basis
        settings: Integrator tolerances (rtol, atol)
        include_drive: Add the transverse RF field
        samples: Number of stored time points
        on_step: Called as on_step(t, <S_z>) at every stored sample

    Raises:
        IntegrationError: If the solver fails (e.g. step-size underflow).
    """
    settings = settings or get_settings()
    basis = basis or build_basis(atom)
    generator = assemble_full_liouvillian(atom, params, basis=basis).scaled(TWO_PI)
    drive = rf_drive_generator(atom, params, basis) if include_drive else None
    dim = basis.full_dim

    def frozen(t: float, y: np.ndarray) -> np.ndarray:
        sz, sp = generator.mean_fields_of(y)
        m = generator.matrix_for(float(np.clip(sz, -0.5, 0.5)), sp)
        if drive is not None:
            m = m + drive(t)
        return m

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return frozen(t, y) @ y

    y0 = np.asarray(rho0, dtype=complex).reshape(-1)
    t_eval = np.linspace(0.0, t_final, samples)
    logger.debug(f"Integrating full master equation to t = {t_final:.3g} s ({dim} levels)")
    sol = solve_ivp(
        rhs,
        (0.0, t_final),
        y0,
        method="BDF",
        t_eval=t_eval,
        jac=frozen,
        rtol=settings.rtol,
        atol=settings.atol,
        max_step=dt_control if dt_control else np.inf,
    )
    if not sol.success:
        if sol.y.size:
            last_t, last = float(sol.t[-1]), sol.y[:, -1].reshape(dim, dim)
        else:
            last_t, last = 0.0, y0.reshape(dim, dim)
        raise IntegrationError(f"Full master equation integration failed: {sol.message}", last_t, last)

    states = sol.y.T.reshape(-1, dim, dim)
    mean_sz = np.array([generator.mean_fields_of(y)[0] for y in sol.y.T])
    mean_sp = np.array([generator.mean_fields_of(y)[1] for y in sol.y.T])
    if on_step is not None:
        for t, s in zip(sol.t, mean_sz):
            on_step(float(t), float(s))

    drift = float(np.abs(np.real(np.trace(states, axis1=1, axis2=2)) - 1.0).max())
    if drift > 1e-8:
        logger.warning(f"Trace drifted by {drift:.2e} during integration")
    return FullTrajectory(
        times=sol.t,
        states=states,
        mean_sz=mean_sz,
        mean_sp=mean_sp,
        ground_dim=basis.ground_dim,
    )
