"""Effective ground-state master equation after eliminating the P1/2 states.

Pump-induced rates follow from second-order elimination of the excited
manifold. Four rate tables describe repopulation through Δm = +1 (Γ1),
Δm = 0 (Γ2) and Δm = +2 (Γ3) paths and the complex depletion/light-shift
self-energy (Γ4). Coherences between the a and b multiplets are dropped,
so every generator here acts on the F-diagonal blocks of ρ only.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Optional

import numpy as np

from opm_lightshift.exceptions import SingularDetuningError
from opm_lightshift.full_master import ground_hamiltonian
from opm_lightshift.models import AtomSpec, ExperimentParams
from opm_lightshift.spin_basis import HALF, HyperfineBasis, build_basis, clebsch_gordan, electron_spin_ops
from opm_lightshift.superoperators import (
    Liouvillian,
    MeanFields,
    anticommutator,
    hamiltonian,
    sandwich,
    spin_collision_terms,
)

logger = logging.getLogger(__name__)

MULTIPLETS = ("a", "b")
PAIRS = tuple(product(MULTIPLETS, MULTIPLETS))


def detunings(atom: AtomSpec, params: ExperimentParams) -> dict[tuple[str, str], float]:
    """Energy differences Δ_FF' between ground F and excited F' (Hz)."""
    d, ds, dp = params.detuning, atom.delta_S, atom.delta_P
    return {
        ("a", "a"): d - ds,
        ("a", "b"): d - ds - dp,
        ("b", "a"): d,
        ("b", "b"): d - dp,
    }


def complex_detunings(atom: AtomSpec, params: ExperimentParams) -> dict[tuple[str, str], complex]:
    """Δ̃_FF' = Δ_FF' - iΓ_pb.

    Raises:
        SingularDetuningError: If Γ_pb = 0 and some Δ_FF' vanishes.
    """
    out = {}
    for pair, value in detunings(atom, params).items():
        if params.gamma_pb == 0 and value == 0:
            raise SingularDetuningError(pair, value)
        out[pair] = complex(value, -params.gamma_pb)
    return out


def cg_weight(spin: Fraction, F: Fraction, n: int, M: Fraction) -> float:
    """CG_F(n, M) = <I, M - s_n; 1/2, s_n | F M> with s_1 = +1/2, s_2 = -1/2."""
    s = HALF if n == 1 else -HALF
    return clebsch_gordan(spin, M - s, HALF, s, F, M)


@dataclass(frozen=True, eq=False)
class EffectiveRates:
    """Pump-induced rate tables of the effective equation (Hz).

    gamma1/2/3 map a pair (F, F') to a (2F+1) x (2F+1) matrix indexed by the
    positions of M and M' in multiplet F (M descending). gamma4 maps F to a
    vector over M.

    Attributes:
        spin: Nuclear spin I
        rabi: Ω = sqrt(2/3) Ω' (Hz)
        gamma_pb: Pressure broadening (Hz)
        detunings: Δ_FF'
        complex_detunings: Δ̃_FF'
    """
    spin: Fraction
    rabi: float
    gamma_pb: float
    detunings: dict[tuple[str, str], float]
    complex_detunings: dict[tuple[str, str], complex]
    gamma1: dict[tuple[str, str], np.ndarray]
    gamma2: dict[tuple[str, str], np.ndarray]
    gamma3: dict[tuple[str, str], np.ndarray]
    gamma4: dict[str, np.ndarray]

    @cached_property
    def multiplet_values(self) -> dict[str, Fraction]:
        return {"a": self.spin + HALF, "b": self.spin - HALF}

    def magnetic_numbers(self, label: str) -> list[Fraction]:
        F = self.multiplet_values[label]
        return [F - k for k in range(int(2 * F) + 1)]

    def depletion(self, label: str) -> np.ndarray:
        """Γ_FM = -iΓ4_FM; its real part is the depletion rate, its imaginary part the light shift."""
        return -1j * self.gamma4[label]

    def g_table(self, n: int, label: str, label_prime: str) -> np.ndarray:
        """g_n[M, M'] = CG_F(n, M) CG_F'(n, M') over the M of F and M' of F'."""
        F, Fp = self.multiplet_values[label], self.multiplet_values[label_prime]
        left = np.array([cg_weight(self.spin, F, n, M) for M in self.magnetic_numbers(label)])
        right = np.array([cg_weight(self.spin, Fp, n, M) for M in self.magnetic_numbers(label_prime)])
        return np.outer(left, right)


def compute_effective_rates(atom: AtomSpec, params: ExperimentParams) -> EffectiveRates:
    """Evaluate Γ1..Γ4 for one set of parameters.

    Raises:
        SingularDetuningError: If Γ_pb = 0 and some Δ_FF' vanishes.
    """
    spin = atom.spin
    values = {"a": spin + HALF, "b": spin - HALF}
    dt = complex_detunings(atom, params)
    omega2 = params.rabi ** 2
    gpb = params.gamma_pb

    def cg(label: str, n: int, M: Fraction) -> float:
        return cg_weight(spin, values[label], n, M)

    def ms(label: str) -> list[Fraction]:
        F = values[label]
        return [F - k for k in range(int(2 * F) + 1)]

    def inter_sum(F: str, M: Fraction, Mp: Fraction, kind: int) -> complex:
        total = 0j
        for F1, F2 in PAIRS:
            if kind == 2:
                num = cg(F1, 1, M + 1) ** 2 * cg(F2, 1, Mp + 1) ** 2
            else:
                num = (
                    cg(F1, 1, M + 1) * cg(F1, 2, M + 1) * cg(F2, 1, Mp + 1) * cg(F2, 2, Mp + 1)
                )
            if num:
                total += num / (dt[(F, F1)] * np.conj(dt[(F, F2)]))
        return total

    gamma1: dict[tuple[str, str], np.ndarray] = {}
    gamma2: dict[tuple[str, str], np.ndarray] = {}
    gamma3: dict[tuple[str, str], np.ndarray] = {}
    for F, Fp in PAIRS:
        n = len(ms(F))
        g1 = np.zeros((n, n), dtype=complex)
        g2 = np.zeros((n, n), dtype=complex)
        g3 = np.zeros((n, n), dtype=complex)
        prefactor1 = gpb * omega2 / abs(dt[(F, Fp)]) ** 2
        for i, M in enumerate(ms(F)):
            for j, Mp in enumerate(ms(F)):
                base = cg(F, 2, M) * cg(F, 2, Mp)
                if base == 0:
                    continue
                g1[i, j] = prefactor1 * base * cg(Fp, 1, M + 1) * cg(Fp, 1, Mp + 1)
                w2 = base * cg(Fp, 2, M) * cg(Fp, 2, Mp)
                if w2:
                    g2[i, j] = gpb * omega2 * w2 * inter_sum(F, M, Mp, 2)
                w3 = base * cg(Fp, 1, M + 2) * cg(Fp, 1, Mp + 2)
                if w3:
                    g3[i, j] = gpb * omega2 * w3 * inter_sum(F, M, Mp, 3)
        gamma1[(F, Fp)], gamma2[(F, Fp)], gamma3[(F, Fp)] = g1, g2, g3

    gamma4 = {
        F: np.array(
            [
                sum(omega2 * cg(F, 2, M) ** 2 * cg(Fp, 1, M + 1) ** 2 / dt[(F, Fp)] for Fp in MULTIPLETS)
                for M in ms(F)
            ],
            dtype=complex,
        )
        for F in MULTIPLETS
    }
    return EffectiveRates(
        spin=spin,
        rabi=params.rabi,
        gamma_pb=gpb,
        detunings=detunings(atom, params),
        complex_detunings=dt,
        gamma1=gamma1,
        gamma2=gamma2,
        gamma3=gamma3,
        gamma4=gamma4,
    )


def kept_support(basis: HyperfineBasis) -> np.ndarray:
    """Flat indices of vec(ρ) within a single multiplet (no a-b coherences)."""
    F = basis.ground_F
    n = basis.ground_dim
    rows, cols = np.divmod(np.arange(n * n), n)
    return np.flatnonzero(F[rows] == F[cols])


def population_support(basis: HyperfineBasis) -> np.ndarray:
    """Flat indices of the diagonal entries ρ_ii."""
    n = basis.ground_dim
    return np.arange(n) * (n + 1)


def _ground_terms(
    basis: HyperfineBasis, params: ExperimentParams
) -> tuple[np.ndarray, dict[str, np.ndarray], dict[str, np.ndarray]]:
    spin = electron_spin_ops(basis)
    constant, pieces = spin_collision_terms(spin, params.gamma_total, params.gamma_se)
    constant = constant + hamiltonian(ground_hamiltonian(basis, params))
    return constant, pieces, spin


def pump_superoperator(basis: HyperfineBasis, rates: EffectiveRates) -> np.ndarray:
    """Repopulation sandwiches and depletion on the full ground superspace (Hz)."""
    n = basis.ground_dim
    out = np.zeros((n * n, n * n), dtype=complex)
    labels = {"a": basis.multiplets[0], "b": basis.multiplets[1]}

    def position(label: str, M: Fraction) -> Optional[int]:
        if basis.has_level("ground", labels[label], M):
            return basis.index("ground", labels[label], M)
        return None

    for (F, Fp), shift, table in (
        [(pair, 1, rates.gamma1[pair]) for pair in PAIRS]
        + [(pair, 0, rates.gamma2[pair]) for pair in PAIRS]
        + [(pair, 2, rates.gamma3[pair]) for pair in PAIRS]
    ):
        ms = rates.magnetic_numbers(F)
        for i, M in enumerate(ms):
            src_i, dst_i = position(F, M), position(Fp, M + shift)
            if src_i is None or dst_i is None:
                continue
            for j, Mp in enumerate(ms):
                weight = table[i, j]
                if weight == 0:
                    continue
                src_j, dst_j = position(F, Mp), position(Fp, Mp + shift)
                if src_j is None or dst_j is None:
                    continue
                out[dst_i * n + dst_j, src_i * n + src_j] += weight

    for F in MULTIPLETS:
        gamma_fm = rates.depletion(F)
        idx = [position(F, M) for M in rates.magnetic_numbers(F)]
        for i, p in enumerate(idx):
            for j, q in enumerate(idx):
                out[p * n + q, p * n + q] -= gamma_fm[i] + np.conj(gamma_fm[j])
    return out


def assemble_effective_liouvillian(
    atom: AtomSpec,
    params: ExperimentParams,
    rates: Optional[EffectiveRates] = None,
    mean_fields: Optional[MeanFields] = None,
    basis: Optional[HyperfineBasis] = None,
) -> Liouvillian:
    """Effective ground-state generator restricted to single-multiplet blocks.

    Raises:
        SingularDetuningError: If Γ_pb = 0 and some Δ_FF' vanishes.
        MeanFieldRangeError: If a mean field exceeds 1/2 in magnitude.
    """
    basis = basis or build_basis(atom)
    rates = rates or compute_effective_rates(atom, params)
    constant, pieces, spin = _ground_terms(basis, params)
    constant = constant + pump_superoperator(basis, rates)
    if params.weak_driving_warning:
        logger.warning(
            f"Weak-driving condition violated: Ω/(Γ_sd/2 + Γ_pb) = {params.weak_driving_ratio:.3g}"
        )
    return Liouvillian.from_parts(
        dim=basis.ground_dim,
        constant=constant,
        feedback=pieces,
        spin=spin,
        mean_fields=mean_fields,
        support=kept_support(basis),
    )


def rate_equations(
    atom: AtomSpec,
    params: ExperimentParams,
    rates: Optional[EffectiveRates] = None,
    basis: Optional[HyperfineBasis] = None,
) -> Liouvillian:
    """Population-only generator on the 4I+2 diagonal entries.

    Diagonal entries of the effective equation are fed only by diagonal
    entries once <S_±> = 0, so this block is exact in that case. The
    transverse feedback pieces are dropped.
    """
    basis = basis or build_basis(atom)
    full = assemble_effective_liouvillian(atom, params, rates=rates, basis=basis)
    reduced = full.restrict(full.locate(population_support(basis)))
    return Liouvillian(
        dim=reduced.dim,
        constant=reduced.constant,
        feedback={"sz": reduced.feedback["sz"]},
        functionals=reduced.functionals,
        support=reduced.support,
        mean_fields=reduced.mean_fields,
    )


def compact_rates(params: ExperimentParams) -> tuple[float, float]:
    """(Γ_OP, Δ_LS) with η = eta_ratio · Ω and Γ = Γ_pb."""
    eta2 = (params.eta_ratio * params.rabi) ** 2
    denom = params.gamma_pb ** 2 + params.detuning ** 2
    if denom == 0:
        return 0.0, 0.0
    return eta2 * params.gamma_pb / denom, -eta2 * params.detuning / denom


def compact_form_liouvillian(
    atom: AtomSpec,
    params: ExperimentParams,
    mean_fields: Optional[MeanFields] = None,
    basis: Optional[HyperfineBasis] = None,
) -> Liouvillian:
    """Generator using only the compact optical-pumping rate and light shift.

    Γ_OP(S+ρS- + S_zρS_z + {S_z, ρ}/2 - 3ρ/4) - iΔ_LS[S_z, ρ] plus the
    hyperfine, Zeeman and collision terms, on the same support as the
    effective equation.
    """
    basis = basis or build_basis(atom)
    gamma_op, delta_ls = compact_rates(params)
    constant, pieces, spin = _ground_terms(basis, params)
    sp, sm, sz = spin["+"], spin["-"], spin["z"]
    n = basis.ground_dim
    pumping = (
        sandwich(sp, sm)
        + sandwich(sz, sz)
        + 0.5 * anticommutator(sz)
        - 0.75 * np.eye(n * n)
    )
    constant = constant + gamma_op * pumping + delta_ls * hamiltonian(sz)
    return Liouvillian.from_parts(
        dim=n,
        constant=constant,
        feedback=pieces,
        spin=spin,
        mean_fields=mean_fields,
        support=kept_support(basis),
    )
