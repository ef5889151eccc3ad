"""Hyperfine bases, Clebsch-Gordan coefficients and D1 operators.

Level ordering is fixed for every matrix built here:

    ground manifold first, then excited;
    within a manifold F = a before F = b;
    within a multiplet M descending.

The uncoupled product basis of each manifold is |m_I> ⊗ |m_e> with both
magnetic numbers descending, where m_e is m_s for the ground state and m_J
for the excited P1/2 state. All coefficients use the Condon-Shortley phase
convention, so every coupling table is real.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Literal, NamedTuple, Union

import numpy as np
from sympy import Rational
from sympy.physics.wigner import clebsch_gordan as _wigner_clebsch_gordan

from opm_lightshift.models import AtomSpec

logger = logging.getLogger(__name__)

Manifold = Literal["ground", "excited"]
AngularMomentum = Union[int, float, Fraction]

HALF = Fraction(1, 2)


class Level(NamedTuple):
    """One coupled hyperfine level |manifold, F, M>."""
    manifold: Manifold
    F: Fraction
    M: Fraction

    @property
    def label(self) -> str:
        """Short label such as 'S(4,-3)'."""
        tag = "S" if self.manifold == "ground" else "P"
        return f"{tag}({_fmt(self.F)},{_fmt(self.M)})"


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _as_fraction(value: AngularMomentum) -> Fraction:
    return Fraction(value).limit_denominator(64)


def magnetic_numbers(j: AngularMomentum) -> list[Fraction]:
    """Magnetic numbers j, j-1, ..., -j."""
    jj = _as_fraction(j)
    return [jj - k for k in range(int(2 * jj) + 1)]


def _is_half_integer(q: Fraction) -> bool:
    return (2 * q).denominator == 1


def _valid_projection(j: Fraction, m: Fraction) -> bool:
    return j >= 0 and abs(m) <= j and (j - m).denominator == 1


@lru_cache(maxsize=None)
def _clebsch_gordan_exact(
    j1: Fraction, m1: Fraction, j2: Fraction, m2: Fraction, J: Fraction, M: Fraction
) -> float:
    r = [Rational(q.numerator, q.denominator) for q in (j1, j2, J, m1, m2, M)]
    return float(_wigner_clebsch_gordan(*r))


def clebsch_gordan(
    j1: AngularMomentum,
    m1: AngularMomentum,
    j2: AngularMomentum,
    m2: AngularMomentum,
    J: AngularMomentum,
    M: AngularMomentum,
) -> float:
    """Clebsch-Gordan coefficient <j1 m1; j2 m2 | J M>.

    Invalid quantum numbers (not half-integers, |m| > j, m1 + m2 != M or a
    violated triangle rule) give 0 instead of raising.
    """
    q = [_as_fraction(x) for x in (j1, m1, j2, m2, J, M)]
    j1f, m1f, j2f, m2f, Jf, Mf = q
    if not all(_is_half_integer(x) for x in q):
        return 0.0
    if not (
        _valid_projection(j1f, m1f) and _valid_projection(j2f, m2f) and _valid_projection(Jf, Mf)
    ):
        return 0.0
    if m1f + m2f != Mf:
        return 0.0
    if not abs(j1f - j2f) <= Jf <= j1f + j2f or (j1f + j2f + Jf).denominator != 1:
        return 0.0
    return _clebsch_gordan_exact(j1f, m1f, j2f, m2f, Jf, Mf)


def spin_matrices(j: AngularMomentum) -> dict[str, np.ndarray]:
    """Angular-momentum matrices for spin j in the m-descending basis.

    Returns:
        Mapping with keys "x", "y", "z", "+", "-".
    """
    ms = magnetic_numbers(j)
    jj = float(_as_fraction(j))
    jz = np.diag([float(m) for m in ms]).astype(complex)
    jp = np.zeros_like(jz)
    for k in range(1, len(ms)):
        m = float(ms[k])
        jp[k - 1, k] = np.sqrt(jj * (jj + 1) - m * (m + 1))
    jm = jp.conj().T
    return {
        "x": 0.5 * (jp + jm),
        "y": -0.5j * (jp - jm),
        "z": jz,
        "+": jp,
        "-": jm,
    }


@dataclass(frozen=True, eq=False)
class HyperfineBasis:
    """Coupled D1 basis of one atom.

    Attributes:
        atom: The atom the basis was built for
        levels: Ground levels followed by excited levels
        coupling_table: U[(m_I, m_e), (F, M)], shared by both manifolds
    """
    atom: AtomSpec
    levels: tuple[Level, ...]
    coupling_table: np.ndarray

    @property
    def spin(self) -> Fraction:
        return self.atom.spin

    @property
    def ground_dim(self) -> int:
        return self.atom.ground_dimension

    @property
    def full_dim(self) -> int:
        return self.atom.full_dimension

    @property
    def nuclear_dim(self) -> int:
        return int(2 * self.spin) + 1

    @property
    def multiplets(self) -> tuple[Fraction, Fraction]:
        """(a, b) = (I + 1/2, I - 1/2)."""
        return self.spin + HALF, self.spin - HALF

    @cached_property
    def ground_levels(self) -> tuple[Level, ...]:
        return self.levels[: self.ground_dim]

    @cached_property
    def _index(self) -> dict[Level, int]:
        return {level: i for i, level in enumerate(self.levels)}

    def index(self, manifold: Manifold, F: AngularMomentum, M: AngularMomentum) -> int:
        """Position of |manifold, F, M> in the level ordering.

        Raises:
            KeyError: If the level does not exist.
        """
        return self._index[Level(manifold, _as_fraction(F), _as_fraction(M))]

    def has_level(self, manifold: Manifold, F: AngularMomentum, M: AngularMomentum) -> bool:
        return Level(manifold, _as_fraction(F), _as_fraction(M)) in self._index

    def multiplet_indices(self, F: AngularMomentum, manifold: Manifold = "ground") -> np.ndarray:
        """Indices of the 2F+1 levels of one multiplet, M descending."""
        Ff = _as_fraction(F)
        return np.array(
            [i for i, lv in enumerate(self.levels) if lv.manifold == manifold and lv.F == Ff],
            dtype=int,
        )

    @cached_property
    def ground_F(self) -> np.ndarray:
        """F of each ground level as floats."""
        return np.array([float(lv.F) for lv in self.ground_levels])

    @cached_property
    def ground_M(self) -> np.ndarray:
        """M of each ground level as floats."""
        return np.array([float(lv.M) for lv in self.ground_levels])

    @cached_property
    def full_transform(self) -> np.ndarray:
        """Block-diagonal change of basis, uncoupled full space to coupled levels."""
        u = self.coupling_table
        n = u.shape[0]
        t = np.zeros((2 * n, 2 * n))
        t[:n, :n] = u
        t[n:, n:] = u
        return t

    def to_coupled_ground(self, op_uncoupled: np.ndarray) -> np.ndarray:
        """Express a ground operator given in |m_I, m_s> in the |F, M> basis."""
        u = self.coupling_table
        return u.T @ op_uncoupled @ u

    def electronic_operator(self, electronic: np.ndarray) -> np.ndarray:
        """Lift a 4x4 electronic operator to the coupled full space.

        The electronic index runs over (manifold, m_e) with manifold S then P
        and m_e = +1/2, -1/2. The nucleus is a spectator.
        """
        nn = self.nuclear_dim
        e = np.asarray(electronic, dtype=complex).reshape(2, 2, 2, 2)
        lifted = np.einsum("ambn,ij->aimbjn", e, np.eye(nn)).reshape(4 * nn, 4 * nn)
        t = self.full_transform
        return t.T @ lifted @ t

    def embed_ground(self, op: np.ndarray) -> np.ndarray:
        """Embed a ground operator into the full space (zero on the excited block)."""
        n = self.ground_dim
        out = np.zeros((2 * n, 2 * n), dtype=complex)
        out[:n, :n] = op
        return out

    def maximally_mixed_ground(self) -> np.ndarray:
        """Identity over the ground manifold divided by 4I + 2."""
        n = self.ground_dim
        return np.eye(n, dtype=complex) / n


def _ground_coupling_table(spin: Fraction) -> tuple[np.ndarray, list[tuple[Fraction, Fraction]]]:
    a, b = spin + HALF, spin - HALF
    coupled = [(F, M) for F in (a, b) for M in magnetic_numbers(F)]
    uncoupled = [(mi, ms) for mi in magnetic_numbers(spin) for ms in (HALF, -HALF)]
    table = np.array(
        [[clebsch_gordan(spin, mi, HALF, ms, F, M) for (F, M) in coupled] for (mi, ms) in uncoupled]
    )
    return table, coupled


def build_basis(atom: AtomSpec) -> HyperfineBasis:
    """Build the coupled ground and excited bases of the D1 line.

    Args:
        atom: Atom with a half-integer or integer nuclear spin

    Returns:
        HyperfineBasis with 4I + 2 levels per manifold.
    """
    spin = atom.spin
    table, coupled = _ground_coupling_table(spin)

    deviation = np.abs(table.T @ table - np.eye(table.shape[1])).max()
    if deviation > 1e-12:
        logger.warning(f"Coupling table for I={_fmt(spin)} deviates from orthogonal by {deviation:.2e}")

    levels = tuple(Level("ground", F, M) for F, M in coupled) + tuple(
        Level("excited", F, M) for F, M in coupled
    )
    logger.debug(f"Built D1 basis for {atom.name}: {len(levels)} levels")
    return HyperfineBasis(
        atom=atom,
        levels=levels,
        coupling_table=table,
    )


def electron_spin_ops(basis: HyperfineBasis) -> dict[str, np.ndarray]:
    """Ground electron spin S in the coupled |F, M> basis.

    Returns:
        Mapping with keys "x", "y", "z", "+", "-"; S_± = S_x ± i S_y.
    """
    s = spin_matrices(HALF)
    eye_n = np.eye(basis.nuclear_dim)
    return {k: basis.to_coupled_ground(np.kron(eye_n, op)) for k, op in s.items()}


def total_angular_momentum_ops(basis: HyperfineBasis) -> dict[str, np.ndarray]:
    """Ground total F = I + S in the coupled basis."""
    s = spin_matrices(HALF)
    i_ops = spin_matrices(basis.spin)
    eye_n, eye_e = np.eye(basis.nuclear_dim), np.eye(2)
    return {
        k: basis.to_coupled_ground(np.kron(i_ops[k], eye_e) + np.kron(eye_n, s[k]))
        for k in s
    }


def _electronic_lowering(ground_ms: Fraction, excited_mj: Fraction) -> np.ndarray:
    e = np.zeros((4, 4))
    e[0 if ground_ms > 0 else 1, 2 if excited_mj > 0 else 3] = 1.0
    return e


def quench_jump_ops(basis: HyperfineBasis) -> dict[int, np.ndarray]:
    """Collisional quenching operators A_0, A_+1, A_-1 on the full space.

    A_0 returns each |P1/2, m> to |S1/2, m>; A_±1 maps |P1/2, ±1/2> to
    |S1/2, ∓1/2>. Sum over m of A_m† A_m equals twice the identity on the
    excited manifold.
    """
    a0 = _electronic_lowering(HALF, HALF) + _electronic_lowering(-HALF, -HALF)
    return {
        0: basis.electronic_operator(a0),
        1: basis.electronic_operator(_electronic_lowering(-HALF, HALF)),
        -1: basis.electronic_operator(_electronic_lowering(HALF, -HALF)),
    }


def optical_jump_ops(basis: HyperfineBasis) -> dict[int, np.ndarray]:
    """Orbital lowering operators D_l = |s><p_l| ⊗ 1 on the D1 subspace.

    Only the J = 1/2 part of the excited orbital is retained, so the
    electronic block of D_l is <1 l; 1/2 m_s | 1/2 m_J>.
    """
    ops = {}
    for l in (0, 1, -1):
        e = np.zeros((4, 4))
        for i, ms in enumerate((HALF, -HALF)):
            for j, mj in enumerate((HALF, -HALF)):
                e[i, 2 + j] = clebsch_gordan(1, l, HALF, ms, HALF, mj)
        ops[l] = basis.electronic_operator(e)
    return ops


def pump_coupling(basis: HyperfineBasis, rabi_prime: float) -> np.ndarray:
    """Rotating-frame pump Hamiltonian Ω'(D_+1 + D_+1†) in Hz."""
    d = optical_jump_ops(basis)[1]
    return rabi_prime * (d + d.conj().T)
