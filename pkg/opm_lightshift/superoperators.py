"""Vectorized superoperators and the mean-field Liouvillian container.

Density matrices are vectorized row-major, vec(ρ) = ρ.reshape(-1), so that

    vec(A ρ B) = kron(A, B.T) vec(ρ).

Generators are assembled with every frequency and rate in Hz. Multiply by
TWO_PI to obtain the generator in s^-1 for time evolution.
"""

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional

import numpy as np

from opm_lightshift.exceptions import MeanFieldRangeError

TWO_PI = 2.0 * np.pi

# Mean-field pieces of spin exchange, keyed by the mean value they multiply:
# "sz" by <S_z>, "sp" by <S_+> and "sm" by <S_-> = conj(<S_+>).
FEEDBACK_KEYS = ("sz", "sp", "sm")

_SPIN_LIMIT = 0.5 + 1e-9


def left(a: np.ndarray) -> np.ndarray:
    """Superoperator of ρ -> A ρ."""
    return np.kron(a, np.eye(a.shape[0]))


def right(b: np.ndarray) -> np.ndarray:
    """Superoperator of ρ -> ρ B."""
    return np.kron(np.eye(b.shape[0]), b.T)


def sandwich(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Superoperator of ρ -> A ρ B."""
    return np.kron(a, b.T)


def commutator(h: np.ndarray) -> np.ndarray:
    """Superoperator of ρ -> [H, ρ]."""
    return left(h) - right(h)


def anticommutator(a: np.ndarray) -> np.ndarray:
    """Superoperator of ρ -> {A, ρ}."""
    return left(a) + right(a)


def hamiltonian(h: np.ndarray) -> np.ndarray:
    """Superoperator of ρ -> -i[H, ρ]."""
    return -1j * commutator(h)


def dissipator(jump: np.ndarray) -> np.ndarray:
    """Lindblad dissipator D[L]ρ = L ρ L† - {L†L, ρ}/2."""
    jd = jump.conj().T
    return sandwich(jump, jd) - 0.5 * anticommutator(jd @ jump)


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(x: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(x).reshape(dim, dim)


def expectation_row(op: np.ndarray) -> np.ndarray:
    """Row r with r @ vec(ρ) = Tr[op ρ]."""
    return np.asarray(op).T.reshape(-1).astype(complex)


def spin_collision_terms(
    spin: Mapping[str, np.ndarray], gamma: float, gamma_se: float
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Spin-exchange and spin-destruction generator.

    Args:
        spin: Electron spin operators "x", "y", "z", "+", "-" (any embedding)
        gamma: Total relaxation γ = γ_se + γ_sd (Hz)
        gamma_se: Spin-exchange rate (Hz)

    Returns:
        (constant, pieces): γ(Σ_k S_k ρ S_k - {ρ, S·S}/2) and the mean-field
        pieces keyed by FEEDBACK_KEYS. The transverse pieces carry unit
        weight so that spin exchange conserves all three components of <S>.
    """
    sx, sy, sz, sp, sm = (spin[k] for k in ("x", "y", "z", "+", "-"))
    s2 = sx @ sx + sy @ sy + sz @ sz
    constant = gamma * (
        sandwich(sx, sx) + sandwich(sy, sy) + sandwich(sz, sz) - 0.5 * anticommutator(s2)
    )
    pieces = {
        "sz": gamma_se * (sandwich(sp, sm) - sandwich(sm, sp) + anticommutator(sz)),
        "sp": gamma_se * (sandwich(sm, sz) - sandwich(sz, sm) + 0.5 * anticommutator(sm)),
        "sm": gamma_se * (sandwich(sz, sp) - sandwich(sp, sz) + 0.5 * anticommutator(sp)),
    }
    return constant, pieces


@dataclass(frozen=True)
class MeanFields:
    """Mean electron spin entering the spin-exchange term.

    Attributes:
        sz: <S_z>
        sp: <S_+>; <S_-> is its complex conjugate
    """
    sz: float = 0.0
    sp: complex = 0j

    def __post_init__(self) -> None:
        if abs(self.sz) > _SPIN_LIMIT:
            raise MeanFieldRangeError(f"|<S_z>| = {abs(self.sz):.6g} exceeds 1/2")
        if abs(self.sp) > _SPIN_LIMIT:
            raise MeanFieldRangeError(f"|<S_+>| = {abs(self.sp):.6g} exceeds 1/2")

    @property
    def sm(self) -> complex:
        return complex(np.conj(self.sp))


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Generator on a (possibly restricted) superspace with mean-field feedback.

    The matrix at given mean fields is

        constant + <S_z> feedback["sz"] + <S_+> feedback["sp"] + <S_-> feedback["sm"]

    acting on vec(ρ)[support]. Entries of ρ outside the support are treated
    as zero.

    Attributes:
        dim: Hilbert-space dimension of ρ
        constant: Mean-field independent part (Hz)
        feedback: Mean-field pieces keyed by FEEDBACK_KEYS
        functionals: Rows giving Tr[S_z ρ], Tr[S_+ ρ], Tr[S_- ρ] on the support
        support: Flat indices of vec(ρ) kept by this generator
        mean_fields: Mean fields the matrix is evaluated at
    """
    dim: int
    constant: np.ndarray
    feedback: dict[str, np.ndarray]
    functionals: dict[str, np.ndarray]
    support: np.ndarray
    mean_fields: MeanFields = field(default_factory=MeanFields)

    @classmethod
    def from_parts(
        cls,
        dim: int,
        constant: np.ndarray,
        feedback: Mapping[str, np.ndarray],
        spin: Mapping[str, np.ndarray],
        mean_fields: Optional[MeanFields] = None,
        support: Optional[np.ndarray] = None,
    ) -> "Liouvillian":
        """Assemble on the full superspace and restrict to `support`."""
        full = cls(
            dim=dim,
            constant=np.asarray(constant, dtype=complex),
            feedback={k: np.asarray(v, dtype=complex) for k, v in feedback.items()},
            functionals={
                "sz": expectation_row(spin["z"]),
                "sp": expectation_row(spin["+"]),
                "sm": expectation_row(spin["-"]),
            },
            support=np.arange(dim * dim),
            mean_fields=mean_fields or MeanFields(),
        )
        return full if support is None else full.restrict(support)

    @property
    def size(self) -> int:
        return len(self.support)

    @cached_property
    def matrix(self) -> np.ndarray:
        return self.matrix_for(self.mean_fields.sz, self.mean_fields.sp)

    def matrix_for(self, sz: float, sp: complex) -> np.ndarray:
        """Matrix at arbitrary mean fields, without range checks."""
        out = self.constant.copy()
        coefficients = {"sz": sz, "sp": sp, "sm": np.conj(sp)}
        for key, piece in self.feedback.items():
            c = coefficients[key]
            if c != 0:
                out = out + c * piece
        return out

    def at(self, mean_fields: MeanFields) -> "Liouvillian":
        """Same generator evaluated at other mean fields."""
        return dataclasses.replace(self, mean_fields=mean_fields)

    def restrict(self, support: np.ndarray) -> "Liouvillian":
        """Keep only the entries of vec(ρ) listed in `support`.

        `support` indexes the current support, so restrictions compose.
        """
        idx = np.asarray(support, dtype=int)
        grid = np.ix_(idx, idx)
        return Liouvillian(
            dim=self.dim,
            constant=self.constant[grid],
            feedback={k: v[grid] for k, v in self.feedback.items()},
            functionals={k: v[idx] for k, v in self.functionals.items()},
            support=self.support[idx],
            mean_fields=self.mean_fields,
        )

    def locate(self, flat_indices: np.ndarray) -> np.ndarray:
        """Positions within the support of the given flat indices of vec(ρ)."""
        lookup = {int(s): i for i, s in enumerate(self.support)}
        return np.array([lookup[int(f)] for f in flat_indices], dtype=int)

    @cached_property
    def diagonal_positions(self) -> np.ndarray:
        """Positions within the support of the diagonal entries ρ_ii."""
        rows, cols = np.divmod(self.support, self.dim)
        return np.flatnonzero(rows == cols)

    @cached_property
    def trace_row(self) -> np.ndarray:
        row = np.zeros(self.size, dtype=complex)
        row[self.diagonal_positions] = 1.0
        return row

    def reduce(self, rho: np.ndarray) -> np.ndarray:
        return vec(rho)[self.support].astype(complex)

    def expand(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros(self.dim * self.dim, dtype=complex)
        out[self.support] = x
        return unvec(out, self.dim)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """dρ/dt in Hz units for the current mean fields."""
        return self.expand(self.matrix @ self.reduce(rho))

    def mean_fields_of(self, x: np.ndarray) -> tuple[float, complex]:
        """(<S_z>, <S_+>) of a reduced state vector, unclipped."""
        return (
            float(np.real(self.functionals["sz"] @ x)),
            complex(self.functionals["sp"] @ x),
        )

    def scaled(self, factor: float) -> "Liouvillian":
        """Generator multiplied by a constant, e.g. TWO_PI for time evolution."""
        return dataclasses.replace(
            self,
            constant=factor * self.constant,
            feedback={k: factor * v for k, v in self.feedback.items()},
        )
