"""Tests for hyperfine bases, Clebsch-Gordan coefficients and D1 operators."""

from fractions import Fraction

import numpy as np
import pytest

from opm_lightshift.spin_basis import (
    HALF,
    Level,
    clebsch_gordan,
    electron_spin_ops,
    magnetic_numbers,
    optical_jump_ops,
    pump_coupling,
    quench_jump_ops,
    spin_matrices,
    total_angular_momentum_ops,
)


class TestClebschGordan:
    """Tests for clebsch_gordan."""

    def test_two_spin_halves_triplet(self):
        """<1/2 1/2; 1/2 -1/2 | 1 0> = 1/sqrt(2)."""
        assert clebsch_gordan(0.5, 0.5, 0.5, -0.5, 1, 0) == pytest.approx(np.sqrt(0.5))

    def test_two_spin_halves_singlet_sign(self):
        """Condon-Shortley phase gives <1/2 -1/2; 1/2 1/2 | 0 0> = -1/sqrt(2)."""
        assert clebsch_gordan(0.5, -0.5, 0.5, 0.5, 0, 0) == pytest.approx(-np.sqrt(0.5))

    def test_stretched_state(self):
        """Stretched states have unit coefficient."""
        assert clebsch_gordan(Fraction(3, 2), Fraction(3, 2), HALF, HALF, 2, 2) == pytest.approx(1.0)

    def test_projection_mismatch_is_zero(self):
        """m1 + m2 != M gives 0."""
        assert clebsch_gordan(1, 1, 0.5, 0.5, 1.5, 0.5) == 0.0

    def test_triangle_violation_is_zero(self):
        """J outside |j1 - j2| .. j1 + j2 gives 0."""
        assert clebsch_gordan(0.5, 0.5, 0.5, 0.5, 2, 1) == 0.0

    def test_non_half_integer_is_zero(self):
        """Quantum numbers that are not half-integers give 0 instead of raising."""
        assert clebsch_gordan(0.3, 0.3, 0.5, 0.5, 0.8, 0.8) == 0.0

    def test_projection_above_j_is_zero(self):
        """|m| > j gives 0."""
        assert clebsch_gordan(0.5, 1.5, 1, 0, 1.5, 1.5) == 0.0

    def test_orthonormal_columns(self):
        """Sum over m1, m2 of CG^2 for fixed (J, M) is 1."""
        total = sum(
            clebsch_gordan(1.5, m1, 0.5, m2, 2, 1) ** 2
            for m1 in magnetic_numbers(1.5)
            for m2 in magnetic_numbers(0.5)
        )
        assert total == pytest.approx(1.0)


class TestSpinMatrices:
    """Tests for spin_matrices and magnetic_numbers."""

    def test_magnetic_numbers_descending(self):
        """Magnetic numbers run from j down to -j."""
        assert magnetic_numbers(1.5) == [Fraction(3, 2), HALF, -HALF, Fraction(-3, 2)]

    def test_commutation_relation(self):
        """[J_x, J_y] = i J_z."""
        s = spin_matrices(1)
        assert np.allclose(s["x"] @ s["y"] - s["y"] @ s["x"], 1j * s["z"])

    def test_casimir(self):
        """J^2 = j(j+1) on spin 3/2."""
        s = spin_matrices(1.5)
        j2 = s["x"] @ s["x"] + s["y"] @ s["y"] + s["z"] @ s["z"]
        assert np.allclose(j2, 3.75 * np.eye(4))


class TestHyperfineBasis:
    """Tests for build_basis and HyperfineBasis."""

    def test_dimensions(self, rb87_basis):
        """I = 3/2 has 8 ground and 16 D1 levels."""
        assert rb87_basis.ground_dim == 8
        assert rb87_basis.full_dim == 16
        assert len(rb87_basis.levels) == 16

    def test_level_ordering(self, rb87_basis):
        """Ground before excited, F = a before F = b, M descending."""
        assert rb87_basis.levels[0] == Level("ground", Fraction(2), Fraction(2))
        assert rb87_basis.levels[4] == Level("ground", Fraction(2), Fraction(-2))
        assert rb87_basis.levels[5] == Level("ground", Fraction(1), Fraction(1))
        assert rb87_basis.index("excited", 2, 2) == 8

    def test_level_label(self):
        """Labels show manifold, F and M."""
        assert Level("ground", Fraction(4), Fraction(-3)).label == "S(4,-3)"
        assert Level("excited", Fraction(1), HALF).label == "P(1,1/2)"

    def test_unknown_level_raises(self, half_basis):
        """Looking up a level that does not exist raises KeyError."""
        assert not half_basis.has_level("ground", 0, 1)
        with pytest.raises(KeyError):
            half_basis.index("ground", 0, 1)

    def test_coupling_table_orthogonal(self, rb87_basis):
        """The uncoupled-to-coupled table is real orthogonal."""
        u = rb87_basis.coupling_table
        assert np.allclose(u.T @ u, np.eye(8))

    def test_multiplet_indices(self, rb87_basis):
        """The F = 1 multiplet follows the five F = 2 levels."""
        assert list(rb87_basis.multiplet_indices(1)) == [5, 6, 7]
        assert list(rb87_basis.multiplet_indices(2, "excited")) == [8, 9, 10, 11, 12]

    def test_maximally_mixed_ground(self, half_basis):
        """Maximally mixed ground state has unit trace."""
        assert np.trace(half_basis.maximally_mixed_ground()).real == pytest.approx(1.0)


class TestGroundOperators:
    """Tests for electron and total angular momentum operators."""

    def test_electron_spin_casimir(self, rb87_basis):
        """S·S = 3/4 on every ground level."""
        s = electron_spin_ops(rb87_basis)
        s2 = s["x"] @ s["x"] + s["y"] @ s["y"] + s["z"] @ s["z"]
        assert np.allclose(s2, 0.75 * np.eye(8))

    def test_electron_spin_ladder(self, rb87_basis):
        """S_+ = S_x + i S_y."""
        s = electron_spin_ops(rb87_basis)
        assert np.allclose(s["+"], s["x"] + 1j * s["y"])

    def test_stretched_state_polarization(self, rb87_basis):
        """<S_z> = 1/2 in |a, a>."""
        s = electron_spin_ops(rb87_basis)
        assert s["z"][0, 0].real == pytest.approx(0.5)

    def test_total_angular_momentum_diagonal(self, rb87_basis):
        """F_z is diagonal with the M of each level."""
        f = total_angular_momentum_ops(rb87_basis)
        assert np.allclose(f["z"], np.diag(rb87_basis.ground_M))


class TestJumpOperators:
    """Tests for quench, optical decay and pump operators."""

    def test_quench_completeness(self, half_basis):
        """Sum of A_m† A_m is twice the identity on the excited manifold."""
        n = half_basis.ground_dim
        total = sum(a.conj().T @ a for a in quench_jump_ops(half_basis).values())
        assert np.allclose(total[n:, n:], 2.0 * np.eye(n))
        assert np.allclose(total[:n, :n], 0.0)

    def test_quench_maps_excited_to_ground(self, half_basis):
        """Quench operators only connect excited columns to ground rows."""
        n = half_basis.ground_dim
        for a in quench_jump_ops(half_basis).values():
            assert np.allclose(a[n:, :], 0.0)
            assert np.allclose(a[:, :n], 0.0)

    def test_optical_decay_completeness(self, rb87_basis):
        """Sum of D_l† D_l is the identity on the excited manifold."""
        n = rb87_basis.ground_dim
        total = sum(d.conj().T @ d for d in optical_jump_ops(rb87_basis).values())
        assert np.allclose(total[n:, n:], np.eye(n))

    def test_pump_coupling_hermitian(self, rb87_basis):
        """The pump Hamiltonian is Hermitian and off-diagonal between manifolds."""
        n = rb87_basis.ground_dim
        h = pump_coupling(rb87_basis, 1e6)
        assert np.allclose(h, h.conj().T)
        assert np.allclose(h[:n, :n], 0.0)
        assert np.allclose(h[n:, n:], 0.0)

    def test_stretched_state_is_dark(self, rb87_basis):
        """σ+ light does not couple |a, a>."""
        h = pump_coupling(rb87_basis, 1e6)
        assert np.allclose(h[:, 0], 0.0)
