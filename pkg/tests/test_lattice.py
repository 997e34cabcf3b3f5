import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import polybloch as pb
from polybloch.errors import SingularBasis

TWO_PI = 2 * np.pi


def brute_force_ball(radius, box=6, exclude_zero=True):
    """Independent integer-box enumeration for Z^2."""
    out = []
    for n in itertools.product(range(-box, box + 1), repeat=2):
        if exclude_zero and n == (0, 0):
            continue
        if n[0] ** 2 + n[1] ** 2 < radius**2:
            out.append(n)
    return sorted(out, key=lambda n: (n[0] ** 2 + n[1] ** 2, n))


class TestDualLattice:
    def test_identity_scaling(self):
        dual = pb.dual_lattice(TWO_PI * np.eye(2))
        assert np.allclose(dual, np.eye(2))

    def test_diagonal(self):
        dual = pb.dual_lattice(np.diag([TWO_PI, 2 * TWO_PI]))
        assert np.allclose(dual, np.diag([1.0, 0.5]))

    def test_hexagonal_solves_linear_system(self):
        basis = TWO_PI * np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        dual = pb.dual_lattice(basis)
        # independent route: solve (gamma_i, omega_j) = 2 pi delta_ij directly
        expected = np.linalg.solve(basis, TWO_PI * np.eye(2)).T
        assert np.allclose(dual, expected, atol=1e-14)
        assert np.allclose(dual[0], [1.0, -1.0 / np.sqrt(3)])
        assert np.allclose(dual[1], [0.0, 2.0 / np.sqrt(3)])

    def test_biorthogonality_any_basis(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            basis = rng.normal(size=(3, 3))
            if abs(np.linalg.det(basis)) < 0.1:
                continue
            dual = pb.dual_lattice(basis)
            assert np.allclose(dual @ basis.T, TWO_PI * np.eye(3), atol=1e-9)

    def test_singular_basis_rejected(self):
        with pytest.raises(SingularBasis):
            pb.dual_lattice([[1.0, 0.0], [2.0, 0.0]])

    def test_double_dualization(self, z2):
        again = pb.dual_lattice(z2.dual_basis)
        assert np.allclose(again, z2.basis, atol=1e-12)


class TestEnumerateBall:
    def test_tiny_radius_empty(self, z2):
        assert z2.enumerate_ball(0.5) == []

    def test_radius_1p5_brute_force(self, z2):
        # |(+-1, +-1)| = sqrt(2) < 1.5, so 8 vectors, matching brute force
        got = [v.coords for v in z2.enumerate_ball(1.5)]
        assert got == brute_force_ball(1.5)
        assert len(got) == 8

    def test_radius_2p3_brute_force(self, z2):
        got = [v.coords for v in z2.enumerate_ball(2.3)]
        assert got == brute_force_ball(2.3)
        assert len(got) == 20
        norms = sorted({v.norm_sq for v in z2.enumerate_ball(2.3)})
        assert norms == [1.0, 2.0, 4.0, 5.0]

    def test_include_zero(self, z2):
        got = z2.enumerate_ball(1.5, exclude_zero=False)
        assert got[0].coords == (0, 0)
        assert len(got) == 9

    def test_strict_boundary_integral(self, z2):
        # radius exactly 1: no unit vector enters (strict inequality)
        assert z2.enumerate_ball(1.0) == []
        assert len(z2.enumerate_ball(1.0 + 1e-9)) == 4

    def test_nesting(self, z2):
        small = {v.coords for v in z2.enumerate_ball(2.1)}
        large = {v.coords for v in z2.enumerate_ball(3.7)}
        assert small <= large

    def test_count_asymptotics(self, z2):
        # |ball(r)| ~ pi r^2 / covolume; within 10% at r = 20, 40
        for r in (20.0, 40.0):
            count = len(z2.enumerate_ball(r))
            expected = np.pi * r**2
            assert abs(count / expected - 1) < 0.10

    def test_hexagonal_ball(self):
        basis = TWO_PI * np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        lat = pb.LatticeModel(basis)
        for vec in lat.enumerate_ball(2.0):
            assert vec.norm < 2.0
            assert np.allclose(vec.embedding, np.array(vec.coords) @ lat.dual_basis)


class TestReduce:
    def test_zero(self, z2):
        gamma, qm = z2.reduce([0.0, 0.0])
        assert gamma.coords == (0, 0)
        assert np.allclose(qm.reduced, 0.0)

    def test_hand_example(self, z2):
        gamma, qm = z2.reduce([5.3, -4.2])
        assert gamma.coords == (5, -5)
        assert np.allclose(qm.reduced, [0.3, 0.8])

    def test_exact_lattice_part_hexagonal(self):
        basis = TWO_PI * np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        lat = pb.LatticeModel(basis)
        x = lat.embed((1, 0)) + 0.25 * lat.dual_basis[1]
        gamma, qm = lat.reduce(x)
        assert gamma.coords == (1, 0)
        assert np.allclose(qm.reduced, 0.25 * lat.dual_basis[1], atol=1e-12)

    def test_exact_split(self, z2):
        rng = np.random.default_rng(11)
        for _ in range(50):
            x = rng.uniform(-30, 30, size=2)
            gamma, qm = z2.reduce(x)
            assert np.allclose(gamma.embedding + qm.reduced, x, rtol=1e-12, atol=1e-12)

    @given(st.tuples(st.floats(-50, 50), st.floats(-50, 50)))
    @settings(max_examples=60, deadline=None)
    def test_idempotent(self, x):
        lat = pb.LatticeModel.cubic(2)
        gamma, qm = lat.reduce(np.asarray(x))
        gamma2, qm2 = lat.reduce(qm.reduced)
        assert gamma2.coords == (0, 0)
        assert np.allclose(qm2.reduced, qm.reduced)

    def test_half_open_cell(self, z2):
        for x in ([1.0, 2.0], [-0.0001, 0.9999], [7.5, -3.25]):
            _, qm = z2.reduce(x)
            coeff = qm.reduced
            assert np.all(coeff >= -1e-11)
            assert np.all(coeff < 1.0)


class TestLatticeModel:
    def test_cell_volume(self, z2):
        assert z2.cell_volume == pytest.approx(TWO_PI**2)
        assert z2.dual_cell_volume == pytest.approx(1.0)

    def test_config_roundtrip(self):
        spec = [[TWO_PI, 0.0], [0.0, 2 * TWO_PI]]
        lat = pb.make_lattice(spec)
        assert np.allclose(lat.basis, spec)

    def test_vector_embedding_consistency(self, z2):
        vec = z2.vector((3, -2))
        assert np.allclose(vec.embedding, [3.0, -2.0])
        assert vec.norm_sq == pytest.approx(13.0)
