import warnings

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from locfisher.errors import DegenerateQubitState
from locfisher.model import SourceConfiguration
from locfisher.qfim_analytic import analytic_qfim
from locfisher.qfim_numeric import build_truncated_state, spectral_qfim
from locfisher.qubit import (
    QubitCore,
    QubitMoments,
    eigen_core,
    moments,
    qubit_core,
    qubit_derivatives,
    qubit_qfim,
    qubit_state,
)

from conftest import equispaced


def dominant_pair(q):
    _, v = np.linalg.eigh(q)
    return v[:, -2:]


class TestMoments:
    def test_equispaced(self):
        m = moments(equispaced(3, 0.1))
        assert m.c1 == pytest.approx(0.2)
        assert m.c2 == pytest.approx(14 * 0.01 / 3)

    def test_single_and_symmetric(self):
        assert moments(SourceConfiguration((0.7,), (1.0,))) == QubitMoments(0.7, pytest.approx(0.49))
        m = moments(SourceConfiguration((-0.2, 0.2), (0.5, 0.5)))
        assert m.c1 == pytest.approx(0.0, abs=1e-17)
        assert m.c2 == pytest.approx(0.04)


class TestState:
    def test_values(self):
        np.testing.assert_array_equal(qubit_state(QubitMoments(0.0, 0.0)), [[1, 0], [0, 0]])
        np.testing.assert_allclose(qubit_state(QubitMoments(0.1, 0.02)), [[0.98, 0.1], [0.1, 0.02]])

    def test_determinant_is_minus_a(self):
        m = QubitMoments(0.13, 0.05)
        assert np.linalg.det(qubit_state(m)) == pytest.approx(-qubit_core(m).a_denom, rel=1e-12)

    def test_matches_hermite_gauss_block_to_third_order(self):
        devs = []
        for x in (0.1, 0.05, 0.025):
            c = equispaced(3, x)
            block = build_truncated_state(c).rho[:2, :2]
            devs.append(np.max(np.abs(block - qubit_state(moments(c)))))
        assert devs[0] / devs[1] >= 7 and devs[1] / devs[2] >= 7
        assert devs[0] / 0.1 ** 3 < 20     # observed constant ~ 11.6


class TestCore:
    def test_half_c2(self):
        mu = eigen_core(qubit_core(QubitMoments(0.0, 0.5)))
        assert mu == pytest.approx((-0.25, -1.0))

    def test_det_identity(self):
        core = qubit_core(QubitMoments(0.1, 0.03))
        assert np.linalg.det(core.matrix()) == pytest.approx(-core.a_denom, rel=1e-12)
        assert core.m21 == core.m12

    def test_against_generic_solver(self, rng):
        for _ in range(50):
            c1 = rng.uniform(-0.3, 0.3)
            c2 = c1 ** 2 + rng.uniform(1e-4, 0.3)
            core = qubit_core(QubitMoments(c1, c2))
            ref = np.linalg.eigvalsh(core.matrix())
            ref = ref[np.argsort(np.abs(ref))]
            np.testing.assert_allclose(eigen_core(core), ref, rtol=1e-12, atol=1e-15)
            assert all(mu != 0 for mu in eigen_core(core))

    def test_tiny_eigenvalue_without_cancellation(self):
        core = QubitCore(-1e-18, 0.0, -1.0, 1e-18)
        small, big = eigen_core(core)
        assert big == pytest.approx(-1.0)
        assert small == pytest.approx(-1e-18, rel=1e-12)


class TestQubitQFIM:
    def test_matches_spectral_qfim_of_two_level_state(self):
        c = SourceConfiguration((0.05, 0.12, -0.08), (0.2, 0.5, 0.3))
        ref = spectral_qfim(qubit_state(moments(c)), qubit_derivatives(c))
        np.testing.assert_allclose(qubit_qfim(c).entries, ref, rtol=1e-10)

    @pytest.mark.parametrize("n", [3, 5, 8])
    def test_rank_at_most_two(self, n):
        q = qubit_qfim(equispaced(n, 0.05)).entries
        ev = np.linalg.eigvalsh(q)
        assert np.count_nonzero(np.abs(ev) > 1e-10 * np.max(np.abs(ev))) <= 2

    def test_subspace_matches_full_qfim_pair(self):
        c = SourceConfiguration((0.01, 0.03), (0.5, 0.5))
        angles = subspace_angles(dominant_pair(qubit_qfim(c).entries),
                                 dominant_pair(analytic_qfim(c).entries))
        assert np.max(angles) < 1e-2

    def test_subspace_converges_as_x_shrinks(self):
        angles = []
        for x in (1e-1, 1e-2, 1e-3):
            c = equispaced(3, x)
            angles.append(np.max(subspace_angles(dominant_pair(qubit_qfim(c).entries),
                                                 dominant_pair(analytic_qfim(c, dps="auto").entries))))
        assert angles[0] > angles[1] > angles[2]
        assert angles[2] < 1e-2

    def test_elementwise_agreement_is_first_order(self):
        # the two-level QFIM approaches the full one with an O(x) error
        devs = []
        for x in (1e-2, 1e-3):
            c = equispaced(3, x)
            devs.append(np.max(np.abs(qubit_qfim(c).entries - analytic_qfim(c, dps="auto").entries)))
        assert devs[1] < 0.15 * devs[0]
        assert devs[1] < 1e-4

    def test_pure_limit_raises(self):
        with pytest.raises(DegenerateQubitState):
            qubit_qfim(SourceConfiguration((0.0,), (1.0,)))
        with pytest.raises(DegenerateQubitState):
            qubit_qfim(SourceConfiguration((0.0, 0.0), (0.5, 0.5)))

    def test_warns_outside_regime(self):
        with pytest.warns(UserWarning, match="sub-Rayleigh"):
            qubit_qfim(SourceConfiguration((0.0, 2.0), (0.5, 0.5)))
