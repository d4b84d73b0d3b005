import warnings

import numpy as np
import pytest

from locfisher.errors import DegenerateFit, SingularTransform
from locfisher.model import FisherKind, FisherMatrix, PhotonBudget, PSFModel, SourceConfiguration
from locfisher.qfim_analytic import analytic_qfim
from locfisher.qfim_numeric import build_truncated_state, spectral_qfim
from locfisher.qubit import qubit_qfim
from locfisher.spectra import (
    SpectralReport,
    centroid_separation_transform,
    crb_bound,
    degree_law,
    eigen_report,
    fit_scaling,
    numerical_rank,
    reparameterize,
)

from conftest import equispaced


def synthetic_sweep(powers, sizes, flags=None):
    flags = flags or [False] * len(sizes)
    out = []
    for l, flag in zip(sizes, flags):
        ev = np.sort(np.array([l ** p for p in powers]))[::-1]
        out.append((l, SpectralReport(ev, len(ev), 1e-3, FisherKind.QUANTUM, flag)))
    return out


class TestEigenReport:
    def test_diagonal(self):
        r = eigen_report(FisherMatrix(np.diag([3.0, 1.0, 2.0]), "quantum"))
        np.testing.assert_array_equal(r.eigenvalues, [3.0, 2.0, 1.0])
        assert r.rank == 3

    @pytest.mark.parametrize("n", [3, 5])
    def test_rank_two_at_small_x(self, n):
        assert eigen_report(analytic_qfim(equispaced(n, 0.01), dps="auto")).rank == 2

    def test_permutation_equivariance(self, rng):
        m = rng.normal(size=(5, 5))
        f = FisherMatrix(m @ m.T, "classical")
        p = rng.permutation(5)
        g = FisherMatrix(f.entries[np.ix_(p, p)], "classical")
        np.testing.assert_allclose(eigen_report(g).eigenvalues, eigen_report(f).eigenvalues, rtol=1e-12)

    def test_uses_precise_entries(self):
        q = analytic_qfim(equispaced(6, 1e-5), dps="auto")
        r = eigen_report(q)
        # the smallest eigenvalue sits far below double-precision roundoff
        assert 0 < r.eigenvalues[-1] < 1e-16 * r.eigenvalues[0]

    def test_rank_floor(self):
        assert numerical_rank(np.zeros(3)) == 0


class TestFitScaling:
    def test_exact_power_law(self):
        fit = fit_scaling(synthetic_sweep([4], np.geomspace(1e-3, 1e-2, 7)))
        assert fit[1].slope == pytest.approx(4.0, abs=1e-10)

    def test_integer_slopes(self):
        fit = fit_scaling(synthetic_sweep([0, 2, 6], np.geomspace(1e-2, 1e-1, 9)))
        np.testing.assert_allclose(fit.slopes, [0, 2, 6], atol=1e-9)
        assert all(np.isfinite(r.stderr) for r in fit.records)

    def test_default_window_is_smallest_decade(self):
        sizes = np.geomspace(1e-3, 1.0, 19)
        fit = fit_scaling(synthetic_sweep([2], sizes))
        assert max(fit[1].sizes) <= 1e-2 * (1 + 1e-9)
        assert len(fit[1].sizes) == 7

    def test_default_window_skips_flagged_points(self):
        sizes = np.geomspace(1e-3, 1e-2, 8)
        fit = fit_scaling(synthetic_sweep([2], sizes, [True] + [False] * 7))
        assert len(fit[1].sizes) == 7

    def test_too_few_points(self):
        with pytest.raises(DegenerateFit):
            fit_scaling(synthetic_sweep([2], np.geomspace(1e-3, 1e-2, 4)))

    def test_underflow(self):
        with pytest.raises(DegenerateFit, match="eigenvalue"):
            fit_scaling(synthetic_sweep([0, 300], np.geomspace(1e-3, 1e-2, 6)))

    def test_three_source_third_slope(self):
        sweep = []
        for x in np.geomspace(1e-3, 1e-2, 6):
            sweep.append((2 * x, eigen_report(analytic_qfim(equispaced(3, x), dps="auto"))))
        assert fit_scaling(sweep)[3].slope == pytest.approx(2.0, abs=0.05)

    def test_degree_law(self):
        assert [degree_law(mu) for mu in range(1, 10)] == [0, 0, 2, 2, 4, 4, 6, 6, 8]


class TestReparameterize:
    def setup_method(self):
        self.f = analytic_qfim(SourceConfiguration((0.1, 0.7), (0.4, 0.6)))

    def test_identity(self):
        np.testing.assert_array_equal(reparameterize(self.f, np.eye(2)).entries, self.f.entries)

    def test_scaling(self):
        np.testing.assert_array_equal(reparameterize(self.f, 2 * np.eye(2)).entries, 4 * self.f.entries)

    def test_near_singular_warns(self):
        with pytest.warns(UserWarning, match="near-singular"):
            reparameterize(self.f, np.array([[1.0, 1.0], [1.0, 1.0 + 1e-13]]))

    def test_singular_raises(self):
        with pytest.raises(SingularTransform):
            reparameterize(self.f, np.array([[1.0, 2.0], [2.0, 4.0]]))

    def test_centroid_half_separation_against_oracle(self):
        # a_1 = c - s, a_2 = c + s
        config = SourceConfiguration((0.2, 0.9), (0.5, 0.5))
        b = centroid_separation_transform()
        state = build_truncated_state(config, PSFModel(), dim=60)
        d1, d2 = state.drho
        direct = spectral_qfim(state.rho, [d1 + d2, -d1 + d2])
        moved = reparameterize(analytic_qfim(config), b, labels=("c", "s"))
        np.testing.assert_allclose(moved.entries, direct, atol=1e-8)
        assert moved.labels == ("c", "s")

    def test_preserves_precise(self):
        f = analytic_qfim(equispaced(3, 2e-3), dps="auto")
        g = reparameterize(f, 2 * np.eye(3))
        assert g.precise is not None
        np.testing.assert_allclose(eigen_report(g).eigenvalues, 4 * eigen_report(f).eigenvalues, rtol=1e-12)


class TestCRB:
    def test_scalar_arithmetic(self):
        res = crb_bound(FisherMatrix(np.diag([4.0, 4.0]), "quantum"), PhotonBudget(1000, 0.1))
        np.testing.assert_allclose(res.covariance, np.diag([0.0025, 0.0025]))
        assert res.support_dim == 2
        assert res.bounded.all()

    def test_rank_one(self):
        res = crb_bound(FisherMatrix([[1.0, 1.0], [1.0, 1.0]], "classical"), PhotonBudget(10, 0.5))
        assert res.support_dim == 1
        assert not res.bounded.any()

    def test_rank_two_qfim(self):
        res = crb_bound(qubit_qfim(equispaced(3, 1e-3)), PhotonBudget(100, 0.5))
        assert res.support_dim == 2
        assert np.all(np.isnan(res.variances))

    def test_pseudo_inverse_on_support(self, rng):
        m = rng.normal(size=(4, 2))
        f = FisherMatrix(m @ m.T, "quantum")
        budget = PhotonBudget(50, 0.2)
        res = crb_bound(f, budget)
        proj = res.support_basis @ res.support_basis.T
        np.testing.assert_allclose(budget.photons * res.covariance @ f.entries, proj, atol=1e-8)
