import math

import numpy as np
import pytest

from locfisher.cfim import (
    DetectionKind,
    DetectionModel,
    classical_fisher,
    direct_imaging_cfim,
    direct_imaging_probabilities,
    spade_cfim,
    spade_probabilities,
)
from locfisher.errors import ConfigurationError, QuadratureNonConvergence
from locfisher.model import PSFModel, SourceConfiguration
from locfisher.qfim_analytic import analytic_qfim
from locfisher.qfim_numeric import converged_qfim

from conftest import equispaced

DIRECT = DetectionModel(DetectionKind.DIRECT_IMAGING)


def finite_difference(prob_fn, config, h=1e-6):
    rows = []
    for j in range(config.n):
        up, dn = list(config.alphas), list(config.alphas)
        up[j] += h
        dn[j] -= h
        rows.append((prob_fn(SourceConfiguration(tuple(up), config.weights))
                     - prob_fn(SourceConfiguration(tuple(dn), config.weights))) / (2 * h))
    return np.array(rows)


class TestSpadeProbabilities:
    def test_ground_state(self):
        pm = spade_probabilities(SourceConfiguration((0.0,), (1.0,)))
        assert pm.probs[0] == 1.0
        np.testing.assert_array_equal(pm.probs[1:], 0.0)
        np.testing.assert_array_equal(pm.dprobs, 0.0)

    def test_poisson_values(self):
        pm = spade_probabilities(SourceConfiguration((0.5,), (1.0,)))
        assert pm.probs[0] == pytest.approx(math.exp(-0.25), rel=1e-14)
        assert pm.probs[1] == pytest.approx(0.25 * math.exp(-0.25), rel=1e-14)

    def test_normalization(self):
        pm = spade_probabilities(SourceConfiguration((-1.2, 0.3, 2.5), (0.2, 0.3, 0.5)),
                                 DetectionModel(spade_modes=5))
        assert pm.probs.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(pm.dprobs.sum(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(pm.dprobs[:, :-1].sum(axis=1), -pm.dprobs[:, -1], atol=1e-12)

    @pytest.mark.parametrize("center", [0.0, 0.4, "centroid"])
    def test_derivatives_match_finite_differences(self, center):
        model = DetectionModel(spade_modes=6, spade_center=center)
        c = SourceConfiguration((-0.7, 0.2, 1.1), (0.3, 0.3, 0.4))
        if center == "centroid":
            # the centre is fixed by the measurement, not re-derived per perturbation
            model = DetectionModel(spade_modes=6, spade_center=c.centroid)
        fd = finite_difference(lambda cc: spade_probabilities(cc, model).probs, c)
        np.testing.assert_allclose(spade_probabilities(c, model).dprobs, fd, atol=1e-7)

    def test_centroid_center(self):
        c = SourceConfiguration((0.2, 0.6), (0.5, 0.5))
        a = spade_probabilities(c, DetectionModel(spade_center="centroid"))
        b = spade_probabilities(SourceConfiguration((-0.2, 0.2), (0.5, 0.5)))
        np.testing.assert_allclose(a.probs, b.probs, atol=1e-15)


class TestSpadeCFIM:
    @pytest.mark.parametrize("alpha", [1e-4, 0.01, 0.5, 1.0, 1.5])
    def test_single_source_poisson_identity(self, alpha):
        c = spade_cfim(SourceConfiguration((alpha,), (1.0,)))
        assert c.entries[0, 0] == pytest.approx(4.0, abs=1e-6)

    @pytest.mark.parametrize("x", [0.01, 0.2, 0.8])
    def test_symmetric_pair_rank_one(self, x):
        c = spade_cfim(SourceConfiguration((-x, x), (0.5, 0.5))).entries
        assert c[0, 0] == pytest.approx(-c[0, 1], rel=1e-12)
        assert c[0, 0] == pytest.approx(c[1, 1], rel=1e-12)

    def test_rank_one_limit(self):
        ev = np.linalg.eigvalsh(spade_cfim(equispaced(9, 1e-3, centered=True)).entries)[::-1]
        assert ev[1] < 1e-3 * ev[0]

    def test_exchange_equivariance(self):
        c = SourceConfiguration((-0.3, 0.1, 0.7), (0.25, 0.5, 0.25))
        swapped = SourceConfiguration((0.7, 0.1, -0.3), (0.25, 0.5, 0.25))
        p = [2, 1, 0]
        np.testing.assert_array_equal(spade_cfim(swapped).entries, spade_cfim(c).entries[np.ix_(p, p)])

    def test_floor_drops_empty_outcomes(self):
        pm = spade_probabilities(SourceConfiguration((0.0,), (1.0,)))
        assert np.all(np.isfinite(classical_fisher(pm)))


class TestDirectImaging:
    def test_single_gaussian(self):
        c = direct_imaging_cfim(SourceConfiguration((0.37,), (1.0,)))
        assert c.entries[0, 0] == pytest.approx(4.0, abs=1e-8)

    def test_separated_pair(self):
        c = direct_imaging_cfim(SourceConfiguration((0.0, 10.0), (0.3, 0.7)))
        np.testing.assert_allclose(c.entries, np.diag([1.2, 2.8]), atol=1e-4)

    def test_single_sinc(self):
        # Fisher information of |sinc|^2 for location: 4 pi^2 / 3 per sigma^2, times 4
        c = direct_imaging_cfim(SourceConfiguration((0.0,), (1.0,)), PSFModel("sinc"))
        assert c.entries[0, 0] == pytest.approx(16 * math.pi ** 2 / 3, rel=2e-2)

    def test_rank_one_limit(self):
        ev = np.linalg.eigvalsh(direct_imaging_cfim(equispaced(9, 1e-3, centered=True)).entries)[::-1]
        assert ev[1] < 1e-3 * ev[0]

    def test_pixel_binning_approaches_continuum(self):
        c = SourceConfiguration((-0.2, 0.3), (0.5, 0.5))
        fine = direct_imaging_cfim(c, model=DetectionModel("direct", pixel_width=0.01)).entries
        np.testing.assert_allclose(fine, direct_imaging_cfim(c).entries, rtol=1e-4)
        coarse = direct_imaging_cfim(c, model=DetectionModel("direct", pixel_width=1.0)).entries
        assert np.linalg.eigvalsh(direct_imaging_cfim(c).entries - coarse)[0] > -1e-10

    def test_pixel_probabilities(self):
        c = SourceConfiguration((-0.2, 0.3), (0.5, 0.5))
        model = DetectionModel("direct", pixel_width=0.25)
        pm = direct_imaging_probabilities(c, model=model)
        assert pm.probs.sum() == pytest.approx(1.0, abs=1e-12)
        fd = finite_difference(lambda cc: direct_imaging_probabilities(cc, model=model).probs, c)
        np.testing.assert_allclose(pm.dprobs, fd, atol=1e-7)

    def test_sinc_pixel_probabilities(self):
        c = SourceConfiguration((0.05, 0.2), (0.5, 0.5))
        model = DetectionModel("direct", pixel_width=0.5, half_width=20.0)
        pm = direct_imaging_probabilities(c, PSFModel("sinc"), model)
        fd = finite_difference(lambda cc: direct_imaging_probabilities(cc, PSFModel("sinc"), model).probs, c)
        np.testing.assert_allclose(pm.dprobs, fd, atol=1e-7)

    def test_quadrature_nonconvergence(self):
        # 201 points over a window 220 sigma wide cannot resolve a unit-width PSF
        with pytest.raises(QuadratureNonConvergence):
            direct_imaging_cfim(SourceConfiguration((0.0, 100.0), (0.5, 0.5)),
                                model=DetectionModel("direct", points=201))


class TestLoewner:
    def test_quantum_dominates_classical(self, rng):
        for _ in range(8):
            n = rng.integers(1, 5)
            a = np.sort(rng.uniform(-1.5, 1.5, n))
            if n > 1 and np.min(np.diff(a)) < 0.05:
                continue
            w = rng.uniform(0.2, 1.0, n)
            c = SourceConfiguration(tuple(a), tuple(w / w.sum()))
            q = analytic_qfim(c).entries
            for f in (spade_cfim(c), direct_imaging_cfim(c)):
                assert np.linalg.eigvalsh(q - f.entries)[0] >= -1e-8

    def test_sinc_direct_imaging_below_qfim(self):
        c = SourceConfiguration((0.1, 0.4), (0.5, 0.5))
        q = converged_qfim(c, PSFModel("sinc")).entries
        d = direct_imaging_cfim(c, PSFModel("sinc")).entries
        assert np.linalg.eigvalsh(q - d)[0] >= -1e-6 * np.max(q)


class TestDetectionModel:
    @pytest.mark.parametrize("kwargs", [
        {"spade_modes": 0}, {"points": 100}, {"half_width": 2.0},
        {"pixel_width": 0.0}, {"spade_center": "middle"},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            DetectionModel(**kwargs)
