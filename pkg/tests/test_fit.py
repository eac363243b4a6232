import math

import numpy as np
import pytest

from conftest import TFIT, random_valid_params
from rtbm.cma import minimize
from rtbm.density import log_pdf_many
from rtbm.fit import (FitConfig, _destandardize, decode, encode, fit_density,
                      free_parameter_count, make_objective,
                      negative_log_likelihood)
from rtbm.model import RtbmParams, validate
from rtbm.oracle import StudentTParams, sample_student


class TestNegativeLogLikelihood:
    def test_standard_normal_point(self):
        p = RtbmParams(t=np.eye(2), q=np.eye(2), w=np.zeros((2, 2)),
                       bv=np.zeros(2), bh=np.zeros(2))
        assert negative_log_likelihood(p, [[0.0, 0.0]]) == pytest.approx(
            math.log(2 * math.pi), abs=1e-12)

    def test_additivity(self, tfit_params):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((40, 2))
        b = rng.standard_normal((25, 2))
        joint = negative_log_likelihood(tfit_params, np.vstack([a, b]))
        split = (negative_log_likelihood(tfit_params, a)
                 + negative_log_likelihood(tfit_params, b))
        assert joint == pytest.approx(split, rel=1e-14)

    def test_recorded_loss_on_fresh_draw(self, tfit_params):
        # informational: the fixture's total natural-log NLL on 5000 fresh
        # t-distribution samples lands near the differential-entropy scale
        # (~2.1e4), not near 1.3e4
        tp = StudentTParams(mu=[0.0, 0.0], sigma=[[2.0, -1.0], [-1.0, 4.0]],
                            nu=6.0)
        data = sample_student(tp, 5000, seed=404)
        nll = negative_log_likelihood(tfit_params, data)
        assert math.isfinite(nll)
        print(f"fixture nll on 5000 fresh t samples: {nll:.1f}")
        assert 1.5e4 < nll < 3.0e4

    def test_dimension_mismatch(self, tfit_params):
        with pytest.raises(ValueError, match="width"):
            negative_log_likelihood(tfit_params, np.zeros((5, 3)))


class TestEncodeDecode:
    def test_vector_length(self):
        assert free_parameter_count(2, 2) == 14
        assert free_parameter_count(3, 1) == 3 + 6 + 1 + 3 + 1

    def test_zero_vector_gives_identity_model(self):
        p = decode(np.zeros(14), 2, 2)
        np.testing.assert_array_equal(p.t, np.eye(2))
        np.testing.assert_array_equal(p.q, np.eye(2))
        np.testing.assert_array_equal(p.w, np.zeros((2, 2)))
        np.testing.assert_array_equal(p.bv, np.zeros(2))
        np.testing.assert_array_equal(p.bh, np.zeros(2))

    def test_round_trip(self, tfit_params):
        again = decode(encode(tfit_params), 2, 2)
        for name in ("t", "q", "w", "bv", "bh"):
            np.testing.assert_allclose(getattr(again, name),
                                       getattr(tfit_params, name),
                                       atol=1e-12, rtol=0)

    def test_decode_always_pd(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            p = decode(rng.normal(0, 2, 14), 2, 2)
            assert np.linalg.eigvalsh(p.t)[0] > 0
            assert np.linalg.eigvalsh(p.q)[0] > 0

    def test_wrong_length(self):
        with pytest.raises(ValueError, match="length"):
            decode(np.zeros(13), 2, 2)


class TestMinimize:
    def test_sphere(self):
        res = minimize(lambda x: float(x @ x), 10, x0=0.5 * np.ones(10),
                       sigma0=0.3, max_evals=10000, seed=1)
        assert res.f_best <= 1e-10
        assert res.evals <= 10000

    def test_rosenbrock(self):
        def rosen(x):
            return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)
        res = minimize(rosen, 2, x0=np.zeros(2), sigma0=0.3, max_evals=20000,
                       seed=2)
        assert res.f_best <= 1e-6

    def test_seed_reproducibility(self):
        runs = [minimize(lambda x: float(x @ x), 5, x0=np.ones(5),
                         max_evals=2000, seed=9) for _ in range(2)]
        assert runs[0].trace == runs[1].trace
        assert np.array_equal(runs[0].x_best, runs[1].x_best)

    def test_trace_monotone(self):
        res = minimize(lambda x: float(x @ x), 5, x0=np.ones(5),
                       max_evals=2000, seed=3)
        best = [f for _, f in res.trace]
        assert all(b <= a for a, b in zip(best, best[1:]))

    def test_handles_infinite_objective(self):
        def spiky(x):
            return math.inf if x[0] > 0 else float(x @ x)
        res = minimize(spiky, 3, x0=-np.ones(3), max_evals=3000, seed=4)
        assert math.isfinite(res.f_best)

    def test_dim_guard(self):
        with pytest.raises(ValueError):
            minimize(lambda x: 0.0, 0)


class TestObjective:
    def test_penalty_region_ranks_below_feasible(self, tfit_params):
        rng = np.random.default_rng(11)
        data = rng.standard_normal((100, 2))
        objective = make_objective(data, 2, 2, "full", 1e-12)
        good = objective(encode(tfit_params))
        # giant W drives the Schur matrix indefinite
        bad_params = RtbmParams(t=TFIT["t"], q=TFIT["q"],
                                w=20 * np.asarray(TFIT["w"]), bv=TFIT["bv"],
                                bh=TFIT["bh"])
        bad = objective(np.concatenate([
            encode(tfit_params)[:6],
            (20 * np.asarray(TFIT["w"])).ravel(),
            TFIT["bv"], TFIT["bh"]]))
        assert not validate(bad_params).valid
        assert math.isfinite(good)
        assert bad > 1e9 > good


class TestStandardization:
    def test_destandardize_is_exact_change_of_variables(self):
        # a model of z = (x - mean) / scale, mapped back, must satisfy
        # log p_x(x) = log p_z(z) - sum(log scale) pointwise
        rng = np.random.default_rng(17)
        inner = random_valid_params(rng, 2, 2)
        mean = np.array([3.0, -1.5])
        scale = np.array([2.5, 0.4])
        outer = _destandardize(inner, mean, scale)
        assert validate(outer).valid
        xs = mean + rng.standard_normal((50, 2)) * scale * 3
        zs = (xs - mean) / scale
        expected = log_pdf_many(inner, zs) - np.log(scale).sum()
        np.testing.assert_allclose(log_pdf_many(outer, xs), expected,
                                   atol=1e-10, rtol=0)


class TestFitDensity:
    @pytest.mark.slow
    def test_recovers_1d_gaussian_entropy(self):
        rng = np.random.default_rng(5)
        data = rng.standard_normal((5000, 1))
        res = fit_density(data, FitConfig(n_h=1, restarts=2, max_evals=2500,
                                          seed=11))
        assert validate(res.params).valid
        per_point = res.nll / 5000
        entropy = 0.5 * math.log(2 * math.pi * math.e)
        assert per_point == pytest.approx(entropy, rel=0.02)
        assert res.nll == pytest.approx(
            negative_log_likelihood(res.params, data), abs=1e-9)

    @pytest.mark.slow
    def test_restart_selection_and_determinism(self):
        rng = np.random.default_rng(8)
        data = rng.standard_normal((400, 1)) * 0.7 + 0.2
        cfg = FitConfig(n_h=1, restarts=3, max_evals=400, seed=21)
        a = fit_density(data, cfg)
        b = fit_density(data, cfg)
        assert a.nll == b.nll
        assert np.array_equal(a.params.t, b.params.t)
        best = [f for _, f in a.trace]
        assert all(y <= x for x, y in zip(best, best[1:]))

    def test_empty_data(self):
        with pytest.raises(Exception):
            fit_density(np.zeros((0, 2)), FitConfig(n_h=1))
