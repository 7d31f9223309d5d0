import math

import numpy as np
import pytest
from scipy import stats

from spatialdesign.exceptions import PosteriorError, UtilityError
from spatialdesign.model import Prior
from spatialdesign.problems import prepare_design
from spatialdesign import utility as utility_mod
from spatialdesign.utility import (
    UtilitySample,
    estimate_design_utility,
    estimate_utility,
    export_utility_csv,
    kl_gaussian,
    utility_draw,
)

from conftest import gaussian_spec, point_prior


def mc_kl_oracle(mu0, s0, mu1, s1, n=1_000_000, seed=0):
    """Monte-Carlo estimate of E_posterior[log posterior - log prior]."""
    rng = np.random.default_rng(seed)
    draws = rng.multivariate_normal(mu1, s1, size=n)
    vals = stats.multivariate_normal.logpdf(draws, mu1, s1) - stats.multivariate_normal.logpdf(
        draws, mu0, s0
    )
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n))


class TestKlGaussian:
    def test_identical_distributions_zero(self):
        mu = np.array([0.3, -1.0])
        s = np.array([[2.0, 0.4], [0.4, 1.0]])
        assert abs(kl_gaussian(mu, s, mu, s)) < 1e-10

    def test_unit_shift(self):
        assert kl_gaussian([0.0], [[1.0]], [1.0], [[1.0]]) == pytest.approx(0.5)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(3)
        for seed in range(3):
            a = rng.normal(size=(3, 3))
            s0 = a @ a.T + np.eye(3)
            b = rng.normal(size=(3, 3))
            s1 = b @ b.T + np.eye(3)
            mu0, mu1 = rng.normal(size=3), rng.normal(size=3)
            closed = kl_gaussian(mu0, s0, mu1, s1)
            mc, se = mc_kl_oracle(mu0, s0, mu1, s1, n=200_000, seed=seed)
            assert abs(closed - mc) < 3.0 * se

    def test_non_negative(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            a = rng.normal(size=(2, 2))
            s0 = a @ a.T + 0.5 * np.eye(2)
            b = rng.normal(size=(2, 2))
            s1 = b @ b.T + 0.5 * np.eye(2)
            assert kl_gaussian(rng.normal(size=2), s0, rng.normal(size=2), s1) >= 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kl_gaussian([0.0], [[1.0]], [0.0, 1.0], np.eye(2))


class FlatDesign:
    """Zero-information likelihood: the posterior is the prior."""

    def __init__(self, spec):
        self.spec = spec
        self.layout = spec.layout()
        self.coords = ()

    def simulate(self, theta, rng):
        return np.zeros(1)

    def make_working_loglik(self, y, mz=None, rng=None):
        return lambda w: 0.0


def fixed_cov_spec(priors_override=None):
    override = {
        "taildown:sill": point_prior(1.0),
        "taildown:range": point_prior(200.0),
        "nugget": point_prior(0.2),
    }
    if priors_override:
        override.update(priors_override)
    return gaussian_spec(priors_override=override)


class TestUtilityDraw:
    def test_zero_information_likelihood(self):
        spec = fixed_cov_spec()
        u = utility_draw(FlatDesign(spec), np.random.default_rng(0))
        assert abs(u) < 1e-2

    def test_conjugate_matches_analytic_kl(self, y_network):
        spec = fixed_cov_spec({"beta:intercept": Prior("normal", 0.5, 2.0)})
        prepared = prepare_design(spec, y_network, (101, 102, 103))
        seed = 31
        # replicate the draw sequence to obtain the analytic answer
        rng = np.random.default_rng(seed)
        layout = prepared.layout
        theta = layout.natural_to_draw(layout.sample_natural(rng))
        y = prepared.simulate(theta, rng)
        sigma = prepared.sigma(theta.cov_spec)
        si = np.linalg.inv(sigma)
        X = prepared.X
        prec = X.T @ si @ X + 1.0 / 2.0
        V = np.linalg.inv(prec)
        m = V @ (X.T @ si @ y + np.array([0.5]) / 2.0)
        expected = kl_gaussian(np.array([0.5]), np.array([[2.0]]), m, V)

        got = utility_draw(prepared, np.random.default_rng(seed))
        assert got == pytest.approx(expected, abs=1e-3)

    def test_laplace_close_to_mh_utility(self, y_network):
        spec = gaussian_spec(
            fixed_effects=("intercept", "temp"),
            priors_override={
                "beta:intercept": Prior("normal", 0.0, 2.0),
                "beta:temp": Prior("normal", 0.0, 1.0),
                "taildown:sill": Prior("lognormal", 0.0, 0.1),
                "taildown:range": point_prior(200.0),
                "nugget": point_prior(0.2),
            },
        )
        prepared = prepare_design(spec, y_network, (101, 102, 103))
        u_lap = utility_draw(prepared, np.random.default_rng(5), method="laplace")
        u_mh = utility_draw(
            prepared, np.random.default_rng(5), method="mh", mh_iterations=12_000
        )
        assert abs(u_lap - u_mh) <= 0.1 * abs(u_mh)


class TestEstimateUtility:
    def test_mean_median_arithmetic(self):
        sample = UtilitySample(np.array([0.0, 0.0, 0.0, 10.0]), (), "mean")
        assert sample.summary == pytest.approx(2.5)
        sample = UtilitySample(np.array([0.0, 0.0, 0.0, 10.0]), (), "median")
        assert sample.summary == pytest.approx(0.0)

    def test_constant_utility_both_modes(self, monkeypatch):
        monkeypatch.setattr(utility_mod, "utility_draw", lambda p, r, **k: 3.25)
        for mode in ("mean", "median"):
            summary, sample = estimate_utility(object(), 7, mode=mode, rng=0)
            assert summary == 3.25
            assert sample.n_failed == 0

    def test_seeded_runs_bit_reproducible(self, y_network):
        spec = fixed_cov_spec({"beta:intercept": Prior("normal", 0.0, 2.0)})
        prepared = prepare_design(spec, y_network, (101, 103))
        s1, samp1 = estimate_utility(prepared, 5, rng=np.random.default_rng(9))
        s2, samp2 = estimate_utility(prepared, 5, rng=np.random.default_rng(9))
        assert s1 == s2
        assert np.array_equal(samp1.draws, samp2.draws)

    def test_failures_excluded_up_to_tolerance(self, monkeypatch):
        calls = {"n": 0}

        def flaky(prepared, rng, **kwargs):
            calls["n"] += 1
            if calls["n"] % 25 == 0:
                raise PosteriorError("degenerate fit")
            return float(calls["n"])

        monkeypatch.setattr(utility_mod, "utility_draw", flaky)
        summary, sample = estimate_utility(object(), 100, mode="mean", rng=1)
        assert sample.n_failed == 4
        assert len(sample.draws) == 96

    def test_excess_failures_raise(self, monkeypatch):
        def broken(prepared, rng, **kwargs):
            raise PosteriorError("no fit")

        monkeypatch.setattr(utility_mod, "utility_draw", broken)
        with pytest.raises(UtilityError, match="failed"):
            estimate_utility(object(), 10, rng=2)

    def test_mc_error_shrinks_as_root_m(self, monkeypatch):
        rng_global = np.random.default_rng(13)
        monkeypatch.setattr(
            utility_mod, "utility_draw", lambda p, r, **k: float(r.normal(1.0, 0.5))
        )
        sizes = [50, 200, 800]
        ses = []
        for m in sizes:
            sums = [
                estimate_utility(object(), m, mode="mean", rng=rng_global.spawn(1)[0])[0]
                for _ in range(200)
            ]
            ses.append(np.std(sums, ddof=1))
        slope = np.polyfit(np.log(sizes), np.log(ses), 1)[0]
        assert -0.6 < slope < -0.4

    def test_median_robust_to_tail_scaling(self):
        rng = np.random.default_rng(4)
        draws = np.sort(rng.normal(size=51))
        scaled = draws.copy()
        scaled[-5:] = scaled[-5:] * 10.0  # top ~10%, already above the median
        med0 = UtilitySample(draws, (), "median").summary
        med1 = UtilitySample(scaled, (), "median").summary
        mean0 = UtilitySample(draws, (), "mean").summary
        mean1 = UtilitySample(scaled, (), "mean").summary
        assert med0 == med1
        assert mean0 != mean1


def test_estimate_design_utility_wrapper(y_network):
    spec = fixed_cov_spec({"beta:intercept": Prior("normal", 0.0, 2.0)})
    direct, _ = estimate_utility(
        prepare_design(spec, y_network, (101, 103)), 4, rng=np.random.default_rng(3)
    )
    wrapped, _ = estimate_design_utility(
        spec, y_network, (101, 103), 4, rng=np.random.default_rng(3)
    )
    assert wrapped == direct


def test_export_csv(tmp_path):
    sample = UtilitySample(np.array([1.0, 2.0, 3.0]), (), "median")
    path = tmp_path / "draws.csv"
    export_utility_csv(sample, path)
    text = path.read_text().strip().splitlines()
    assert text[0] == "draw_index,utility"
    assert len(text) == 4
