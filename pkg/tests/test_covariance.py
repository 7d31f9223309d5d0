import numpy as np
import pytest

from spatialdesign.covariance import (
    CovParams,
    CovSpec,
    assemble_sigma,
    cholesky_factor,
    exp_cov,
)
from spatialdesign.exceptions import CovarianceError
from spatialdesign.network import Site

from conftest import random_tree_network


class TestExpCov:
    def test_zero_distance_gives_sill(self):
        assert exp_cov(0.0, 2.5, 10.0) == pytest.approx(2.5)

    def test_at_range(self):
        assert exp_cov(10.0, 1.0, 10.0) == pytest.approx(np.exp(-3.0))

    def test_zero_sill(self):
        for h in (0.0, 1.0, 100.0):
            assert exp_cov(h, 0.0, 5.0) == 0.0

    def test_negative_distance_rejected(self):
        with pytest.raises(CovarianceError):
            exp_cov(-1.0, 1.0, 1.0)

    def test_invalid_params(self):
        with pytest.raises(CovarianceError):
            exp_cov(1.0, 1.0, 0.0)
        with pytest.raises(CovarianceError):
            CovParams(-1.0, 1.0)


class TestAssembleSigma:
    def test_nugget_only(self, y_network):
        spec = CovSpec({}, nugget=0.7)
        sigma = assemble_sigma(y_network, [101, 102, 103], spec)
        assert np.allclose(sigma, 0.7 * np.eye(3))

    def test_tailup_unconnected_offdiag_zero(self, y_network):
        spec = CovSpec({"tailup": CovParams(1.0, 1000.0)}, nugget=0.0)
        sigma = assemble_sigma(y_network, [101, 102], spec)
        # 101 and 102 sit on different branches: no shared flow
        assert sigma[0, 1] == 0.0
        assert sigma[1, 0] == 0.0
        assert sigma[0, 0] == pytest.approx(1.0)

    def test_taildown_matches_scalar_kernel(self, y_network):
        # elementwise oracle: exp_cov applied to the hydrologic distances
        sites = [101, 102, 103]
        h12 = y_network.hydrologic_distance(101, 102)
        spec = CovSpec({"taildown": CovParams(1.0, 3.0 * h12)}, nugget=0.0)
        sigma = assemble_sigma(y_network, sites, spec)
        for i, a in enumerate(sites):
            for j, b in enumerate(sites):
                h = y_network.hydrologic_distance(a, b)
                assert sigma[i, j] == pytest.approx(exp_cov(h, 1.0, 3.0 * h12), rel=1e-12)

    def test_component_additivity(self, y_network):
        sites = [101, 102, 103]
        euc = CovParams(0.8, 40.0)
        tu = CovParams(1.3, 25.0)
        td = CovParams(0.5, 60.0)
        full = assemble_sigma(
            y_network, sites, CovSpec({"euclidean": euc, "tailup": tu, "taildown": td}, 0.3)
        )
        parts = (
            assemble_sigma(y_network, sites, CovSpec({"euclidean": euc}, 0.0))
            + assemble_sigma(y_network, sites, CovSpec({"tailup": tu}, 0.0))
            + assemble_sigma(y_network, sites, CovSpec({"taildown": td}, 0.0))
            + 0.3 * np.eye(3)
        )
        assert np.allclose(full, parts, atol=1e-14)

    def test_monotone_decay_taildown(self, line_network):
        spec = CovSpec({"taildown": CovParams(1.0, 30.0)}, nugget=0.0)
        sigma = assemble_sigma(line_network, [1, 2, 3], spec)
        # site 1-2 are 4 m apart, 1-3 are 40 m apart
        assert sigma[0, 1] > sigma[0, 2]

    def test_non_pd_duplicated_sites_reported(self, line_network):
        net = line_network.with_extra_sites([Site(4, 1, 10.0, 10.0, 0.0, {"temp": 1.0})])
        spec = CovSpec({"taildown": CovParams(1.0, 30.0)}, nugget=0.0)
        sigma = assemble_sigma(net, [1, 4, 2], spec)  # sites 1 and 4 coincide
        with pytest.raises(CovarianceError, match="nugget"):
            cholesky_factor(sigma)

    def test_empty_design_rejected(self, y_network):
        with pytest.raises(CovarianceError):
            assemble_sigma(y_network, [], CovSpec({}, 1.0))

    def test_spec_needs_some_variance(self):
        with pytest.raises(CovarianceError):
            CovSpec({}, nugget=0.0)


def test_random_specs_symmetric_and_factorisable():
    # 200 random (network, spec) draws with positive nugget: symmetric
    # within 1e-10, Cholesky succeeds, tail-up off-diagonals exactly zero
    # for flow-unconnected pairs
    rng = np.random.default_rng(7)
    for _ in range(200):
        net = random_tree_network(rng, n_segments=int(rng.integers(2, 8)), n_sites=6)
        comps = {}
        for name in ("euclidean", "tailup", "taildown"):
            if rng.uniform() < 0.6:
                comps[name] = CovParams(float(rng.uniform(0.1, 3.0)), float(rng.uniform(20, 2000)))
        spec = CovSpec(comps, nugget=float(rng.uniform(0.01, 1.0)))
        sites = net.site_ids
        sigma = assemble_sigma(net, sites, spec)
        assert np.max(np.abs(sigma - sigma.T)) < 1e-10
        cholesky_factor(sigma)
        if "tailup" in comps and len(comps) == 1:
            for i, a in enumerate(sites):
                for j, b in enumerate(sites):
                    if i != j and not net.flow_connected(a, b):
                        assert sigma[i, j] == 0.0
