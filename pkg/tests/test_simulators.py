import json
import math

import numpy as np
import pytest

from fbgp_al import simulators as sims
from fbgp_al._motorcycle import MEAN, STDDEV
from fbgp_al.errors import ConfigError, InvalidArgumentError

NAMES = ["gramacy1d", "higdon", "gramacy2d", "branin", "ishigami", "hartmann", "motorcycle"]


class TestMeanFunctions:
    def test_gramacy1d_formula(self):
        x = 1.3
        expected = math.sin(10 * math.pi * x) / (2 * x) + (x - 1) ** 4
        assert sims.mean_oracle(sims.get_simulator("gramacy1d"), [x]) == pytest.approx(expected, rel=1e-14)

    def test_higdon_pieces(self):
        sim = sims.get_simulator("higdon")
        assert sims.mean_oracle(sim, [2.5]) == pytest.approx(math.sin(math.pi / 2) + 0.2 * math.cos(2 * math.pi))
        assert sims.mean_oracle(sim, [15.0]) == pytest.approx(0.5)

    def test_gramacy2d(self):
        assert sims.mean_oracle(sims.get_simulator("gramacy2d"), [1.0, 0.0]) == pytest.approx(math.exp(-1))

    @pytest.mark.parametrize("x", [(-math.pi, 12.275), (math.pi, 2.275), (9.42478, 2.475)])
    def test_branin_global_minima(self, x):
        assert sims.mean_oracle(sims.get_simulator("branin"), x) == pytest.approx(0.397887, abs=1e-5)

    def test_ishigami(self):
        x = (math.pi / 2, math.pi / 2, 1.0)
        assert sims.mean_oracle(sims.get_simulator("ishigami"), x) == pytest.approx(1 + 7 + 0.1)

    def test_hartmann_minimum(self):
        val = sims.mean_oracle(sims.get_simulator("hartmann"), sims.HARTMANN_ARGMIN)
        assert val == pytest.approx(sims.HARTMANN_MIN, abs=1e-4)

    @pytest.mark.parametrize("name", NAMES)
    def test_finite_over_domain(self, name):
        sim = sims.get_simulator(name)
        X = sim.from_unit(sims.latin_hypercube(10_000, sim.dim, np.random.default_rng(0)))
        assert np.all(np.isfinite(sims.mean_oracle(sim, X)))
        assert np.all(sims.noise_std_at(sim, X) >= 0)


class TestMotorcycle:
    def test_table_lengths(self):
        assert len(MEAN) == len(STDDEV) == 101 and min(STDDEV) >= 0

    def test_knots_exact(self):
        sim = sims.get_simulator("motorcycle")
        k = np.linspace(0, 1, 101)[:, None]
        assert np.array_equal(sims.mean_oracle(sim, k), np.array(MEAN))
        assert np.array_equal(sims.noise_std_at(sim, k), np.array(STDDEV))

    def test_linear_between_knots(self):
        sim = sims.get_simulator("motorcycle")
        mid = (np.arange(100) + 0.5) / 100
        got = sims.mean_oracle(sim, mid[:, None])
        np.testing.assert_allclose(got, 0.5 * (np.array(MEAN[:-1]) + np.array(MEAN[1:])), atol=1e-12)

    @pytest.mark.parametrize("suffix", [".json", ".toml"])
    def test_custom_table_file(self, tmp_path, suffix):
        path = tmp_path / f"tbl{suffix}"
        if suffix == ".json":
            path.write_text(json.dumps({"name": "tbl", "mean": [0, 1, 4], "stddev": [0, 0, 0], "domain": [0, 2]}))
        else:
            path.write_text('name = "tbl"\nmean = [0.0, 1.0, 4.0]\nstddev = [0.0, 0.0, 0.0]\ndomain = [0.0, 2.0]\n')
        sim = sims.get_simulator(str(path))
        assert sims.mean_oracle(sim, [1.5]) == pytest.approx(2.5)
        assert sims.evaluate(sim, [1.5], np.random.default_rng(0)) == pytest.approx(2.5)

    def test_bad_table_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x"}))
        with pytest.raises(ConfigError):
            sims.load_table_simulator(path)


class TestEvaluate:
    def test_zero_noise_is_mean(self):
        sim = sims.SimulatorSpec("flat", 1, ((0.0, 1.0),), lambda X: X[:, 0] ** 2, noise_std=0.0)
        assert sims.evaluate(sim, [0.5], np.random.default_rng(0)) == 0.25

    @pytest.mark.parametrize("name,std,x", [("branin", 11.32, (2.0, 5.0)), ("ishigami", 0.187, (0.1, 0.2, 0.3))])
    def test_noise_level(self, name, std, x):
        sim = sims.get_simulator(name)
        rng = np.random.default_rng(0)
        ys = sims.evaluate(sim, np.tile(x, (10_000, 1)), rng)
        assert abs(ys.std() / std - 1) < 0.03

    def test_out_of_domain(self):
        with pytest.raises(InvalidArgumentError):
            sims.evaluate(sims.get_simulator("gramacy1d"), [3.0], np.random.default_rng(0))

    def test_wrong_dimension(self):
        with pytest.raises(InvalidArgumentError):
            sims.evaluate(sims.get_simulator("branin"), [1.0], np.random.default_rng(0))

    def test_seeded_reproducibility(self):
        sim = sims.get_simulator("higdon")
        a = sims.evaluate(sim, np.ones((5, 1)), np.random.default_rng(4))
        b = sims.evaluate(sim, np.ones((5, 1)), np.random.default_rng(4))
        np.testing.assert_array_equal(a, b)

    def test_unknown_name(self):
        with pytest.raises(InvalidArgumentError):
            sims.get_simulator("rosenbrock")


class TestDesigns:
    @pytest.mark.parametrize("n,d", [(1, 1), (3, 2), (10, 6), (50, 3)])
    def test_lhs_stratification(self, n, d):
        U = sims.maximin_lhs(n, d, np.random.default_rng(n + d), candidates=20)
        assert U.shape == (n, d)
        for k in range(d):
            assert sorted(np.floor(U[:, k] * n).astype(int)) == list(range(n))

    def test_two_point_maximin(self):
        U = sims.maximin_lhs(2, 1, np.random.default_rng(0), candidates=64)
        assert abs(U[0, 0] - U[1, 0]) >= 0.5

    def test_maximin_beats_single_draw_on_average(self):
        from scipy.spatial.distance import pdist
        rng = np.random.default_rng(0)
        single = np.mean([pdist(sims.latin_hypercube(5, 2, rng)).min() for _ in range(50)])
        best = np.mean([pdist(sims.maximin_lhs(5, 2, rng)).min() for _ in range(20)])
        assert best > single

    def test_seeded(self):
        a = sims.maximin_lhs(4, 3, np.random.default_rng(9))
        b = sims.maximin_lhs(4, 3, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_pool_1d(self):
        sim = sims.get_simulator("higdon")
        P = sims.grid_pool(sim, np.random.default_rng(0))
        np.testing.assert_allclose(P[:, 0], np.linspace(0, 20, 100))

    def test_pool_2d_full_grid(self):
        P = sims.grid_pool(sims.get_simulator("branin"), np.random.default_rng(0))
        assert P.shape == (10_000, 2) and len({tuple(r) for r in P}) == 10_000

    @pytest.mark.parametrize("name", ["ishigami", "hartmann"])
    def test_pool_subsample_members_of_grid(self, name):
        sim = sims.get_simulator(name)
        rng = np.random.default_rng(0)
        P = sims.grid_pool(sim, rng)
        assert P.shape == (10_000, sim.dim)
        idx = np.rint((P - sim.lower) / (sim.upper - sim.lower) * 99)
        np.testing.assert_allclose(sim.lower + idx / 99 * (sim.upper - sim.lower), P, atol=1e-12)
        assert len({tuple(r) for r in idx.astype(int)}) == 10_000
        assert not np.array_equal(P, sims.grid_pool(sim, rng))
