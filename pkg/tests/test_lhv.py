import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bbmv.bell import PAIRS, TSIRELSON, estimate_chsh, run_trials, standard_quad
from bbmv.errors import InvalidInputError, InvariantError
from bbmv.lhv import (
    VERTICES,
    CorrelationTable,
    LHVMixture,
    LocalLHVModel,
    SettingAwareLHVModel,
    best_lhv_fit,
    decompose_local_point,
    enumerate_deterministic,
    facet_residual,
    lhv_max_chsh,
    local_lhv_sample,
    setting_aware_lhv_sample,
)
from bbmv.quantum import as_density, singlet

from oracles import deterministic_tables, excess_over_facets, minimax_lp, mixture_grid_fit

SINGLET = as_density(singlet())
SINGLET_RESIDUAL = (2 * math.sqrt(2) - 2) / 4
seeds = st.integers(0, 2**32 - 1)
box_points = st.lists(st.floats(-1, 1), min_size=4, max_size=4)


class TestCorrelationTable:
    def test_keys_and_order(self):
        t = CorrelationTable({"a,b": 0.1, ("a", "b_prime"): 0.2, "a_prime,b": 0.3, "a_prime,b_prime": 0.4})
        assert list(t.values()) == [0.1, 0.2, 0.3, 0.4]
        assert t[("a_prime", "b")] == 0.3
        assert t.chsh() == pytest.approx(0.1 - 0.2 + 0.3 + 0.4)

    def test_round_trip(self):
        t = CorrelationTable((0.5, -0.25, 1.0, 0.0))
        assert CorrelationTable.from_dict(t.to_dict()) == t

    def test_rejects_out_of_range(self):
        with pytest.raises((InvariantError, ValueError)):
            CorrelationTable((1.5, 0, 0, 0))

    def test_rejects_missing_pair(self):
        with pytest.raises((InvariantError, ValueError)):
            CorrelationTable({"a,b": 0.1})

    def test_from_state(self):
        t = CorrelationTable.from_state(SINGLET, standard_quad())
        assert abs(t.chsh()) == pytest.approx(TSIRELSON, abs=1e-12)


class TestDeterministic:
    def test_sixteen_distinct_strategies(self):
        strategies = enumerate_deterministic()
        assert len(strategies) == 16
        keys = {(tuple(s.response_1.values()), tuple(s.response_2.values())) for s in strategies}
        assert len(keys) == 16

    def test_all_reach_exactly_two(self):
        for s in enumerate_deterministic():
            assert abs(s.table().chsh()) == 2.0

    def test_max_is_two(self):
        assert lhv_max_chsh() == 2.0

    def test_vertices_match_oracle(self):
        np.testing.assert_array_equal(VERTICES, deterministic_tables())
        for k, s in enumerate(enumerate_deterministic()):
            np.testing.assert_array_equal(s.table().values(), VERTICES[k])

    def test_strategy_validation(self):
        with pytest.raises(InvariantError):
            type(enumerate_deterministic()[0])({"a": 1, "a_prime": 0}, {"b": 1, "b_prime": 1})


class TestMixture:
    def test_validation(self):
        with pytest.raises(InvariantError):
            LHVMixture(tuple([0.5] * 16))
        with pytest.raises(InvariantError):
            LHVMixture((1.0,))

    def test_uniform_is_zero_table(self):
        np.testing.assert_allclose(LHVMixture.uniform().table().values(), 0.0, atol=1e-15)

    def test_round_trip(self, rng):
        mix = LHVMixture.random(rng)
        assert LHVMixture.from_dict(mix.to_dict()) == mix

    def test_random_mixtures_obey_every_facet(self, rng):
        for _ in range(10_000):
            t = LHVMixture.random(rng).table().values()
            assert excess_over_facets(t) <= 1e-12

    @given(seeds)
    @settings(max_examples=200, deadline=None)
    def test_chsh_bound(self, seed):
        assert abs(LHVMixture.random(np.random.default_rng(seed)).chsh()) <= 2 + 1e-9


class TestSampling:
    def test_point_mass_is_deterministic(self, rng):
        strategy = enumerate_deterministic()[5]
        mix = LHVMixture.point_mass(5)
        for s1 in ("a", "a_prime"):
            for s2 in ("b", "b_prime"):
                for _ in range(5):
                    assert local_lhv_sample(mix, s1, s2, rng) == strategy.outcomes(s1, s2)

    def test_local_model_is_non_signaling(self):
        mix = LHVMixture.random(np.random.default_rng(4))
        recs = run_trials(LocalLHVModel(mix), standard_quad(), 400_000, seed=8)
        o1 = recs.outcome_1.astype(float)
        bound = 5 / math.sqrt(100_000)
        for s1 in (0, 1):
            means = [o1[(recs.setting_1 == s1) & (recs.setting_2 == s2)].mean() for s2 in (0, 1)]
            assert abs(means[0] - means[1]) <= bound

    def test_local_model_matches_mixture(self):
        mix = LHVMixture.random(np.random.default_rng(11))
        est = estimate_chsh(run_trials(LocalLHVModel(mix), standard_quad(), 10**6, seed=12))
        for k in range(4):
            assert abs(est.per_pair_means[k] - mix.table().values()[k]) <= 4 * est.per_pair_stderr[k]
        assert abs(est.s_value) <= 2 + 3 * est.standard_error

    def test_setting_aware_reaches_tsirelson(self):
        model = SettingAwareLHVModel(SINGLET).bind(standard_quad())
        est = estimate_chsh(run_trials(model, standard_quad(), 10**6, seed=13))
        assert abs(abs(est.s_value) - TSIRELSON) <= 3 * est.standard_error

    def test_setting_aware_marginals_uniform(self):
        model = SettingAwareLHVModel(SINGLET, standard_quad())
        recs = run_trials(model, standard_quad(), 200_000, seed=14)
        assert recs.outcome_1.mean() == pytest.approx(0.0, abs=4 / math.sqrt(200_000))
        assert recs.outcome_2.mean() == pytest.approx(0.0, abs=4 / math.sqrt(200_000))

    def test_setting_aware_single_trials(self, rng):
        # E = -1 forces opposite outcomes
        target = CorrelationTable((-1.0, -1.0, -1.0, -1.0))
        for _ in range(50):
            o1, o2 = setting_aware_lhv_sample(target, "a", "b_prime", rng)
            assert o1 == -o2

    def test_quantum_target_needs_settings(self, rng):
        with pytest.raises(InvalidInputError):
            setting_aware_lhv_sample(SINGLET, "a", "b", rng)
        with pytest.raises(InvalidInputError):
            SettingAwareLHVModel(SINGLET).sample(np.zeros(3, int), np.zeros(3, int), rng)


class TestFit:
    def test_singlet_residual(self):
        mix, residual = best_lhv_fit(CorrelationTable.from_state(SINGLET, standard_quad()))
        assert residual == pytest.approx(SINGLET_RESIDUAL, abs=1e-12)
        assert abs(mix.chsh()) == pytest.approx(2.0, abs=1e-12)

    def test_matches_lp_oracle_on_tsirelson_point(self):
        t = CorrelationTable.from_state(SINGLET, standard_quad()).values()
        assert minimax_lp(t) == pytest.approx(SINGLET_RESIDUAL, abs=1e-9)

    def test_reproduces_local_tables(self, rng):
        for _ in range(100):
            target = LHVMixture.random(rng).table()
            mix, residual = best_lhv_fit(target)
            assert residual <= 1e-9
            np.testing.assert_allclose(mix.table().values(), target.values(), atol=1e-9)

    def test_vertices_fit_to_themselves(self):
        for k in range(16):
            mix, residual = best_lhv_fit(CorrelationTable(tuple(VERTICES[k])))
            assert residual == 0.0
            # each table has two strategies related by a global sign flip; the lower index wins
            twins = [j for j in range(16) if np.array_equal(VERTICES[j], VERTICES[k])]
            assert len(twins) == 2
            assert mix.weights[twins[0]] == pytest.approx(1.0)

    def test_matches_lp_on_random_targets(self, rng):
        for _ in range(60):
            t = rng.uniform(-1, 1, 4)
            _, residual = best_lhv_fit(CorrelationTable(tuple(t)))
            assert residual == pytest.approx(minimax_lp(t), abs=1e-8)

    @pytest.mark.parametrize("which", ["singlet", "random"])
    def test_grid_oracle(self, which, rng):
        # local points on a 0.05 lattice of the box, kept when every CHSH sign pattern holds
        t = (CorrelationTable.from_state(SINGLET, standard_quad()).values() if which == "singlet"
             else rng.uniform(-1, 1, 4))
        axis = np.linspace(-1, 1, 41)
        grid = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), -1).reshape(-1, 4)
        local = np.ones(len(grid), bool)
        for signs in np.array(np.meshgrid(*[[1, -1]] * 4)).reshape(4, -1).T:
            if np.prod(signs) == -1:
                local &= grid @ signs <= 2 + 1e-12
        grid_best = np.min(np.max(np.abs(grid[local] - t), axis=1))
        _, residual = best_lhv_fit(CorrelationTable(tuple(t)))
        assert residual <= grid_best + 1e-12
        assert grid_best - residual <= 0.025 + 1e-12

    def test_mixture_grid_oracle(self, rng):
        for t in [CorrelationTable.from_state(SINGLET, standard_quad()).values(), rng.uniform(-1, 1, 4)]:
            grid_best, w = mixture_grid_fit(t)
            _, residual = best_lhv_fit(CorrelationTable(tuple(t)))
            assert residual <= grid_best + 1e-12
            assert grid_best - residual <= 1e-6

    def test_pr_box(self):
        mix, residual = best_lhv_fit(CorrelationTable((1.0, -1.0, 1.0, 1.0)))
        assert residual == pytest.approx(0.5, abs=1e-12)
        assert mix.chsh() == pytest.approx(2.0, abs=1e-12)

    @given(box_points)
    @settings(max_examples=300, deadline=None)
    def test_residual_is_facet_excess(self, t):
        mix, residual = best_lhv_fit(CorrelationTable(tuple(t)))
        assert residual == pytest.approx(excess_over_facets(t), abs=1e-9)
        assert residual == pytest.approx(facet_residual(t), abs=1e-9)
        assert abs(mix.chsh()) <= 2 + 1e-9

    @given(box_points)
    @settings(max_examples=300, deadline=None)
    def test_separation_from_two(self, t):
        # any table with |S| > 2 sits at least (|S| - 2)/4 from every local one
        table = CorrelationTable(tuple(t))
        _, residual = best_lhv_fit(table)
        assert residual >= (abs(table.chsh()) - 2) / 4 - 1e-12

    def test_deterministic_tie_break(self):
        t = CorrelationTable.from_state(SINGLET, standard_quad())
        assert best_lhv_fit(t) == best_lhv_fit(t)


class TestDecompose:
    def test_weights_reproduce_point(self, rng):
        for _ in range(500):
            x = LHVMixture.random(rng).table().values()
            w = decompose_local_point(x)
            assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-12)
            np.testing.assert_allclose(w @ VERTICES, x, atol=1e-10)
            assert np.count_nonzero(w > 1e-15) <= 5

    def test_outside_point_rejected(self):
        with pytest.raises(InvalidInputError):
            decompose_local_point([1.0, -1.0, 1.0, 1.0])

    def test_pair_order_constant(self):
        assert PAIRS == (("a", "b"), ("a", "b_prime"), ("a_prime", "b"), ("a_prime", "b_prime"))
