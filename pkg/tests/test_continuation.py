import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softscat import continuation
from softscat.continuation import (
    FrequencyGrid,
    MultiFrequencyData,
    PathLengthError,
    PathRecord,
    ScifConfig,
    cif,
    expected_path_length,
    run_path,
    run_trial,
    run_trials,
    scif,
    scif_sample_path,
    splitmix64,
    synthesize,
    trial_rng,
)
from softscat.curvekit import area_error, circle, make_random_circle, sample_equispaced, star
from softscat.forward import ScatteringSetup, forward_map
from softscat.sfopt import OptimizerSettings, RankDeficiencyError, residual


def hitting_time_oracle(p, n_k):
    """Mean first hitting time of n_k from 0 by a direct linear solve of the chain."""
    # E_i = 1 + p E_{i+1} + q E_{max(i-1,0)}, E_{n_k} = 0
    q = 1 - p
    A = np.eye(n_k)
    for i in range(n_k):
        if i + 1 < n_k:
            A[i, i + 1] -= p
        A[i, max(i - 1, 0)] -= q
    return float(np.linalg.solve(A, np.ones(n_k))[0])


@pytest.fixture(scope="module")
def disk_data():
    return synthesize(circle(1.3), FrequencyGrid.up_to(2.0))


class TestSplitMix:
    def test_reference_outputs(self):
        # the published SplitMix64 sequence for state 0: outputs of states 0 and golden ratio increments
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4

    def test_trial_streams_differ(self):
        a = trial_rng(0, 0).random(4)
        b = trial_rng(0, 1).random(4)
        assert not np.array_equal(a, b)

    def test_trial_stream_reproducible(self):
        assert np.array_equal(trial_rng(42, 3).random(8), trial_rng(42, 3).random(8))


class TestGrid:
    def test_values(self):
        grid = FrequencyGrid()
        assert len(grid) == 117
        assert grid[0] == 1.0 and grid[116] == 30.0
        assert np.all(np.diff(grid.values) > 0)

    def test_up_to(self):
        assert len(FrequencyGrid.up_to(10.0)) == 37
        assert FrequencyGrid.up_to(8.0)[-1] == 8.0

    @pytest.mark.parametrize("kwargs", [dict(n=0), dict(k_min=0.0), dict(dk=-0.25)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            FrequencyGrid(**kwargs)

    def test_mismatched_data_rejected(self, disk_data):
        with pytest.raises(ValueError):
            MultiFrequencyData(disk_data.grid, disk_data.setups[:-1], disk_data.data)
        swapped = list(disk_data.setups)
        swapped[0] = ScatteringSetup(7.0)
        with pytest.raises(ValueError):
            MultiFrequencyData(disk_data.grid, swapped, disk_data.data)


class TestPaths:
    def test_deterministic_ascent(self):
        path = scif_sample_path(ScifConfig(p=1.0), 117, np.random.default_rng(0))
        assert path.indices == list(range(1, 118))
        assert len(path) == 117

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.52, 1.0), st.integers(1, 40), st.integers(0, 2**32 - 1))
    def test_validity(self, p, n_k, seed):
        path = scif_sample_path(ScifConfig(p=p), n_k, np.random.default_rng(seed))
        assert path.is_valid(n_k)

    def test_invalid_paths_detected(self):
        assert not PathRecord([1, 3]).is_valid(3)
        assert not PathRecord([1, 2]).is_valid(3)
        assert not PathRecord([1, 2, 3, 2, 3]).is_valid(3)
        assert not PathRecord([1, 1, 2]).is_valid(2)
        assert PathRecord([0, 0, 1, 0, 1, 2]).is_valid(2)

    def test_grid_indices_reflect_to_lowest(self):
        assert PathRecord([0, 1, 0, 1, 2]).grid_indices() == [0, 0, 0, 0, 1]

    def test_reproducible(self):
        a = scif_sample_path(ScifConfig(), 117, trial_rng(5, 2))
        b = scif_sample_path(ScifConfig(), 117, trial_rng(5, 2))
        assert a.indices == b.indices

    @pytest.mark.parametrize("p", [0.55, 0.603, 0.75, 1.0])
    @pytest.mark.parametrize("n_k", [1, 2, 10, 117])
    def test_expected_length_formula_matches_chain_solve(self, p, n_k):
        assert expected_path_length(p, n_k) == pytest.approx(hitting_time_oracle(p, n_k), rel=1e-10)

    def test_quoted_mean_length(self):
        # "an average of 567 steps" for p = 0.603 and 117 frequencies
        rng = np.random.default_rng(2024)
        lengths = [len(scif_sample_path(ScifConfig(p=0.603), 117, rng)) for _ in range(10_000)]
        assert abs(np.mean(lengths) - 567) < 0.05 * 567

    @pytest.mark.parametrize("p", [0.537, 0.55])
    def test_small_bias_mean_follows_exact_formula(self, p):
        # the reflection correction is several percent of N/(2p-1) at small bias
        rng = np.random.default_rng(int(p * 1000))
        mean = np.mean([len(scif_sample_path(ScifConfig(p=p), 117, rng)) for _ in range(4000)])
        exact = expected_path_length(p, 117)
        assert abs(mean - exact) < 0.02 * exact
        assert abs(exact - 117 / (2 * p - 1)) > 0.035 * exact

    def test_three_quarter_walk_is_longer_than_quoted(self):
        # the quoted "approximately 125 steps" for p = 3/4 is not what this walk produces
        assert expected_path_length(0.75, 117) == pytest.approx(233, abs=1)

    def test_cap_triggers_redraw(self):
        rng = np.random.default_rng(0)
        path = scif_sample_path(ScifConfig(p=0.6, max_path_len=45), 20, rng)
        assert path.is_valid(20) and len(path) <= 45 and path.redraws > 0

    def test_cap_exhaustion(self):
        with pytest.raises(PathLengthError):
            scif_sample_path(ScifConfig(p=0.51, max_path_len=10), 10, np.random.default_rng(1))

    @pytest.mark.parametrize("kwargs", [dict(p=0.5), dict(p=1.2), dict(n_trials=0)])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            ScifConfig(**kwargs)

    def test_cap_below_grid_rejected(self):
        with pytest.raises(ValueError):
            ScifConfig(max_path_len=5).path_cap(10)


class TestCif:
    def test_truth_init_stays_at_floor(self):
        truth = star()
        data = synthesize(truth, FrequencyGrid.up_to(2.0))
        floor = max(np.linalg.norm(residual(truth, d, s)) for d, s in zip(data.data, data.setups))
        res = cif(data, truth)
        assert max(res.residuals) < 10 * max(floor, 1e-12)

    def test_convex_target(self):
        truth = circle(1.3)
        data = synthesize(truth, FrequencyGrid.up_to(5.0))
        res = cif(data, settings=OptimizerSettings(method="sd", filter="gaussian"))
        eps = area_error(sample_equispaced(truth, 5.0), sample_equispaced(res.curve, 5.0))
        assert eps < 1e-3

    def test_per_visit_residual_non_increasing(self, disk_data):
        res = cif(disk_data)
        for v in res.path.visits:
            assert v.residual_out <= v.residual_in
            assert v.admissible

    def test_warm_start_coherence(self, disk_data):
        res = cif(disk_data)
        for m in range(1, len(res.curves)):
            setup = disk_data.setups[m]
            r_in = np.linalg.norm(residual(res.curves[m - 1], disk_data.data[m], setup))
            assert r_in == res.path.visits[m].residual_in

    def test_failed_visit_passes_curve_forward(self, disk_data, monkeypatch):
        calls = []

        def failing(curve, data, setup, settings):
            calls.append(curve)
            raise RankDeficiencyError("forced")

        monkeypatch.setattr(continuation, "solve_single_frequency", failing)
        init = circle(1.1)
        res = cif(disk_data, init)
        assert all(c is init for c in calls)
        assert res.curve is init
        assert all(v.reason.startswith("error") for v in res.path.visits)

    def test_path_outside_grid(self, disk_data):
        with pytest.raises(ValueError):
            run_path(disk_data, circle(), PathRecord([1, 2, 3, 4, 5, 6]))


class TestScif:
    def test_unit_p_equals_cif(self, disk_data):
        path = scif_sample_path(ScifConfig(p=1.0), len(disk_data.grid), np.random.default_rng(0))
        a = scif(disk_data, None, path)
        b = cif(disk_data)
        assert np.array_equal(a.curve.coeffs_z, b.curve.coeffs_z)
        assert a.residuals == b.residuals

    def test_oscillating_path_on_convex_target(self, disk_data):
        n_k = len(disk_data.grid)
        indices = [1, 2, 1, 2, 1] + list(range(2, n_k + 1))
        path = PathRecord(indices)
        assert path.is_valid(n_k)
        truth = sample_equispaced(circle(1.3), 2.0)
        e_cif = area_error(truth, sample_equispaced(cif(disk_data).curve, 2.0))
        e_osc = area_error(truth, sample_equispaced(scif(disk_data, None, path).curve, 2.0))
        assert e_osc <= 2 * max(e_cif, 1e-6)

    def test_invalid_path(self, disk_data):
        with pytest.raises(ValueError):
            scif(disk_data, None, PathRecord([1, 3, 5]))


class TestTrials:
    def test_random_circle_init_reproducible(self):
        a = make_random_circle(trial_rng(3, 1))
        b = make_random_circle(trial_rng(3, 1))
        assert np.array_equal(a.coeffs_z, b.coeffs_z)

    def test_single_trial_reduces_to_run(self, disk_data):
        summary = run_trials("scif", 1, 11, disk_data, truth=circle(1.3))
        rng = trial_rng(11, 0)
        path = scif_sample_path(ScifConfig(), len(disk_data.grid), rng)
        direct = scif(disk_data, None, path)
        best = summary.best_by_residual
        assert best.path.indices == path.indices
        assert np.array_equal(best.curve.coeffs_z, direct.curve.coeffs_z)
        assert best.chamfer is not None and summary.best_by_chamfer is best
        assert np.all(summary.spread == 0)

    def test_order_independent(self, disk_data):
        a = run_trials("random-init-cif", 3, 7, disk_data)
        b = run_trials("random-init-cif", 3, 7, disk_data, trial_indices=[2, 0, 1])
        for ta, tb in zip(a.trials, b.trials):
            assert ta.seed == tb.seed and ta.residual == tb.residual
            assert np.array_equal(ta.curve.coeffs_z, tb.curve.coeffs_z)
        assert np.array_equal(a.spread, b.spread)

    def test_seeds_offset_from_base(self, disk_data):
        summary = run_trials("random-init-cif", 2, 100, disk_data)
        assert [t.seed for t in summary.trials] == [100, 101]

    def test_trial_failure_is_recorded(self, disk_data, monkeypatch):
        def broken(*args, **kwargs):
            raise np.linalg.LinAlgError("forced")

        monkeypatch.setattr(continuation, "run_path", broken)
        res = run_trial("scif", 0, 0, disk_data)
        assert not res.ok and res.residual == float("inf")
        summary = continuation.summarize([res], 2.0)
        assert summary.ensemble is None

    @pytest.mark.parametrize("kwargs", [dict(mode="walk"), dict(n_trials=0), dict(trial_indices=[0, 0])])
    def test_validation(self, disk_data, kwargs):
        args = dict(mode="scif", n_trials=2, base_seed=0, data=disk_data) | kwargs
        with pytest.raises(ValueError):
            run_trials(**args)


def test_synthesize_matches_forward_map():
    grid = FrequencyGrid(1.0, 0.5, 2)
    data = synthesize(star(), grid)
    assert np.array_equal(data.data[1].values, forward_map(star(), ScatteringSetup(1.5)).values)
    assert len(data.truncated(1).grid) == 1
