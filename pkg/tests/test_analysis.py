import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from epiabc.analysis import (
    histograms,
    nearest_rank,
    posterior_csv_text,
    project,
    read_posterior_csv,
)
from epiabc.errors import EmptyPosterior, MalformedCsv
from epiabc.inference import PosteriorSample
from epiabc.model import ModelParams
from epiabc.prior import PriorSpec


class TestNearestRank:
    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200),
           st.floats(0.5, 100))
    def test_matches_inverted_cdf(self, values, p):
        expected = np.percentile(values, p, method="inverted_cdf")
        assert nearest_rank(values, p) == expected

    def test_hundred_samples(self):
        values = np.arange(1, 101)
        assert nearest_rank(values, 5) == 5
        assert nearest_rank(values, 50) == 50
        assert nearest_rank(values, 95) == 95

    def test_axis(self):
        values = np.arange(12.0).reshape(4, 3)[::-1]
        np.testing.assert_array_equal(nearest_rank(values, 50), [3, 4, 5])


class TestProject:
    def test_single_sample_degenerate(self, small_series):
        p = ModelParams(0.3, 10, 0.5, 0.05, 0.2, 0.01, 0.5, 1.0).as_array()
        bands = project(p, small_series, days=30, seed=1, keep_trajectories=True)
        np.testing.assert_array_equal(bands.lower, bands.median)
        np.testing.assert_array_equal(bands.upper, bands.median)
        np.testing.assert_array_equal(bands.trajectories[0], bands.median)

    def test_zero_rates_flat(self, small_series):
        params = np.zeros((5, 8))
        bands = project(params, small_series, days=20)
        flat = np.repeat(np.array(small_series.day0)[:, None], 20, axis=1)
        for arr in (bands.lower, bands.median, bands.upper):
            np.testing.assert_array_equal(arr, flat)

    def test_ordering_and_csv(self, small_series, rng_np):
        params = rng_np.uniform(0, 1, size=(40, 8)) * [1, 100, 2, 1, 1, 1, 1, 2]
        bands = project(params, small_series, days=25, seed=3)
        assert (bands.lower <= bands.median).all() and (bands.median <= bands.upper).all()
        lines = bands.to_csv().splitlines()
        assert lines[0] == "day,observable,p05,p50,p95"
        assert lines[1].startswith("0,A,") and lines[3].startswith("0,D,")
        assert len(lines) == 1 + 25 * 3
        assert bands.to_csv() == project(params, small_series, days=25, seed=3).to_csv()

    def test_true_params_cover_data(self, small_series):
        from conftest import SMALL_TRUE_PARAMS
        params = np.tile(SMALL_TRUE_PARAMS.as_array(), (100, 1))
        bands = project(params, small_series, days=14, seed=9)
        assert bands.day_coverage(small_series.window()) >= 0.6
        assert 0 <= bands.coverage(small_series.window()) <= 1

    def test_errors(self, small_series):
        with pytest.raises(EmptyPosterior):
            project(np.zeros((0, 8)), small_series)
        with pytest.raises(ValueError):
            project(np.zeros((1, 8)), small_series, percentiles=(60, 95))


class TestHistograms:
    def test_identical_samples(self):
        params = np.tile([0.5, 50, 1, 0.5, 0.5, 0.5, 0.5, 1], (100, 1))
        out = histograms(params, PriorSpec(), bins=20)
        for entry in out["parameters"].values():
            assert sum(c > 0 for c in entry["counts"]) == 1

    def test_counts_sum(self, rng_np):
        params = rng_np.uniform(size=(137, 8))
        out = histograms(params, PriorSpec(), bins=7)
        assert out["sample_count"] == 137
        for entry in out["parameters"].values():
            assert sum(entry["counts"]) == 137 and len(entry["edges"]) == 8

    def test_single_bin(self, rng_np):
        out = histograms(rng_np.uniform(size=(10, 8)), PriorSpec(), bins=1)
        assert out["parameters"]["alpha"]["counts"] == [10]
        assert out["parameters"]["alpha"]["edges"] == [0.0, 100.0]

    def test_errors(self):
        with pytest.raises(EmptyPosterior):
            histograms(np.zeros((0, 8)), PriorSpec())
        with pytest.raises(ValueError):
            histograms(np.zeros((1, 8)), PriorSpec(), bins=0)


class TestPosteriorCsv:
    def test_round_trip_exact(self, tmp_path, rng_np):
        samples = [PosteriorSample(ModelParams.from_array(rng_np.uniform(size=8)),
                                   float(rng_np.uniform() * 1e5), r, i)
                   for r, i in [(0, 3), (0, 9), (2, 1)]]
        path = tmp_path / "post.csv"
        path.write_text(posterior_csv_text(samples))
        table = read_posterior_csv(path)
        assert len(table) == 3
        np.testing.assert_array_equal(table.params, [s.params.as_array() for s in samples])
        np.testing.assert_array_equal(table.distance, [s.distance for s in samples])
        np.testing.assert_array_equal(table.run, [0, 0, 2])
        assert table.as_params()[2] == samples[2].params

    def test_empty(self, tmp_path):
        path = tmp_path / "post.csv"
        path.write_text(posterior_csv_text([]))
        assert len(read_posterior_csv(path)) == 0

    def test_bad_header(self, tmp_path):
        path = tmp_path / "post.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(MalformedCsv):
            read_posterior_csv(path)
