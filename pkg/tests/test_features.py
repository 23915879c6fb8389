"""Change-quantile and quantile feature extraction."""

import numpy as np
import pytest

from faultwave import features
from faultwave.features import (
    AGGREGATES,
    CORRIDOR_PAIRS,
    ChangeQuantileSpec,
    change_quantile,
    corridor_changes,
    extract_all,
    extract_selected,
    phase_feature_ids,
    quantile_feature,
    record_feature_ids,
)
from faultwave.synth import ScenarioSpec, WaveformRecord

WORKED_SIGNAL = [-0.4, -0.2, -0.1, 0.5, 0.0]


def make_record(samples):
    spec = ScenarioSpec(kind="fault", fault_type="ag", fault_impedance_ohm=0.01,
                        onset_time_s=0.0)
    return WaveformRecord(samples=np.asarray(samples, dtype=float), sampling_freq_hz=7680.0,
                          label="fault", phase_label=frozenset("a"), location_label="p5",
                          scenario=spec, t_start_s=-0.005)


class TestChangeQuantile:
    def test_worked_example_mean(self):
        value = change_quantile(WORKED_SIGNAL, ChangeQuantileSpec(h=1.0, l=0.0, aggregate="mean"))
        assert value == 0.35

    def test_worked_example_median(self):
        # brute force: the four |differences| are 0.2, 0.1, 0.6, 0.5
        diffs = sorted(abs(WORKED_SIGNAL[i + 1] - WORKED_SIGNAL[i]) for i in range(4))
        expected = (diffs[1] + diffs[2]) / 2
        value = change_quantile(WORKED_SIGNAL, ChangeQuantileSpec(h=1.0, l=0.0, aggregate="median"))
        assert value == pytest.approx(expected, abs=1e-15)
        assert value == pytest.approx(0.35, abs=1e-15)

    def test_constant_signal_is_zero(self):
        for agg in AGGREGATES:
            assert change_quantile(np.ones(50), ChangeQuantileSpec(1.0, 0.0, agg)) == 0.0

    def test_empty_corridor_returns_zero(self):
        # corridor [q0.4, q0.6] of a two-valued signal holds no adjacent pair
        sig = np.array([0.0, 1.0, 0.0, 1.0, 0.0])
        spec = ChangeQuantileSpec(h=0.6, l=0.4, aggregate="mean")
        assert corridor_changes(sig, 0.6, 0.4).size == 0
        assert change_quantile(sig, spec) == 0.0

    def test_invalid_corridor_rejected(self):
        with pytest.raises(ValueError):
            ChangeQuantileSpec(h=0.4, l=0.6)
        with pytest.raises(ValueError):
            ChangeQuantileSpec(h=0.4, l=0.4)
        with pytest.raises(ValueError):
            ChangeQuantileSpec(h=1.2, l=0.0)
        with pytest.raises(ValueError):
            ChangeQuantileSpec(h=1.0, l=0.0, aggregate="max")

    def test_short_signal_rejected(self):
        with pytest.raises(ValueError):
            change_quantile([1.0], ChangeQuantileSpec(1.0, 0.0))

    def test_full_corridor_equals_plain_aggregate(self, rng):
        # (h=1, l=0) must cover every consecutive pair
        for _ in range(20):
            sig = rng.normal(size=40)
            diffs = np.abs(np.diff(sig))
            assert change_quantile(sig, ChangeQuantileSpec(1.0, 0.0, "mean")) == pytest.approx(diffs.mean())
            assert change_quantile(sig, ChangeQuantileSpec(1.0, 0.0, "variance")) == pytest.approx(diffs.var())
            assert change_quantile(sig, ChangeQuantileSpec(1.0, 0.0, "median")) == pytest.approx(np.median(diffs))

    def test_stddev_squared_matches_variance(self, rng):
        for _ in range(20):
            sig = rng.normal(size=60)
            for h, l in CORRIDOR_PAIRS:
                sd = change_quantile(sig, ChangeQuantileSpec(h, l, "stddev"))
                var = change_quantile(sig, ChangeQuantileSpec(h, l, "variance"))
                assert sd * sd == pytest.approx(var, abs=1e-12)

    def test_corridor_monotonicity(self, rng):
        # widening the corridor never loses qualifying pairs
        for _ in range(20):
            sig = rng.normal(size=50)
            for h, l in CORRIDOR_PAIRS:
                inner = corridor_changes(sig, h, l).size
                assert corridor_changes(sig, 1.0, 0.0).size >= inner
                if l >= 0.2:
                    assert corridor_changes(sig, h, l - 0.2).size >= inner
                if h <= 0.8:
                    assert corridor_changes(sig, h + 0.2, l).size >= inner


class TestQuantileFeature:
    def test_median_of_odd_length(self):
        assert quantile_feature([1, 2, 3, 4, 5], 0.5) == 3.0

    def test_linear_interpolation_rule(self):
        # oracle: index (n-1)*p between order statistics
        assert quantile_feature([0.0, 10.0], 0.25) == 2.5

    def test_constant_signal(self):
        for p in features.QUANTILE_LEVELS:
            assert quantile_feature(np.full(9, 4.2), p) == 4.2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            quantile_feature([], 0.5)

    def test_interpolation_against_sorted_oracle(self, rng):
        for _ in range(10):
            sig = rng.normal(size=17)
            s = np.sort(sig)
            for p in (0.1, 0.4, 0.9):
                pos = (len(s) - 1) * p
                lo = int(np.floor(pos))
                frac = pos - lo
                expected = s[lo] * (1 - frac) + s[min(lo + 1, len(s) - 1)] * frac
                assert quantile_feature(sig, p) == pytest.approx(expected)


class TestExtractAll:
    def test_census(self):
        ids = phase_feature_ids()
        assert len(ids) == 69
        assert sum(1 for f in ids if f.startswith("cq_")) == 60
        assert sum(1 for f in ids if f.startswith("q")) == 9
        assert len(CORRIDOR_PAIRS) == 15
        assert len(record_feature_ids()) == 207

    def test_shape_and_stable_ids(self, bolted_ag_record):
        fv1 = extract_all(bolted_ag_record)
        fv2 = extract_all(bolted_ag_record)
        assert len(fv1) == 207
        assert fv1.feature_ids == fv2.feature_ids == record_feature_ids()
        np.testing.assert_array_equal(fv1.values, fv2.values)

    def test_zero_record(self):
        rec = make_record(np.zeros((3, 64)))
        fv = extract_all(rec)
        np.testing.assert_array_equal(fv.values, np.zeros(207))

    def test_scaling_linearity_of_cq_mean(self, bolted_ag_record):
        from dataclasses import replace

        fv1 = extract_all(bolted_ag_record)
        fv2 = extract_all(replace(bolted_ag_record, samples=2.0 * bolted_ag_record.samples))
        for i, fid in enumerate(fv1.feature_ids):
            if features.aggregate_of(fid) == "mean":
                assert fv2.values[i] == pytest.approx(2.0 * fv1.values[i], rel=1e-12)

    def test_phase_permutation_permutes_blocks(self, bolted_ag_record):
        fv = extract_all(bolted_ag_record)
        swapped = make_record(bolted_ag_record.samples[[1, 0, 2]])
        fv_swapped = extract_all(swapped)
        np.testing.assert_array_equal(fv_swapped.values[:69], fv.values[69:138])
        np.testing.assert_array_equal(fv_swapped.values[69:138], fv.values[:69])
        np.testing.assert_array_equal(fv_swapped.values[138:], fv.values[138:])


class TestExtractSelected:
    SELECTION = ["cq_h100_l000_mean", "cq_h080_l000_mean", "cq_h100_l020_mean",
                 "cq_h060_l000_mean", "q90"]

    def test_length_and_order(self, bolted_ag_record):
        fv = extract_selected(bolted_ag_record, self.SELECTION)
        assert len(fv) == 15
        assert fv.feature_ids[0] == "ia_cq_h100_l000_mean"
        assert fv.feature_ids[5] == "ib_cq_h100_l000_mean"
        assert fv.feature_ids[10] == "ic_cq_h100_l000_mean"
        full = extract_all(bolted_ag_record)
        lookup = dict(zip(full.feature_ids, full.values))
        for fid, val in zip(fv.feature_ids, fv.values):
            assert val == lookup[fid]

    def test_duplicate_rejected(self, bolted_ag_record):
        with pytest.raises(ValueError):
            extract_selected(bolted_ag_record, ["q90"] * 5)

    def test_unknown_id_rejected(self, bolted_ag_record):
        with pytest.raises(ValueError):
            extract_selected(bolted_ag_record, self.SELECTION[:4] + ["bogus"])

    def test_wrong_count_rejected(self, bolted_ag_record):
        with pytest.raises(ValueError):
            extract_selected(bolted_ag_record, self.SELECTION[:4])


class TestFeatureTableIO:
    def test_round_trip(self, tmp_path, bolted_ag_record):
        rows = [(f"rec_{i}", bolted_ag_record, extract_all(bolted_ag_record)) for i in range(3)]
        path = tmp_path / "features.csv"
        features.write_feature_table(path, rows)
        ids, labels, phases, locs, X, fids = features.read_feature_table(path)
        assert ids == ["rec_0", "rec_1", "rec_2"]
        assert labels == ["fault"] * 3
        assert phases == ["a"] * 3
        assert locs == ["p5"] * 3
        assert fids == record_feature_ids()
        np.testing.assert_array_equal(X[0], rows[0][2].values)
