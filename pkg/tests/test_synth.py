"""Parametric transient synthesis: waveform shapes, labels, grids, dataset IO."""

import numpy as np
import pytest

from faultwave import synth
from faultwave._dsp import fundamental_amplitude
from faultwave.synth import (
    FAULT_ONSETS_S,
    PHASE_ANGLES,
    PHASES,
    SWITCH_ONSETS_S,
    ScenarioError,
    ScenarioSpec,
    SignalModelParams,
    WaveformRecord,
    apply_ct_saturation,
    apply_noise,
    ct_flux_ceiling,
    ct_saturation_flux,
    fault_grid,
    hif_resistance_trace,
    make_detection_dataset,
    read_dataset,
    resample,
    switching_grid,
    synthesize,
    synthesize_hif,
    synthesize_relay_record,
    write_dataset,
)


def rms(x):
    return float(np.sqrt(np.mean(np.asarray(x) ** 2)))


def post_pre_rms_ratio(rec, phase):
    post = rec.times >= rec.scenario.onset_time_s
    return rms(rec.samples[phase][post]) / rms(rec.samples[phase][~post])


class TestScenarioSpec:
    def test_fault_type_requires_fault_kind(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(kind="capacitor_switch", onset_time_s=9.0, fault_type="ag")
        with pytest.raises(ScenarioError):
            ScenarioSpec(kind="hif", onset_time_s=9.0, fault_type="ag")

    def test_fault_needs_type_and_impedance(self):
        with pytest.raises(ScenarioError):
            ScenarioSpec(kind="fault", onset_time_s=9.0)
        with pytest.raises(ScenarioError):
            ScenarioSpec(kind="fault", onset_time_s=9.0, fault_type="ag",
                         fault_impedance_ohm=-1.0)

    def test_round_trip_dict(self):
        spec = ScenarioSpec(kind="fault", fault_type="bcg", fault_impedance_ohm=1.0,
                            onset_time_s=9.0167, position_tag="p3", priority_mode="Q", seed=9)
        assert ScenarioSpec.from_dict(spec.to_dict()) == spec

    def test_faulted_phases(self):
        spec = ScenarioSpec(kind="fault", fault_type="cag", fault_impedance_ohm=1.0,
                            onset_time_s=9.0)
        assert spec.faulted_phases() == frozenset("ac")


class TestSynthesize:
    def test_bolted_ag_rms_step(self, bolted_ag_record):
        rec = bolted_ag_record
        assert post_pre_rms_ratio(rec, 0) > 3.0
        # unfaulted phases unchanged within 1 percent
        for p in (1, 2):
            assert abs(post_pre_rms_ratio(rec, p) - 1.0) < 0.01

    def test_onset_outside_window_rejected(self):
        spec = ScenarioSpec(kind="fault", fault_type="ag", fault_impedance_ohm=0.01,
                            onset_time_s=9.1)
        with pytest.raises(ScenarioError, match="onset outside window"):
            synthesize(spec, record_start_s=9.0)

    def test_determinism(self):
        spec = ScenarioSpec(kind="fault", fault_type="abg", fault_impedance_ohm=1.0,
                            onset_time_s=9.00334, seed=42)
        a = synthesize(spec)
        b = synthesize(spec)
        np.testing.assert_array_equal(a.samples, b.samples)

    def test_pre_onset_purity(self):
        params = SignalModelParams(harmonic_levels=((5, 0.03), (7, 0.02)))
        for kind, extra in (("fault", {"fault_type": "bc", "fault_impedance_ohm": 1.0}),
                            ("capacitor_switch", {"rating_level": 3}),
                            ("load_switch", {"rating_level": 1})):
            spec = ScenarioSpec(kind=kind, onset_time_s=9.00668, seed=5, **extra)
            rec = synthesize(spec, params)
            pre = rec.times < spec.onset_time_s
            t = rec.times[pre]
            for p in range(3):
                expected = np.cos(2 * np.pi * 60 * t + PHASE_ANGLES[p])
                for order, rel in params.harmonic_levels:
                    expected = expected + rel * np.cos(order * (2 * np.pi * 60 * t + PHASE_ANGLES[p]))
                np.testing.assert_allclose(rec.samples[p][pre], expected, atol=1e-9)

    def test_window_lengths(self):
        spec = ScenarioSpec(kind="load_switch", onset_time_s=9.0, rating_level=2)
        for cycles, n in ((0.5, 64), (1.0, 128), (2.0, 256)):
            assert synthesize(spec, window_cycles=cycles).n_samples == n
        with pytest.raises(ScenarioError):
            synthesize(spec, window_cycles=0.75)

    def test_switching_hits_all_phases_zero_mean_step(self):
        spec = ScenarioSpec(kind="capacitor_switch", onset_time_s=9.00069, rating_level=4, seed=3)
        rec = synthesize(spec, window_cycles=2.0)
        assert rec.label == "no_fault"
        assert rec.phase_label == frozenset()
        assert rec.location_label is None
        post = rec.times >= spec.onset_time_s
        for p in range(3):
            # oscillation superposed: fundamental amplitude preserved within a few %
            amp = fundamental_amplitude(rec.samples[p][post], rec.sampling_freq_hz, 60.0)
            assert amp == pytest.approx(1.0, rel=0.05)

    def test_current_continuity_at_onset(self):
        # the DC offset is fixed by continuity, so no sample-to-sample jump at onset
        spec = ScenarioSpec(kind="fault", fault_type="ag", fault_impedance_ohm=0.01,
                            onset_time_s=9.00334, seed=8)
        params = SignalModelParams(fault_arc_noise=0.0)
        rec = synthesize(spec, params)
        i_on = int(np.searchsorted(rec.times, spec.onset_time_s))
        jump = abs(rec.samples[0][i_on] - rec.samples[0][i_on - 1])
        typical = np.max(np.abs(np.diff(rec.samples[0])))
        assert jump <= typical


class TestLabelConsistency:
    def test_bolted_faults_phase_label_matches_rms_rule(self):
        for ftype in synth.FAULT_TYPES:
            spec = ScenarioSpec(kind="fault", fault_type=ftype, fault_impedance_ohm=0.01,
                                onset_time_s=9.00334, position_tag="p8", seed=1)
            rec = synthesize(spec)
            flagged = {PHASES[p] for p in range(3) if post_pre_rms_ratio(rec, p) > 1.5}
            assert flagged == rec.phase_label


class TestHif:
    def spec(self, seed=0):
        return ScenarioSpec(kind="hif", onset_time_s=9.0, seed=seed)

    def test_resistance_trace_block_structure(self):
        params = SignalModelParams()
        trace = hif_resistance_trace(self.spec(seed=4), params, 200)
        block = int(0.002 * params.sampling_freq_hz)
        assert block == 15
        for start in range(0, 200, block):
            chunk = trace[start:start + block]
            assert np.all(chunk == chunk[0])
        # consecutive blocks differ (draws from a continuous distribution)
        starts = trace[::block]
        assert len(np.unique(starts)) == len(starts)
        assert trace.min() >= 50.0 and trace.max() <= 300.0

    def test_trace_determinism(self):
        params = SignalModelParams()
        a = hif_resistance_trace(self.spec(seed=7), params, 128)
        b = hif_resistance_trace(self.spec(seed=7), params, 128)
        np.testing.assert_array_equal(a, b)

    def test_record_labels(self):
        rec = synthesize_hif(self.spec(), SignalModelParams())
        assert rec.label == "fault"
        assert rec.phase_label == frozenset("a")

    def test_half_cycle_asymmetry(self):
        rec = synthesize_hif(self.spec(seed=2), SignalModelParams(), window_cycles=2.0)
        post = rec.times >= 9.0
        arc = rec.samples[0][post] - rec.samples[1][post] * 0  # phase a only
        # remove the load component: compare against phase-a load sinusoid
        load = np.cos(2 * np.pi * 60 * rec.times[post])
        arc = rec.samples[0][post] - load
        pos_peak = arc.max()
        neg_peak = -arc.min()
        assert abs(pos_peak - neg_peak) / max(pos_peak, neg_peak) > 0.02

    def test_peak_below_quarter_of_bolted(self):
        hif_rec = synthesize_hif(self.spec(seed=3), SignalModelParams(), window_cycles=1.0)
        bolted = synthesize(ScenarioSpec(kind="fault", fault_type="ag",
                                         fault_impedance_ohm=0.01, onset_time_s=9.0,
                                         seed=3), window_cycles=1.0)
        post = hif_rec.times >= 9.0
        hif_fault_component = hif_rec.samples[0][post] - np.cos(2 * np.pi * 60 * hif_rec.times[post])
        bolted_peak = np.max(np.abs(bolted.samples[0][bolted.times >= 9.0]))
        assert np.max(np.abs(hif_fault_component)) < 0.25 * bolted_peak

    def test_same_seed_same_record(self):
        a = synthesize_hif(self.spec(seed=11), SignalModelParams())
        b = synthesize(self.spec(seed=11), SignalModelParams())  # dispatches to hif
        np.testing.assert_array_equal(a.samples, b.samples)


class TestApplyNoise:
    def test_infinite_snr_identity(self, bolted_ag_record):
        out = apply_noise(bolted_ag_record, np.inf, seed=1)
        np.testing.assert_array_equal(out.samples, bolted_ag_record.samples)

    def test_measured_snr_exact(self):
        spec = ScenarioSpec(kind="load_switch", onset_time_s=9.0, rating_level=1, seed=0)
        rec = synthesize(spec, window_cycles=2.0)
        for snr in (20.0, 30.0, 40.0):
            noisy = apply_noise(rec, snr, seed=5)
            for p in range(3):
                p_sig = np.mean(rec.samples[p] ** 2)
                p_noise = np.mean((noisy.samples[p] - rec.samples[p]) ** 2)
                measured = 10 * np.log10(p_sig / p_noise)
                assert measured == pytest.approx(snr, abs=0.2)

    def test_seeds_differ_but_same_snr(self, bolted_ag_record):
        a = apply_noise(bolted_ag_record, 20.0, seed=1)
        b = apply_noise(bolted_ag_record, 20.0, seed=2)
        assert not np.array_equal(a.samples, b.samples)
        for out in (a, b):
            p_noise = np.mean((out.samples[0] - bolted_ag_record.samples[0]) ** 2)
            p_sig = np.mean(bolted_ag_record.samples[0] ** 2)
            assert 10 * np.log10(p_sig / p_noise) == pytest.approx(20.0, abs=0.2)

    def test_zero_phase_untouched(self):
        spec = ScenarioSpec(kind="load_switch", onset_time_s=9.0, seed=0)
        rec = synthesize(spec)
        silent = WaveformRecord(samples=np.vstack([np.zeros(rec.n_samples), rec.samples[1:]]),
                                sampling_freq_hz=rec.sampling_freq_hz, label="no_fault",
                                phase_label=frozenset(), location_label=None,
                                scenario=spec, t_start_s=rec.t_start_s)
        noisy = apply_noise(silent, 20.0, seed=3)
        np.testing.assert_array_equal(noisy.samples[0], np.zeros(rec.n_samples))


def thd(signal, fs, f0=60.0, n_harmonics=8):
    """Total harmonic distortion from single-frequency amplitudes."""
    fund = fundamental_amplitude(signal, fs, f0)
    harm = [fundamental_amplitude(signal, fs, k * f0) for k in range(2, n_harmonics + 2)]
    return np.sqrt(np.sum(np.square(harm))) / fund


class TestCtSaturation:
    def test_identity_below_knee(self, bolted_ag_record):
        spec = ScenarioSpec(kind="load_switch", onset_time_s=9.0, rating_level=1, seed=0)
        rec = synthesize(spec)
        out = apply_ct_saturation(rec, burden_scale=1.0)
        np.testing.assert_array_equal(out.samples, rec.samples)

    def test_bolted_fault_distorts_at_high_burden(self):
        spec = ScenarioSpec(kind="fault", fault_type="ag", fault_impedance_ohm=0.01,
                            onset_time_s=9.0, seed=1)
        rec = synthesize(spec, SignalModelParams(fault_arc_noise=0.0), window_cycles=2.0,
                         record_start_s=9.0 - 32 / 7680.0)
        saturated = apply_ct_saturation(rec, burden_scale=4.0)
        last_cycle = slice(rec.n_samples - 128, rec.n_samples)
        assert thd(saturated.samples[0][last_cycle], rec.sampling_freq_hz) > \
            thd(rec.samples[0][last_cycle], rec.sampling_freq_hz)

    def test_flux_never_exceeds_ceiling(self):
        spec = ScenarioSpec(kind="fault", fault_type="abcg", fault_impedance_ohm=0.01,
                            onset_time_s=9.0, seed=2)
        rec = synthesize(spec, window_cycles=2.0)
        params = SignalModelParams(sampling_freq_hz=rec.sampling_freq_hz)
        for burden in (1.0, 2.0, 4.0):
            flux = ct_saturation_flux(rec, burden, params)
            assert np.max(np.abs(flux)) <= ct_flux_ceiling(params, burden) + 1e-15

    def test_burden_below_one_rejected(self, bolted_ag_record):
        with pytest.raises(ScenarioError):
            apply_ct_saturation(bolted_ag_record, burden_scale=0.5)


class TestResample:
    def test_identity(self, bolted_ag_record):
        assert resample(bolted_ag_record, 7680.0) is bolted_ag_record

    def test_factor_four_keeps_every_fourth(self):
        spec = ScenarioSpec(kind="load_switch", onset_time_s=9.0, seed=0)
        rec = synthesize(spec, window_cycles=2.0)
        out = resample(rec, 1920.0)
        assert out.sampling_freq_hz == 1920.0
        assert out.n_samples == rec.n_samples // 4
        assert out.label == rec.label

    def test_non_integer_ratio_rejected(self, bolted_ag_record):
        with pytest.raises(ScenarioError):
            resample(bolted_ag_record, 5120.0)

    def test_fundamental_amplitude_preserved(self):
        # onset just beyond the last sample keeps the record a pure sinusoid
        span = 256 / 7680.0
        spec = ScenarioSpec(kind="load_switch", onset_time_s=9.05 + span - 1e-7, seed=0)
        rec = synthesize(spec, window_cycles=2.0, record_start_s=9.05)
        out = resample(rec, 3840.0)
        for p in range(3):
            before = fundamental_amplitude(rec.samples[p], 7680.0, 60.0)
            after = fundamental_amplitude(out.samples[p], 3840.0, 60.0)
            assert after == pytest.approx(before, rel=0.01)


class TestGrids:
    def test_fault_grid_cardinality(self):
        assert len(fault_grid(positions=["p1"])) == 360
        assert len(fault_grid()) == 2880

    def test_switching_grid_cardinality(self):
        grid = switching_grid()
        assert len(grid) == 2400
        assert sum(1 for s in grid if s.kind == "capacitor_switch") == 1200

    def test_onset_tables(self):
        assert len(FAULT_ONSETS_S) == 6
        assert len(SWITCH_ONSETS_S) == 25
        assert SWITCH_ONSETS_S[0] == 9.0
        assert SWITCH_ONSETS_S[-1] == pytest.approx(9.01656)

    def test_grid_enumeration_deterministic(self):
        assert fault_grid() == fault_grid()

    def test_detection_dataset(self):
        records = make_detection_dataset(n_fault=40, n_switch=40, seed=5)
        assert len(records) == 80
        assert sum(1 for r in records if r.label == "fault") == 40
        again = make_detection_dataset(n_fault=40, n_switch=40, seed=5)
        for a, b in zip(records, again):
            np.testing.assert_array_equal(a.samples, b.samples)


class TestRelayRecordSynthesis:
    def test_steady_record_has_voltages(self):
        rec = synthesize_relay_record(fault_type=None, onset_time_s=None)
        assert rec.voltages is not None
        assert rec.label == "no_fault"

    def test_fault_record_metadata(self):
        rec = synthesize_relay_record(fault_type="ag", distance_frac=0.5,
                                      fault_resistance_ohm=0.01)
        assert rec.label == "fault"
        assert rec.phase_label == frozenset("a")
        assert rec.voltages.shape == rec.samples.shape

    def test_onset_validation(self):
        with pytest.raises(ScenarioError):
            synthesize_relay_record(fault_type="ag", onset_time_s=0.5, duration_s=0.15)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        records = make_detection_dataset(n_fault=3, n_switch=3, seed=2)
        records.append(synthesize_relay_record(fault_type="ag"))
        directory = tmp_path / "ds"
        write_dataset(records, directory)
        back = read_dataset(directory)
        assert len(back) == len(records)
        for a, b in zip(records, back):
            np.testing.assert_allclose(b.samples, a.samples, rtol=0, atol=0)
            assert b.label == a.label
            assert b.phase_label == a.phase_label
            assert b.location_label == a.location_label
            assert b.scenario == a.scenario
            if a.voltages is None:
                assert b.voltages is None
            else:
                np.testing.assert_allclose(b.voltages, a.voltages, rtol=0, atol=0)

    def test_rewrite_is_byte_identical(self, tmp_path):
        records = make_detection_dataset(n_fault=2, n_switch=2, seed=3)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        write_dataset(records, d1)
        write_dataset(records, d2)
        assert (d1 / "manifest.json").read_bytes() == (d2 / "manifest.json").read_bytes()
        assert (d1 / "rec_0000.csv").read_bytes() == (d2 / "rec_0000.csv").read_bytes()
