"""Parametric three-phase transient current synthesis.

Stand-in for electromagnetic-transient simulation at desk scale: balanced
sinusoids with declared harmonics before an event onset, and after onset
either a fault step (amplitude and phase jump, decaying DC offset, and a
sustained arc/converter-response roughness, on the faulted phases only), a
damped switching oscillation on all phases, or a nonlinear arcing current
for high-impedance faults. Everything is a pure function of
(scenario, params, seed).

Severity of the fault step scales with 1/(R_f + 1 ohm) so the tabulated
impedances 0.01, 1, 10 ohm produce ordered fault strengths. The DC offset
is fixed by current continuity at the onset instant, which is what makes
the onset moment act as a point-on-wave angle.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from ._dsp import butterworth_lowpass, iir_filter

PHASES = ("a", "b", "c")
PHASE_ANGLES = (0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0)

FAULT_TYPES = ("ag", "bg", "cg", "ab", "bc", "ca", "abg", "bcg", "cag", "abcg")
FAULT_IMPEDANCES_OHM = (0.01, 1.0, 10.0)
FAULT_ONSETS_S = (9.0, 9.00334, 9.00668, 9.01002, 9.01336, 9.0167)
SWITCH_ONSETS_S = tuple(round(9.0 + 0.00069 * k, 5) for k in range(25))
PRIORITY_MODES = ("P", "Q")
POSITION_TAGS = tuple(f"p{i}" for i in range(1, 9))
SWITCH_POSITION_TAGS = ("p1", "p2", "p3")
RATING_LEVELS = (1, 2, 3, 4)
SAMPLING_FREQS_HZ = (3840.0, 5120.0, 5760.0, 7680.0)
WINDOW_CYCLES = (0.5, 1.0, 2.0)

FAULT_R_BASE_OHM = 1.0
_ARC_SEED_OFFSET = 500_000

# Severity multiplier per position tag; distinct values give the location
# head something to learn from amplitude alone.
_POSITION_FACTORS = {tag: 1.25 - 0.1 * i for i, tag in enumerate(POSITION_TAGS)}
_RATING_AMPLITUDES = {1: 0.10, 2: 0.18, 3: 0.28, 4: 0.40}


class ScenarioError(ValueError):
    """Invalid scenario specification or synthesis precondition."""


@dataclass(frozen=True)
class ScenarioSpec:
    """One transient scenario drawn from the fault or switching grids."""

    kind: str
    onset_time_s: float
    position_tag: str = "p5"
    priority_mode: str = "P"
    seed: int = 0
    fault_type: str | None = None
    fault_impedance_ohm: float | None = None
    rating_level: int | None = None
    generator_engaged: bool | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("fault", "capacitor_switch", "load_switch", "hif"):
            raise ScenarioError(f"unknown scenario kind {self.kind!r}")
        if self.position_tag not in POSITION_TAGS:
            raise ScenarioError(f"unknown position tag {self.position_tag!r}")
        if self.priority_mode not in PRIORITY_MODES:
            raise ScenarioError(f"priority mode must be P or Q, got {self.priority_mode!r}")
        if self.kind == "fault":
            if self.fault_type not in FAULT_TYPES:
                raise ScenarioError(f"fault scenario needs a fault type, got {self.fault_type!r}")
            if self.fault_impedance_ohm is None or self.fault_impedance_ohm <= 0:
                raise ScenarioError("fault impedance must be a positive real")
        elif self.fault_type is not None:
            raise ScenarioError(f"fault_type is only valid for kind='fault', not {self.kind!r}")
        if self.rating_level is not None and self.rating_level not in RATING_LEVELS:
            raise ScenarioError(f"rating level must be in {RATING_LEVELS}")

    def faulted_phases(self) -> frozenset[str]:
        if self.kind == "fault":
            return frozenset(self.fault_type) - {"g"}
        if self.kind == "hif":
            return frozenset("a")
        return frozenset()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "onset_time_s": self.onset_time_s,
            "position_tag": self.position_tag,
            "priority_mode": self.priority_mode,
            "seed": self.seed,
            "fault_type": self.fault_type,
            "fault_impedance_ohm": self.fault_impedance_ohm,
            "rating_level": self.rating_level,
            "generator_engaged": self.generator_engaged,
        }

    @staticmethod
    def from_dict(d: dict) -> "ScenarioSpec":
        return ScenarioSpec(**d)


@dataclass(frozen=True)
class SignalModelParams:
    """Knobs of the parametric signal model.

    fault_amplitude_scale stands in for the unspecified converter current
    limit: the post-onset amplitude gain of a faulted phase is
    fault_amplitude_scale / (R_f + 1). fault_arc_noise scales the sustained
    post-onset roughness (per unit of that gain) that carries the
    change-quantile signature.
    """

    system_freq_hz: float = 60.0
    sampling_freq_hz: float = 7680.0
    prefault_amplitude_per_phase: float = 1.0
    fault_amplitude_scale: float = 4.0
    fault_arc_noise: float = 0.5
    dc_offset_tau_s: float = 0.05
    switching_osc_freq_hz: float = 600.0
    switching_damping: float = 60.0
    harmonic_levels: tuple[tuple[int, float], ...] = ()
    hif_resistance_low_ohm: float = 50.0
    hif_resistance_high_ohm: float = 300.0
    hif_update_interval_s: float = 0.002
    hif_drive_amplitude: float = 30.0
    hif_dc_offset_pos: float = 4.5
    hif_dc_offset_neg: float = 7.5

    def __post_init__(self) -> None:
        if self.sampling_freq_hz <= 0 or self.system_freq_hz <= 0:
            raise ScenarioError("frequencies must be positive")
        if self.dc_offset_tau_s <= 0:
            raise ScenarioError("dc offset time constant must be positive")
        for value in (self.prefault_amplitude_per_phase, self.fault_amplitude_scale,
                      self.switching_osc_freq_hz, self.switching_damping):
            if not math.isfinite(value):
                raise ScenarioError("signal model parameters must be finite")


@dataclass(frozen=True)
class WaveformRecord:
    """A labeled three-phase current window plus scenario metadata."""

    samples: np.ndarray
    sampling_freq_hz: float
    label: str
    phase_label: frozenset[str]
    location_label: str | None
    scenario: ScenarioSpec
    t_start_s: float = 0.0
    voltages: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.samples.shape[0] != 3 or self.samples.ndim != 2:
            raise ScenarioError("samples must have shape (3, L)")
        if not np.all(np.isfinite(self.samples)):
            raise ScenarioError("samples contain NaN or Inf")
        if self.label not in ("fault", "no_fault"):
            raise ScenarioError(f"label must be fault or no_fault, got {self.label!r}")
        if (self.label == "fault") != bool(self.phase_label):
            raise ScenarioError("phase_label must be nonempty exactly for fault records")
        if self.voltages is not None and self.voltages.shape != self.samples.shape:
            raise ScenarioError("voltages must match samples shape")

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t_start_s + np.arange(self.n_samples) / self.sampling_freq_hz


def _window_times(spec: ScenarioSpec, params: SignalModelParams, window_cycles: float,
                  record_start_s: float | None) -> np.ndarray:
    if window_cycles not in WINDOW_CYCLES:
        raise ScenarioError(f"window_cycles must be one of {WINDOW_CYCLES}, got {window_cycles}")
    fs = params.sampling_freq_hz
    n = round(window_cycles * fs / params.system_freq_hz)
    if n < 2:
        raise ScenarioError("window shorter than 2 samples")
    span = n / fs
    t0 = spec.onset_time_s - span / 2.0 if record_start_s is None else record_start_s
    if not t0 <= spec.onset_time_s < t0 + span:
        raise ScenarioError("onset outside window")
    return t0 + np.arange(n) / fs


def _base_sinusoids(t: np.ndarray, params: SignalModelParams) -> np.ndarray:
    """Balanced three-phase sinusoids plus declared harmonics, shape (3, L)."""
    w = 2.0 * np.pi * params.system_freq_hz
    amp = params.prefault_amplitude_per_phase
    out = np.empty((3, t.shape[0]))
    for p, phi in enumerate(PHASE_ANGLES):
        x = amp * np.cos(w * t + phi)
        for order, rel in params.harmonic_levels:
            x = x + amp * rel * np.cos(order * (w * t + phi))
        out[p] = x
    return out


def _fault_gain(spec: ScenarioSpec, params: SignalModelParams) -> float:
    g = params.fault_amplitude_scale / (spec.fault_impedance_ohm + FAULT_R_BASE_OHM)
    g *= _POSITION_FACTORS[spec.position_tag]
    if spec.priority_mode == "Q":
        g *= 0.92
    return g


def synthesize(spec: ScenarioSpec, params: SignalModelParams | None = None,
               window_cycles: float = 1.0, record_start_s: float | None = None) -> WaveformRecord:
    """Generate one labeled current window for a fault or switching scenario.

    Faulted phases step to a larger amplitude with a lagging phase jump at
    onset; the decaying DC offset is chosen so current is continuous at the
    onset instant, which makes the onset moment act as a point-on-wave
    angle. Switching scenarios superpose a zero-mean damped oscillation on
    all three phases. By default the window is centered on the onset.
    """
    if params is None:
        params = SignalModelParams()
    if spec.kind == "hif":
        return synthesize_hif(spec, params, window_cycles, record_start_s)
    t = _window_times(spec, params, window_cycles, record_start_s)
    samples = _base_sinusoids(t, params)
    w = 2.0 * np.pi * params.system_freq_hz
    post = t >= spec.onset_time_s

    if spec.kind == "fault":
        g = _fault_gain(spec, params)
        amp_fault = params.prefault_amplitude_per_phase * (1.0 + g)
        dphi = -(np.pi / 3.0) * g / (1.0 + g)
        if spec.priority_mode == "Q":
            dphi -= 0.15
        rng = np.random.default_rng(spec.seed + _ARC_SEED_OFFSET)
        for p, phase in enumerate(PHASES):
            if phase not in spec.faulted_phases():
                continue
            phi = PHASE_ANGLES[p]
            steady = amp_fault * np.cos(w * t + phi + dphi)
            pre_at_onset = params.prefault_amplitude_per_phase * np.cos(w * spec.onset_time_s + phi)
            for order, rel in params.harmonic_levels:
                pre_at_onset += params.prefault_amplitude_per_phase * rel * np.cos(
                    order * (w * spec.onset_time_s + phi))
            dc0 = pre_at_onset - amp_fault * np.cos(w * spec.onset_time_s + phi + dphi)
            dc = dc0 * np.exp(-(t - spec.onset_time_s) / params.dc_offset_tau_s)
            samples[p, post] = (steady + dc)[post]
            if params.fault_arc_noise > 0:
                # arcing / converter-response roughness, sustained post-onset
                samples[p, post] += params.fault_arc_noise * g * rng.standard_normal(int(post.sum()))
        label, phase_label, location = "fault", spec.faulted_phases(), spec.position_tag
    else:
        osc_freq = params.switching_osc_freq_hz
        if spec.kind == "load_switch":
            osc_freq = osc_freq / 2.0
        level = spec.rating_level if spec.rating_level is not None else 2
        amp = _RATING_AMPLITUDES[level] * params.prefault_amplitude_per_phase
        if spec.generator_engaged is False:
            amp *= 0.85
        pos_idx = POSITION_TAGS.index(spec.position_tag)
        damping = params.switching_damping * (1.0 + 0.15 * pos_idx)
        if spec.priority_mode == "Q":
            amp *= 0.93
        tau = t - spec.onset_time_s
        for p in range(3):
            osc = amp * np.exp(-damping * tau[post]) * np.cos(
                2.0 * np.pi * osc_freq * tau[post] + PHASE_ANGLES[p] + 0.3 * pos_idx)
            samples[p, post] += osc
        label, phase_label, location = "no_fault", frozenset(), None

    return WaveformRecord(samples=samples, sampling_freq_hz=params.sampling_freq_hz,
                          label=label, phase_label=phase_label, location_label=location,
                          scenario=spec, t_start_s=float(t[0]))


def hif_resistance_trace(spec: ScenarioSpec, params: SignalModelParams, n_samples: int) -> np.ndarray:
    """Piecewise-constant arc resistance, redrawn every hif_update_interval_s.

    Deterministic given spec.seed; block length is floor(interval * fs)
    samples.
    """
    rng = np.random.default_rng(spec.seed)
    block = int(params.hif_update_interval_s * params.sampling_freq_hz)
    if block < 1:
        raise ScenarioError("resistance update interval shorter than one sample")
    n_blocks = int(np.ceil(n_samples / block))
    values = rng.uniform(params.hif_resistance_low_ohm, params.hif_resistance_high_ohm, size=n_blocks)
    return np.repeat(values, block)[:n_samples]


def synthesize_hif(spec: ScenarioSpec, params: SignalModelParams | None = None,
                   window_cycles: float = 1.0, record_start_s: float | None = None) -> WaveformRecord:
    """Generate a high-impedance fault record on phase a.

    The arc current is a driving sinusoid through a randomly redrawn
    piecewise-constant resistance, gated by two anti-parallel diodes with
    unequal series DC sources; the unequal sources give the half-cycle
    asymmetry characteristic of arcing faults.
    """
    if params is None:
        params = SignalModelParams()
    if spec.kind != "hif":
        raise ScenarioError(f"synthesize_hif needs kind='hif', got {spec.kind!r}")
    t = _window_times(spec, params, window_cycles, record_start_s)
    samples = _base_sinusoids(t, params)
    post = t >= spec.onset_time_s
    n_post = int(post.sum())
    if n_post:
        resistance = hif_resistance_trace(spec, params, n_post)
        w = 2.0 * np.pi * params.system_freq_hz
        drive = params.hif_drive_amplitude * np.cos(w * t[post] + PHASE_ANGLES[0])
        arc = np.zeros(n_post)
        pos = drive > params.hif_dc_offset_pos
        neg = drive < -params.hif_dc_offset_neg
        arc[pos] = (drive[pos] - params.hif_dc_offset_pos) / resistance[pos]
        arc[neg] = (drive[neg] + params.hif_dc_offset_neg) / resistance[neg]
        samples[0, post] += arc
    return WaveformRecord(samples=samples, sampling_freq_hz=params.sampling_freq_hz,
                          label="fault", phase_label=frozenset("a"),
                          location_label=spec.position_tag, scenario=spec,
                          t_start_s=float(t[0]))


def apply_noise(rec: WaveformRecord, snr_db: float, seed: int = 0) -> WaveformRecord:
    """Add per-phase white Gaussian noise at an exact measured SNR.

    The noise vector is rescaled so the realized power ratio hits snr_db
    exactly on this record; snr_db = inf returns the input unchanged.
    Phases with zero signal power stay untouched.
    """
    if np.isinf(snr_db):
        return rec
    rng = np.random.default_rng(seed)
    out = rec.samples.copy()
    for p in range(3):
        p_sig = float(np.mean(rec.samples[p] ** 2))
        if p_sig == 0.0:
            continue
        target = p_sig / (10.0 ** (snr_db / 10.0))
        noise = rng.standard_normal(rec.n_samples)
        noise *= np.sqrt(target / np.mean(noise**2))
        out[p] = rec.samples[p] + noise
    return replace(rec, samples=out)


def _saturate_phase(x: np.ndarray, dt: float, flux_ceiling: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-knee flux-integrator saturation of one phase.

    Integrated volt-seconds are clipped at +-flux_ceiling; within a sample
    that crosses the ceiling only the headroom fraction of the input is
    passed through.
    """
    out = np.empty_like(x)
    flux = np.empty_like(x)
    lam = 0.0
    for n in range(x.shape[0]):
        step = x[n] * dt
        trial = lam + step
        if abs(trial) <= flux_ceiling or step == 0.0:
            lam = trial
            out[n] = x[n]
        else:
            limit = flux_ceiling if trial > 0 else -flux_ceiling
            headroom = max(0.0, (limit - lam) / step) if step != 0 else 0.0
            out[n] = x[n] * min(1.0, headroom)
            lam = limit
        flux[n] = lam
    return out, flux


def ct_flux_ceiling(params: SignalModelParams, burden_scale: float) -> float:
    """Flux ceiling in volt-second units; shrinks with the secondary burden."""
    w = 2.0 * np.pi * params.system_freq_hz
    return 3.0 * params.prefault_amplitude_per_phase / (w * burden_scale)


def apply_ct_saturation(rec: WaveformRecord, burden_scale: float,
                        params: SignalModelParams | None = None) -> WaveformRecord:
    """Distort currents through a saturable-core CT model.

    At burden_scale 1 a nominal-amplitude record passes unchanged; heavy
    fault currents or raised burden drive the core flux into the ceiling
    and clip the secondary waveform.
    """
    if burden_scale < 1.0:
        raise ScenarioError("burden_scale must be >= 1")
    if params is None:
        params = SignalModelParams(sampling_freq_hz=rec.sampling_freq_hz)
    ceiling = ct_flux_ceiling(params, burden_scale)
    dt = 1.0 / rec.sampling_freq_hz
    out = np.empty_like(rec.samples)
    for p in range(3):
        out[p], _ = _saturate_phase(rec.samples[p], dt, ceiling)
    return replace(rec, samples=out)


def ct_saturation_flux(rec: WaveformRecord, burden_scale: float,
                       params: SignalModelParams | None = None) -> np.ndarray:
    """Per-phase flux traces of the CT model, for inspection and testing."""
    if params is None:
        params = SignalModelParams(sampling_freq_hz=rec.sampling_freq_hz)
    ceiling = ct_flux_ceiling(params, burden_scale)
    dt = 1.0 / rec.sampling_freq_hz
    flux = np.empty_like(rec.samples)
    for p in range(3):
        _, flux[p] = _saturate_phase(rec.samples[p], dt, ceiling)
    return flux


def resample(rec: WaveformRecord, target_fs_hz: float) -> WaveformRecord:
    """Anti-alias filter then decimate to an integer submultiple rate."""
    if target_fs_hz == rec.sampling_freq_hz:
        return rec
    ratio = rec.sampling_freq_hz / target_fs_hz
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ScenarioError(
            f"target rate {target_fs_hz} Hz must divide source rate {rec.sampling_freq_hz} Hz")
    b, a = butterworth_lowpass(5, 0.4 * target_fs_hz, rec.sampling_freq_hz)
    samples = iir_filter(b, a, rec.samples)[:, ::k]
    voltages = None
    if rec.voltages is not None:
        voltages = iir_filter(b, a, rec.voltages)[:, ::k]
    return replace(rec, samples=samples, voltages=voltages, sampling_freq_hz=target_fs_hz)


# Relay settings mirrored here so relay test records can be produced without
# importing the relay module (which consumes these records).
DEFAULT_Z1_SETTING = 0.23 + 7.6j
DEFAULT_Z0_SETTING = 8.19 + 27.55j
DEFAULT_K0 = (DEFAULT_Z0_SETTING - DEFAULT_Z1_SETTING) / (3.0 * DEFAULT_Z1_SETTING)
DEFAULT_Z_LINE = 1.0 + 30.0j
DEFAULT_Z_LOAD = 100.0 + 50.0j


def synthesize_relay_record(fault_type: str | None = "ag", distance_frac: float = 0.5,
                            fault_resistance_ohm: float = 0.01, infeed_scale: float = 1.0,
                            apparent_rf_gain: float = 1.0, onset_time_s: float | None = 0.05,
                            duration_s: float = 0.15, sampling_freq_hz: float = 7680.0,
                            z_line: complex = DEFAULT_Z_LINE, k0: complex = DEFAULT_K0,
                            z_load: complex = DEFAULT_Z_LOAD, position_tag: str = "p5",
                            seed: int = 0) -> WaveformRecord:
    """Co-sampled voltage/current record for the distance-relay chain.

    Pre-onset phasors correspond to balanced load; post-onset phasors are
    constructed so the relay's compensated loop equation recovers
    distance_frac * z_line plus an apparent fault-resistance term
    R_f * apparent_rf_gain / (1 + K0). infeed_scale < 1 models a
    converter-limited fault current. onset_time_s None yields a steady
    load record.
    """
    if fault_type is not None and fault_type not in ("ag", "bg", "cg", "ab", "bc", "ca"):
        raise ScenarioError(f"relay record supports single lg/ll fault types, got {fault_type!r}")
    fs = sampling_freq_hz
    n = round(duration_s * fs)
    t = np.arange(n) / fs
    w = 2.0 * np.pi * 60.0
    rot = np.exp(1j * w * t)

    v_ph = np.array([np.exp(1j * ang) for ang in PHASE_ANGLES])
    i_load = v_ph / (z_line + z_load)
    v = np.vstack([np.real(v_ph[p] * rot) for p in range(3)])
    i = np.vstack([np.real(i_load[p] * rot) for p in range(3)])

    label = "no_fault"
    phase_label: frozenset[str] = frozenset()
    if onset_time_s is not None and fault_type is not None:
        if not 0.0 <= onset_time_s < duration_s:
            raise ScenarioError("onset outside window")
        post = t >= onset_time_s
        zl = distance_frac * z_line
        r_eff = fault_resistance_ohm * apparent_rf_gain
        if fault_type in ("ag", "bg", "cg"):
            p = PHASES.index(fault_type[0])
            i_f = infeed_scale * v_ph[p] / (zl * (1.0 + k0) + r_eff)
            i_post = i_load[p] + i_f
            v_post = zl * (i_load[p] + (1.0 + k0) * i_f) + r_eff * i_f
            i_steady = np.real(i_post * rot[post])
            dc0 = np.real(i_load[p] * np.exp(1j * w * onset_time_s)) - np.real(
                i_post * np.exp(1j * w * onset_time_s))
            dc = dc0 * np.exp(-(t[post] - onset_time_s) / 0.05)
            i[p, post] = i_steady + dc
            v[p, post] = np.real(v_post * rot[post])
            phase_label = frozenset(fault_type[0])
        else:
            pa, pb = PHASES.index(fault_type[0]), PHASES.index(fault_type[1])
            v_loop = v_ph[pa] - v_ph[pb]
            i_f = infeed_scale * v_loop / (2.0 * zl + r_eff)
            ia_post = i_load[pa] + i_f
            ib_post = i_load[pb] - i_f
            v_loop_post = zl * (ia_post - ib_post) + r_eff * i_f
            delta = (v_loop_post - v_loop) / 2.0
            va_post = v_ph[pa] + delta
            vb_post = v_ph[pb] - delta
            i[pa, post] = np.real(ia_post * rot[post])
            i[pb, post] = np.real(ib_post * rot[post])
            v[pa, post] = np.real(va_post * rot[post])
            v[pb, post] = np.real(vb_post * rot[post])
            phase_label = frozenset(fault_type)
        label = "fault"
        scenario = ScenarioSpec(kind="fault", onset_time_s=onset_time_s,
                                position_tag=position_tag, fault_type=fault_type,
                                fault_impedance_ohm=max(fault_resistance_ohm, 1e-6), seed=seed)
    else:
        if onset_time_s is not None and fault_type is None:
            raise ScenarioError("onset given without a fault type")
        scenario = ScenarioSpec(kind="load_switch", onset_time_s=0.0,
                                position_tag="p1", seed=seed)

    return WaveformRecord(samples=i, sampling_freq_hz=fs, label=label,
                          phase_label=phase_label, location_label=position_tag
                          if label == "fault" else None, scenario=scenario,
                          t_start_s=0.0, voltages=v)


def fault_grid(positions: Sequence[str] = POSITION_TAGS, seed0: int = 0) -> list[ScenarioSpec]:
    """Enumerate the fault scenario grid: modes x types x impedances x onsets per position."""
    specs = []
    idx = seed0
    for position in positions:
        for mode in PRIORITY_MODES:
            for ftype in FAULT_TYPES:
                for rf in FAULT_IMPEDANCES_OHM:
                    for onset in FAULT_ONSETS_S:
                        specs.append(ScenarioSpec(kind="fault", fault_type=ftype,
                                                  fault_impedance_ohm=rf, onset_time_s=onset,
                                                  position_tag=position, priority_mode=mode,
                                                  seed=idx))
                        idx += 1
    return specs


def switching_grid(kinds: Sequence[str] = ("capacitor_switch", "load_switch"),
                   seed0: int = 0) -> list[ScenarioSpec]:
    """Enumerate the non-fault grid: modes x generator x positions x ratings x onsets per kind."""
    specs = []
    idx = seed0
    for kind in kinds:
        for mode in PRIORITY_MODES:
            for engaged in (True, False):
                for position in SWITCH_POSITION_TAGS:
                    for rating in RATING_LEVELS:
                        for onset in SWITCH_ONSETS_S:
                            specs.append(ScenarioSpec(kind=kind, onset_time_s=onset,
                                                      position_tag=position, priority_mode=mode,
                                                      rating_level=rating,
                                                      generator_engaged=engaged, seed=idx))
                            idx += 1
    return specs


def make_detection_dataset(n_fault: int = 400, n_switch: int = 400,
                           params: SignalModelParams | None = None,
                           window_cycles: float = 1.0, snr_db: float = np.inf,
                           seed: int = 0) -> list[WaveformRecord]:
    """Seeded fault-vs-switching dataset subsampled from the full grids."""
    if params is None:
        params = SignalModelParams()
    rng = np.random.default_rng(seed)
    faults = fault_grid()
    switches = switching_grid(seed0=len(faults))
    if n_fault > len(faults) or n_switch > len(switches):
        raise ScenarioError("requested more records than the grids contain")
    take_f = rng.choice(len(faults), size=n_fault, replace=False)
    caps = [s for s in switches if s.kind == "capacitor_switch"]
    loads = [s for s in switches if s.kind == "load_switch"]
    take_c = rng.choice(len(caps), size=n_switch - n_switch // 2, replace=False)
    take_l = rng.choice(len(loads), size=n_switch // 2, replace=False)
    chosen = [faults[j] for j in sorted(take_f)]
    chosen += [caps[j] for j in sorted(take_c)] + [loads[j] for j in sorted(take_l)]
    records = [synthesize(s, params, window_cycles) for s in chosen]
    if not np.isinf(snr_db):
        records = [apply_noise(r, snr_db, seed=seed + 1 + i) for i, r in enumerate(records)]
    return records


def write_dataset(records: Iterable[WaveformRecord], directory) -> None:
    """Write manifest.json plus one rec_<id>.csv per record (17 significant digits)."""
    directory = str(directory)
    os.makedirs(directory, exist_ok=True)
    manifest = []
    for i, rec in enumerate(records):
        rec_id = f"rec_{i:04d}"
        manifest.append({
            "id": rec_id,
            "label": rec.label,
            "phase_label": "".join(sorted(rec.phase_label)),
            "location_label": rec.location_label,
            "sampling_freq_hz": rec.sampling_freq_hz,
            "t_start_s": rec.t_start_s,
            "has_voltages": rec.voltages is not None,
            "scenario": rec.scenario.to_dict(),
        })
        path = os.path.join(directory, rec_id + ".csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t", "ia", "ib", "ic"]
            if rec.voltages is not None:
                header += ["va", "vb", "vc"]
            writer.writerow(header)
            times = rec.times
            for n in range(rec.n_samples):
                row = [f"{times[n]:.17g}"] + [f"{rec.samples[p, n]:.17g}" for p in range(3)]
                if rec.voltages is not None:
                    row += [f"{rec.voltages[p, n]:.17g}" for p in range(3)]
                writer.writerow(row)
    tmp = tempfile.NamedTemporaryFile("w", dir=directory, delete=False, suffix=".tmp")
    with tmp as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    os.replace(tmp.name, os.path.join(directory, "manifest.json"))


def read_dataset(directory) -> list[WaveformRecord]:
    """Read a dataset directory written by write_dataset (or the same CSV shape)."""
    directory = str(directory)
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    records = []
    for entry in manifest:
        path = os.path.join(directory, entry["id"] + ".csv")
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        if data.ndim == 1:
            data = data[None, :]
        samples = data[:, 1:4].T.copy()
        voltages = data[:, 4:7].T.copy() if entry.get("has_voltages") else None
        records.append(WaveformRecord(
            samples=samples, sampling_freq_hz=entry["sampling_freq_hz"],
            label=entry["label"], phase_label=frozenset(entry["phase_label"]),
            location_label=entry["location_label"],
            scenario=ScenarioSpec.from_dict(entry["scenario"]),
            t_start_s=entry["t_start_s"], voltages=voltages))
    return records
