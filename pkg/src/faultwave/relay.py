"""Conventional quadrilateral distance-relay baseline.

Chain per record: 5th-order Butterworth low-pass at 400 Hz, decimation to
1920 Hz, sliding one-cycle (32-sample) fundamental phasors, apparent
impedances for the six measuring elements, and a point-in-quadrilateral
zone decision. This is the relay whose failure to pick up converter-fed
high-resistance faults motivates the learned pipeline.

The quadrilateral characteristic is a fixed documented polygon: bottom side
along the directional line through the origin at -15 degrees, vertical
right side at the resistive reach 2*|Re(zone reach)| + 10 ohm, horizontal
top at the reactive reach Im(zone reach), vertical left side at minus a
quarter of the resistive reach. Points on the boundary count as inside.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._dsp import butterworth_lowpass, frequency_response, iir_filter
from .synth import PHASES, WaveformRecord

PHASOR_WINDOW = 32
PHASOR_RATE_HZ = 1920.0
GROUND_ELEMENTS = ("AG", "BG", "CG")
PHASE_ELEMENTS = ("AB", "BC", "CA")
ELEMENTS = GROUND_ELEMENTS + PHASE_ELEMENTS


@dataclass(frozen=True)
class RelaySettings:
    z1: complex = 0.23 + 7.6j
    z0: complex = 8.19 + 27.55j
    z_line: complex = 1.0 + 30.0j
    zone1_scale: float = 0.8
    zone2_scale: float = 1.2
    directional_angle_deg: float = -15.0
    left_reach_frac: float = 0.25
    resistive_margin_ohm: float = 10.0
    current_floor: float = 1e-4
    filter_order: int = 5
    filter_cutoff_hz: float = 400.0

    def __post_init__(self) -> None:
        if abs(self.z1) == 0:
            raise ValueError("z1 must be nonzero")
        for scale in (self.zone1_scale, self.zone2_scale):
            if scale <= 0:
                raise ValueError("zone scales must be positive")

    @property
    def k0(self) -> complex:
        return (self.z0 - self.z1) / (3.0 * self.z1)

    def zone_reach(self, zone: int) -> complex:
        scale = {1: self.zone1_scale, 2: self.zone2_scale}[zone]
        return scale * self.z_line

    def resistive_reach(self, zone: int) -> float:
        return 2.0 * abs(self.zone_reach(zone).real) + self.resistive_margin_ohm

    def zone_polygon(self, zone: int) -> np.ndarray:
        """Counterclockwise quadrilateral vertices in the R-X plane."""
        reach = self.zone_reach(zone)
        r_right = self.resistive_reach(zone)
        r_left = -self.left_reach_frac * r_right
        x_top = reach.imag
        slope = np.tan(np.deg2rad(self.directional_angle_deg))
        return np.array([
            [r_left, slope * r_left],
            [r_right, slope * r_right],
            [r_right, x_top],
            [r_left, x_top],
        ])


@dataclass(frozen=True)
class ImpedancePoint:
    element: str
    r: float
    x: float
    time_s: float
    indeterminate: bool = False


def butterworth_design(order: int = 5, cutoff_hz: float = 400.0,
                       fs_hz: float = 7680.0) -> tuple[np.ndarray, np.ndarray]:
    """Low-pass Butterworth coefficients (b, a); DC gain exactly 1."""
    return butterworth_lowpass(order, cutoff_hz, fs_hz)


def filter_magnitude(b: np.ndarray, a: np.ndarray, freq_hz, fs_hz: float) -> np.ndarray:
    """|H| of the designed filter at the given frequencies."""
    return np.abs(frequency_response(b, a, freq_hz, fs_hz))


def phasor_estimate(window: np.ndarray) -> complex:
    """Fundamental phasor of one 32-sample cycle: 2 * DFT bin 1 / 32.

    A unit 60 Hz cosine sampled at 1920 Hz yields exactly 1 at angle 0.
    """
    x = np.asarray(window, dtype=float)
    if x.shape != (PHASOR_WINDOW,):
        raise ValueError(f"phasor window must have exactly {PHASOR_WINDOW} samples")
    n = np.arange(PHASOR_WINDOW)
    return complex(2.0 * np.sum(x * np.exp(-2j * np.pi * n / PHASOR_WINDOW)) / PHASOR_WINDOW)


def apparent_impedances(v_phasors: dict, i_phasors: dict, settings: RelaySettings,
                        time_s: float = 0.0) -> list[ImpedancePoint]:
    """Six measuring-element impedances from per-phase voltage/current phasors.

    Ground elements divide by the zero-sequence-compensated current; phase
    elements use delta quantities. Denominators below the current floor
    yield points flagged indeterminate (carried, not dropped).
    """
    i0 = (i_phasors["a"] + i_phasors["b"] + i_phasors["c"]) / 3.0
    k0 = settings.k0
    points = []
    for element in GROUND_ELEMENTS:
        ph = element[0].lower()
        denom = i_phasors[ph] + 3.0 * k0 * i0
        points.append(_impedance_point(element, v_phasors[ph], denom, settings, time_s))
    for element in PHASE_ELEMENTS:
        pa, pb = element[0].lower(), element[1].lower()
        denom = i_phasors[pa] - i_phasors[pb]
        points.append(_impedance_point(element, v_phasors[pa] - v_phasors[pb], denom,
                                       settings, time_s))
    return points


def _impedance_point(element: str, v: complex, i: complex, settings: RelaySettings,
                     time_s: float) -> ImpedancePoint:
    if abs(i) < settings.current_floor:
        return ImpedancePoint(element=element, r=np.nan, x=np.nan, time_s=time_s,
                              indeterminate=True)
    z = v / i
    return ImpedancePoint(element=element, r=float(z.real), x=float(z.imag), time_s=time_s)


def _in_polygon(point: tuple[float, float], vertices: np.ndarray) -> bool:
    """Closed containment test for a convex counterclockwise polygon."""
    px, py = point
    n = vertices.shape[0]
    for i in range(n):
        ax, ay = vertices[i]
        bx, by = vertices[(i + 1) % n]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if cross < -1e-12:
            return False
    return True


def zone_decision(point: ImpedancePoint, settings: RelaySettings) -> str:
    """zone1 / zone2 / outside for a non-indeterminate impedance point."""
    if point.indeterminate:
        raise ValueError("cannot classify an indeterminate impedance point")
    pt = (point.r, point.x)
    if _in_polygon(pt, settings.zone_polygon(1)):
        return "zone1"
    if _in_polygon(pt, settings.zone_polygon(2)):
        return "zone2"
    return "outside"


def trajectory(rec: WaveformRecord, settings: RelaySettings | None = None) -> dict[str, list[ImpedancePoint]]:
    """Full Algorithm chain: filter, decimate, sliding phasors, impedances.

    The record must carry co-sampled voltages. Points are stamped with the
    time of the last sample in their phasor window.
    """
    if settings is None:
        settings = RelaySettings()
    if rec.voltages is None:
        raise ValueError("relay trajectory needs a record with voltage channels")
    fs = rec.sampling_freq_hz
    ratio = fs / PHASOR_RATE_HZ
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9:
        raise ValueError(f"sampling rate {fs} Hz is not an integer multiple of {PHASOR_RATE_HZ} Hz")
    b, a = butterworth_design(settings.filter_order, settings.filter_cutoff_hz, fs)
    i_dec = iir_filter(b, a, rec.samples)[:, ::k]
    v_dec = iir_filter(b, a, rec.voltages)[:, ::k]
    times = (rec.t_start_s + np.arange(rec.n_samples) / fs)[::k]
    n = i_dec.shape[1]
    if n < PHASOR_WINDOW:
        raise ValueError("record shorter than one phasor window after decimation")
    result: dict[str, list[ImpedancePoint]] = {e: [] for e in ELEMENTS}
    for end in range(PHASOR_WINDOW, n + 1):
        sl = slice(end - PHASOR_WINDOW, end)
        v_ph = {PHASES[p]: phasor_estimate(v_dec[p, sl]) for p in range(3)}
        i_ph = {PHASES[p]: phasor_estimate(i_dec[p, sl]) for p in range(3)}
        stamp = float(times[end - 1])
        for point in apparent_impedances(v_ph, i_ph, settings, stamp):
            result[point.element].append(point)
    return result


def zone_entries(traj: dict[str, list[ImpedancePoint]],
                 settings: RelaySettings | None = None) -> dict[str, float | None]:
    """First zone-1 entry time per element, None when the element never enters."""
    if settings is None:
        settings = RelaySettings()
    out: dict[str, float | None] = {}
    for element, points in traj.items():
        entry = None
        for pt in points:
            if pt.indeterminate:
                continue
            if zone_decision(pt, settings) == "zone1":
                entry = pt.time_s
                break
        out[element] = entry
    return out


def write_trajectory_csv(path, traj: dict[str, list[ImpedancePoint]],
                         settings: RelaySettings | None = None) -> None:
    """CSV rows t, element, R, X, zone, indeterminate for every trajectory point."""
    if settings is None:
        settings = RelaySettings()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "element", "R", "X", "zone", "indeterminate"])
        for element in ELEMENTS:
            for pt in traj.get(element, []):
                zone = "" if pt.indeterminate else zone_decision(pt, settings)
                writer.writerow([f"{pt.time_s:.17g}", element,
                                 "" if pt.indeterminate else f"{pt.r:.17g}",
                                 "" if pt.indeterminate else f"{pt.x:.17g}",
                                 zone, int(pt.indeterminate)])
