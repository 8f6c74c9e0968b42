"""Envelope-aware bias control.

Classifies the exciter signal's envelope as constant or varying, then
commands the operating point: constant-envelope traffic runs compressed
(500 mA quiescent current, drain supply tracked just above the output
envelope); varying-envelope traffic runs linear (2 A, high drain bias).
Also equalizes per-band gain through small drain-bias moves.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .bands import BAND_CENTER_HZ, BANDS
from .measure import UnknownBand, drive_for_pout, gain_at_drive
from .pamodel import (BiasPoint, PaParams, _fourier_clipped,
                      small_signal_gain_db)
from .signalgen import IqBlock, envelope


class WindowTooShort(ValueError):
    """Block does not span the requested classification window."""


class SetpointUnreachable(ValueError):
    """Requested output power beyond the model's reach at maximum bias."""


class EnvKind(enum.Enum):
    CONSTANT = "Constant"
    VARYING = "Varying"


class Mode(enum.Enum):
    COMPRESSION = "Compression"
    LINEAR = "Linear"


#: Quiescent-current presets selectable by the 5-step gate bias ladder (A).
GATE_STEP_IDQ = (0.25, 0.5, 1.0, 1.5, 2.0)

IDQ_COMPRESSION = 0.5
IDQ_LINEAR = 2.0

#: Classification thresholds: far above numeric noise, far below AM/two-tone.
RIPPLE_LIMIT = 0.05
PAPR_LIMIT_DB = 0.5


@dataclass(frozen=True)
class EnvelopeClass:
    """Classification verdict plus the metrics that produced it."""

    kind: EnvKind
    papr_db: float
    ripple_ratio: float


@dataclass(frozen=True)
class BiasCommand:
    target: BiasPoint
    mode: Mode
    reason: EnvelopeClass


@dataclass(frozen=True)
class BandEntry:
    center_hz: float
    eq_vdd: float
    ripple_db: float = 0.0
    clamped: bool = False


BandTable = Dict[str, BandEntry]


def default_band_table(eq_vdd: float = 58.0,
                       ripple: Optional[Mapping[str, float]] = None) -> BandTable:
    """All ten bands at a common equalization voltage."""
    ripple = ripple or {}
    return {b: BandEntry(center_hz=BAND_CENTER_HZ[b], eq_vdd=eq_vdd,
                         ripple_db=float(ripple.get(b, 0.0)))
            for b in BANDS}


def classify_envelope(block: IqBlock, window_s: float = 0.01,
                      ripple_limit: float = RIPPLE_LIMIT,
                      papr_limit_db: float = PAPR_LIMIT_DB) -> EnvelopeClass:
    """Constant/varying verdict from envelope ripple and PAPR.

    ripple_ratio = (p99 - p1)/median of the envelope over the window;
    papr_db = peak-to-average power ratio. Constant iff both sit under their
    thresholds. Scale-invariant: both metrics are ratios.
    """
    if block.duration_s < window_s:
        raise WindowTooShort(
            f"block spans {block.duration_s:.4g} s < window {window_s:.4g} s")
    n = max(1, int(round(window_s * block.sample_rate)))
    env = envelope(block)[:n]
    peak = float(np.max(env))
    if peak == 0.0:
        return EnvelopeClass(EnvKind.CONSTANT, papr_db=0.0, ripple_ratio=0.0)
    p1, med, p99 = np.percentile(env, [1.0, 50.0, 99.0])
    ripple_ratio = float((p99 - p1) / med) if med > 0 else math.inf
    mean_sq = float(np.mean(env ** 2))
    papr_db = 10.0 * math.log10(peak ** 2 / mean_sq)
    constant = ripple_ratio < ripple_limit and papr_db < papr_limit_db
    return EnvelopeClass(EnvKind.CONSTANT if constant else EnvKind.VARYING,
                         papr_db=papr_db, ripple_ratio=ripple_ratio)


def gate_step_for(idq_target: float) -> int:
    """Nearest entry in the 5-step gate ladder; ties resolve to the lower step."""
    if idq_target <= 0:
        raise ValueError(f"idq_target must be > 0, got {idq_target}")
    best = 0
    best_err = abs(GATE_STEP_IDQ[0] - idq_target)
    for i, val in enumerate(GATE_STEP_IDQ[1:], start=1):
        err = abs(val - idq_target)
        if err < best_err:  # strict: equal error keeps the lower step
            best, best_err = i, err
    return best


def track_drain(peak_envelope_v: float, margin: float = 0.1,
                vknee: float = 0.0) -> float:
    """Drain voltage just above the output envelope: clamp(peak*(1+margin)+vknee)."""
    if peak_envelope_v < 0:
        raise ValueError("peak envelope must be >= 0")
    if not 0.0 <= margin <= 0.5:
        raise ValueError(f"margin must be in [0, 0.5], got {margin}")
    return min(max(peak_envelope_v * (1.0 + margin) + vknee, 30.0), 58.0)


def predict_peak_envelope(setpoint_w: float, idq: float, params: PaParams,
                          block: Optional[IqBlock] = None,
                          bias: Optional[BiasPoint] = None) -> float:
    """Output-envelope peak needed to deliver the setpoint.

    With a block: p99.9 of the simulated output envelope at maximum-headroom
    bias, rescaled so the simulated output power matches the setpoint (the
    percentile rides out single-sample outliers). Without one: the CW swing
    whose fundamental delivers the setpoint, from the conduction model.
    """
    if setpoint_w <= 0:
        raise ValueError("setpoint must be > 0")
    if block is not None:
        from .pamodel import simulate
        bias = bias or BiasPoint(vdd=58.0, idq=idq)
        level = drive_for_pout(setpoint_w, bias, params)
        env = np.abs(block.samples)
        peak_in = float(np.max(env))
        if peak_in == 0:
            return 0.0
        rms_in = math.sqrt(float(np.mean(env ** 2)))
        drive = block.scaled(level / rms_in)
        out, _ = simulate(drive, bias, params)
        return float(np.percentile(np.abs(out.samples), 99.9))
    lo, hi = 1e-6, 400.0
    _, _, i1_hi = _fourier_clipped(idq, hi / params.rload)
    if hi * i1_hi / 2.0 < setpoint_w:
        raise SetpointUnreachable(f"setpoint {setpoint_w} W beyond model range")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, _, i1 = _fourier_clipped(idq, mid / params.rload)
        if mid * i1 / 2.0 < setpoint_w:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def command_for_mode(mode: Mode, reason: EnvelopeClass,
                     power_setpoint_w: float, band: str, params: PaParams,
                     table: BandTable, margin: float = 0.1) -> BiasCommand:
    """Operating point for an already-chosen mode.

    Linear: 2 A quiescent at the band's equalization voltage. Compression:
    500 mA quiescent, drain tracked just above the predicted output envelope
    peak for the setpoint.
    """
    if power_setpoint_w <= 0:
        raise ValueError("power setpoint must be > 0")
    if band not in table:
        raise UnknownBand(f"unknown band {band!r}")
    if mode is Mode.LINEAR:
        bias = BiasPoint(vdd=table[band].eq_vdd, idq=IDQ_LINEAR,
                         gate_step=gate_step_for(IDQ_LINEAR))
        return BiasCommand(target=bias, mode=Mode.LINEAR, reason=reason)
    from .measure import TargetUnreachable
    try:  # the setpoint must be deliverable at full supply before tracking down
        drive_for_pout(power_setpoint_w,
                       BiasPoint(vdd=58.0, idq=IDQ_COMPRESSION), params)
    except TargetUnreachable as exc:
        raise SetpointUnreachable(
            f"setpoint {power_setpoint_w} W unreachable: {exc}") from exc
    peak = predict_peak_envelope(power_setpoint_w, IDQ_COMPRESSION, params)
    vdd = track_drain(peak, margin=margin, vknee=params.vknee)
    bias = BiasPoint(vdd=vdd, idq=IDQ_COMPRESSION,
                     gate_step=gate_step_for(IDQ_COMPRESSION))
    return BiasCommand(target=bias, mode=Mode.COMPRESSION, reason=reason)


def decide_bias(cls: EnvelopeClass, power_setpoint_w: float, band: str,
                params: PaParams, table: BandTable,
                margin: float = 0.1) -> BiasCommand:
    """Map an envelope class to the operating point.

    Varying -> linear mode; Constant -> compression mode. Total and
    deterministic: every class yields exactly one mode.
    """
    mode = Mode.COMPRESSION if cls.kind is EnvKind.CONSTANT else Mode.LINEAR
    return command_for_mode(mode, cls, power_setpoint_w, band, params, table,
                            margin=margin)


def compression_drive(bias: BiasPoint, params: PaParams,
                      depth_db: float = 2.5, band: Optional[str] = None) -> float:
    """Input level that puts the stage depth_db into gain compression."""
    if depth_db <= 0:
        raise ValueError("depth must be > 0 dB")
    g_ss = small_signal_gain_db(bias, params, band)
    a_sat = bias.vdd - params.vknee
    lo, hi = 1e-9 * a_sat, 50.0 * a_sat
    target = g_ss - depth_db
    if gain_at_drive(hi, bias, params, band) > target:
        raise ValueError(f"stage cannot reach {depth_db} dB compression")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gain_at_drive(mid, bias, params, band) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * a_sat:
            break
    return 0.5 * (lo + hi)


def equalize_gains(params: PaParams, bands: Sequence[str],
                   target_gain_db: float, idq: float,
                   tol_db: float = 0.1) -> BandTable:
    """Per-band drain voltage that levels small-signal gain at the target.

    Bisection on vdd within [30, 58] using the gain law plus the band's
    ripple; a band whose target lies outside the reachable range is flagged
    and pinned at the nearer endpoint.
    """
    table: BandTable = {}
    for band in bands:
        if band not in BANDS:
            raise UnknownBand(f"unknown band {band!r}")
        ripple = params.ripple_db(band)

        def gain_at(vdd: float) -> float:
            return small_signal_gain_db(BiasPoint(vdd=vdd, idq=idq), params) + ripple

        g_lo, g_hi = gain_at(30.0), gain_at(58.0)
        lo_v, hi_v = 30.0, 58.0
        if g_lo > g_hi:  # gain falls with vdd (kv < 0): swap search direction
            g_lo, g_hi = g_hi, g_lo
            lo_v, hi_v = 58.0, 30.0
        if target_gain_db <= g_lo:
            table[band] = BandEntry(BAND_CENTER_HZ[band], lo_v, ripple,
                                    clamped=abs(g_lo - target_gain_db) > tol_db)
            continue
        if target_gain_db >= g_hi:
            table[band] = BandEntry(BAND_CENTER_HZ[band], hi_v, ripple,
                                    clamped=abs(g_hi - target_gain_db) > tol_db)
            continue
        lo, hi = lo_v, hi_v
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if gain_at(mid) < target_gain_db:
                lo = mid
            else:
                hi = mid
            if abs(gain_at(0.5 * (lo + hi)) - target_gain_db) <= 0.5 * tol_db:
                break
        table[band] = BandEntry(BAND_CENTER_HZ[band], 0.5 * (lo + hi), ripple)
    return table


@dataclass
class BiasController:
    """Two-state (linear/compression) controller with switch hysteresis.

    A mode change requires the new classification to persist for
    ``hysteresis_windows`` consecutive windows, preventing chatter on
    boundary signals. Driven by a single sequential event loop; commands
    come out in call order.
    """

    params: PaParams
    table: BandTable
    margin: float = 0.1
    hysteresis_windows: int = 3
    window_s: float = 0.01
    mode: Mode = Mode.LINEAR
    _pending_mode: Optional[Mode] = field(default=None, repr=False)
    _pending_count: int = field(default=0, repr=False)

    def process(self, block: IqBlock, band: str,
                setpoint_w: float) -> BiasCommand:
        cls = classify_envelope(block, self.window_s)
        wanted = (Mode.COMPRESSION if cls.kind is EnvKind.CONSTANT
                  else Mode.LINEAR)
        if wanted is self.mode:
            self._pending_mode, self._pending_count = None, 0
        elif wanted is self._pending_mode:
            self._pending_count += 1
            if self._pending_count >= self.hysteresis_windows:
                self.mode = wanted
                self._pending_mode, self._pending_count = None, 0
        else:
            self._pending_mode, self._pending_count = wanted, 1
        return command_for_mode(self.mode, cls, setpoint_w, band,
                                self.params, self.table, margin=self.margin)
