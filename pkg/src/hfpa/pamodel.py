"""Behavioral class-AB amplifier model.

Envelope-domain AM/AM nonlinearity (Rapp-style soft limiter on the drain
voltage swing) combined with a conduction-angle drain-current model. The
drain current over one carrier cycle is taken as a clipped quasi-sine
``i(th) = max(0, idq + ipk*cos th)``; its Fourier DC and fundamental
components set DC draw and RF output power:

* ``pout = mean(a_out * i1) / 2``  (fundamental voltage times fundamental
  current; equals ``a_out^2 / (2*rload)`` while the current is unclipped)
* ``pdc  = vdd * mean(idc * shape)``

``shape`` is an overdrive waveform-shaping factor,
``1 - beta*r^p / (1 + c*r^p)`` with ``r = a_out/a_sat``: as the stage is
pushed toward saturation the drain waveforms square up and the DC draw per
watt falls. ``beta = 0`` (the default) disables it and leaves the pure
quasi-sine model. No AM/PM: phase is preserved, distortion is AM/AM only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from .bands import BANDS
from .signalgen import IqBlock

TWO_PI = 2.0 * math.pi


class NonPositiveIdq(ValueError):
    """Quiescent current must be positive."""


class InvalidBias(ValueError):
    """Bias point outside the supply/gate operating range."""


class OutOfRangeAlpha(ValueError):
    """Conduction angle outside (0, 2*pi]."""


@dataclass(frozen=True)
class BiasPoint:
    """Drain supply voltage, quiescent current, and gate-step index."""

    vdd: float
    idq: float
    gate_step: int = 0

    def __post_init__(self):
        if not 30.0 <= self.vdd <= 58.0:
            raise InvalidBias(f"vdd must be in [30, 58] V, got {self.vdd}")
        if self.idq <= 0:
            raise InvalidBias(f"idq must be > 0, got {self.idq}")
        if self.gate_step not in range(5):
            raise InvalidBias(f"gate_step must be 0..4, got {self.gate_step}")


@dataclass(frozen=True)
class PaParams:
    """Amplifier behavioral parameters.

    g0         small-signal voltage gain (linear) at 58 V / 2 A reference bias
    kv         gain slope vs drain voltage, dB per volt
    ki         gain slope vs quiescent current, dB per decade
    rload      effective load-line resistance, ohms
    vknee      knee voltage, volts; saturated swing is vdd - vknee
    smoothness Rapp knee sharpness s
    shape_beta, shape_exp, shape_sat
               overdrive shaping: DC draw scaled by
               1 - beta*r^p/(1 + c*r^p); beta = 0 disables
    ripple     per-band small-signal gain deviation in dB
    """

    g0: float
    kv: float = 0.0
    ki: float = 0.0
    rload: float = 1.0
    vknee: float = 4.0
    smoothness: float = 2.0
    shape_beta: float = 0.0
    shape_exp: float = 4.0
    shape_sat: float = 0.0
    ripple: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.g0 <= 0:
            raise ValueError(f"g0 must be > 0, got {self.g0}")
        if self.rload <= 0:
            raise ValueError(f"rload must be > 0, got {self.rload}")
        if not 0.0 <= self.vknee < 30.0:
            raise ValueError(f"vknee must be in [0, 30), got {self.vknee}")
        if not 0.5 <= self.smoothness <= 20.0:
            raise ValueError(f"smoothness must be in [0.5, 20], got {self.smoothness}")
        if self.shape_beta < 0 or self.shape_exp <= 0 or self.shape_sat < 0:
            raise ValueError("shape parameters must be nonnegative (exp > 0)")
        object.__setattr__(self, "ripple", dict(self.ripple))

    def ripple_db(self, band: Optional[str]) -> float:
        if band is None:
            return 0.0
        return float(self.ripple.get(band, 0.0))


@dataclass(frozen=True)
class PaStats:
    """One steady-state simulation record."""

    pout_w: float
    pdc_w: float
    eff: float
    pdiss_w: float
    gain_db: Optional[float]


def _fourier_clipped(idq: float, ipk: float):
    """(alpha, idc, i1) of i(th) = max(0, idq + ipk*cos th), any real idq."""
    if ipk <= 0.0:
        return TWO_PI, max(idq, 0.0), 0.0
    x = -idq / ipk
    if x <= -1.0:  # never clips: pure class A
        return TWO_PI, idq, ipk
    if x >= 1.0:  # never conducts
        return 0.0, 0.0, 0.0
    thc = math.acos(x)
    sin_thc = math.sin(thc)
    idc = (idq * thc + ipk * sin_thc) / math.pi
    i1 = (2.0 * idq * sin_thc + ipk * (thc + sin_thc * math.cos(thc))) / math.pi
    return 2.0 * thc, idc, i1


def conduction_currents(idq: float, ipk: float):
    """DC and fundamental components of the clipped drain-current quasi-sine.

    Returns (alpha, idc, i1): conduction angle in radians (2*pi when the
    waveform never clips), DC component, and fundamental cosine coefficient.
    """
    if idq <= 0:
        raise NonPositiveIdq(f"idq must be > 0, got {idq}")
    if ipk < 0:
        raise ValueError(f"ipk must be >= 0, got {ipk}")
    return _fourier_clipped(idq, ipk)


def small_signal_gain_db(bias: BiasPoint, params: PaParams,
                         band: Optional[str] = None) -> float:
    """Gain law: linear-in-dB vs vdd, vs log(idq), plus per-band ripple."""
    return (20.0 * math.log10(params.g0)
            + params.kv * (bias.vdd - 58.0)
            + params.ki * math.log10(bias.idq / 2.0)
            + params.ripple_db(band))


def saturated_swing(bias: BiasPoint, params: PaParams) -> float:
    """Peak drain-voltage swing limit a_sat = vdd - vknee."""
    a_sat = bias.vdd - params.vknee
    if a_sat <= 0:
        raise InvalidBias(f"vdd {bias.vdd} V at/below knee {params.vknee} V")
    return a_sat


def am_am(a_in, bias: BiasPoint, params: PaParams, band: Optional[str] = None):
    """Envelope transfer: a_out = g*a_in / (1 + (g*a_in/a_sat)^(2s))^(1/(2s)).

    Monotone nondecreasing, slope bounded by g, and a_out < a_sat always.
    Accepts scalars or arrays.
    """
    g = 10.0 ** (small_signal_gain_db(bias, params, band) / 20.0)
    a_sat = saturated_swing(bias, params)
    s2 = 2.0 * params.smoothness
    u = g * np.asarray(a_in, dtype=np.float64)
    if np.any(u < 0):
        raise ValueError("a_in must be >= 0")
    out = u / (1.0 + (u / a_sat) ** s2) ** (1.0 / s2)
    return float(out) if np.isscalar(a_in) else out


def simulate(block: IqBlock, bias: BiasPoint, params: PaParams,
             band: Optional[str] = None):
    """Amplify a block and report steady-state power statistics.

    Phase is preserved per sample; the envelope passes through the AM/AM
    law and each output-swing sample drives the conduction-current model.
    DC input power can never fall below RF output power (dissipation >= 0).
    """
    if not isinstance(bias, BiasPoint):
        raise InvalidBias(f"expected BiasPoint, got {type(bias).__name__}")
    g = 10.0 ** (small_signal_gain_db(bias, params, band) / 20.0)
    a_sat = saturated_swing(bias, params)
    env = np.abs(block.samples)
    aout = np.empty_like(env)
    sum_aout2, sum_vi1, sum_idc = kernels.pa_pipeline(
        env, g, a_sat, params.smoothness, params.rload, bias.idq,
        params.shape_beta, params.shape_exp, params.shape_sat, aout)
    n = env.size
    pout = sum_vi1 / (2.0 * n)
    pdc = bias.vdd * sum_idc / n
    pdc = max(pdc, pout)  # waveform shaping never drives dissipation negative
    sum_env2 = float(np.dot(env, env))
    gain_db = (10.0 * math.log10(sum_aout2 / sum_env2)) if sum_env2 > 0 else None
    scale = np.divide(aout, env, out=np.full_like(env, g), where=env > 0)
    out_block = IqBlock(block.samples * scale, block.sample_rate)
    eff = pout / pdc if pdc > 0 else 0.0
    return out_block, PaStats(pout_w=pout, pdc_w=pdc, eff=eff,
                              pdiss_w=pdc - pout, gain_db=gain_db)


def efficiency_curve(alphas: Sequence[float], swing_ratio: float = 1.0):
    """Ideal drain efficiency versus conduction angle at a given swing.

    eta(alpha) = 0.5 * (i1/idc) * swing_ratio, where (idc, i1) belong to the
    clipped quasi-sine whose conduction angle is alpha (bias term
    idq = -cos(alpha/2) per unit drive). swing_ratio is V1/vdd; 1.0 is the
    full-swing, zero-knee limit. Strictly decreasing in alpha.
    """
    if not 0.0 < swing_ratio <= 1.0:
        raise ValueError(f"swing_ratio must be in (0, 1], got {swing_ratio}")
    out = []
    for alpha in alphas:
        if not 0.0 < alpha <= TWO_PI:
            raise OutOfRangeAlpha(f"alpha must be in (0, 2*pi], got {alpha}")
        idq = -math.cos(alpha / 2.0)
        _, idc, i1 = _fourier_clipped(idq, 1.0)
        out.append((alpha, 0.5 * (i1 / idc) * swing_ratio))
    return out


# --- parameter config file: one `key = value` per line, ripple.<band> keys ---

_SCALAR_KEYS = ("g0", "kv", "ki", "rload", "vknee", "smoothness",
                "shape_beta", "shape_exp", "shape_sat")


def save_params(params: PaParams, path) -> None:
    lines = [f"{k} = {getattr(params, k):.12g}" for k in _SCALAR_KEYS]
    for band in BANDS:
        if band in params.ripple:
            lines.append(f"ripple.{band} = {params.ripple[band]:.12g}")
    for band in sorted(set(params.ripple) - set(BANDS)):
        lines.append(f"ripple.{band} = {params.ripple[band]:.12g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> PaParams:
    scalars = {}
    ripple = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = (p.strip() for p in line.partition("="))
            try:
                num = float(value)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad number {value!r}") from exc
            if key.startswith("ripple."):
                ripple[key[len("ripple."):]] = num
            elif key in _SCALAR_KEYS:
                scalars[key] = num
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    if "g0" not in scalars:
        raise ValueError(f"{path}: missing required key 'g0'")
    return PaParams(ripple=ripple, **scalars)


def with_ripple(params: PaParams, ripple: Mapping[str, float]) -> PaParams:
    """Copy of params with the ripple profile replaced."""
    return replace(params, ripple=dict(ripple))
