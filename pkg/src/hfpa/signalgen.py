"""Deterministic complex-baseband test-signal synthesis.

Covers the exciter emission modes the controller has to tell apart:
CW, FM and hard-keyed PSK (constant envelope) versus AM and the two-tone
SSB proxy (varying envelope). All generators are pure functions of their
spec: no RNG state, no dithering, byte-identical output on every call.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class InvalidSpec(ValueError):
    """Waveform spec violates its invariants (Nyquist, index range, ...)."""


class Kind(enum.Enum):
    CW = "cw"
    FM = "fm"
    PSK = "psk"
    AM = "am"
    TWO_TONE = "two_tone"


#: Emission kinds whose envelope is constant by construction.
CONSTANT_ENVELOPE_KINDS = frozenset({Kind.CW, Kind.FM, Kind.PSK})


@dataclass(frozen=True)
class IqBlock:
    """A finite block of complex baseband samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidSpec(f"sample_rate must be > 0, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise InvalidSpec("samples must be a non-empty 1-D sequence")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def scaled(self, factor: float) -> "IqBlock":
        return IqBlock(self.samples * factor, self.sample_rate)


@dataclass(frozen=True)
class WaveformSpec:
    """Generator parameters for one emission kind.

    Frequencies are baseband offsets in Hz; amplitude is the peak envelope.
    Only the fields relevant to ``kind`` are consulted.
    """

    kind: Kind
    amplitude: float = 1.0
    duration_s: float = 1e-3
    tone_hz: float = 0.0            # CW offset
    f1_hz: float = -1000.0          # two-tone offsets
    f2_hz: float = 1000.0
    fm_dev_hz: float = 5000.0       # FM peak deviation
    fm_rate_hz: float = 1000.0      # FM modulating tone
    am_index: float = 0.5           # AM modulation index m in [0, 1]
    am_rate_hz: float = 1000.0
    psk_rate_hz: float = 10_000.0   # symbol rate, hard keyed
    psk_order: int = 2              # 2 = BPSK, 4 = QPSK

    def validate(self, sample_rate: float) -> None:
        if sample_rate <= 0:
            raise InvalidSpec(f"sample_rate must be > 0, got {sample_rate}")
        if self.amplitude <= 0:
            raise InvalidSpec(f"amplitude must be > 0, got {self.amplitude}")
        if self.duration_s <= 0:
            raise InvalidSpec(f"duration_s must be > 0, got {self.duration_s}")
        nyq = sample_rate / 2.0
        freqs = {
            Kind.CW: (abs(self.tone_hz),),
            Kind.TWO_TONE: (abs(self.f1_hz), abs(self.f2_hz)),
            Kind.FM: (abs(self.fm_dev_hz) + abs(self.fm_rate_hz),),
            Kind.AM: (abs(self.am_rate_hz),),
            Kind.PSK: (self.psk_rate_hz,),
        }[self.kind]
        for f in freqs:
            if f >= nyq:
                raise InvalidSpec(f"frequency {f} Hz not below Nyquist {nyq} Hz")
        if self.kind is Kind.AM and not 0.0 <= self.am_index <= 1.0:
            raise InvalidSpec(f"AM index must be in [0, 1], got {self.am_index}")
        if self.kind is Kind.TWO_TONE and self.f1_hz == self.f2_hz:
            raise InvalidSpec("two-tone offsets must differ")
        if self.kind is Kind.PSK:
            if self.psk_order not in (2, 4):
                raise InvalidSpec(f"PSK order must be 2 or 4, got {self.psk_order}")
            if self.psk_rate_hz <= 0:
                raise InvalidSpec("PSK symbol rate must be > 0")


def _pn_bits(n: int) -> np.ndarray:
    """Fixed PN9 sequence (x^9 + x^5 + 1, seed 0x1FF), cycled to length n."""
    state = 0x1FF
    bits = np.empty(511, dtype=np.int64)
    for i in range(511):
        bit = state & 1
        bits[i] = bit
        fb = ((state >> 0) ^ (state >> 4)) & 1
        state = (state >> 1) | (fb << 8)
    reps = -(-n // 511)
    return np.tile(bits, reps)[:n]


def generate(spec: WaveformSpec, sample_rate: float) -> IqBlock:
    """Synthesize the spec's waveform at the given sample rate.

    Deterministic: identical inputs give byte-identical blocks. Peak envelope
    never exceeds ``spec.amplitude``; constant-envelope kinds hold it exactly.
    """
    spec.validate(sample_rate)
    n = int(round(spec.duration_s * sample_rate))
    if n < 1:
        raise InvalidSpec("duration too short for one sample")
    t = np.arange(n) / sample_rate
    a = spec.amplitude

    if spec.kind is Kind.CW:
        x = a * np.exp(2j * np.pi * spec.tone_hz * t)
    elif spec.kind is Kind.TWO_TONE:
        x = (a / 2.0) * (np.exp(2j * np.pi * spec.f1_hz * t)
                         + np.exp(2j * np.pi * spec.f2_hz * t))
    elif spec.kind is Kind.FM:
        # modulating tone cos(2*pi*fm*t) -> instantaneous deviation dev*cos(...)
        beta = spec.fm_dev_hz / spec.fm_rate_hz
        x = a * np.exp(1j * beta * np.sin(2 * np.pi * spec.fm_rate_hz * t))
    elif spec.kind is Kind.AM:
        m = spec.am_index
        env = a * (1.0 + m * np.cos(2 * np.pi * spec.am_rate_hz * t)) / (1.0 + m)
        x = env.astype(np.complex128)
    elif spec.kind is Kind.PSK:
        sps = max(1, int(round(sample_rate / spec.psk_rate_hz)))
        nsym = -(-n // sps)
        if spec.psk_order == 2:
            phases = np.pi * _pn_bits(nsym)
        else:
            b = _pn_bits(2 * nsym)
            sym = 2 * b[0::2] + b[1::2]
            phases = np.pi / 4.0 + sym * (np.pi / 2.0)
        x = a * np.exp(1j * np.repeat(phases, sps))[:n]
    else:  # pragma: no cover - exhaustive enum
        raise InvalidSpec(f"unsupported kind {spec.kind}")

    return IqBlock(x, sample_rate)


def envelope(block: IqBlock) -> np.ndarray:
    """Elementwise magnitude of the block; length preserved."""
    return np.abs(block.samples)
