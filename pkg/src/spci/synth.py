"""Analytic signal generators with controllable nonlinearity.

These generators are the ground-truth laboratory for the peak-count pipeline:
every nonlinear spectral line they produce has a known analytic amplitude, so
index behaviour can be checked against closed-form expectations instead of
hardware.

Models provided:

* a single-cycle raised-cosine excitation pulse,
* a multi-tone strain through a quadratic stress-strain law
  (sigma = E0*eps - E1*eps^2), whose mixing lines scale as E1 * A^2,
* a phenomenological crack-contact variant whose injected harmonic/mixing
  lines scale as a power of the drive amplitude (default exponent 3/2),
* a multi-resonance plate surrogate (modal impulse response plus optional
  memoryless distortion and seeded noise) producing dense spectra that look
  like real coupon measurements.

All generators are pure functions of their spec; noise comes from a
counter-based generator keyed by the spec seed, so identical specs yield
bit-identical waveforms, also under parallel generation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import DurationTooShort
from .waveform import Waveform

__all__ = [
    "Rc1Pulse",
    "Tone",
    "QuadraticMixSpec",
    "HertzianMixSpec",
    "ModalMode",
    "ModalPlateSpec",
    "rc1_value",
    "rc1_waveform",
    "quadratic_mix_waveform",
    "hertzian_mix_waveform",
    "modal_plate_response",
    "add_noise",
    "bin_frequency",
]


def _n_samples(duration: float, sample_rate: float) -> int:
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration * sample_rate must round to at least 1 sample")
    return n


def bin_frequency(sample_rate: float, n_samples: int, k: int) -> float:
    """Frequency of DFT bin k for an n_samples record: k * sample_rate / n."""
    return k * sample_rate / n_samples


@dataclass(frozen=True)
class Rc1Pulse:
    """Single-cycle raised-cosine pulse; support is exactly [0, 1/fc]."""

    u0: float
    fc: float

    def __post_init__(self):
        if not self.u0 > 0:
            raise ValueError("u0 must be > 0")
        if not self.fc > 0:
            raise ValueError("fc must be > 0")


def rc1_value(p: Rc1Pulse, t: np.ndarray | float) -> np.ndarray:
    """Pulse amplitude at time(s) t (seconds).

    u(t) = -u0/2 * (1 - cos(2 pi fc t)) * cos(2 pi fc t) inside [0, 1/fc],
    zero outside. The envelope vanishes at both endpoints, so u(0) = 0 and
    u(1/fc) = 0; the midpoint t = 1/(2 fc) gives +u0.
    """
    t = np.asarray(t, dtype=np.float64)
    phase = 2 * np.pi * p.fc * t
    pulse = -0.5 * p.u0 * (1 - np.cos(phase)) * np.cos(phase)
    return np.where((t >= 0) & (t <= 1 / p.fc), pulse, 0.0)


def rc1_waveform(p: Rc1Pulse, sample_rate: float, duration: float) -> Waveform:
    """Sample the pulse over ``duration`` seconds at ``sample_rate``.

    Raises
    ------
    DurationTooShort
        If the record would not contain the full pulse support (1/fc).
    """
    if duration < 1 / p.fc:
        raise DurationTooShort(
            f"duration {duration} s shorter than one period {1 / p.fc} s"
        )
    n = _n_samples(duration, sample_rate)
    t = np.arange(n) / sample_rate
    return Waveform(rc1_value(p, t), sample_rate)


@dataclass(frozen=True)
class Tone:
    """One primary tone: relative amplitude c (> 0) and frequency f in Hz."""

    c: float
    f: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("tone amplitude must be > 0")
        if not self.f > 0:
            raise ValueError("tone frequency must be > 0")


def _as_tones(tones: Iterable) -> tuple[Tone, ...]:
    out = tuple(t if isinstance(t, Tone) else Tone(*t) for t in tones)
    if not out:
        raise ValueError("at least one tone required")
    return out


def _check_tones_below_nyquist(tones: Sequence[Tone], sample_rate: float) -> None:
    for t in tones:
        if not t.f < sample_rate / 2:
            raise ValueError(f"tone at {t.f} Hz not below Nyquist {sample_rate / 2} Hz")


@dataclass(frozen=True)
class QuadraticMixSpec:
    """Multi-tone strain through sigma = e0*eps - e1*eps^2.

    eps(t) = amplitude * sum_i c_i sin(2 pi f_i t). For two tones the output
    spectrum carries lines at f1, f2, 2f1, 2f2, f1+f2, |f1-f2| and DC; the
    mixing lines have amplitude e1 * amplitude^2 * c_i * c_j.
    """

    e0: float
    e1: float
    amplitude: float
    tones: tuple[Tone, ...]
    duration: float
    sample_rate: float

    def __post_init__(self):
        object.__setattr__(self, "tones", _as_tones(self.tones))
        if not self.e0 > 0:
            raise ValueError("e0 must be > 0")
        if self.e1 < 0:
            raise ValueError("e1 must be >= 0")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        _check_tones_below_nyquist(self.tones, self.sample_rate)


def _tone_sum(tones: Sequence[Tone], t: np.ndarray) -> np.ndarray:
    base = np.zeros_like(t)
    for tone in tones:
        base += tone.c * np.sin(2 * np.pi * tone.f * t)
    return base


def quadratic_mix_waveform(spec: QuadraticMixSpec) -> Waveform:
    """Evaluate the quadratic stress response pointwise.

    The global amplitude multiplies the precomputed tone sum, so scaling the
    amplitude by a power of two rescales every sample exactly. Consequence:
    swapping a factor alpha in {0.5, 2, 4, ...} between e1 and amplitude
    yields bit-identical normalized spectra (the scaling-duality property).
    """
    n = _n_samples(spec.duration, spec.sample_rate)
    t = np.arange(n) / spec.sample_rate
    eps = spec.amplitude * _tone_sum(spec.tones, t)
    sigma = spec.e0 * eps - spec.e1 * (eps * eps)
    return Waveform(sigma, spec.sample_rate)


@dataclass(frozen=True)
class HertzianMixSpec:
    """Two-plus-tone signal with crack-contact style nonlinear lines.

    The linear part is e0 * amplitude * sum_i c_i sin(2 pi f_i t). Harmonic
    lines (2 f_i) and mixing lines (f_i +/- f_j) are injected directly with
    amplitude h1 * amplitude**exponent * c_i * c_j. This is phenomenological:
    it reproduces the amplitude scaling law of clapping-contact models
    (exponent 3/2 by default) without simulating the contacts themselves.
    """

    e0: float
    h1: float
    amplitude: float
    tones: tuple[Tone, ...]
    duration: float
    sample_rate: float
    exponent: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "tones", _as_tones(self.tones))
        if not self.e0 > 0:
            raise ValueError("e0 must be > 0")
        if self.h1 < 0:
            raise ValueError("h1 must be >= 0")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        _check_tones_below_nyquist(self.tones, self.sample_rate)


def hertzian_mix_waveform(spec: HertzianMixSpec) -> Waveform:
    """Linear tones plus injected harmonic and mixing lines.

    After normalization to the linear peak (which scales as amplitude), the
    injected lines scale as amplitude**(exponent - 1); for the default 3/2
    exponent, quadrupling the drive doubles every normalized sideband.
    """
    n = _n_samples(spec.duration, spec.sample_rate)
    t = np.arange(n) / spec.sample_rate
    y = spec.e0 * spec.amplitude * _tone_sum(spec.tones, t)
    if spec.h1 > 0:
        nl = spec.h1 * spec.amplitude**spec.exponent
        tones = spec.tones
        for tone in tones:
            y += nl * tone.c * tone.c * np.cos(2 * np.pi * (2 * tone.f) * t)
        for i in range(len(tones)):
            for j in range(i + 1, len(tones)):
                cc = nl * tones[i].c * tones[j].c
                f_plus = tones[i].f + tones[j].f
                f_minus = abs(tones[i].f - tones[j].f)
                y += cc * np.cos(2 * np.pi * f_plus * t)
                y -= cc * np.cos(2 * np.pi * f_minus * t)
    return Waveform(y, spec.sample_rate)


@dataclass(frozen=True)
class ModalMode:
    """One plate resonance: frequency (Hz), quality factor, modal gain."""

    f: float
    q: float
    gain: float

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError("mode frequency must be > 0")
        if not self.q > 0:
            raise ValueError("mode quality factor must be > 0")


@dataclass(frozen=True)
class ModalPlateSpec:
    """Surrogate for a reverberant plate: a bank of damped resonators.

    ``noise_rms`` adds white Gaussian measurement noise from a deterministic
    counter-based generator keyed by ``seed``.
    """

    modes: tuple[ModalMode, ...]
    noise_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        modes = tuple(
            m if isinstance(m, ModalMode) else ModalMode(*m) for m in self.modes
        )
        if not modes:
            raise ValueError("at least one mode required")
        if self.noise_rms < 0:
            raise ValueError("noise_rms must be >= 0")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "seed", int(self.seed))


def _noise(seed: int, n: int, rms: float) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    return rng.normal(0.0, rms, n)


def add_noise(w: Waveform, noise_rms: float, seed: int) -> Waveform:
    """Return the waveform plus seeded white Gaussian noise."""
    if noise_rms < 0:
        raise ValueError("noise_rms must be >= 0")
    if noise_rms == 0:
        return w
    return Waveform(w.samples + _noise(seed, len(w), noise_rms), w.sample_rate, w.t0)


def modal_plate_response(
    excitation: Waveform,
    spec: ModalPlateSpec,
    nonlinearity: tuple[str, float] | None = None,
) -> Waveform:
    """Convolve the excitation with the plate's modal impulse response.

    The impulse response is sum_k gain_k * exp(-pi f_k t / q_k) *
    sin(2 pi f_k t), sampled over the excitation length. An optional
    memoryless distortion is applied to the response afterwards:

    * ``("quadratic", s)``:  y -> y - s * y^2
    * ``("hertzian", s)``:   y -> y - s * sign(y) * |y|^(3/2)

    Seeded noise is added last when ``spec.noise_rms > 0``.

    Without distortion and noise the system is linear: scaling the excitation
    by alpha scales the output by alpha, and the output energy by alpha^2.
    """
    rate = excitation.sample_rate
    for m in spec.modes:
        if not m.f < rate / 2:
            raise ValueError(f"mode at {m.f} Hz not below Nyquist {rate / 2} Hz")
    n = len(excitation)
    t = np.arange(n) / rate
    impulse = np.zeros(n)
    for m in spec.modes:
        impulse += m.gain * np.exp(-np.pi * m.f * t / m.q) * np.sin(2 * np.pi * m.f * t)
    # dt factor approximates the continuous convolution integral
    y = fftconvolve(excitation.samples, impulse)[:n] / rate
    if nonlinearity is not None:
        kind, strength = nonlinearity
        if kind == "quadratic":
            y = y - strength * y * y
        elif kind == "hertzian":
            y = y - strength * np.sign(y) * np.abs(y) ** 1.5
        else:
            raise ValueError(f"unknown nonlinearity kind {kind!r}")
    if spec.noise_rms > 0:
        y = y + _noise(spec.seed, n, spec.noise_rms)
    return Waveform(y, rate, excitation.t0)
