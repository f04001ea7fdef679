"""Time-series container, preprocessing, and magnitude-spectrum computation.

Two spectral pathways are supported deliberately: transforming the record at
its native length, and transforming after zero padding to the next power of
two. Both are exact discrete Fourier transforms of their input; they sample
the underlying spectrum on different frequency grids, so downstream peak
counts may legitimately differ between them.

No window function is applied anywhere (rectangular implied), and magnitudes
carry no 1/N scaling; band-limited normalization makes any constant scale
irrelevant for peak counting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroInBand


def _frozen_f64(values) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Waveform:
    """Uniformly sampled voltage record.

    Parameters
    ----------
    samples : array-like
        Voltage values in volts, non-empty, one-dimensional.
    sample_rate : float
        Sampling rate in Hz, strictly positive.
    t0 : float
        Time of the first sample in seconds (default 0).
    """

    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        samples = _frozen_f64(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        rate = float(self.sample_rate)
        if not rate > 0:
            raise ValueError(f"sample_rate must be > 0, got {rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", rate)
        object.__setattr__(self, "t0", float(self.t0))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Record length in seconds (n / sample_rate)."""
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        """Sample instants in seconds."""
        return self.t0 + np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True, eq=False)
class Spectrum:
    """One-sided magnitude spectrum.

    ``magnitudes[k]`` is the unscaled DFT modulus at frequency
    ``k * freq_step`` for k = 0 .. floor(n_input/2); ``n_input`` is the number
    of time samples the transform consumed (after any padding).
    """

    magnitudes: np.ndarray
    freq_step: float
    n_input: int

    def __post_init__(self):
        mags = _frozen_f64(self.magnitudes)
        if mags.ndim != 1 or mags.size == 0:
            raise ValueError("magnitudes must be a non-empty 1-D sequence")
        if np.any(mags < 0):
            raise ValueError("magnitudes must be non-negative")
        n_input = int(self.n_input)
        if mags.size != n_input // 2 + 1:
            raise ValueError(
                f"{mags.size} bins inconsistent with n_input={n_input} "
                f"(expected {n_input // 2 + 1})"
            )
        if not self.freq_step > 0:
            raise ValueError("freq_step must be > 0")
        object.__setattr__(self, "magnitudes", mags)
        object.__setattr__(self, "freq_step", float(self.freq_step))
        object.__setattr__(self, "n_input", n_input)

    def __len__(self) -> int:
        return self.magnitudes.size

    @property
    def freqs(self) -> np.ndarray:
        """Bin center frequencies in Hz."""
        return np.arange(self.magnitudes.size) * self.freq_step

    @property
    def nyquist(self) -> float:
        return 0.5 * self.n_input * self.freq_step


@dataclass(frozen=True, eq=False)
class NormalizedSpectrum(Spectrum):
    """Spectrum divided by the largest magnitude found in the normalization
    band; that divisor is kept as ``norm_factor``."""

    norm_factor: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not self.norm_factor > 0:
            raise ValueError("norm_factor must be > 0")
        object.__setattr__(self, "norm_factor", float(self.norm_factor))


@dataclass(frozen=True)
class FrequencyBand:
    """Closed frequency interval [f_min, f_max] in Hz."""

    f_min: float
    f_max: float

    def __post_init__(self):
        if not (0 <= self.f_min < self.f_max):
            raise ValueError(
                f"need 0 <= f_min < f_max, got [{self.f_min}, {self.f_max}]"
            )
        object.__setattr__(self, "f_min", float(self.f_min))
        object.__setattr__(self, "f_max", float(self.f_max))

    def mask(self, spectrum: Spectrum) -> np.ndarray:
        """Boolean mask of the spectrum bins falling inside the band."""
        freqs = spectrum.freqs
        return (freqs >= self.f_min) & (freqs <= self.f_max)


@dataclass(frozen=True)
class PreprocessOptions:
    """Preprocessing switches applied before the transform.

    ``dc_correct`` subtracts the first-sample value from the whole record;
    ``zero_pad`` extends the record with zeros to the next power of two.
    """

    dc_correct: bool = False
    zero_pad: bool = False


def dc_correct(w: Waveform) -> Waveform:
    """Subtract the first-sample value from every sample.

    The first sample is taken as representative of the instrumentation DC
    offset, so the result always starts at exactly zero. Idempotent.
    """
    return Waveform(w.samples - w.samples[0], w.sample_rate, w.t0)


def next_pow2(n: int) -> int:
    """Smallest power of two >= n (n >= 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1 << (n - 1).bit_length()


def zero_pad_pow2(w: Waveform) -> Waveform:
    """Pad with trailing zeros to the next power-of-two length.

    A record whose length is already a power of two is returned unchanged.
    Padding preserves the samples and the total signal energy exactly; only
    the spectral bin spacing changes.
    """
    n = w.samples.size
    m = next_pow2(n)
    if m == n:
        return w
    padded = np.zeros(m, dtype=np.float64)
    padded[:n] = w.samples
    return Waveform(padded, w.sample_rate, w.t0)


def magnitude_spectrum(w: Waveform) -> Spectrum:
    """One-sided DFT magnitude spectrum of the record as given.

    magnitudes[k] = |sum_n w[n] exp(-2*pi*i*k*n/N)| for k = 0 .. floor(N/2),
    with N the record length. No window, no scaling. The transform works on
    any N; combine with :func:`zero_pad_pow2` for the padded pathway.
    """
    mags = np.abs(np.fft.rfft(w.samples))
    return Spectrum(mags, w.sample_rate / len(w), n_input=len(w))


def apply_preprocess(w: Waveform, opts: PreprocessOptions) -> Waveform:
    """Apply preprocessing in fixed order: DC correction, then padding.

    The order matters: subtracting the DC estimate after padding would shift
    the pad region away from zero.
    """
    if opts.dc_correct:
        w = dc_correct(w)
    if opts.zero_pad:
        w = zero_pad_pow2(w)
    return w


def normalize(
    s: Spectrum, band: FrequencyBand, *, full_spectrum: bool = False
) -> NormalizedSpectrum:
    """Divide all magnitudes by the largest magnitude inside ``band``.

    Bins outside the band are divided as well (they may end up above 1, e.g.
    a DC bin when no DC correction was applied) but are never eligible as
    counted peaks. With ``full_spectrum=True`` the maximum is searched over
    the whole spectrum instead of the band.

    Raises
    ------
    AllZeroInBand
        If the search region contains no strictly positive magnitude.
    """
    if full_spectrum:
        region = s.magnitudes
    else:
        mask = band.mask(s)
        if not mask.any():
            raise AllZeroInBand(
                f"band [{band.f_min}, {band.f_max}] Hz contains no spectrum bins"
            )
        region = s.magnitudes[mask]
    peak = float(region.max())
    if not peak > 0:
        raise AllZeroInBand(
            f"no positive magnitude in band [{band.f_min}, {band.f_max}] Hz"
        )
    return NormalizedSpectrum(
        s.magnitudes / peak, s.freq_step, s.n_input, norm_factor=peak
    )
