"""Peak detection, the SPC(thr) curve, and the sliding-threshold average.

The index is computed from a band-limited normalized magnitude spectrum: for
every threshold on an equally spaced grid, count the strict local maxima in
the band that exceed the threshold, then average those counts over the grid.

Peak definition used throughout: a bin is a peak when its magnitude is
strictly larger than both immediate neighbours in the *full* spectrum; a flat
plateau flanked by strictly lower values counts once and is attributed to its
leftmost bin. Neighbours may lie just outside the band; bins lacking a
neighbour (first and last spectrum bin) are never peaks. Threshold comparison
is strict (> thr).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import BandOutOfRange
from .waveform import (
    FrequencyBand,
    NormalizedSpectrum,
    PreprocessOptions,
    Waveform,
    apply_preprocess,
    magnitude_spectrum,
    normalize,
)

__all__ = [
    "FrequencyBand",
    "ThresholdGrid",
    "SpcParams",
    "SpcCurve",
    "SpcIndex",
    "find_peaks",
    "spc_curve",
    "spc_index",
]

# Slack absorbing last-ulp shortfalls of (thr_max - thr_min) / thr_step for
# round decimal inputs; the grid-size formula assumes real arithmetic.
_GRID_EPS = 1e-9


@dataclass(frozen=True)
class ThresholdGrid:
    """Equally spaced threshold values thr(i) = thr_min + i * thr_step.

    The number of grid points is floor((thr_max - thr_min) / thr_step) + 1,
    so thr_max is the upper bound of the grid, not necessarily a member.
    All values lie in (0, 1].
    """

    thr_min: float
    thr_step: float
    thr_max: float

    def __post_init__(self):
        if not 0 < self.thr_min <= 1:
            raise ValueError(f"thr_min must be in (0, 1], got {self.thr_min}")
        if not self.thr_step > 0:
            raise ValueError(f"thr_step must be > 0, got {self.thr_step}")
        if not self.thr_min <= self.thr_max <= 1:
            raise ValueError(
                f"need thr_min <= thr_max <= 1, got thr_max={self.thr_max}"
            )
        for name in ("thr_min", "thr_step", "thr_max"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n_thresholds(self) -> int:
        return math.floor((self.thr_max - self.thr_min) / self.thr_step + _GRID_EPS) + 1

    def values(self) -> np.ndarray:
        """Grid values, ascending; clipped to 1.0 against float overshoot."""
        vals = self.thr_min + np.arange(self.n_thresholds) * self.thr_step
        return np.minimum(vals, 1.0)


@dataclass(frozen=True)
class SpcParams:
    """The full set of free evaluation parameters for one index value."""

    band: FrequencyBand
    grid: ThresholdGrid
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)

    def to_dict(self) -> dict:
        """Flat echo of every index-affecting parameter."""
        return {
            "f_min": self.band.f_min,
            "f_max": self.band.f_max,
            "thr_min": self.grid.thr_min,
            "thr_step": self.grid.thr_step,
            "thr_max": self.grid.thr_max,
            "n_thresholds": self.grid.n_thresholds,
            "dc_correct": self.preprocess.dc_correct,
            "zero_pad": self.preprocess.zero_pad,
        }


@dataclass(frozen=True, eq=False)
class SpcCurve:
    """Peak counts per threshold, ascending threshold order.

    Counts are non-increasing in the threshold by construction (raising the
    bar never finds more peaks); the constructor rejects anything else.
    """

    thresholds: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        thr = np.array(self.thresholds, dtype=np.float64)
        cnt = np.array(self.counts, dtype=np.int64)
        if thr.ndim != 1 or thr.size == 0 or thr.shape != cnt.shape:
            raise ValueError("thresholds and counts must be equal-length 1-D")
        if np.any(np.diff(thr) <= 0):
            raise ValueError("thresholds must be strictly increasing")
        if np.any(cnt < 0):
            raise ValueError("counts must be non-negative")
        if np.any(np.diff(cnt) > 0):
            raise ValueError("counts must be non-increasing in threshold")
        thr.flags.writeable = False
        cnt.flags.writeable = False
        object.__setattr__(self, "thresholds", thr)
        object.__setattr__(self, "counts", cnt)

    def __len__(self) -> int:
        return self.thresholds.size

    @property
    def mean(self) -> float:
        return float(np.mean(self.counts))


@dataclass(frozen=True, eq=False)
class SpcIndex:
    """Arithmetic mean of the SPC(thr) curve plus its full provenance."""

    value: float
    curve: SpcCurve
    params: SpcParams

    def __post_init__(self):
        if self.value != self.curve.mean:
            raise ValueError("value must equal the mean of the curve counts")
        if not 0 <= self.value <= self.curve.counts[0]:
            raise ValueError("value outside [0, counts[0]]")


def _peak_candidates(mag: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima, plateaus credited to the leftmost bin.

    Runs of equal values are collapsed; an interior run is a peak when the
    preceding run is strictly lower and the following run strictly lower.
    The first and last run can never qualify (missing neighbour).
    """
    if mag.size < 3:
        return np.empty(0, dtype=np.intp)
    boundaries = np.flatnonzero(np.diff(mag) != 0)
    starts = np.concatenate(([0], boundaries + 1))
    if starts.size < 3:
        return np.empty(0, dtype=np.intp)
    run_values = mag[starts]
    inner = np.arange(1, starts.size - 1)
    is_peak = (run_values[inner - 1] < run_values[inner]) & (
        run_values[inner] > run_values[inner + 1]
    )
    return starts[inner[is_peak]]


def _band_mask_checked(s: NormalizedSpectrum, band: FrequencyBand) -> np.ndarray:
    if band.f_max > s.nyquist:
        raise BandOutOfRange(
            f"f_max={band.f_max} Hz exceeds Nyquist {s.nyquist} Hz"
        )
    mask = band.mask(s)
    if not mask.any():
        raise BandOutOfRange(
            f"band [{band.f_min}, {band.f_max}] Hz contains no spectrum bins"
        )
    return mask


def find_peaks(s: NormalizedSpectrum, band: FrequencyBand, thr: float) -> list[int]:
    """Bin indices of in-band peaks with magnitude strictly above ``thr``.

    Raises
    ------
    BandOutOfRange
        If ``band.f_max`` exceeds Nyquist or the band holds no bins.
    ValueError
        If ``thr`` is outside (0, 1].
    """
    if not 0 < thr <= 1:
        raise ValueError(f"thr must be in (0, 1], got {thr}")
    mask = _band_mask_checked(s, band)
    cand = _peak_candidates(s.magnitudes)
    cand = cand[mask[cand]]
    return cand[s.magnitudes[cand] > thr].tolist()


def spc_curve(
    s: NormalizedSpectrum, band: FrequencyBand, grid: ThresholdGrid
) -> SpcCurve:
    """SPC(thr) over the whole grid.

    Equivalent to ``len(find_peaks(s, band, thr))`` at every grid value, but
    the peak scan runs once; the per-threshold counts follow from the sorted
    in-band peak magnitudes.
    """
    mask = _band_mask_checked(s, band)
    cand = _peak_candidates(s.magnitudes)
    cand = cand[mask[cand]]
    peak_mags = np.sort(s.magnitudes[cand])
    thr = grid.values()
    # number of peak magnitudes strictly greater than each threshold
    counts = peak_mags.size - np.searchsorted(peak_mags, thr, side="right")
    return SpcCurve(thr, counts)


def spc_index(
    w: Waveform, params: SpcParams, *, normalize_full_spectrum: bool = False
) -> SpcIndex:
    """Full pipeline: preprocess, transform, normalize, count, average.

    Preprocessing flags apply in fixed order (DC correction before zero
    padding), then the magnitude spectrum is normalized to the band maximum
    (or the global maximum with ``normalize_full_spectrum=True``) and the
    curve counts are averaged.

    The result is invariant under scaling of the input waveform by any
    positive factor: normalization cancels global amplitude, so any index
    change under an excitation-amplitude change must come from nonlinearity
    or noise, never from linear scaling.

    Raises
    ------
    AllZeroInBand, BandOutOfRange
    """
    prepared = apply_preprocess(w, params.preprocess)
    spectrum = magnitude_spectrum(prepared)
    normalized = normalize(
        spectrum, params.band, full_spectrum=normalize_full_spectrum
    )
    curve = spc_curve(normalized, params.band, params.grid)
    return SpcIndex(curve.mean, curve, params)
