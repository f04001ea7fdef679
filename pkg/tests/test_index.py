import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spci import (
    BandOutOfRange,
    BinaryLayout,
    FrequencyBand,
    NormalizedSpectrum,
    PreprocessOptions,
    SpcCurve,
    SpcIndex,
    SpcParams,
    ThresholdGrid,
    Waveform,
    dc_correct,
    find_peaks,
    magnitude_spectrum,
    normalize,
    read_binary_waveform,
    spc_curve,
    spc_index,
    zero_pad_pow2,
)
from conftest import BAND, DATA_DIR, GRID, RATE, random_waveform
from oracle import naive_grid, naive_spc


def nspec(mags, freq_step=1.0) -> NormalizedSpectrum:
    mags = np.asarray(mags, dtype=float)
    return NormalizedSpectrum(mags, freq_step, 2 * (len(mags) - 1), norm_factor=1.0)


def full_band(s) -> FrequencyBand:
    return FrequencyBand(0.0, s.nyquist)


# --- find_peaks -----------------------------------------------------------------


def test_find_peaks_example():
    s = nspec([0.1, 0.9, 0.1, 0.5, 0.4])
    assert find_peaks(s, full_band(s), 0.3) == [1, 3]
    assert find_peaks(s, full_band(s), 0.95) == []


def test_threshold_comparison_is_strict():
    s = nspec([0.1, 0.5, 0.1, 1.0, 0.0])
    band = full_band(s)
    assert find_peaks(s, band, 0.5) == [3]
    assert find_peaks(s, band, 1.0) == []
    assert 3 in find_peaks(s, band, 0.999)


@pytest.mark.parametrize(
    "mags, expected",
    [
        ([0.0, 1.0, 1.0, 0.0], [1]),          # plateau counts once, leftmost bin
        ([1.0, 1.0, 0.0], []),                 # plateau starting at the edge
        ([0.0, 1.0, 1.0], []),                 # plateau running off the edge
        ([0.0, 0.5, 0.5, 0.2, 0.8, 0.0], [1, 4]),
        ([1.0, 0.0, 1.0], []),                 # edges can never be peaks
        ([0.2, 0.2, 0.2], []),                 # constant has no peaks
    ],
)
def test_plateau_and_edge_rules(mags, expected):
    s = nspec(mags)
    assert find_peaks(s, full_band(s), 0.05) == expected


def test_band_edge_bin_with_neighbour_outside_band_counts():
    # bin 1 is a strict local max; the band holds only bin 1
    s = nspec([0.5, 0.9, 0.1], freq_step=1.0)
    assert find_peaks(s, FrequencyBand(0.9, 1.1), 0.3) == [1]


def test_spectrum_edge_bins_never_peaks():
    s = nspec([0.9, 0.1, 0.8])
    assert find_peaks(s, full_band(s), 0.05) == []


def test_band_out_of_range():
    s = nspec([0.1, 0.9, 0.1, 0.5, 0.4], freq_step=10.0)  # nyquist = 40
    with pytest.raises(BandOutOfRange):
        find_peaks(s, FrequencyBand(0.0, 100.0), 0.5)
    with pytest.raises(BandOutOfRange):
        find_peaks(s, FrequencyBand(12.0, 17.0), 0.5)  # between bins


def test_thr_validation():
    s = nspec([0.1, 0.9, 0.1])
    with pytest.raises(ValueError):
        find_peaks(s, full_band(s), 0.0)
    with pytest.raises(ValueError):
        find_peaks(s, full_band(s), 1.5)


# --- ThresholdGrid --------------------------------------------------------------


def test_grid_examples():
    g = ThresholdGrid(0.001, 0.01, 1.0)
    assert g.n_thresholds == 100
    assert g.values()[0] == 0.001
    assert g.values()[-1] == pytest.approx(0.991, abs=1e-12)

    g2 = ThresholdGrid(0.0001, 0.001, 1.0)
    assert g2.n_thresholds == 1000

    g3 = ThresholdGrid(0.001, 0.111, 1.0)
    assert g3.n_thresholds == 10
    assert g3.values()[-1] == 1.0

    g4 = ThresholdGrid(0.0001, 0.111, 1.0)
    assert g4.n_thresholds == 10


def test_grid_single_point():
    g = ThresholdGrid(0.1, 0.2, 0.11)
    assert g.n_thresholds == 1
    np.testing.assert_array_equal(g.values(), [0.1])


def test_grid_validation():
    with pytest.raises(ValueError):
        ThresholdGrid(0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        ThresholdGrid(0.5, 0.1, 0.4)
    with pytest.raises(ValueError):
        ThresholdGrid(0.5, -0.1, 1.0)
    with pytest.raises(ValueError):
        ThresholdGrid(0.5, 0.1, 1.2)


@given(
    thr_min=st.floats(min_value=1e-4, max_value=0.5),
    steps=st.integers(min_value=1, max_value=500),
    thr_step=st.floats(min_value=1e-4, max_value=0.1),
)
@settings(max_examples=100, deadline=None)
def test_grid_value_invariants(thr_min, steps, thr_step):
    thr_max = min(thr_min + steps * thr_step, 1.0)
    g = ThresholdGrid(thr_min, thr_step, thr_max)
    vals = g.values()
    assert len(vals) == g.n_thresholds >= 1
    assert np.all(vals > 0) and np.all(vals <= 1)
    assert np.all(np.diff(vals) > 0)
    assert vals[0] == thr_min


# --- spc_curve ------------------------------------------------------------------


def test_curve_counts_peaks_per_threshold():
    # unit bin at index 0 anchors normalization but is never a peak
    s = nspec([1.0, 0.0, 0.2, 0.0, 0.5, 0.0, 0.9, 0.0])
    grid = ThresholdGrid(0.1, 0.3, 0.7)
    curve = spc_curve(s, full_band(s), grid)
    np.testing.assert_array_equal(curve.thresholds, [0.1, 0.4, 0.7])
    np.testing.assert_array_equal(curve.counts, [3, 2, 1])


def test_curve_zero_counts_on_flat_spectrum():
    s = nspec([1.0, 0.0, 0.0, 0.0, 0.0])
    curve = spc_curve(s, full_band(s), ThresholdGrid(0.1, 0.1, 0.9))
    assert np.all(curve.counts == 0)


def test_curve_agrees_with_find_peaks_everywhere():
    rng = np.random.default_rng(17)
    mags = rng.uniform(0, 1, 301)
    mags[0] = 1.0
    s = nspec(mags)
    band = FrequencyBand(5.0, 120.0)
    grid = ThresholdGrid(0.05, 0.05, 1.0)
    curve = spc_curve(s, band, grid)
    for thr, count in zip(curve.thresholds, curve.counts):
        assert count == len(find_peaks(s, band, thr))


@given(st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_curve_monotone_on_random_spectra(seed):
    rng = np.random.default_rng(seed)
    mags = rng.uniform(0, 1, 200)
    mags[0] = 1.0
    curve = spc_curve(nspec(mags), FrequencyBand(1.0, 80.0), ThresholdGrid(0.01, 0.013, 1.0))
    assert np.all(np.diff(curve.counts) <= 0)


def test_curve_constructor_rejects_violations():
    with pytest.raises(ValueError):
        SpcCurve([0.1, 0.2], [1, 2])  # increasing counts
    with pytest.raises(ValueError):
        SpcCurve([0.2, 0.1], [2, 1])  # decreasing thresholds
    with pytest.raises(ValueError):
        SpcCurve([0.1, 0.2], [2, -1])


# --- spc_index ------------------------------------------------------------------


def test_single_tone_gives_index_one():
    n, k = 2048, 300
    w = Waveform(np.sin(2 * np.pi * k * np.arange(n) / n), float(n))
    params = SpcParams(
        band=FrequencyBand(10.0, 900.0), grid=ThresholdGrid(0.05, 0.05, 0.95)
    )
    idx = spc_index(w, params)
    assert idx.value == 1.0
    assert np.all(idx.curve.counts == 1)


def test_index_value_is_curve_mean():
    rng = np.random.default_rng(5)
    w = random_waveform(rng, 700)
    idx = spc_index(w, SpcParams(FrequencyBand(1e4, 4e5), ThresholdGrid(0.01, 0.01, 1.0)))
    assert idx.value == float(np.mean(idx.curve.counts))
    assert 0 <= idx.value <= idx.curve.counts[0]


def test_spc_index_validates_consistency():
    curve = SpcCurve([0.1, 0.2], [3, 1])
    params = SpcParams(FrequencyBand(1.0, 2.0), ThresholdGrid(0.1, 0.1, 0.2))
    with pytest.raises(ValueError):
        SpcIndex(5.0, curve, params)


def test_preprocess_order_dc_before_pad():
    # non-zero first sample and non-power-of-two length make the order matter
    rng = np.random.default_rng(13)
    w = Waveform(rng.normal(size=1000) + 2.0, 1000.0)
    params = SpcParams(
        band=FrequencyBand(10.0, 400.0),
        grid=ThresholdGrid(0.01, 0.01, 1.0),
        preprocess=PreprocessOptions(dc_correct=True, zero_pad=True),
    )
    idx = spc_index(w, params)
    manual = zero_pad_pow2(dc_correct(w))
    ns = normalize(magnitude_spectrum(manual), params.band)
    expected = spc_curve(ns, params.band, params.grid)
    np.testing.assert_array_equal(idx.curve.counts, expected.counts)
    # the reversed order would leave a step edge inside the padded record
    wrong = dc_correct(zero_pad_pow2(w))
    assert not np.array_equal(manual.samples, wrong.samples)


def test_determinism_bit_identical():
    rng = np.random.default_rng(99)
    w = random_waveform(rng, 4096)
    params = SpcParams(FrequencyBand(1e4, 4.9e5), ThresholdGrid(0.001, 0.01, 1.0))
    a = spc_index(w, params)
    b = spc_index(w, params)
    assert a.value == b.value
    np.testing.assert_array_equal(a.curve.counts, b.curve.counts)
    np.testing.assert_array_equal(a.curve.thresholds, b.curve.thresholds)


def test_amplitude_invariance_spot():
    rng = np.random.default_rng(41)
    w = random_waveform(rng, 3001)
    params = SpcParams(FrequencyBand(1e4, 4.9e5), ThresholdGrid(0.001, 0.01, 1.0))
    base = spc_index(w, params)
    for alpha in (3.0, 0.007, 123.456):
        scaled = spc_index(Waveform(alpha * w.samples, w.sample_rate), params)
        assert scaled.value == base.value
        np.testing.assert_array_equal(scaled.curve.counts, base.curve.counts)


def test_oracle_equivalence_small_records():
    rng = np.random.default_rng(2718)
    band = FrequencyBand(0.05, 0.35)  # fractions of a 1 Hz rate
    grid = ThresholdGrid(0.02, 0.02, 1.0)
    for _ in range(20):
        n = int(rng.integers(16, 257))
        x = rng.normal(size=n)
        for dc in (False, True):
            for pad in (False, True):
                params = SpcParams(band, grid, PreprocessOptions(dc, pad))
                idx = spc_index(Waveform(x, 1.0), params)
                _, counts, mean = naive_spc(
                    x, 1.0, band.f_min, band.f_max,
                    grid.thr_min, grid.thr_step, grid.thr_max, dc=dc, pad=pad,
                )
                assert idx.curve.counts.tolist() == counts
                assert idx.value == mean


def test_grid_refinement_bound_on_demo_fixture():
    golden = json.loads((DATA_DIR / "demo" / "golden.json").read_text())
    w = read_binary_waveform(
        DATA_DIR / "demo" / golden["record"], BinaryLayout("f64"), RATE
    )
    coarse = spc_index(w, SpcParams(BAND, GRID))
    fine = spc_index(w, SpcParams(BAND, ThresholdGrid(0.001, 0.005, 1.0)))
    bound = float(fine.curve.counts.max() - fine.curve.counts.min())
    assert abs(coarse.value - fine.value) <= bound


def test_spc_index_error_paths():
    from spci import AllZeroInBand

    rng = np.random.default_rng(61)
    w = random_waveform(rng, 512, rate=1e6)
    grid = ThresholdGrid(0.01, 0.01, 1.0)
    with pytest.raises(BandOutOfRange):
        spc_index(w, SpcParams(FrequencyBand(10e3, 2e6), grid))  # beyond Nyquist
    zeros = Waveform(np.zeros(512), 1e6)
    with pytest.raises(AllZeroInBand):
        spc_index(zeros, SpcParams(FrequencyBand(10e3, 4e5), grid))


def test_grid_oracle_values_match():
    for spec in ((0.001, 0.01, 1.0), (0.0001, 0.001, 1.0), (0.001, 0.111, 1.0)):
        ours = ThresholdGrid(*spec).values()
        np.testing.assert_allclose(ours, naive_grid(*spec), rtol=0, atol=0)
