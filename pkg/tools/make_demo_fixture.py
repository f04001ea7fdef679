#!/usr/bin/env python3
"""Regenerate the committed demo dataset under tests/data/demo/.

One synthetic plate record (10048 samples at 12.5 MHz, reverberant modal
response to a raised-cosine pulse, plus seeded noise and a DC offset) and the
golden evaluation results frozen from it. The mode table is kept as literals
so regeneration does not depend on any tuning procedure.

Run from the repository root:  python tools/make_demo_fixture.py
"""

import json
import sys
from pathlib import Path

import numpy as np

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from spci import (
    BinaryLayout,
    DatasetManifest,
    FrequencyBand,
    MeasurementMeta,
    ModalMode,
    ModalPlateSpec,
    Rc1Pulse,
    SpcParams,
    StudyRecord,
    ThresholdGrid,
    Waveform,
    magnitude_spectrum,
    modal_plate_response,
    normalize,
    rc1_waveform,
    spc_index,
    write_binary_waveform,
    write_manifest,
)
from oracle import dft_magnitudes, naive_spc

RATE = 12.5e6
N_SAMPLES = 10048
DURATION = N_SAMPLES / RATE
NOISE_SEED = 20240
NOISE_RMS = 1.717286630815914e-08
DC_OFFSET = 1.7e-07  # roughly half the clean response RMS

# resonance table of the demo plate (frequency Hz, quality factor, gain)
FREQS = [
    25287.47258267156, 40560.65892408345, 64891.41033305424, 82250.76928988885,
    94306.5987628871, 124178.0564549352, 140898.38230623718, 160491.59519273523,
    171890.30476857716, 195051.69007827624, 213390.75276137923, 239356.4739838303,
    255255.79320567386, 276696.66877101467, 291438.61744475155, 308138.6293672997,
    331360.89979713125, 344765.8070732501, 373225.69171096984, 390168.20808358246,
    410979.405822201, 425430.7822057937, 452118.964528033, 470482.1593382194,
    488399.42549429694, 500688.6056706942, 523247.71086825384, 537466.821660035,
    558086.7680224577, 583725.9992036154, 603760.6752826587, 625727.7638480341,
    637321.6690035402, 657151.3988253596, 677634.6697353097,
]
QS = [
    9.533152571228914, 15.291008172079422, 24.46348535800848, 31.007809506386856,
    35.55275014302316, 46.81402438750597, 53.1174387307153, 60.50390597044848,
    64.80111824211271, 73.53275479442229, 80.44641854629738, 90.23526483081093,
    96.22916696654165, 104.31218662605457, 109.86977034441571, 116.16552651690444,
    124.92011621874853, 129.97364720523342, 140.70277094521822, 147.0899491415612,
    154.935585852927, 160.38362639864172, 170.44483410118713, 177.3675954506415,
    184.12224565804306, 188.7551574373404, 197.2597397365659, 202.6202182170506,
    210.39375485820293, 220.05951729689275, 227.61241223932956, 235.89380952625834,
    240.2646087978129, 247.74024082152073, 255.46225203098334,
]
GAINS = [
    1.0504900210794543, 0.3465312072993543, 0.7089270030576411, 0.915647381047363,
    0.46378361785946354, 0.15981074800338263, 0.7111241510594626, 0.0802582036032785,
    0.6365252935406351, 0.43877859715484663, 0.0006574660898440657, 0.5438409893120719,
    0.9668093757432941, 0.09948472297572172, 0.0378264873125896, 0.29302540943866345,
    0.6179847040697095, 0.07906059668507191, 0.0020712179720638077, 0.004255932715578714,
    0.7540613663736363, 0.8090832647181189, 1.0927036384759867, 0.5337022659348548,
    0.9115500983465196, 0.4878997722304292, 0.24883823342595937, 0.3597915594684734,
    0.18437799700777815, 0.9640485765006521, 0.0002020760926390611, 1.0822265558653228,
    0.0001801005736024264, 0.36851103892632725, 0.7616991164612233,
]

BAND = FrequencyBand(10e3, 700e3)
GRID = ThresholdGrid(0.001, 0.01, 1.0)


def build_waveform() -> Waveform:
    modes = tuple(ModalMode(f, q, g) for f, q, g in zip(FREQS, QS, GAINS))
    spec = ModalPlateSpec(modes=modes, noise_rms=NOISE_RMS, seed=NOISE_SEED)
    excitation = rc1_waveform(Rc1Pulse(u0=1.0, fc=500e3), RATE, DURATION)
    response = modal_plate_response(excitation, spec)
    return Waveform(response.samples + DC_OFFSET, RATE)


def main() -> None:
    out_dir = REPO / "tests" / "data" / "demo"
    out_dir.mkdir(parents=True, exist_ok=True)
    w = build_waveform()
    layout = BinaryLayout("f64")
    record_name = "plate10J_tx2_rx3_a20_r01.f64"
    write_binary_waveform(out_dir / record_name, w, layout)

    meta = MeasurementMeta(
        plate_id="10J", tx_disc=2, rx_disc=3, excitation_pct=20, gain_db=22,
        tx_channel="Ch2", rx_channel="Ch3", n_avg=256, repetition=1,
    )
    record = StudyRecord(
        meta=meta, source=out_dir / record_name, layout=layout,
        sample_rate=RATE, n_samples=N_SAMPLES,
    )
    write_manifest(
        out_dir / "manifest.json", DatasetManifest((record,), RATE), layout
    )

    params = SpcParams(band=BAND, grid=GRID)
    idx = spc_index(w, params)
    normalized = normalize(magnitude_spectrum(w), BAND)
    write_binary_waveform(
        out_dir / "golden_normalized_spectrum.f64",
        Waveform(normalized.magnitudes, 1.0),
        layout,
    )

    # independent checks before freezing anything
    oracle_mags = dft_magnitudes(w.samples)
    np.testing.assert_allclose(
        normalized.magnitudes * normalized.norm_factor,
        oracle_mags,
        rtol=0,
        atol=1e-9 * oracle_mags.max(),
    )
    _, counts, mean = naive_spc(
        w.samples, RATE, BAND.f_min, BAND.f_max,
        GRID.thr_min, GRID.thr_step, GRID.thr_max,
    )
    assert counts == idx.curve.counts.tolist(), "brute-force oracle disagrees"
    assert mean == idx.value
    assert idx.curve.counts[11] == 27, f"expected 27 at thr 0.111, got {idx.curve.counts[11]}"

    golden = {
        "record": record_name,
        "sample_rate": RATE,
        "n_samples": N_SAMPLES,
        "params": params.to_dict(),
        "spc_index": idx.value,
        "counts": idx.curve.counts.tolist(),
        "spc_at_threshold_0p111": int(idx.curve.counts[11]),
        "norm_factor": normalized.norm_factor,
        "normalized_spectrum_file": "golden_normalized_spectrum.f64",
    }
    (out_dir / "golden.json").write_text(
        json.dumps(golden, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"wrote demo dataset to {out_dir}")
    print(f"spc_index={idx.value} spc(0.111)={idx.curve.counts[11]}")


if __name__ == "__main__":
    main()
