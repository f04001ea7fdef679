from pathlib import Path

import numpy as np
import pytest

from spci import (
    BinaryLayout,
    DatasetManifest,
    FrequencyBand,
    MeasurementMeta,
    ModalMode,
    ModalPlateSpec,
    PreprocessOptions,
    Rc1Pulse,
    SpcParams,
    StudyRecord,
    ThresholdGrid,
    Waveform,
    modal_plate_response,
    rc1_waveform,
    write_binary_waveform,
    write_manifest,
)

DATA_DIR = Path(__file__).parent / "data"

# acquisition shape used throughout the synthetic lab: 10048 samples at
# 12.5 MHz, i.e. a deliberately non-power-of-two record length
RATE = 12.5e6
N_SAMPLES = 10048
DURATION = N_SAMPLES / RATE

BAND = FrequencyBand(10e3, 700e3)
GRID = ThresholdGrid(0.001, 0.01, 1.0)

PLATES = ("10J", "15J", "20J", "25J", "30J", "40J", "50J")

# twelve transmitter/receiver combinations; disc 4 appears in exactly two
PAIRS_12 = (
    (1, 2), (2, 1), (1, 3), (3, 1), (2, 3), (3, 2),
    (1, 5), (5, 1), (2, 5), (5, 2), (3, 4), (4, 3),
)


def std_params(preprocess: PreprocessOptions | None = None) -> SpcParams:
    return SpcParams(
        band=BAND, grid=GRID, preprocess=preprocess or PreprocessOptions()
    )


def rc1_excitation(u0: float = 1.0) -> Waveform:
    return rc1_waveform(Rc1Pulse(u0=u0, fc=500e3), RATE, DURATION)


def plate_modes(plate_seed: int, n_modes: int = 28) -> tuple[ModalMode, ...]:
    """Deterministic resonance table for one synthetic plate."""
    rng = np.random.default_rng(plate_seed)
    freqs = np.linspace(25e3, 675e3, n_modes) + rng.uniform(-7e3, 7e3, n_modes)
    gains = rng.lognormal(mean=0.0, sigma=1.0, size=n_modes)
    return tuple(
        ModalMode(f=float(f), q=float(np.pi * f * 120e-6), gain=float(g))
        for f, g in zip(freqs, gains)
    )


def plate_waveform(
    plate_seed: int,
    pair_seed: int | None = None,
    noise_seed: int = 0,
    noise_frac: float = 0.0,
    u0: float = 1.0,
    nonlinearity: tuple[str, float] | None = None,
    gain_jitter: float = 0.3,
) -> Waveform:
    """Response of a synthetic plate; the pair seed perturbs modal coupling.

    ``pair_seed=None`` gives the pair-independent response. ``noise_frac``
    scales the additive noise RMS relative to the clean response RMS.
    """
    modes = plate_modes(plate_seed)
    if pair_seed is not None:
        rng = np.random.default_rng((plate_seed, pair_seed))
        factors = np.exp(rng.normal(0.0, gain_jitter, len(modes)))
        modes = tuple(
            ModalMode(m.f, m.q, m.gain * float(c)) for m, c in zip(modes, factors)
        )
    excitation = rc1_excitation(u0)
    clean = modal_plate_response(
        excitation, ModalPlateSpec(modes=modes), nonlinearity
    )
    if noise_frac <= 0:
        return clean
    noise_rms = noise_frac * float(np.sqrt(np.mean(clean.samples**2)))
    return modal_plate_response(
        excitation,
        ModalPlateSpec(modes=modes, noise_rms=noise_rms, seed=noise_seed),
        nonlinearity,
    )


def make_record(
    waveform: Waveform,
    plate_id: str,
    tx: int,
    rx: int,
    excitation_pct: int = 20,
    gain_db: int = 22,
    repetition: int = 1,
    n_avg: int = 256,
) -> StudyRecord:
    meta = MeasurementMeta(
        plate_id=plate_id,
        tx_disc=tx,
        rx_disc=rx,
        excitation_pct=excitation_pct,
        gain_db=gain_db,
        tx_channel=f"Ch{tx}",
        rx_channel=f"Ch{rx}",
        n_avg=n_avg,
        repetition=repetition,
    )
    return StudyRecord(meta=meta, waveform=waveform)


@pytest.fixture(scope="session")
def lab_dataset() -> list[StudyRecord]:
    """7 plates x 12 pairs at the standard 20 % / 22 dB condition."""
    records = []
    for p, plate in enumerate(PLATES):
        for tx, rx in PAIRS_12:
            w = plate_waveform(
                plate_seed=100 + p,
                pair_seed=10 * tx + rx,
                noise_seed=1000 * p + 10 * tx + rx,
                noise_frac=0.05,
            )
            records.append(make_record(w, plate, tx, rx))
    return records


def write_dataset(
    directory: Path, records: list[StudyRecord], layout: BinaryLayout | str = None
) -> Path:
    """Materialize in-memory records as files plus a manifest; returns its path."""
    layout = layout or BinaryLayout("f64")
    directory.mkdir(parents=True, exist_ok=True)
    on_disk = []
    for rec in records:
        m = rec.meta
        name = (
            f"{m.plate_id}_tx{m.tx_disc}_rx{m.rx_disc}"
            f"_a{m.excitation_pct}_r{m.repetition:02d}.f64"
        )
        w = rec.load()
        write_binary_waveform(directory / name, w, layout)
        on_disk.append(
            StudyRecord(
                meta=m,
                source=directory / name,
                layout=layout,
                sample_rate=w.sample_rate,
                n_samples=len(w),
            )
        )
    manifest = DatasetManifest(tuple(on_disk), on_disk[0].sample_rate)
    path = directory / "manifest.json"
    write_manifest(path, manifest, layout)
    return path


def random_waveform(rng: np.random.Generator, n: int, rate: float = 1e6) -> Waveform:
    return Waveform(rng.normal(size=n), rate)
