"""Sideband peak count index (SPC-I) toolkit.

Computes the threshold-sweep spectral peak-count index of ultrasonic records,
generates synthetic signals with controllable nonlinearity to test the index
against known ground truth, ingests measurement datasets, and runs the
robustness studies (preprocessing variants, threshold grids, transducer
pairs, propagation direction, excitation amplitude, repeatability,
acquisition averaging) whose outcomes decide whether the index is usable.
"""

from .errors import (
    AllZeroInBand,
    BandOutOfRange,
    DuplicateKey,
    DurationTooShort,
    EmptyFile,
    InsufficientRepetitions,
    InvalidPairing,
    IoError,
    MissingFile,
    MissingRecord,
    NonUniformSampling,
    ParseError,
    SpciError,
    TruncatedFile,
    UnknownLayout,
    UnpairedRecord,
)
from .waveform import (
    FrequencyBand,
    NormalizedSpectrum,
    PreprocessOptions,
    Spectrum,
    Waveform,
    apply_preprocess,
    dc_correct,
    magnitude_spectrum,
    next_pow2,
    normalize,
    zero_pad_pow2,
)
from .index import (
    SpcCurve,
    SpcIndex,
    SpcParams,
    ThresholdGrid,
    find_peaks,
    spc_curve,
    spc_index,
)
from .synth import (
    HertzianMixSpec,
    ModalMode,
    ModalPlateSpec,
    QuadraticMixSpec,
    Rc1Pulse,
    Tone,
    add_noise,
    bin_frequency,
    hertzian_mix_waveform,
    modal_plate_response,
    quadratic_mix_waveform,
    rc1_value,
    rc1_waveform,
)
from .ingest import (
    GAIN_BY_EXCITATION,
    BinaryLayout,
    DatasetManifest,
    MeasurementMeta,
    StudyRecord,
    load_manifest,
    parse_layout,
    read_binary_waveform,
    read_csv_waveform,
    write_binary_waveform,
    write_csv_waveform,
    write_manifest,
)
from .studies import (
    GroupStats,
    StudyResult,
    StudyRow,
    SweepSpec,
    average_waveforms,
    classify_triples,
    emit_report,
    meta_selector,
    run_amplitude_study,
    run_averaging_study,
    run_pair_sweep,
    run_preprocess_sensitivity,
    run_reciprocity,
    run_repeatability,
    run_sweep,
)

__version__ = "0.1.0"
