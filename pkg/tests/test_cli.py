import json

import numpy as np
import pytest

from spci import BinaryLayout, Waveform, write_binary_waveform
from spci.cli import main
from conftest import (
    DATA_DIR,
    RATE,
    make_record,
    plate_waveform,
    write_dataset,
)

DEMO = DATA_DIR / "demo"

SCIENCE_FLAGS = {
    "--f-min": "10e3",
    "--f-max": "700e3",
    "--thr-min": "0.001",
    "--thr-step": "0.01",
    "--thr-max": "1",
}


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def compute_args(**overrides):
    args = ["compute", "--input", str(DEMO / "plate10J_tx2_rx3_a20_r01.f64"),
            "--layout", "f64le", "--rate", "12.5e6"]
    flags = dict(SCIENCE_FLAGS)
    flags.update(overrides)
    for flag, value in flags.items():
        if value is not None:
            args += [flag, value]
    return args


# --- compute -----------------------------------------------------------------------


def test_compute_demo_record_curve_point(capsys):
    code, out, _ = run(capsys, *compute_args())
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == 1
    thresholds = doc["curve"]["thresholds"]
    counts = doc["curve"]["counts"]
    assert abs(thresholds[11] - 0.111) < 1e-12
    assert counts[11] == 27
    golden = json.loads((DEMO / "golden.json").read_text())
    assert doc["spc_index"] == golden["spc_index"]
    assert counts == golden["counts"]


def test_compute_output_is_byte_identical_across_runs(capsys, tmp_path):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert run(capsys, *compute_args(), "--output", str(out1))[0] == 0
    assert run(capsys, *compute_args(), "--output", str(out2))[0] == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_compute_echoes_every_science_parameter(capsys):
    _, out, _ = run(capsys, *compute_args())
    params = json.loads(out)["params"]
    for key in ("f_min", "f_max", "thr_min", "thr_step", "thr_max", "dc_correct",
                "zero_pad", "normalize_full_spectrum", "layout", "sample_rate"):
        assert key in params


@pytest.mark.parametrize("flag", sorted(SCIENCE_FLAGS))
def test_compute_missing_science_flag_exits_2(capsys, flag):
    code, _, err = run(capsys, *compute_args(**{flag: None}))
    assert code == 2
    assert flag.lstrip("-") in err
    assert "required" in err


def test_compute_binary_needs_rate(capsys, tmp_path):
    args = compute_args()
    i = args.index("--rate")
    del args[i : i + 2]
    code, _, err = run(capsys, *args)
    assert code == 2
    assert "--rate" in err


def test_compute_variant_flags_change_nothing_on_zero_dc_pow2_input(capsys, tmp_path):
    rng = np.random.default_rng(6)
    samples = rng.normal(size=4096)
    samples[0] = 0.0
    path = tmp_path / "w.f64"
    write_binary_waveform(path, Waveform(samples, RATE), BinaryLayout("f64"))
    base_args = compute_args()
    base_args[2] = str(path)
    code, out_plain, _ = run(capsys, *base_args)
    assert code == 0
    code, out_flags, _ = run(capsys, *base_args, "--dc-correct", "--zero-pad")
    assert code == 0
    plain = json.loads(out_plain)
    flagged = json.loads(out_flags)
    assert plain["spc_index"] == flagged["spc_index"]
    assert plain["curve"]["counts"] == flagged["curve"]["counts"]


def test_compute_all_zero_band_exits_3(capsys, tmp_path):
    path = tmp_path / "zeros.f64"
    write_binary_waveform(path, Waveform(np.zeros(1000), RATE), BinaryLayout("f64"))
    args = compute_args()
    args[2] = str(path)
    code, _, err = run(capsys, *args)
    assert code == 3
    assert "band" in err


def test_compute_band_beyond_nyquist_exits_2(capsys):
    code, _, err = run(capsys, *compute_args(**{"--f-max": "100e6"}))
    assert code == 2
    assert "Nyquist" in err


# --- synth -------------------------------------------------------------------------


def test_synth_rc1_sample_count(capsys, tmp_path):
    out = tmp_path / "pulse.f64"
    code, echo, _ = run(
        capsys, "synth", "rc1", "--fc", "500e3", "--rate", "12.5e6",
        "--dur", "804e-6", "--out", str(out),
    )
    assert code == 0
    doc = json.loads(echo)
    assert doc["n_samples"] == 10050
    assert out.stat().st_size == 10050 * 8


def test_synth_qmix_linear_limit(capsys, tmp_path):
    out = tmp_path / "two_tone.f64"
    code, echo, _ = run(
        capsys, "synth", "qmix", "--e1", "0", "--tone", "1.0,50e3",
        "--tone", "0.5,300e3", "--rate", "2e6", "--dur", "5e-3", "--out", str(out),
    )
    assert code == 0
    assert json.loads(echo)["e1"] == 0.0
    data = np.frombuffer(out.read_bytes(), dtype="<f8")
    spectrum = np.abs(np.fft.rfft(data))
    dominant = np.argsort(spectrum)[-2:]
    freqs = np.fft.rfftfreq(len(data), 1 / 2e6)[dominant]
    assert sorted(np.round(freqs / 1e3)) == [50, 300]


def test_synth_modal_deterministic(capsys, tmp_path):
    modes = tmp_path / "modes.csv"
    modes.write_text("frequency,q,gain\n100e3,80,1.0\n250e3,120,0.5\n")
    outs = []
    for name in ("a.f64", "b.f64"):
        out = tmp_path / name
        code, _, _ = run(
            capsys, "synth", "modal", "--modes", str(modes), "--seed", "7",
            "--noise-rms", "1e-9", "--rate", "12.5e6", "--dur", "803.84e-6",
            "--out", str(out),
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_synth_invalid_spec_exits_2(capsys, tmp_path):
    code, _, err = run(
        capsys, "synth", "rc1", "--fc", "500e3", "--rate", "12.5e6",
        "--dur", "1e-6", "--out", str(tmp_path / "x.f64"),
    )
    assert code == 2
    assert "period" in err


# --- study -------------------------------------------------------------------------


def study_spec(tmp_path, **extra):
    spec = {
        "study": "amplitude",
        "band": {"f_min": 10e3, "f_max": 700e3},
        "grid": {"thr_min": 0.001, "thr_step": 0.01, "thr_max": 1.0},
        "preprocess": {"dc_correct": False, "zero_pad": False},
    }
    spec.update(extra)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


def linear_amplitude_manifest(tmp_path):
    # one plate measured at three drive levels; linear physics scales only
    records = []
    base = plate_waveform(81)
    for pct, gain in ((5, 35), (20, 22), (80, 10)):
        scaled = Waveform(base.samples * (pct / 100), base.sample_rate)
        records.append(make_record(scaled, "10J", 2, 3, excitation_pct=pct, gain_db=gain))
    return write_dataset(tmp_path / "lab", records)


def test_study_amplitude_invariant_summary(capsys, tmp_path):
    manifest = linear_amplitude_manifest(tmp_path)
    spec = study_spec(tmp_path)
    code, out, _ = run(
        capsys, "study", "--manifest", str(manifest), "--spec", str(spec),
        "--out-dir", str(tmp_path / "reports"), "--format", "csv",
    )
    assert code == 0
    assert "invariant" in out
    report = json.loads((tmp_path / "reports" / "amplitude.json").read_text())
    assert report["extras"]["series"][0]["invariant"]
    assert (tmp_path / "reports" / "amplitude.csv").exists()


def test_study_preprocess_writes_matrix(capsys, tmp_path):
    records = [make_record(plate_waveform(82, noise_frac=0.05, noise_seed=3), "10J", 2, 3),
               make_record(plate_waveform(83, noise_frac=0.05, noise_seed=4), "20J", 2, 3)]
    manifest = write_dataset(tmp_path / "lab", records)
    spec = study_spec(tmp_path, study="preprocess")
    code, out, _ = run(
        capsys, "study", "--manifest", str(manifest), "--spec", str(spec),
        "--out-dir", str(tmp_path / "reports"),
    )
    assert code == 0
    report = json.loads((tmp_path / "reports" / "preprocess_sensitivity.json").read_text())
    assert len(report["rows"]) == 2 * 4  # plates x preprocessing variants


def test_study_reciprocity_unpaired_exits_4(capsys, tmp_path):
    records = [make_record(plate_waveform(84), "10J", 2, 3)]
    manifest = write_dataset(tmp_path / "lab", records)
    spec = study_spec(tmp_path, study="reciprocity")
    code, _, err = run(
        capsys, "study", "--manifest", str(manifest), "--spec", str(spec),
        "--out-dir", str(tmp_path / "reports"),
    )
    assert code == 4
    assert "plate=10J" in err


def test_study_spec_missing_key_exits_2(capsys, tmp_path):
    manifest = linear_amplitude_manifest(tmp_path)
    spec = {
        "study": "amplitude",
        "band": {"f_min": 10e3, "f_max": 700e3},
        "grid": {"thr_min": 0.001, "thr_max": 1.0},  # thr_step missing
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(
        capsys, "study", "--manifest", str(manifest), "--spec", str(path),
        "--out-dir", str(tmp_path / "reports"),
    )
    assert code == 2
    assert "thr_step" in err


@pytest.mark.parametrize(
    "drop",
    ["band.f_min", "band.f_max", "grid.thr_min", "grid.thr_step", "grid.thr_max"],
)
def test_study_spec_each_science_key_required(capsys, tmp_path, drop):
    manifest = linear_amplitude_manifest(tmp_path)
    spec = json.loads(study_spec(tmp_path).read_text())
    section, key = drop.split(".")
    del spec[section][key]
    path = tmp_path / "dropped.json"
    path.write_text(json.dumps(spec))
    code, _, err = run(
        capsys, "study", "--manifest", str(manifest), "--spec", str(path),
        "--out-dir", str(tmp_path / "reports"),
    )
    assert code == 2
    assert key in err


def test_synth_missing_required_flag_exits_2(capsys, tmp_path):
    code, _, err = run(
        capsys, "synth", "qmix", "--e1", "0.1", "--rate", "1e6",
        "--dur", "1e-3", "--out", str(tmp_path / "x.f64"),
    )
    assert code == 2
    assert "tone" in err


def test_compute_reads_csv_input(capsys, tmp_path):
    from spci import write_csv_waveform

    w = plate_waveform(88)
    path = tmp_path / "w.csv"
    write_csv_waveform(path, w)
    args = compute_args()
    args[2] = str(path)
    args[4] = "csv"
    code, out, _ = run(capsys, *args)
    assert code == 0
    direct = json.loads(run(capsys, *compute_args())[1])
    ours = json.loads(out)
    assert ours["params"]["sample_rate"] == pytest.approx(12.5e6, rel=1e-9)
    assert isinstance(ours["spc_index"], float) and ours != direct


def test_compute_norm_full_spectrum_changes_dc_heavy_result(capsys, tmp_path):
    rng = np.random.default_rng(9)
    w = Waveform(rng.normal(size=4096) * 1e-3 + 5.0, RATE)  # huge DC bin
    path = tmp_path / "dc.f64"
    write_binary_waveform(path, w, BinaryLayout("f64"))
    args = compute_args()
    args[2] = str(path)
    band_norm = json.loads(run(capsys, *args)[1])
    full_norm = json.loads(run(capsys, *args, "--norm-full-spectrum")[1])
    assert band_norm["spc_index"] != full_norm["spc_index"]
    assert full_norm["params"]["normalize_full_spectrum"] is True


def test_study_enforce_pairing(capsys, tmp_path):
    records = [
        make_record(plate_waveform(85), "10J", 2, 3, excitation_pct=20, gain_db=35,
                    repetition=1),
        make_record(plate_waveform(86), "10J", 2, 3, excitation_pct=20, gain_db=35,
                    repetition=2),
    ]
    manifest = write_dataset(tmp_path / "lab", records)
    spec = study_spec(tmp_path, study="repeatability")
    base = ["study", "--manifest", str(manifest), "--spec", str(spec),
            "--out-dir", str(tmp_path / "reports")]
    assert run(capsys, *base)[0] == 0
    code, _, err = run(capsys, *base, "--enforce-pairing")
    assert code == 2
    assert "35" in err
