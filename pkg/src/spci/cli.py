"""Command-line interface.

Every parameter that can change an index value (band, threshold grid,
preprocessing switches, normalization scope) must be given explicitly; the
tool refuses to fill in scientific defaults silently, and echoes the complete
parameter set into every result so that two runs are comparable.

Exit codes: 0 success, 2 parameter/validation error, 3 no positive magnitude
in the normalization band, 4 missing or unpaired study records, 1 I/O
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import (
    AllZeroInBand,
    IoError,
    MissingRecord,
    SpciError,
    UnpairedRecord,
)
from .index import FrequencyBand, SpcParams, ThresholdGrid, spc_index
from .ingest import (
    BinaryLayout,
    load_manifest,
    parse_layout,
    read_csv_waveform,
    read_binary_waveform,
    write_binary_waveform,
    write_csv_waveform,
)
from .studies import (
    ALL_VARIANTS,
    emit_report,
    run_amplitude_study,
    run_pair_sweep,
    run_preprocess_sensitivity,
    run_reciprocity,
    run_repeatability,
)
from .synth import (
    HertzianMixSpec,
    ModalMode,
    ModalPlateSpec,
    QuadraticMixSpec,
    Rc1Pulse,
    hertzian_mix_waveform,
    modal_plate_response,
    quadratic_mix_waveform,
    rc1_waveform,
)
from .waveform import PreprocessOptions, Waveform

LAYOUT_CHOICES = ("csv", "i16le", "i16be", "f32le", "f32be", "f64le", "f64be")
STUDY_KINDS = ("preprocess", "grids", "pairs", "reciprocity", "amplitude", "repeatability")


class _CliError(Exception):
    """Validation failure; the message names the offending flag or key."""


def _tone(text: str) -> tuple[float, float]:
    try:
        c, f = text.split(",")
        return float(c), float(f)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected amplitude,frequency got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spci",
        description="Sideband peak count index: compute, synthesize, study.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # compute ---------------------------------------------------------------
    comp = sub.add_parser("compute", help="index of one waveform file")
    comp.add_argument("--input", required=True, help="waveform file")
    comp.add_argument("--layout", required=True, choices=LAYOUT_CHOICES)
    comp.add_argument("--rate", type=float, help="sample rate in Hz (binary and voltage-only CSV)")
    comp.add_argument("--scale", type=float, default=1.0, help="volts per count (binary)")
    comp.add_argument("--header-bytes", type=int, default=0, help="bytes to skip (binary)")
    comp.add_argument("--f-min", type=float, required=True, help="band start in Hz")
    comp.add_argument("--f-max", type=float, required=True, help="band end in Hz")
    comp.add_argument("--thr-min", type=float, required=True)
    comp.add_argument("--thr-step", type=float, required=True)
    comp.add_argument("--thr-max", type=float, required=True)
    comp.add_argument("--dc-correct", action="store_true")
    comp.add_argument("--zero-pad", action="store_true")
    comp.add_argument("--norm-full-spectrum", action="store_true",
                      help="normalize to the global maximum instead of the band maximum")
    comp.add_argument("--output", help="also write the JSON result here")
    comp.set_defaults(func=cmd_compute)

    # synth -----------------------------------------------------------------
    synth = sub.add_parser("synth", help="write a synthetic waveform")
    synth_sub = synth.add_subparsers(dest="generator", required=True)

    def add_common(p):
        p.add_argument("--rate", type=float, required=True)
        p.add_argument("--dur", type=float, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--format", default="f64le", choices=LAYOUT_CHOICES)

    rc1 = synth_sub.add_parser("rc1", help="single-cycle raised-cosine pulse")
    rc1.add_argument("--fc", type=float, required=True)
    rc1.add_argument("--u0", type=float, default=1.0)
    add_common(rc1)
    rc1.set_defaults(func=cmd_synth)

    qmix = synth_sub.add_parser("qmix", help="multi-tone quadratic mixing")
    qmix.add_argument("--e0", type=float, default=1.0)
    qmix.add_argument("--e1", type=float, required=True)
    qmix.add_argument("--amp", type=float, default=1.0)
    qmix.add_argument("--tone", type=_tone, action="append", required=True,
                      metavar="C,F", help="tone amplitude,frequency (repeatable)")
    add_common(qmix)
    qmix.set_defaults(func=cmd_synth)

    hmix = synth_sub.add_parser("hmix", help="tones with contact-type sidebands")
    hmix.add_argument("--e0", type=float, default=1.0)
    hmix.add_argument("--h1", type=float, required=True)
    hmix.add_argument("--amp", type=float, default=1.0)
    hmix.add_argument("--exponent", type=float, default=1.5)
    hmix.add_argument("--tone", type=_tone, action="append", required=True, metavar="C,F")
    add_common(hmix)
    hmix.set_defaults(func=cmd_synth)

    modal = synth_sub.add_parser("modal", help="reverberant plate surrogate")
    modal.add_argument("--modes", required=True,
                       help="CSV of modes: frequency_hz,q,gain per line")
    modal.add_argument("--seed", type=int, required=True)
    modal.add_argument("--noise-rms", type=float, default=0.0)
    modal.add_argument("--fc", type=float, default=500e3, help="excitation pulse frequency")
    modal.add_argument("--u0", type=float, default=1.0, help="excitation pulse amplitude")
    modal.add_argument("--nonlinearity", choices=("none", "quadratic", "hertzian"),
                       default="none")
    modal.add_argument("--strength", type=float, default=0.0)
    add_common(modal)
    modal.set_defaults(func=cmd_synth)

    # study -----------------------------------------------------------------
    study = sub.add_parser("study", help="run a study over a dataset manifest")
    study.add_argument("--manifest", required=True)
    study.add_argument("--spec", required=True, help="JSON study specification")
    study.add_argument("--out-dir", required=True)
    study.add_argument("--format", action="append", choices=("csv", "json", "gnuplot"),
                       help="report format(s); JSON is always written")
    study.add_argument("--enforce-pairing", action="store_true")
    study.add_argument("--max-workers", type=int)
    study.set_defaults(func=cmd_study)

    return parser


# --- compute -------------------------------------------------------------------


def _load_input(args) -> Waveform:
    if args.layout == "csv":
        return read_csv_waveform(args.input, sample_rate_hint=args.rate)
    if args.rate is None:
        raise _CliError("--rate is required for binary layouts")
    base = parse_layout(args.layout)
    layout = BinaryLayout(base.dtype, base.endianness, args.header_bytes, args.scale)
    return read_binary_waveform(args.input, layout, args.rate)


def _build_params(args) -> SpcParams:
    try:
        band = FrequencyBand(args.f_min, args.f_max)
        grid = ThresholdGrid(args.thr_min, args.thr_step, args.thr_max)
    except ValueError as exc:
        raise _CliError(str(exc))
    pre = PreprocessOptions(dc_correct=args.dc_correct, zero_pad=args.zero_pad)
    return SpcParams(band=band, grid=grid, preprocess=pre)


def cmd_compute(args) -> int:
    waveform = _load_input(args)
    params = _build_params(args)
    idx = spc_index(waveform, params, normalize_full_spectrum=args.norm_full_spectrum)
    doc = {
        "schema": 1,
        "input": args.input,
        "params": {
            **params.to_dict(),
            "normalize_full_spectrum": args.norm_full_spectrum,
            "layout": args.layout,
            "scale": args.scale,
            "header_bytes": args.header_bytes,
            "sample_rate": waveform.sample_rate,
            "input_samples": len(waveform),
        },
        "spc_index": idx.value,
        "curve": {
            "thresholds": idx.curve.thresholds.tolist(),
            "counts": idx.curve.counts.tolist(),
        },
    }
    text = json.dumps(doc, indent=2, sort_keys=True)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    return 0


# --- synth ---------------------------------------------------------------------


def _write_waveform(path: str, w: Waveform, fmt: str) -> None:
    if fmt == "csv":
        write_csv_waveform(path, w)
    else:
        write_binary_waveform(path, w, parse_layout(fmt))


def _read_modes(path: str) -> tuple[ModalMode, ...]:
    modes = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        cells = line.split(",") if "," in line else line.split()
        try:
            f, q, gain = (float(c) for c in cells)
        except ValueError:
            if i == 0:
                continue  # header line
            raise _CliError(f"--modes: bad line {i + 1}: {line!r}")
        modes.append(ModalMode(f, q, gain))
    if not modes:
        raise _CliError("--modes: no modes found")
    return tuple(modes)


def cmd_synth(args) -> int:
    echo: dict = {"schema": 1, "generator": args.generator, "rate": args.rate,
                  "dur": args.dur, "format": args.format, "out": args.out}
    if args.generator == "rc1":
        w = rc1_waveform(Rc1Pulse(u0=args.u0, fc=args.fc), args.rate, args.dur)
        echo.update(fc=args.fc, u0=args.u0)
    elif args.generator == "qmix":
        spec = QuadraticMixSpec(
            e0=args.e0, e1=args.e1, amplitude=args.amp, tones=tuple(args.tone),
            duration=args.dur, sample_rate=args.rate,
        )
        w = quadratic_mix_waveform(spec)
        echo.update(e0=args.e0, e1=args.e1, amp=args.amp, tones=args.tone)
    elif args.generator == "hmix":
        spec = HertzianMixSpec(
            e0=args.e0, h1=args.h1, amplitude=args.amp, tones=tuple(args.tone),
            duration=args.dur, sample_rate=args.rate, exponent=args.exponent,
        )
        w = hertzian_mix_waveform(spec)
        echo.update(e0=args.e0, h1=args.h1, amp=args.amp, exponent=args.exponent,
                    tones=args.tone)
    else:
        modes = _read_modes(args.modes)
        spec = ModalPlateSpec(modes=modes, noise_rms=args.noise_rms, seed=args.seed)
        pulse = rc1_waveform(Rc1Pulse(u0=args.u0, fc=args.fc), args.rate, args.dur)
        nonlinearity = None
        if args.nonlinearity != "none":
            nonlinearity = (args.nonlinearity, args.strength)
        w = modal_plate_response(pulse, spec, nonlinearity)
        echo.update(
            modes=len(modes), seed=args.seed, noise_rms=args.noise_rms,
            fc=args.fc, u0=args.u0, nonlinearity=args.nonlinearity,
            strength=args.strength,
        )
    _write_waveform(args.out, w, args.format)
    echo["n_samples"] = len(w)
    print(json.dumps(echo, indent=2, sort_keys=True))
    return 0


# --- study ---------------------------------------------------------------------


def _spec_get(spec: dict, key: str):
    node = spec
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            raise _CliError(f"study spec missing required key '{key}'")
        node = node[part]
    return node


def _study_params(spec: dict) -> SpcParams:
    try:
        band = FrequencyBand(_spec_get(spec, "band.f_min"), _spec_get(spec, "band.f_max"))
        grid = ThresholdGrid(
            _spec_get(spec, "grid.thr_min"),
            _spec_get(spec, "grid.thr_step"),
            _spec_get(spec, "grid.thr_max"),
        )
    except ValueError as exc:
        raise _CliError(str(exc))
    pre_doc = spec.get("preprocess", {})
    pre = PreprocessOptions(
        dc_correct=bool(pre_doc.get("dc_correct", False)),
        zero_pad=bool(pre_doc.get("zero_pad", False)),
    )
    return SpcParams(band=band, grid=grid, preprocess=pre)


def _study_grids(spec: dict) -> list[ThresholdGrid]:
    entries = _spec_get(spec, "grids")
    if not isinstance(entries, list) or not entries:
        raise _CliError("study spec key 'grids' must be a non-empty list")
    try:
        return [ThresholdGrid(*entry) for entry in entries]
    except (TypeError, ValueError) as exc:
        raise _CliError(f"bad grid in 'grids': {exc}")


def _summarize(result, out) -> None:
    for key in sorted(result.stats, key=lambda k: tuple(str(v) for v in k)):
        st = result.stats[key]
        label = " ".join(
            f"{f}={v}" for f, v in zip(result.group_fields, key)
        ) or "all"
        std = "n/a" if st.std is None else format(st.std, ".6g")
        out.write(
            f"{label}: mean={st.mean:.6g} std={std} n={st.n}\n"
        )
    if result.study == "amplitude":
        for series in result.extras["series"]:
            name = " ".join(
                f"{k}={series[k]}" for k in ("series", "plate_id", "tx_disc", "rx_disc")
                if k in series
            )
            if series["invariant"]:
                out.write(f"{name}: invariant\n")
            else:
                tau = "n/a" if series["tau"] is None else format(series["tau"], ".3g")
                tr = series["triples"]
                out.write(
                    f"{name}: tau={tau} triples inc/dec/other="
                    f"{tr['increasing']}/{tr['decreasing']}/{tr['non_monotone']}\n"
                )
    if result.study == "reciprocity":
        for ratio in result.extras["ratios"]:
            if ratio["flagged"]:
                out.write(
                    f"flagged: plate={ratio['plate_id']} ratio={ratio['ratio']:.6g}\n"
                )
    if result.study == "preprocess_sensitivity":
        out.write(
            f"ordering reversals flagged: {len(result.extras['ordering_reversals'])}\n"
        )


def cmd_study(args) -> int:
    manifest = load_manifest(args.manifest, enforce_pairing=args.enforce_pairing)
    try:
        spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise _CliError(f"--spec: {exc}")
    kind = _spec_get(spec, "study")
    if kind not in STUDY_KINDS:
        raise _CliError(f"study spec 'study' must be one of {STUDY_KINDS}")
    params = _study_params(spec)
    selector = spec.get("selector")
    workers = args.max_workers
    if kind == "preprocess":
        result = run_preprocess_sensitivity(
            manifest, grids=[params.grid], band=params.band,
            selector=selector, variants=ALL_VARIANTS, max_workers=workers,
        )
    elif kind == "grids":
        result = run_preprocess_sensitivity(
            manifest, grids=_study_grids(spec), band=params.band,
            selector=selector, variants=(params.preprocess,), max_workers=workers,
        )
    elif kind == "pairs":
        pairs = spec.get("pairs")
        result = run_pair_sweep(
            manifest, params, selector=selector,
            pairs=None if pairs is None else [tuple(p) for p in pairs],
            max_workers=workers,
        )
    elif kind == "reciprocity":
        result = run_reciprocity(
            manifest, params,
            pair=tuple(spec.get("pair", (2, 3))),
            ratio_band=tuple(spec.get("ratio_band", (0.8, 1.25))),
            selector=selector, max_workers=workers,
        )
    elif kind == "amplitude":
        result = run_amplitude_study(
            manifest, params, amplitudes=spec.get("amplitudes"),
            selector=selector, max_workers=workers,
        )
    else:
        result = run_repeatability(
            manifest, params, group_by=tuple(spec.get("group_by", ("plate_id",))),
            selector=selector, max_workers=workers,
        )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formats = list(dict.fromkeys((args.format or []) + ["json"]))
    ext = {"csv": "csv", "json": "json", "gnuplot": "dat"}
    written = [
        emit_report(result, fmt, out_dir / f"{result.study}.{ext[fmt]}")
        for fmt in formats
    ]
    _summarize(result, sys.stdout)
    for path in written:
        print(f"wrote: {path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse printed its own message
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except AllZeroInBand as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (MissingRecord, UnpairedRecord) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except IoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (_CliError, SpciError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
