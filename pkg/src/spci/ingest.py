"""Measurement-record and dataset-manifest ingestion.

Canonical on-disk formats (documented in the README):

* CSV waveforms: UTF-8 text, optional single header line, one or two numeric
  columns (``time,voltage`` or voltage only), comma or whitespace separated.
* Binary waveforms: raw little/big-endian ``i16``/``f32``/``f64`` samples,
  optional header skip, linear volts-per-count scale.
* Manifest: one JSON document listing record files plus their acquisition
  metadata; see :func:`load_manifest`.

The published raw data archive for this kind of experiment has no fixed
layout we can rely on, so these formats are deliberately self-contained and
the layout descriptor is pluggable; an import adapter for a specific archive
can translate into them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import (
    DuplicateKey,
    EmptyFile,
    InvalidPairing,
    MissingFile,
    NonUniformSampling,
    ParseError,
    TruncatedFile,
    UnknownLayout,
)
from .waveform import Waveform

__all__ = [
    "GAIN_BY_EXCITATION",
    "MeasurementMeta",
    "BinaryLayout",
    "StudyRecord",
    "DatasetManifest",
    "parse_layout",
    "read_csv_waveform",
    "write_csv_waveform",
    "read_binary_waveform",
    "write_binary_waveform",
    "load_manifest",
    "write_manifest",
]

# amplification used for each excitation level, chosen so that no
# over-amplification occurs at the receiver
GAIN_BY_EXCITATION = {5: 35, 10: 28, 20: 22, 40: 16, 80: 10, 100: 10}

EXCITATION_LEVELS = frozenset(GAIN_BY_EXCITATION)
GAIN_LEVELS = frozenset(GAIN_BY_EXCITATION.values())

# relative tolerance for "uniformly sampled" and for rate cross-checks
_RATE_RTOL = 1e-6


@dataclass(frozen=True)
class MeasurementMeta:
    """Acquisition metadata of one measurement."""

    plate_id: str
    tx_disc: int
    rx_disc: int
    excitation_pct: int
    gain_db: int
    tx_channel: str = ""
    rx_channel: str = ""
    n_avg: int = 1
    repetition: int = 1

    def __post_init__(self):
        if not self.plate_id:
            raise ValueError("plate_id must be non-empty")
        for name in ("tx_disc", "rx_disc"):
            disc = getattr(self, name)
            if not isinstance(disc, int) or not 1 <= disc <= 5:
                raise ValueError(f"{name} must be an integer in 1..5, got {disc!r}")
        if self.tx_disc == self.rx_disc:
            raise ValueError("tx_disc and rx_disc must differ")
        if self.excitation_pct not in EXCITATION_LEVELS:
            raise ValueError(
                f"excitation_pct must be one of {sorted(EXCITATION_LEVELS)}, "
                f"got {self.excitation_pct!r}"
            )
        if self.gain_db not in GAIN_LEVELS:
            raise ValueError(
                f"gain_db must be one of {sorted(GAIN_LEVELS)}, got {self.gain_db!r}"
            )
        if self.n_avg < 1:
            raise ValueError("n_avg must be >= 1")
        if self.repetition < 0:
            raise ValueError("repetition must be >= 0")

    @property
    def key(self) -> tuple:
        """Identifying key; manifests must not repeat it."""
        return (
            self.plate_id,
            self.tx_disc,
            self.rx_disc,
            self.excitation_pct,
            self.repetition,
        )

    @property
    def pairing_valid(self) -> bool:
        return GAIN_BY_EXCITATION[self.excitation_pct] == self.gain_db

    def to_dict(self) -> dict:
        return {
            "plate_id": self.plate_id,
            "tx_disc": self.tx_disc,
            "rx_disc": self.rx_disc,
            "excitation_pct": self.excitation_pct,
            "gain_db": self.gain_db,
            "tx_channel": self.tx_channel,
            "rx_channel": self.rx_channel,
            "n_avg": self.n_avg,
            "repetition": self.repetition,
        }


_DTYPES = {"i16": "i2", "f32": "f4", "f64": "f8"}
_BYTE_ORDERS = {"little": "<", "big": ">"}


@dataclass(frozen=True)
class BinaryLayout:
    """Raw binary layout: sample dtype, endianness, header skip, volt scale."""

    dtype: str
    endianness: str = "little"
    header_bytes: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.dtype not in _DTYPES:
            raise UnknownLayout(
                f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}"
            )
        if self.endianness not in _BYTE_ORDERS:
            raise UnknownLayout(
                f"endianness must be 'little' or 'big', got {self.endianness!r}"
            )
        if self.header_bytes < 0:
            raise UnknownLayout("header_bytes must be >= 0")
        if not self.scale > 0:
            raise UnknownLayout("scale must be > 0")

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(_BYTE_ORDERS[self.endianness] + _DTYPES[self.dtype])


def parse_layout(text: str) -> BinaryLayout | str:
    """Parse a layout shorthand: 'csv' or e.g. 'i16le', 'f64be'."""
    if text == "csv":
        return "csv"
    if len(text) >= 3 and text[-2:] in ("le", "be"):
        dtype, endian = text[:-2], {"le": "little", "be": "big"}[text[-2:]]
        if dtype in _DTYPES:
            return BinaryLayout(dtype, endian)
    raise UnknownLayout(f"unknown layout {text!r}")


def _split_columns(line: str) -> list[str]:
    return line.split(",") if "," in line else line.split()


def read_csv_waveform(path, sample_rate_hint: float | None = None) -> Waveform:
    """Read a one- or two-column text waveform.

    With a time column, the sampling grid must be uniform within a relative
    tolerance of 1e-6 and the rate is derived from it; a voltage-only file
    needs ``sample_rate_hint``.

    Raises
    ------
    EmptyFile, ParseError, NonUniformSampling
    """
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text(encoding="utf-8").splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise EmptyFile(f"{path}: no data lines")
    rows: list[list[float]] = []
    for i, line in enumerate(lines):
        cells = _split_columns(line)
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            if i == 0:
                continue  # a single leading header line is allowed
            raise ParseError(f"{path}: non-numeric data on line {i + 1}")
    if not rows:
        raise EmptyFile(f"{path}: header but no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1 or widths.pop() not in (1, 2):
        raise ParseError(f"{path}: expected 1 or 2 numeric columns throughout")
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[1] == 1:
        if sample_rate_hint is None:
            raise ParseError(
                f"{path}: voltage-only file needs an explicit sample rate"
            )
        return Waveform(data[:, 0], sample_rate_hint)
    t, v = data[:, 0], data[:, 1]
    if len(t) < 2:
        if sample_rate_hint is None:
            raise ParseError(f"{path}: single row, sample rate undetermined")
        return Waveform(v, sample_rate_hint, t0=float(t[0]))
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if not dt > 0:
        raise NonUniformSampling(f"{path}: time column not increasing")
    if np.max(np.abs(np.diff(t) - dt)) >= _RATE_RTOL * dt:
        raise NonUniformSampling(f"{path}: time column deviates from a uniform grid")
    return Waveform(v, 1.0 / dt, t0=float(t[0]))


def write_csv_waveform(path, w: Waveform, time_column: bool = True) -> None:
    """Write a waveform as CSV with full round-trip precision."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if time_column:
            fh.write("time,voltage\n")
            for t, v in zip(w.times, w.samples):
                fh.write(f"{float(t)!r},{float(v)!r}\n")
        else:
            fh.write("voltage\n")
            for v in w.samples:
                fh.write(f"{float(v)!r}\n")


def read_binary_waveform(
    path,
    layout: BinaryLayout,
    sample_rate: float,
    n_samples: int | None = None,
) -> Waveform:
    """Decode raw binary samples and scale them to volts.

    ``n_samples`` declares the expected count; a shorter file (or a trailing
    partial sample when the count is unknown) raises TruncatedFile.
    """
    raw = Path(path).read_bytes()
    if len(raw) < layout.header_bytes:
        raise TruncatedFile(f"{path}: shorter than declared header")
    body = raw[layout.header_bytes :]
    itemsize = layout.np_dtype.itemsize
    if n_samples is not None:
        needed = n_samples * itemsize
        if len(body) < needed:
            raise TruncatedFile(
                f"{path}: {len(body)} bytes < {needed} declared ({n_samples} samples)"
            )
        body = body[:needed]
    elif len(body) % itemsize != 0:
        raise TruncatedFile(f"{path}: trailing partial sample")
    if not body:
        raise EmptyFile(f"{path}: no samples")
    values = np.frombuffer(body, dtype=layout.np_dtype).astype(np.float64)
    return Waveform(values * layout.scale, sample_rate)


def write_binary_waveform(path, w: Waveform, layout: BinaryLayout) -> None:
    """Encode a waveform per the layout (inverse of read_binary_waveform)."""
    counts = w.samples / layout.scale
    if layout.dtype == "i16":
        counts = np.round(counts)
        if np.any(np.abs(counts) > np.iinfo(np.int16).max):
            raise ValueError("samples exceed the int16 range at this scale")
    encoded = counts.astype(layout.np_dtype)
    with open(path, "wb") as fh:
        fh.write(b"\x00" * layout.header_bytes)
        fh.write(encoded.tobytes())


@dataclass(frozen=True, eq=False)
class StudyRecord:
    """One measurement: metadata plus its waveform, possibly file-backed.

    Either ``waveform`` (in memory) or ``source`` + ``layout`` (lazily
    loaded) must be given. Declared ``sample_rate``/``n_samples`` are checked
    against the actual data at load time.
    """

    meta: MeasurementMeta
    waveform: Waveform | None = None
    source: Path | None = None
    layout: BinaryLayout | str | None = None
    sample_rate: float | None = None
    n_samples: int | None = None

    def __post_init__(self):
        if (self.waveform is None) == (self.source is None):
            raise ValueError("exactly one of waveform or source must be set")
        if self.source is not None:
            if self.layout is None:
                raise ValueError("file-backed record needs a layout")
            object.__setattr__(self, "source", Path(self.source))

    def load(self) -> Waveform:
        """The record's waveform, loading and caching it on first access."""
        cached = self.__dict__.get("_loaded")
        if cached is not None:
            return cached
        if self.waveform is not None:
            w = self.waveform
        elif self.layout == "csv":
            w = read_csv_waveform(self.source, sample_rate_hint=self.sample_rate)
        else:
            if self.sample_rate is None:
                raise ParseError(f"{self.source}: binary record needs a sample rate")
            w = read_binary_waveform(
                self.source, self.layout, self.sample_rate, self.n_samples
            )
        if self.sample_rate is not None:
            if abs(w.sample_rate - self.sample_rate) > _RATE_RTOL * self.sample_rate:
                raise ParseError(
                    f"rate {w.sample_rate} Hz inconsistent with declared "
                    f"{self.sample_rate} Hz for {self.meta.key}"
                )
        if self.n_samples is not None and len(w) != self.n_samples:
            raise ParseError(
                f"{len(w)} samples inconsistent with declared "
                f"{self.n_samples} for {self.meta.key}"
            )
        object.__setattr__(self, "_loaded", w)
        return w


@dataclass(frozen=True, eq=False)
class DatasetManifest:
    """Validated collection of study records sharing one sampling rate."""

    records: tuple[StudyRecord, ...]
    sample_rate: float

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen: dict[tuple, MeasurementMeta] = {}
        for rec in self.records:
            key = rec.meta.key
            if key in seen:
                raise DuplicateKey(f"duplicate record key {key}")
            seen[key] = rec.meta

    def __iter__(self) -> Iterator[StudyRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)


def _layout_from_descriptor(desc) -> BinaryLayout | str:
    if isinstance(desc, str):
        return parse_layout(desc)
    if isinstance(desc, dict):
        kind = desc.get("type")
        if kind == "csv":
            return "csv"
        if kind == "binary":
            return BinaryLayout(
                dtype=desc.get("dtype", ""),
                endianness=desc.get("endianness", "little"),
                header_bytes=int(desc.get("header_bytes", 0)),
                scale=float(desc.get("scale", 1.0)),
            )
    raise UnknownLayout(f"bad format descriptor {desc!r}")


def _layout_to_descriptor(layout: BinaryLayout | str) -> dict:
    if layout == "csv":
        return {"type": "csv"}
    return {
        "type": "binary",
        "dtype": layout.dtype,
        "endianness": layout.endianness,
        "header_bytes": layout.header_bytes,
        "scale": layout.scale,
    }


_META_FIELDS = (
    "plate_id",
    "tx_disc",
    "rx_disc",
    "excitation_pct",
    "gain_db",
    "tx_channel",
    "rx_channel",
    "n_avg",
    "repetition",
)


def load_manifest(path, enforce_pairing: bool = False) -> DatasetManifest:
    """Load and validate a JSON dataset manifest.

    Required top-level keys: ``sample_rate`` and ``records``; optional
    ``format`` (default layout descriptor, overridable per record). Each
    record needs ``file``, ``plate_id``, ``tx_disc``, ``rx_disc``,
    ``excitation_pct`` and ``gain_db``; ``tx_channel``, ``rx_channel``,
    ``n_avg``, ``repetition`` and ``n_samples`` are optional. File paths are
    resolved relative to the manifest location and must exist.

    Raises
    ------
    MissingFile, DuplicateKey, ParseError
    InvalidPairing
        When ``enforce_pairing`` is set and a record's excitation/gain
        combination is not in :data:`GAIN_BY_EXCITATION`.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}")
    if not isinstance(doc, dict) or "records" not in doc or "sample_rate" not in doc:
        raise ParseError(f"{path}: manifest needs 'sample_rate' and 'records'")
    sample_rate = float(doc["sample_rate"])
    default_layout = _layout_from_descriptor(doc.get("format", {"type": "csv"}))
    records = []
    for entry in doc["records"]:
        if "file" not in entry:
            raise ParseError(f"{path}: record without 'file': {entry}")
        source = path.parent / entry["file"]
        if not source.is_file():
            raise MissingFile(f"{path}: missing data file {source}")
        meta_kwargs = {k: entry[k] for k in _META_FIELDS if k in entry}
        try:
            meta = MeasurementMeta(**meta_kwargs)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: bad record metadata {entry['file']}: {exc}")
        if enforce_pairing and not meta.pairing_valid:
            raise InvalidPairing(
                f"{path}: {meta.excitation_pct} % with {meta.gain_db} dB violates "
                f"the excitation/gain table for record {meta.key}"
            )
        layout = default_layout
        if "format" in entry:
            layout = _layout_from_descriptor(entry["format"])
        records.append(
            StudyRecord(
                meta=meta,
                source=source,
                layout=layout,
                sample_rate=sample_rate,
                n_samples=entry.get("n_samples"),
            )
        )
    return DatasetManifest(tuple(records), sample_rate)


def write_manifest(path, manifest: DatasetManifest, layout: BinaryLayout | str) -> None:
    """Write a manifest for file-backed records (inverse of load_manifest)."""
    path = Path(path)
    entries = []
    for rec in manifest.records:
        if rec.source is None:
            raise ValueError(f"record {rec.meta.key} has no source file")
        entry = dict(rec.meta.to_dict())
        entry["file"] = str(rec.source.relative_to(path.parent))
        if rec.n_samples is not None:
            entry["n_samples"] = rec.n_samples
        entries.append(entry)
    doc = {
        "schema": 1,
        "sample_rate": manifest.sample_rate,
        "format": _layout_to_descriptor(layout),
        "records": entries,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
