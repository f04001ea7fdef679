"""Experiment families over datasets or synthetic ensembles.

Each ``run_*`` function evaluates the peak-count index over one axis of
variation (preprocessing variants, threshold grids, transducer pairs,
propagation direction, excitation amplitude, repositioning repetitions,
acquisition averaging) and returns a :class:`StudyResult` with per-group
descriptive statistics, ready for deterministic report emission.

All study cells are independent pure evaluations, so they can run in a
thread pool (``max_workers``) with results identical to serial execution.
"""

from __future__ import annotations

import csv
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.stats import kendalltau

from .errors import (
    InsufficientRepetitions,
    IoError,
    MissingRecord,
    UnpairedRecord,
)
from .index import SpcCurve, SpcParams, ThresholdGrid, spc_index
from .ingest import DatasetManifest, MeasurementMeta, StudyRecord
from .waveform import FrequencyBand, PreprocessOptions, Waveform

__all__ = [
    "GroupStats",
    "StudyRow",
    "StudyResult",
    "SweepSpec",
    "meta_selector",
    "run_preprocess_sensitivity",
    "run_pair_sweep",
    "run_reciprocity",
    "run_amplitude_study",
    "run_repeatability",
    "run_averaging_study",
    "run_sweep",
    "average_waveforms",
    "classify_triples",
    "emit_report",
]

Selector = Callable[[MeasurementMeta], bool]

# the measurement condition used for single-condition studies unless a
# caller-specified selector overrides it
DEFAULT_CONDITION = {"tx_disc": 2, "rx_disc": 3, "excitation_pct": 20, "gain_db": 22}

ALL_VARIANTS = tuple(
    PreprocessOptions(dc_correct=dc, zero_pad=pad)
    for dc in (False, True)
    for pad in (False, True)
)


@dataclass(frozen=True)
class GroupStats:
    """Descriptive statistics of one group of index values.

    ``std`` is the sample (n-1) standard deviation and is None for n = 1;
    ``std_pop`` is the population (n) variant, reported alongside because the
    two differ noticeably at the small n typical for repeatability series.
    """

    mean: float
    std: float | None
    std_pop: float
    n: int


@dataclass(frozen=True, eq=False)
class StudyRow:
    """One study cell: identifying fields, the index value, its curve."""

    fields: dict
    value: float
    curve: SpcCurve | None = None


@dataclass(frozen=True, eq=False)
class StudyResult:
    """Rows plus per-group statistics and study-specific extras."""

    study: str
    rows: tuple[StudyRow, ...]
    group_fields: tuple[str, ...]
    stats: dict[tuple, GroupStats]
    extras: dict
    provenance: dict

    @classmethod
    def build(cls, study, rows, group_fields, extras, provenance) -> "StudyResult":
        rows = tuple(rows)
        groups: dict[tuple, list[float]] = {}
        for row in rows:
            key = tuple(row.fields[f] for f in group_fields)
            groups.setdefault(key, []).append(row.value)
        stats = {key: _group_stats(vals) for key, vals in groups.items()}
        return cls(study, rows, tuple(group_fields), stats, extras, provenance)


def _group_stats(values: Sequence[float]) -> GroupStats:
    arr = np.asarray(values, dtype=np.float64)
    n = arr.size
    return GroupStats(
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)) if n > 1 else None,
        std_pop=float(arr.std(ddof=0)),
        n=int(n),
    )


# --- record plumbing ---------------------------------------------------------


def meta_selector(criteria: dict) -> Selector:
    """Equality predicate over metadata fields, e.g. {'plate_id': '10J'}."""
    def pred(meta: MeasurementMeta) -> bool:
        return all(getattr(meta, k) == v for k, v in criteria.items())
    return pred


def _as_selector(selector) -> tuple[Selector | None, dict | str | None]:
    """Normalize a selector argument; returns (predicate, provenance form)."""
    if selector is None:
        return None, None
    if isinstance(selector, dict):
        return meta_selector(selector), dict(selector)
    return selector, "custom"


def _records(dataset) -> list[StudyRecord]:
    if isinstance(dataset, DatasetManifest):
        return list(dataset.records)
    return list(dataset)


def _filtered(dataset, selector: Selector | None) -> list[StudyRecord]:
    recs = _records(dataset)
    if selector is None:
        return recs
    return [r for r in recs if selector(r.meta)]


def _record_order(rec: StudyRecord) -> tuple:
    m = rec.meta
    return (m.repetition, m.tx_disc, m.rx_disc, m.excitation_pct, m.gain_db)


def _map(fn, items: Sequence, max_workers: int | None):
    if max_workers is None or max_workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(fn, items))


_NUM_RE = re.compile(r"(\d+(?:\.\d+)?)")


def natural_key(value) -> tuple:
    """Sort key ordering '10J' < '15J' < ... < '50J' and numbers numerically."""
    if isinstance(value, bool):
        return ((0, float(value), ""),)
    if isinstance(value, (int, float)):
        return ((0, float(value), ""),)
    parts = _NUM_RE.split(str(value))
    key = []
    for part in parts:
        if not part:
            continue
        if _NUM_RE.fullmatch(part):
            key.append((0, float(part), ""))
        else:
            key.append((1, 0.0, part))
    return tuple(key) if key else ((1, 0.0, ""),)


def _grid_label(grid: ThresholdGrid) -> str:
    return f"{grid.thr_min:g}:{grid.thr_step:g}:{grid.thr_max:g}"


def _provenance(params: SpcParams, study: str, **extra) -> dict:
    doc = {"study": study, "params": params.to_dict()}
    doc.update(extra)
    return doc


# --- study families -----------------------------------------------------------


def run_preprocess_sensitivity(
    dataset,
    grids: Sequence[ThresholdGrid],
    band: FrequencyBand,
    selector=None,
    variants: Sequence[PreprocessOptions] = ALL_VARIANTS,
    max_workers: int | None = None,
) -> StudyResult:
    """Index per plate for every preprocessing variant and threshold grid.

    One record per plate is selected by ``selector`` (default: the fixed
    tx=2, rx=3, 20 %, 22 dB condition); the DC-correction x zero-padding
    matrix and every grid are evaluated on it. Plate pairs whose ordering
    flips between two cells are flagged in ``extras['ordering_reversals']``.

    Raises
    ------
    MissingRecord
        If the selector matches nothing for some plate.
    """
    predicate, selector_doc = _as_selector(selector)
    if predicate is None:
        predicate, selector_doc = meta_selector(DEFAULT_CONDITION), dict(DEFAULT_CONDITION)
    records = _records(dataset)
    plates = sorted({r.meta.plate_id for r in records}, key=natural_key)
    chosen: dict[str, StudyRecord] = {}
    missing = []
    for plate in plates:
        candidates = [
            r for r in records if r.meta.plate_id == plate and predicate(r.meta)
        ]
        if not candidates:
            missing.append(plate)
        else:
            chosen[plate] = min(candidates, key=_record_order)
    if missing:
        raise MissingRecord(
            f"selector matched no record for plate(s): {', '.join(missing)}"
        )
    cells = [
        (plate, variant, grid)
        for plate in plates
        for variant in variants
        for grid in grids
    ]

    def evaluate(cell):
        plate, variant, grid = cell
        params = SpcParams(band=band, grid=grid, preprocess=variant)
        return spc_index(chosen[plate].load(), params)

    results = _map(evaluate, cells, max_workers)
    rows = []
    table: dict[tuple, float] = {}
    for (plate, variant, grid), idx in zip(cells, results):
        label = _grid_label(grid)
        rows.append(
            StudyRow(
                fields={
                    "plate_id": plate,
                    "dc_correct": variant.dc_correct,
                    "zero_pad": variant.zero_pad,
                    "grid": label,
                },
                value=idx.value,
                curve=idx.curve,
            )
        )
        table[(plate, variant.dc_correct, variant.zero_pad, label)] = idx.value

    cell_ids = [
        (v.dc_correct, v.zero_pad, _grid_label(g)) for v in variants for g in grids
    ]
    reversals = []
    for plate_lo, plate_hi in zip(plates, plates[1:]):
        for i, cell_a in enumerate(cell_ids):
            for cell_b in cell_ids[i + 1 :]:
                delta_a = table[(plate_hi, *cell_a)] - table[(plate_lo, *cell_a)]
                delta_b = table[(plate_hi, *cell_b)] - table[(plate_lo, *cell_b)]
                if (delta_a > 0 and delta_b < 0) or (delta_a < 0 and delta_b > 0):
                    reversals.append(
                        {
                            "plate_low": plate_lo,
                            "plate_high": plate_hi,
                            "cell_a": _cell_doc(cell_a),
                            "cell_b": _cell_doc(cell_b),
                            "delta_a": delta_a,
                            "delta_b": delta_b,
                        }
                    )
    params = SpcParams(band=band, grid=grids[0])
    return StudyResult.build(
        study="preprocess_sensitivity",
        rows=rows,
        group_fields=("plate_id",),
        extras={"ordering_reversals": reversals},
        provenance=_provenance(
            params,
            "preprocess_sensitivity",
            selector=selector_doc,
            grids=[_grid_label(g) for g in grids],
            variants=[
                {"dc_correct": v.dc_correct, "zero_pad": v.zero_pad} for v in variants
            ],
        ),
    )


def _cell_doc(cell: tuple) -> dict:
    return {"dc_correct": cell[0], "zero_pad": cell[1], "grid": cell[2]}


def run_pair_sweep(
    dataset,
    params: SpcParams,
    selector=None,
    pairs: Sequence[tuple[int, int]] | None = None,
    max_workers: int | None = None,
) -> StudyResult:
    """Index per (plate, transmitter, receiver) with per-plate spread.

    Expected pairs default to every pair seen anywhere in the dataset, so a
    pair absent for one plate (e.g. a broken transducer) is tolerated and
    listed in ``extras['missing']`` instead of failing the sweep.
    """
    predicate, selector_doc = _as_selector(selector)
    records = _filtered(dataset, predicate)
    if pairs is None:
        expected = sorted({(r.meta.tx_disc, r.meta.rx_disc) for r in records})
    else:
        expected = sorted((int(a), int(b)) for a, b in pairs)
        records = [r for r in records if (r.meta.tx_disc, r.meta.rx_disc) in set(expected)]
    plates = sorted({r.meta.plate_id for r in records}, key=natural_key)
    chosen: dict[tuple, StudyRecord] = {}
    for rec in sorted(records, key=_record_order):
        key = (rec.meta.plate_id, rec.meta.tx_disc, rec.meta.rx_disc)
        chosen.setdefault(key, rec)
    missing = [
        {"plate_id": plate, "tx_disc": tx, "rx_disc": rx}
        for plate in plates
        for tx, rx in expected
        if (plate, tx, rx) not in chosen
    ]
    keys = sorted(chosen, key=lambda k: (natural_key(k[0]), k[1], k[2]))
    results = _map(lambda k: spc_index(chosen[k].load(), params), keys, max_workers)
    rows = [
        StudyRow(
            fields={"plate_id": k[0], "tx_disc": k[1], "rx_disc": k[2]},
            value=idx.value,
            curve=idx.curve,
        )
        for k, idx in zip(keys, results)
    ]
    spread = []
    for plate in plates:
        vals = [row.value for row in rows if row.fields["plate_id"] == plate]
        if vals:
            spread.append(
                {
                    "plate_id": plate,
                    "range": max(vals) - min(vals),
                    "n_pairs": len(vals),
                }
            )
    return StudyResult.build(
        study="pair_sweep",
        rows=rows,
        group_fields=("plate_id",),
        extras={"missing": missing, "spread": spread},
        provenance=_provenance(
            params, "pair_sweep", selector=selector_doc, expected_pairs=expected
        ),
    )


def run_reciprocity(
    dataset,
    params: SpcParams,
    pair: tuple[int, int] = (2, 3),
    ratio_band: tuple[float, float] = (0.8, 1.25),
    selector=None,
    max_workers: int | None = None,
) -> StudyResult:
    """Compare the index for the two propagation directions of one disc pair.

    Records are matched into (plate, excitation, gain, repetition) cells; the
    reverse/forward ratio is reported per cell and flagged when it falls
    outside ``ratio_band``.

    Raises
    ------
    UnpairedRecord
        If some cell exists in only one direction.
    """
    predicate, selector_doc = _as_selector(selector)
    records = _filtered(dataset, predicate)
    forward = (int(pair[0]), int(pair[1]))
    reverse = (forward[1], forward[0])
    cells: dict[tuple, dict[str, StudyRecord]] = {}
    for rec in sorted(records, key=_record_order):
        direction = (rec.meta.tx_disc, rec.meta.rx_disc)
        if direction not in (forward, reverse):
            continue
        cell = (
            rec.meta.plate_id,
            rec.meta.excitation_pct,
            rec.meta.gain_db,
            rec.meta.repetition,
        )
        slot = "forward" if direction == forward else "reverse"
        cells.setdefault(cell, {}).setdefault(slot, rec)
    unpaired = sorted(
        (cell for cell, slots in cells.items() if len(slots) != 2),
        key=lambda c: (natural_key(c[0]), c[1:]),
    )
    if unpaired:
        listing = "; ".join(
            f"plate={c[0]} excitation={c[1]}% gain={c[2]}dB repetition={c[3]}"
            for c in unpaired
        )
        raise UnpairedRecord(f"one direction missing for: {listing}")
    keys = sorted(cells, key=lambda c: (natural_key(c[0]), c[1:]))
    jobs = [(cell, slot) for cell in keys for slot in ("forward", "reverse")]
    results = _map(
        lambda job: spc_index(cells[job[0]][job[1]].load(), params),
        jobs,
        max_workers,
    )
    values = {job: idx.value for job, idx in zip(jobs, results)}
    curves = {job: idx.curve for job, idx in zip(jobs, results)}
    rows = []
    ratios = []
    lo, hi = ratio_band
    for cell in keys:
        plate, excitation, gain, repetition = cell
        fwd_label = f"{forward[0]}->{forward[1]}"
        rev_label = f"{reverse[0]}->{reverse[1]}"
        v_fwd = values[(cell, "forward")]
        v_rev = values[(cell, "reverse")]
        for direction, value in ((fwd_label, v_fwd), (rev_label, v_rev)):
            rows.append(
                StudyRow(
                    fields={
                        "plate_id": plate,
                        "excitation_pct": excitation,
                        "gain_db": gain,
                        "repetition": repetition,
                        "direction": direction,
                    },
                    value=value,
                    curve=curves[(cell, "forward" if direction == fwd_label else "reverse")],
                )
            )
        ratio = v_rev / v_fwd if v_fwd != 0 else math.inf
        ratios.append(
            {
                "plate_id": plate,
                "excitation_pct": excitation,
                "gain_db": gain,
                "repetition": repetition,
                "forward": v_fwd,
                "reverse": v_rev,
                "ratio": ratio,
                "flagged": not (lo <= ratio <= hi),
            }
        )
    return StudyResult.build(
        study="reciprocity",
        rows=rows,
        group_fields=("plate_id",),
        extras={"ratios": ratios, "ratio_band": list(ratio_band)},
        provenance=_provenance(
            params, "reciprocity", selector=selector_doc, pair=list(forward)
        ),
    )


def classify_triples(values: Sequence[float]) -> dict:
    """Classify every length-3 subsequence as increasing/decreasing/other.

    A strictly increasing triple is the kind of evidence that, shown alone,
    suggests a systematic amplitude trend; counting all C(n,3) subsets shows
    how often a different subset would suggest the opposite.
    """
    inc = dec = non = 0
    for i, j, k in combinations(range(len(values)), 3):
        a, b, c = values[i], values[j], values[k]
        if a < b < c:
            inc += 1
        elif a > b > c:
            dec += 1
        else:
            non += 1
    return {
        "increasing": inc,
        "decreasing": dec,
        "non_monotone": non,
        "total": inc + dec + non,
    }


def _series_summary(amplitudes: Sequence[float], values: Sequence[float]) -> dict:
    invariant = len(set(values)) <= 1
    if invariant:
        tau = None
    else:
        tau = float(kendalltau(amplitudes, values).statistic)
        if math.isnan(tau):
            tau = None
    triples = classify_triples(values)
    return {
        "amplitudes": [float(a) for a in amplitudes],
        "values": [float(v) for v in values],
        "tau": tau,
        "triples": triples,
        "contradictory": triples["increasing"] > 0 and triples["decreasing"] > 0,
        "invariant": invariant,
    }


def run_amplitude_study(
    source,
    params: SpcParams,
    amplitudes: Sequence[float] | None = None,
    selector=None,
    max_workers: int | None = None,
) -> StudyResult:
    """Index versus excitation amplitude, with trend and subset statistics.

    ``source`` is either a dataset (series per plate and disc pair, amplitude
    axis = excitation percentage) or a callable ``amplitude -> Waveform``
    (synthetic series; ``amplitudes`` required). Per series the result
    reports the Kendall tau rank statistic and the classification of all
    length-3 amplitude subsets, which exposes how subset picking can fake a
    monotone trend.
    """
    if callable(source):
        if not amplitudes:
            raise ValueError("generator mode needs explicit amplitudes")
        amps = [float(a) for a in amplitudes]
        results = _map(lambda a: spc_index(source(a), params), amps, max_workers)
        rows = [
            StudyRow(
                fields={"series": "generator", "amplitude": a},
                value=idx.value,
                curve=idx.curve,
            )
            for a, idx in zip(amps, results)
        ]
        series = [{"series": "generator", **_series_summary(amps, [r.value for r in rows])}]
        group_fields = ("series",)
        selector_doc = None
    else:
        predicate, selector_doc = _as_selector(selector)
        records = _filtered(source, predicate)
        if amplitudes is not None:
            wanted = {int(a) for a in amplitudes}
            records = [r for r in records if r.meta.excitation_pct in wanted]
        chosen: dict[tuple, StudyRecord] = {}
        for rec in sorted(records, key=_record_order):
            key = (
                rec.meta.plate_id,
                rec.meta.tx_disc,
                rec.meta.rx_disc,
                rec.meta.excitation_pct,
            )
            chosen.setdefault(key, rec)
        keys = sorted(chosen, key=lambda k: (natural_key(k[0]), k[1], k[2], k[3]))
        results = _map(
            lambda k: spc_index(chosen[k].load(), params), keys, max_workers
        )
        rows = [
            StudyRow(
                fields={
                    "plate_id": k[0],
                    "tx_disc": k[1],
                    "rx_disc": k[2],
                    "excitation_pct": k[3],
                },
                value=idx.value,
                curve=idx.curve,
            )
            for k, idx in zip(keys, results)
        ]
        series = []
        series_keys = sorted(
            {(k[0], k[1], k[2]) for k in keys},
            key=lambda s: (natural_key(s[0]), s[1], s[2]),
        )
        for plate, tx, rx in series_keys:
            points = [
                (row.fields["excitation_pct"], row.value)
                for row in rows
                if (row.fields["plate_id"], row.fields["tx_disc"], row.fields["rx_disc"])
                == (plate, tx, rx)
            ]
            points.sort()
            series.append(
                {
                    "plate_id": plate,
                    "tx_disc": tx,
                    "rx_disc": rx,
                    **_series_summary([p[0] for p in points], [p[1] for p in points]),
                }
            )
        group_fields = ("plate_id", "tx_disc", "rx_disc")
    return StudyResult.build(
        study="amplitude",
        rows=rows,
        group_fields=group_fields,
        extras={"series": series},
        provenance=_provenance(
            params,
            "amplitude",
            selector=selector_doc,
            amplitudes=None if amplitudes is None else [float(a) for a in amplitudes],
        ),
    )


def run_repeatability(
    dataset,
    params: SpcParams,
    group_by: Sequence[str] = ("plate_id",),
    selector=None,
    max_workers: int | None = None,
) -> StudyResult:
    """Mean, sample standard deviation and relative error per group.

    Raises
    ------
    InsufficientRepetitions
        If any group holds fewer than two records.
    """
    predicate, selector_doc = _as_selector(selector)
    records = _filtered(dataset, predicate)
    group_by = tuple(group_by)
    groups: dict[tuple, list[StudyRecord]] = {}
    for rec in sorted(records, key=_record_order):
        key = tuple(getattr(rec.meta, f) for f in group_by)
        groups.setdefault(key, []).append(rec)
    too_small = sorted(k for k, v in groups.items() if len(v) < 2)
    if too_small:
        raise InsufficientRepetitions(
            f"groups with fewer than 2 records: {too_small}"
        )
    jobs = [(key, rec) for key in sorted(groups) for rec in groups[key]]
    results = _map(lambda job: spc_index(job[1].load(), params), jobs, max_workers)
    rows = [
        StudyRow(
            fields={
                **dict(zip(group_by, key)),
                "repetition": rec.meta.repetition,
            },
            value=idx.value,
            curve=idx.curve,
        )
        for (key, rec), idx in zip(jobs, results)
    ]
    values_by_group: dict[tuple, list[float]] = {}
    for (key, _), idx in zip(jobs, results):
        values_by_group.setdefault(key, []).append(idx.value)
    rel = []
    for key in sorted(values_by_group):
        st = _group_stats(values_by_group[key])
        rel.append(
            {
                **dict(zip(group_by, key)),
                "relative_error": (st.std / st.mean) if st.mean else None,
            }
        )
    return StudyResult.build(
        study="repeatability",
        rows=rows,
        group_fields=group_by,
        extras={"relative_error": rel},
        provenance=_provenance(
            params, "repeatability", selector=selector_doc, group_by=list(group_by)
        ),
    )


def run_averaging_study(
    realization: Callable[[int], Waveform],
    params: SpcParams,
    n_avg_values: Sequence[int],
) -> StudyResult:
    """Index of the running average of noisy realizations, per averaging count.

    ``realization(i)`` must return the i-th independently noisy acquisition of
    the same underlying signal; averaging the first N of them models an
    instrument averaging N triggers, and the index is evaluated on each
    requested N. Stability relative to the largest N is reported.
    """
    wanted = sorted({int(n) for n in n_avg_values})
    if not wanted or wanted[0] < 1:
        raise ValueError("n_avg_values must be positive integers")
    rows = []
    acc = None
    next_i = 0
    for n_avg in wanted:
        while next_i < n_avg:
            w = realization(next_i)
            if acc is None:
                acc = np.array(w.samples, dtype=np.float64)
                rate, t0, length = w.sample_rate, w.t0, len(w)
            else:
                if len(w) != length or w.sample_rate != rate:
                    raise ValueError("realizations must share length and rate")
                acc += w.samples
            next_i += 1
        averaged = Waveform(acc / n_avg, rate, t0)
        idx = spc_index(averaged, params)
        rows.append(StudyRow(fields={"n_avg": n_avg}, value=idx.value, curve=idx.curve))
    reference = rows[-1].value
    deviations = [
        {"n_avg": row.fields["n_avg"], "abs_dev": abs(row.value - reference)}
        for row in rows
    ]
    return StudyResult.build(
        study="averaging",
        rows=rows,
        group_fields=(),
        extras={"reference_n_avg": wanted[-1], "deviation_from_reference": deviations},
        provenance=_provenance(params, "averaging", n_avg_values=wanted),
    )


def average_waveforms(waveforms: Sequence[Waveform]) -> Waveform:
    """Sample-wise mean of equally shaped waveforms."""
    if not waveforms:
        raise ValueError("need at least one waveform")
    first = waveforms[0]
    stack = np.empty((len(waveforms), len(first)))
    for i, w in enumerate(waveforms):
        if len(w) != len(first) or w.sample_rate != first.sample_rate:
            raise ValueError("waveforms must share length and rate")
        stack[i] = w.samples
    return Waveform(stack.mean(axis=0), first.sample_rate, first.t0)


# --- generic sweep dispatch ---------------------------------------------------

SWEEP_AXES = (
    "preprocess-variant",
    "threshold-grid",
    "tx-rx-pair",
    "excitation-amplitude",
    "repetition",
)


@dataclass(frozen=True)
class SweepSpec:
    """One axis of variation plus the fixed evaluation parameters.

    Value types per axis: PreprocessOptions for 'preprocess-variant',
    ThresholdGrid for 'threshold-grid', (tx, rx) tuples for 'tx-rx-pair',
    numbers for 'excitation-amplitude', metadata field names for
    'repetition' (the grouping key).
    """

    axis: str
    values: tuple
    fixed: SpcParams
    selector: dict | None = None

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"axis must be one of {SWEEP_AXES}, got {self.axis!r}")
        values = tuple(self.values)
        if not values:
            raise ValueError("values must be non-empty")
        checks = {
            "preprocess-variant": lambda v: isinstance(v, PreprocessOptions),
            "threshold-grid": lambda v: isinstance(v, ThresholdGrid),
            "tx-rx-pair": lambda v: len(tuple(v)) == 2,
            "excitation-amplitude": lambda v: isinstance(v, (int, float)),
            "repetition": lambda v: isinstance(v, str),
        }
        if not all(checks[self.axis](v) for v in values):
            raise ValueError(f"values have the wrong type for axis {self.axis!r}")
        object.__setattr__(self, "values", values)


def run_sweep(dataset, sweep: SweepSpec, max_workers: int | None = None) -> StudyResult:
    """Dispatch a SweepSpec to the matching study family."""
    fixed = sweep.fixed
    if sweep.axis == "preprocess-variant":
        return run_preprocess_sensitivity(
            dataset,
            grids=[fixed.grid],
            band=fixed.band,
            selector=sweep.selector,
            variants=sweep.values,
            max_workers=max_workers,
        )
    if sweep.axis == "threshold-grid":
        return run_preprocess_sensitivity(
            dataset,
            grids=sweep.values,
            band=fixed.band,
            selector=sweep.selector,
            variants=(fixed.preprocess,),
            max_workers=max_workers,
        )
    if sweep.axis == "tx-rx-pair":
        return run_pair_sweep(
            dataset,
            fixed,
            selector=sweep.selector,
            pairs=sweep.values,
            max_workers=max_workers,
        )
    if sweep.axis == "excitation-amplitude":
        return run_amplitude_study(
            dataset,
            fixed,
            amplitudes=sweep.values,
            selector=sweep.selector,
            max_workers=max_workers,
        )
    return run_repeatability(
        dataset,
        fixed,
        group_by=sweep.values,
        selector=sweep.selector,
        max_workers=max_workers,
    )


# --- report emission ----------------------------------------------------------

REPORT_FORMATS = ("csv", "json", "gnuplot")


def _fmt_number(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def _round_floats(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return float(format(obj, ".6g"))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _columns(rows: Sequence[StudyRow]) -> list[str]:
    cols: list[str] = []
    for row in rows:
        for name in row.fields:
            if name not in cols:
                cols.append(name)
    return cols


def _sorted_rows(rows: Sequence[StudyRow], cols: Sequence[str]) -> list[StudyRow]:
    return sorted(rows, key=lambda r: tuple(natural_key(r.fields.get(c)) for c in cols))


def _emit_csv(result: StudyResult, fh) -> None:
    cols = _columns(result.rows)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(cols + ["spc_index"])
    for row in _sorted_rows(result.rows, cols):
        writer.writerow(
            [_fmt_number(row.fields.get(c, "")) for c in cols]
            + [_fmt_number(row.value)]
        )


def _emit_json(result: StudyResult, fh, include_curves: bool) -> None:
    cols = _columns(result.rows)
    rows_doc = []
    for row in _sorted_rows(result.rows, cols):
        doc = dict(row.fields)
        doc["spc_index"] = row.value
        if include_curves and row.curve is not None:
            doc["curve"] = {
                "thresholds": row.curve.thresholds.tolist(),
                "counts": row.curve.counts.tolist(),
            }
        rows_doc.append(doc)
    stats_doc = []
    for key in sorted(result.stats, key=lambda k: tuple(natural_key(v) for v in k)):
        st = result.stats[key]
        stats_doc.append(
            {
                **dict(zip(result.group_fields, key)),
                "mean": st.mean,
                "std": st.std,
                "std_pop": st.std_pop,
                "n": st.n,
            }
        )
    doc = {
        "schema": 1,
        "study": result.study,
        "provenance": result.provenance,
        "rows": rows_doc,
        "stats": stats_doc,
        "extras": result.extras,
    }
    json.dump(_round_floats(doc), fh, indent=2, sort_keys=True)
    fh.write("\n")


def _emit_gnuplot(result: StudyResult, fh) -> None:
    cols = _columns(result.rows)
    fh.write(f"# study: {result.study}\n")
    fh.write(
        "# provenance: "
        + json.dumps(_round_floats(result.provenance), sort_keys=True)
        + "\n"
    )
    if not result.rows:
        fh.write("# (no rows)\n")
        return
    x_field = cols[0]
    series_fields = cols[1:]

    def series_label(row: StudyRow) -> str:
        if not series_fields:
            return "value"
        return "/".join(str(row.fields[f]) for f in series_fields)

    x_values = sorted({row.fields[x_field] for row in result.rows}, key=natural_key)
    labels = sorted({series_label(row) for row in result.rows}, key=natural_key)
    cells = {(row.fields[x_field], series_label(row)): row.value for row in result.rows}
    fh.write("# " + "\t".join([x_field] + labels) + "\n")
    for x in x_values:
        cells_out = [
            _fmt_number(cells[(x, lab)]) if (x, lab) in cells else "nan"
            for lab in labels
        ]
        fh.write("\t".join([_fmt_number(x)] + cells_out) + "\n")


def emit_report(
    result: StudyResult, format: str, path, include_curves: bool = False
) -> Path:
    """Write one report file; byte-identical output for identical results.

    Numeric cells use 6 significant digits; row and key ordering is fixed.

    Raises
    ------
    IoError
        If the file cannot be written.
    """
    if format not in REPORT_FORMATS:
        raise ValueError(f"format must be one of {REPORT_FORMATS}, got {format!r}")
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if format == "csv":
                _emit_csv(result, fh)
            elif format == "json":
                _emit_json(result, fh, include_curves)
            else:
                _emit_gnuplot(result, fh)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}")
    return path
