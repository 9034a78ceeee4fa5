"""Rates, summary statistics and CSV/JSON serialisation of per-user results."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

SE_CAP = 7.8
SINR_FLOOR_DB = -10.0

CSV_COLUMNS = (
    "scenario_id", "isd_a", "precoder", "direction", "elevation_deg", "frf",
    "evtol_density", "user_class", "drop", "sinr_db", "rate_mbps",
)


@dataclass(frozen=True, slots=True)
class KpiRecord:
    scenario_id: str
    isd_a: float | None
    precoder: str
    direction: str
    elevation_deg: float | None
    frf: int | None
    evtol_density: float | None
    user_class: str
    drop: int
    sinr_db: float
    rate_mbps: float


def spectral_efficiency(sinr_db):
    sinr_db = np.asarray(sinr_db, dtype=float)
    se = np.minimum(np.log2(1.0 + 10.0 ** (sinr_db / 10.0)), SE_CAP)
    return np.where(sinr_db < SINR_FLOOR_DB, 0.0, se)


def rate_map(sinr_db, bandwidth_hz, time_share=1.0):
    """Truncated-Shannon throughput in Mbps."""
    bw = np.asarray(bandwidth_hz, dtype=float)
    share = np.asarray(time_share, dtype=float)
    if np.any(bw < 0) or np.any((share < 0) | (share > 1)):
        raise ValueError("bandwidth must be >= 0 and time_share within [0, 1]")
    out = bw * share * spectral_efficiency(sinr_db) / 1e6
    return float(out) if np.ndim(out) == 0 else out


def percentile(values, p: float) -> float:
    """Nearest-rank percentile; p=0 gives the minimum."""
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        raise ValueError("percentile of an empty sequence")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"p must lie in [0, 100], got {p}")
    rank = max(1, math.ceil(p / 100.0 * v.size))
    return float(v[rank - 1])


def outage_fraction(records, threshold_db: float = -5.0) -> float:
    sinrs = [r.sinr_db if isinstance(r, KpiRecord) else r for r in records]
    if not sinrs:
        raise ValueError("outage fraction of an empty sequence")
    return float(np.mean(np.asarray(sinrs, dtype=float) < threshold_db))


def empirical_cdf(values):
    """Sorted values and their CDF levels, for plotting or threshold look-ups."""
    v = np.sort(np.asarray(values, dtype=float))
    return v, np.arange(1, v.size + 1) / v.size


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".6g")
    return str(value)


def _row(record: KpiRecord) -> list[str]:
    return [format_value(getattr(record, c)) for c in CSV_COLUMNS]


def export(records, fmt: str, path) -> Path:
    """Write records as CSV (fixed header) or a JSON list with the same field names."""
    path = Path(path)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in records:
                    w.writerow(_row(r))
        elif fmt == "json":
            with path.open("w") as fh:
                json.dump([asdict(r) for r in records], fh, indent=1)
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path



def _parse(name: str, text: str):
    if text == "":
        return None
    if name in ("scenario_id", "precoder", "direction", "user_class"):
        return text
    if name in ("drop", "frf"):
        return int(text)
    return float(text)


def read_csv(path) -> list[KpiRecord]:
    with Path(path).open(newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        return [KpiRecord(**{k: _parse(k, v) for k, v in zip(header, row)}) for row in rd]


def read_json(path) -> list[KpiRecord]:
    with Path(path).open() as fh:
        return [KpiRecord(**d) for d in json.load(fh)]
