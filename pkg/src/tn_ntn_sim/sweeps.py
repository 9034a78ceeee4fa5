"""The two built-in experiment sweeps and their summary tables."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import geometry, kpi
from .scenario import NtnConfig, Scenario
from .simulation import OFFLOADED_CLASS, drop_results, satellite_offload, simulate_tn, tn_result, to_records

log = logging.getLogger(__name__)

ISD_A_VALUES = (None, 1500.0, 1000.0, 500.0)
PRECODERS = ("ZF", "EDA")
DIRECTIONS = ("UL", "DL")
EVTOL_DENSITIES = (0.1, 0.2, 0.5, 1.0)
NTN_CASES = ((90.0, 1), (90.0, 3), (87.0, 1), (87.0, 3))
EVTOL_CLASSES = (geometry.EVTOL, OFFLOADED_CLASS)
GUE = "GUE"


@dataclass(frozen=True)
class SummaryRow:
    scenario_id: str
    user_class: str
    n: int
    sinr_median: float
    sinr_p95: float
    rate_median: float
    rate_p95: float
    outage: float


@dataclass(frozen=True)
class DistrictRow:
    """Offloaded-user rates when a whole district's outage users share one beam."""

    elevation_deg: float
    frf: int
    evtol_density: float
    district_users: int
    offloaded_users: int
    rate_median: float


@dataclass
class SweepResult:
    rows: list[SummaryRow]
    records: list[kpi.KpiRecord]
    district: list[DistrictRow] = field(default_factory=list)

    def row(self, scenario_id: str, user_class: str) -> SummaryRow:
        for r in self.rows:
            if r.scenario_id == scenario_id and r.user_class == user_class:
                return r
        raise KeyError((scenario_id, user_class))


def _class_group(cls: str) -> str:
    return GUE if cls in (geometry.GUE_INDOOR, geometry.GUE_OUTDOOR) else cls


def summarize(records, scenario_id: str | None = None) -> list[SummaryRow]:
    """Median / 95th percentile of SINR and rate plus outage, per scenario and class group."""
    groups: dict[tuple[str, str], list[kpi.KpiRecord]] = {}
    for r in records:
        if scenario_id is None or r.scenario_id == scenario_id:
            groups.setdefault((r.scenario_id, _class_group(r.user_class)), []).append(r)
    rows = []
    for (sid, cls), recs in groups.items():
        sinr = [r.sinr_db for r in recs]
        rate = [r.rate_mbps for r in recs]
        rows.append(SummaryRow(sid, cls, len(recs), kpi.percentile(sinr, 50), kpi.percentile(sinr, 95),
                               kpi.percentile(rate, 50), kpi.percentile(rate, 95), kpi.outage_fraction(sinr)))
    return rows


def district_users(density: float, area_km2: float, isd_t: float) -> int:
    """eVTOLs in a district of the given area at a density per terrestrial cell."""
    cell_area = np.sqrt(3.0) / 2.0 * isd_t**2 / 3.0
    return int(np.floor(density * area_km2 * 1e6 / cell_area + 0.5))


def district_rate(offloaded_sinr_db, n_users: int, band_hz: float) -> float:
    """Median per-user rate (Mbps) when ``n_users`` share a beam in round robin.

    The SINR samples stand in for the users' positions; every user gets the
    whole band for 1/n of the time.
    """
    if n_users < 1:
        raise ValueError("need at least one offloaded user")
    rates = kpi.rate_map(np.asarray(offloaded_sinr_db, dtype=float), band_hz, 1.0 / n_users)
    return kpi.percentile(np.atleast_1d(rates), 50)


def example1_scenarios(seed: int = 0, n_drops: int = 50, directions=DIRECTIONS) -> list[Scenario]:
    return [Scenario(isd_a=isd, precoder=p, direction=d, seed=seed, n_drops=n_drops)
            for d in directions for isd in ISD_A_VALUES for p in PRECODERS]


def sweep_example1(seed: int = 0, n_drops: int = 50, directions=DIRECTIONS, workers: int = 1) -> SweepResult:
    """Aerial operator density x precoder x direction, with UAVs at one per terrestrial cell."""
    records: list[kpi.KpiRecord] = []
    for s in example1_scenarios(seed, n_drops, directions):
        for res in drop_results(s, workers):
            records.extend(to_records(s, res))
        log.info("example1: %s done", s.scenario_id)
    return SweepResult(summarize(records), records)


def _example2_drop(args):
    """Terrestrial drop plus every satellite case re-using it; eVTOL records only."""
    base, drop = args
    out = []
    with threadpool_limits(limits=1):
        tn = simulate_tn(base, drop)
        ev = tn.users.cls == geometry.EVTOL
        out.extend(r for r, keep in zip(to_records(base, tn_result(tn)), ev) if keep)
        for el, frf in NTN_CASES:
            s = base.with_(ntn=NtnConfig(elevation_deg=el, frf=frf))
            res = satellite_offload(tn, s, s.ntn)
            keep = np.isin(res.user_class, EVTOL_CLASSES)
            out.extend(r for r, k in zip(to_records(s, res), keep) if k)
    return out


def example2_scenarios(seed: int = 0, n_drops: int = 50, densities=EVTOL_DENSITIES) -> list[Scenario]:
    return [Scenario(direction="DL", precoder="ZF", evtol_per_tn_cell=d, seed=seed, n_drops=n_drops)
            for d in densities]


def sweep_example2(seed: int = 0, n_drops: int = 50, densities=EVTOL_DENSITIES, workers: int = 1) -> SweepResult:
    """Standalone terrestrial eVTOL service, then outage users offloaded to the satellite.

    Each terrestrial drop is shared by the four (elevation, FRF) cases so they
    differ only in the satellite link.
    """
    records: list[kpi.KpiRecord] = []
    for base in example2_scenarios(seed, n_drops, densities):
        tasks = [(base, d) for d in range(n_drops)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                chunks = list(ex.map(_example2_drop, tasks))
        else:
            chunks = [_example2_drop(t) for t in tasks]
        for c in chunks:
            records.extend(c)
        log.info("example2: density %g done", base.evtol_per_tn_cell)

    rows = summarize(records)
    district = []
    ntn_default = NtnConfig()
    for base in example2_scenarios(seed, n_drops, densities):
        tn_id = base.scenario_id
        outage = kpi.outage_fraction([r.sinr_db for r in records if r.scenario_id == tn_id])
        n_dist = district_users(base.evtol_per_tn_cell, ntn_default.district_area_km2, base.isd_t)
        n_off = int(np.floor(outage * n_dist + 0.5))
        for el, frf in NTN_CASES:
            ntn = NtnConfig(elevation_deg=el, frf=frf)
            sid = base.with_(ntn=ntn).scenario_id
            sinr = [r.sinr_db for r in records if r.scenario_id == sid and r.user_class == OFFLOADED_CLASS]
            rate = district_rate(sinr, n_off, ntn.dl_bw) if sinr and n_off else float("nan")
            district.append(DistrictRow(el, frf, base.evtol_per_tn_cell, n_dist, n_off, rate))
    return SweepResult(rows, records, district)


def write_sweep(result: SweepResult, out_dir, fmt: str = "csv") -> Path:
    """Records, the summary table and (if any) the district rates into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kpi.export(result.records, fmt, out / f"records.{fmt}")
    _write_rows(result.rows, out / "summary.csv")
    if result.district:
        _write_rows(result.district, out / "district_rates.csv")
    return out


def _write_rows(rows, path: Path):
    if not rows:
        return
    data = [asdict(r) for r in rows]
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(data[0]), lineterminator="\n")
        w.writeheader()
        for d in data:
            w.writerow({k: kpi.format_value(v) for k, v in d.items()})
