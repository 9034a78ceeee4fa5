"""One Monte-Carlo drop end to end, and the drop loop.

A drop places users, draws large-scale fading and channels, runs one full
round-robin cycle in every cell and records each user's SINR at the instant it
is first served. Cells with shorter cycles repeat them, so every cell stays
active (full load) across the longest cycle.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import antenna, channel, geometry, kpi, ntn_phy, tn_phy
from .scenario import NtnConfig, Scenario, substream

log = logging.getLogger(__name__)

MNO_T, MNO_A, MNO_S = "MNO_T", "MNO_A", "MNO_S"
OFFLOADED_CLASS = "eVTOL_offloaded"


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Network:
    layout_t: geometry.HexLayout
    layout_a: geometry.HexLayout | None
    site_xy: np.ndarray  # all sites, terrestrial first
    cell_site: np.ndarray
    cell_azimuth: np.ndarray
    cell_tilt: np.ndarray
    cell_power_dbm: np.ndarray
    cell_operator: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.cell_site)


def build_network(s: Scenario) -> Network:
    lt = geometry.build_hex_layout(s.isd_t, s.rings)
    la = geometry.build_offset_layout(s.isd_a, lt) if s.isd_a is not None else None
    layouts = [(lt, MNO_T, s.tilt_t_deg, s.p_tx_t_dbm)]
    if la is not None:
        layouts.append((la, MNO_A, s.tilt_a_deg, s.p_tx_a_dbm))
    site_xy, cell_site, az, tilt, power, op = [], [], [], [], [], []
    offset = 0
    for lay, name, t, p in layouts:
        site_xy.append(lay.site_xy)
        cell_site.append(lay.cell_site + offset)
        az.append(lay.cell_azimuth)
        tilt.append(np.full(lay.n_cells, t))
        power.append(np.full(lay.n_cells, p))
        op.append(np.full(lay.n_cells, name, dtype=object))
        offset += lay.n_sites
    return Network(lt, la, np.concatenate(site_xy), np.concatenate(cell_site), np.concatenate(az),
                   np.concatenate(tilt), np.concatenate(power), np.concatenate(op))


@dataclass(eq=False)
class TnDrop:
    """Terrestrial outcome of one drop (before any satellite offloading)."""

    drop: int
    users: geometry.Users
    serving_cell: np.ndarray
    sinr_db: np.ndarray
    rate_mbps: np.ndarray
    served_by: np.ndarray
    n_loaded: int = 0


@dataclass(eq=False)
class DropResult:
    drop: int
    user_class: np.ndarray
    sinr_db: np.ndarray
    rate_mbps: np.ndarray
    served_by: np.ndarray


def _grant_bw(s: Scenario, cls: np.ndarray) -> np.ndarray:
    ground = np.isin(cls, (geometry.GUE_INDOOR, geometry.GUE_OUTDOOR))
    if s.direction == "DL":
        return np.where(ground, s.dl_bw_gue, s.dl_bw_aerial)
    return np.where(ground, s.ul_bw_gue, s.ul_bw_aerial)


def _victim_cap(s: Scenario, n_nulls: int) -> int:
    return s.eda_victim_cap if s.eda_victim_cap is not None else 4 * n_nulls


def simulate_tn(s: Scenario, drop: int, net: Network | None = None) -> TnDrop:
    net = build_network(s) if net is None else net
    arr = antenna.ArrayConfig()
    users = geometry.drop_users(net.layout_t, s.gue_per_cell, s.uav_per_tn_cell, s.evtol_per_tn_cell,
                                substream(s.seed, drop, "users"))
    if net.layout_a is not None:
        users.operator[users.cls == geometry.UAV] = MNO_A
    n_u, n_c = len(users), net.n_cells
    h_ut = users.height

    # large scale, per (user, site)
    disp = geometry.wrap_displacement(users.xyz[:, :2], net.site_xy, net.layout_t.wrap_shifts)
    d2d = np.hypot(disp[..., 0], disp[..., 1])
    dz = h_ut[:, None] - geometry.BS_HEIGHT
    d3d = np.sqrt(d2d**2 + dz**2)
    los = substream(s.seed, drop, "los").random(d2d.shape) < channel.los_probability(d2d, h_ut[:, None])
    pl = channel.pathloss(los, d3d, d2d, geometry.BS_HEIGHT, h_ut[:, None], s.carrier_tn)
    shadow = channel.shadowing_draw(los, h_ut[:, None], substream(s.seed, drop, "shadowing"))
    o2i = channel.entry_loss(users.indoor, users.indoor_depth, s.carrier_tn)
    loss_site = pl + shadow + o2i[:, None]

    # per (user, cell): element gain and array phases in each tilted panel frame
    cs = net.cell_site
    direction = np.concatenate([disp[:, cs, :], np.broadcast_to(dz[:, :, None], (n_u, n_c, 1))],
                               axis=2) / d3d[:, cs, None]
    az_l, zen_l, loc = antenna.local_angles(direction, net.cell_azimuth[None, :], net.cell_tilt[None, :])
    elem_db = antenna.element_gain(arr.element, az_l, zen_l)
    loss = loss_site[:, cs]
    gain_db = elem_db - loss
    allowed = users.operator[:, None] == net.cell_operator[None, :]
    serving = tn_phy.associate(gain_db, allowed)

    k_db = np.where(h_ut[:, None] <= channel.GROUND_MAX_HEIGHT, s.k_ground_los_db, s.k_aerial_los_db)
    k_db = np.where(los[:, cs], k_db, -np.inf)
    steering = antenna.steering_phases(arr, loc)
    del direction, az_l, zen_l, loc
    h = channel.synthesize_channels(10.0 ** (gain_db / 10.0), steering, k_db, substream(s.seed, drop, "channel"),
                                    polarizations=arr.polarizations)
    del steering
    g_lin = 10.0 ** (gain_db / 10.0)

    # scheduling
    bw = _grant_bw(s, users.cls)
    sched_rng = substream(s.seed, drop, "schedule")
    cycles = []
    for c in range(n_c):
        attached = np.nonzero(serving == c)[0]
        cycles.append(tn_phy.schedule(c, attached, bw[attached], s.direction, sched_rng, s.bandwidth_tn))
    n_inst = np.array([len(cy) for cy in cycles])
    if s.direction == "UL":
        pc = tn_phy.PowerControlParams()
        ul_power = tn_phy.ul_tx_power(pc, loss[np.arange(n_u), serving], bw)

    sinr = np.full(n_u, np.nan)
    share = np.zeros(n_u)
    n_loaded = 0
    nf = s.bs_noise_figure if s.direction == "UL" else s.ue_noise_figure
    n_nulls = 0 if s.precoder == "ZF" else (tn_phy.UL_NULLS if s.direction == "UL" else tn_phy.DL_NULLS)
    for t in range(int(n_inst.max(initial=0))):
        txs = [tc for c, cy in enumerate(cycles) if cy for tc in cy[t % len(cy)]]
        try:
            n_loaded += _beamform(s, txs, h, g_lin, n_nulls, bw, ul_power if s.direction == "UL" else None,
                                  net.cell_power_dbm)
        except np.linalg.LinAlgError as exc:
            raise SimulationError(f"drop {drop}, instant {t}: precoding failed: {exc}") from exc
        res = tn_phy.compute_sinr(s.direction, txs, h, nf)
        for tc in txs:
            if t < n_inst[tc.cell_id]:
                for u in tc.scheduled_users:
                    sinr[u] = res[u]
                    share[u] = 1.0 / n_inst[tc.cell_id]
    if np.isnan(sinr).any():
        raise SimulationError(f"drop {drop}: {int(np.isnan(sinr).sum())} users never scheduled")
    rate = kpi.rate_map(sinr, bw, share)
    served_by = np.where(users.operator == MNO_A, MNO_A, MNO_T).astype(object)
    return TnDrop(drop, users, serving, sinr, np.asarray(rate), served_by, n_loaded)


def _beamform(s, txs, h, g_lin, n_nulls, bw, ul_power, cell_power_dbm) -> int:
    """Fill matrix and powers of every TxConfig active at one instant."""
    cells = np.concatenate([np.full(len(tc.scheduled_users), tc.cell_id) for tc in txs])
    users = np.concatenate([tc.scheduled_users for tc in txs])
    lo = np.concatenate([tc.f_lo for tc in txs])
    hi = np.concatenate([tc.f_hi for tc in txs])
    if ul_power is not None:
        p_mw = 10.0 ** (ul_power[users] / 10.0)
    loaded = 0
    for tc in txs:
        u = tc.scheduled_users
        c = tc.cell_id
        if s.direction == "DL":
            k = len(u)
            sub = float(tc.f_hi[0] - tc.f_lo[0])
            p_user = cell_power_dbm[c] + 10.0 * np.log10(sub / s.bandwidth_tn) - 10.0 * np.log10(k)
            tc.tx_power_dbm = np.full(k, p_user)
            if n_nulls:
                other = (cells != c) & (lo < tc.f_hi[0]) & (hi > tc.f_lo[0])
                vic = users[other]
                vic = vic[np.argsort(-g_lin[vic, c], kind="stable")[:_victim_cap(s, n_nulls)]]
                tc.matrix, flag = tn_phy.eda_precoder(h[u, c], h[vic, c], n_nulls, with_flag=True)
            else:
                tc.matrix, flag = tn_phy.zf_precoder(h[u, c], with_flag=True)
        else:
            tc.tx_power_dbm = ul_power[u]
            cols = h[u, c].T
            if n_nulls:
                ov = np.zeros(len(users))
                for a, b in zip(tc.f_lo, tc.f_hi):
                    ov += np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)
                ov = np.minimum(ov / (hi - lo), 1.0) * (cells != c)
                strength = p_mw * ov * g_lin[users, c]
                pick = np.argsort(-strength, kind="stable")[:_victim_cap(s, n_nulls)]
                pick = pick[strength[pick] > 0]
                interf = (np.sqrt(p_mw[pick] * ov[pick])[:, None] * h[users[pick], c]).T
                tc.matrix, flag = tn_phy.eda_combiner(cols, interf, n_nulls, with_flag=True)
            else:
                tc.matrix, flag = tn_phy.zf_combiner(cols, with_flag=True)
        tc.n_nulls = n_nulls
        tc.loaded = flag
        loaded += int(flag)
    return loaded


def satellite_offload(tn: TnDrop, s: Scenario, ntn: NtnConfig) -> DropResult:
    """Move eVTOLs in terrestrial outage (or all, with ``offload_all``) to the satellite."""
    users = tn.users
    cls = users.cls.copy()
    sinr = tn.sinr_db.copy()
    rate = tn.rate_mbps.copy()
    served = tn.served_by.copy()
    evtol = cls == geometry.EVTOL
    off = evtol & (True if s.offload_all else ntn_phy.offload_rule(tn.sinr_db))
    # common random numbers across satellite configurations
    z = substream(s.seed, tn.drop, "ntn").standard_normal(len(users))
    idx = np.nonzero(off)[0]
    if idx.size:
        sat = geometry.satellite_geometry(ntn.elevation_deg, ntn.orbit_altitude)
        lattice = ntn_phy.build_beams(sat, ntn.n_beams, ntn.beam_hpbw_deg, ntn.frf)
        pattern = antenna.AperturePattern(ntn.beam_peak_gain, ntn.beam_hpbw_deg, ntn.carrier)
        loss = channel.ntn_large_scale(sat, users.xyz[idx], ntn.carrier, shadow_z=z[idx])
        s_db, beam = ntn_phy.ntn_dl_sinr(users.xyz[idx], lattice, sat, pattern, ntn.eirp_density, loss,
                                         s.ue_noise_figure)
        bw, share = ntn_phy.ntn_schedule(beam, "DL", ntn.dl_bw)
        sinr[idx] = s_db
        rate[idx] = kpi.rate_map(s_db, bw, share)
        served[idx] = MNO_S
        cls[idx] = OFFLOADED_CLASS
    return DropResult(tn.drop, cls, sinr, rate, served)


def tn_result(tn: TnDrop) -> DropResult:
    return DropResult(tn.drop, tn.users.cls, tn.sinr_db, tn.rate_mbps, tn.served_by)


def simulate_drop(s: Scenario, drop: int) -> DropResult:
    with threadpool_limits(limits=1):
        tn = simulate_tn(s, drop)
        if s.ntn is not None:
            return satellite_offload(tn, s, s.ntn)
    return tn_result(tn)


def to_records(s: Scenario, res: DropResult) -> list[kpi.KpiRecord]:
    sid = s.scenario_id
    el = s.ntn.elevation_deg if s.ntn else None
    frf = s.ntn.frf if s.ntn else None
    dens = s.evtol_per_tn_cell if s.evtol_per_tn_cell else None
    return [kpi.KpiRecord(sid, s.isd_a, s.precoder, s.direction, el, frf, dens, str(c), res.drop, float(x), float(r))
            for c, x, r in zip(res.user_class, res.sinr_db, res.rate_mbps)]


def _drop_task(args):
    s, d = args
    return simulate_drop(s, d)


def drop_results(s: Scenario, workers: int = 1, drops=None) -> list[DropResult]:
    drops = range(s.n_drops) if drops is None else drops
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_drop_task, [(s, d) for d in drops]))
    return [simulate_drop(s, d) for d in drops]


def run_drops(s: Scenario, workers: int = 1) -> list[kpi.KpiRecord]:
    """All drops of a scenario, concatenated in drop order."""
    out = []
    for res in drop_results(s, workers):
        out.extend(to_records(s, res))
    log.info("%s: %d drops, %d records", s.scenario_id, s.n_drops, len(out))
    return out
