"""Terrestrial PHY: association, round-robin scheduling, ZF / EDA beamforming, UL power control, SINR.

Channel convention: ``h`` is a row of length N (BS ports). Downlink receive is
``h @ w``; uplink receive at the BS is the column ``h.T``, combined by a row
``v`` as ``v @ h.T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

THERMAL_NOISE_DBM_HZ = -174.0
DL_MAX_USERS = 8
UL_MAX_USERS = 4
DL_NULLS = 16
UL_NULLS = 8


@dataclass(frozen=True)
class PowerControlParams:
    alpha: float = 0.80
    p0: float = -100.0  # dBm per resource block
    p_max: float = 23.0  # dBm
    rb_bandwidth: float = 360e3  # Hz

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.p_max < self.p0:
            raise ValueError("p_max must be >= p0")


def ul_tx_power(pc: PowerControlParams, pathloss_db, granted_bw):
    """Open-loop fractional power control in dBm."""
    n_rb = np.floor(np.asarray(granted_bw, dtype=float) / pc.rb_bandwidth + 1e-9)
    if np.any(n_rb < 1):
        raise ValueError("grant narrower than one resource block")
    return np.minimum(pc.p_max, pc.p0 + 10.0 * np.log10(n_rb) + pc.alpha * np.asarray(pathloss_db, dtype=float))


def noise_power_dbm(bandwidth_hz, noise_figure_db):
    return THERMAL_NOISE_DBM_HZ + 10.0 * np.log10(bandwidth_hz) + noise_figure_db


def associate(rsrp_db, allowed=None) -> np.ndarray:
    """Strongest-cell association; ``rsrp_db`` is (users, cells).

    ``allowed`` masks the candidate cells per user (the serving operator's
    cells). ``argmax`` returns the first maximum, so ties go to the lowest id.
    """
    r = np.asarray(rsrp_db, dtype=float)
    if allowed is not None:
        r = np.where(allowed, r, -np.inf)
    return np.argmax(r, axis=-1)


@dataclass(eq=False)
class TxConfig:
    """One co-scheduled group of a cell on one stretch of spectrum."""

    cell_id: int
    scheduled_users: np.ndarray
    f_lo: np.ndarray
    f_hi: np.ndarray
    matrix: np.ndarray | None = None
    n_nulls: int = 0
    tx_power_dbm: np.ndarray | None = None
    loaded: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def per_user_bw(self) -> np.ndarray:
        return self.f_hi - self.f_lo


def schedule(cell_id: int, users, user_bw, direction: str, rng: np.random.Generator,
             band: float = 100e6) -> list[list[TxConfig]]:
    """One full round-robin cycle for a cell.

    Users are shuffled once and then served in that fixed order; every user
    appears exactly once per cycle. Returns one list of TxConfigs per
    scheduling instant.

    DL: the band is split into subbands of the DL grant width (two 50 MHz halves
    for the default set-up), each carrying up to 8 spatially multiplexed users.
    UL: up to 4 users per instant, grants packed from the band edge.
    """
    users = np.asarray(users)
    user_bw = np.asarray(user_bw, dtype=float)
    if len(users) == 0:
        return []
    order = rng.permutation(len(users))
    users, user_bw = users[order], user_bw[order]
    instants: list[list[TxConfig]] = []
    if direction == "DL":
        sub_bw = float(user_bw.max())
        n_sub = max(1, int(np.floor(band / sub_bw + 1e-9)))
        per_instant = n_sub * DL_MAX_USERS
        for start in range(0, len(users), per_instant):
            chunk = users[start:start + per_instant]
            txs = []
            for s in range(n_sub):
                grp = chunk[s * DL_MAX_USERS:(s + 1) * DL_MAX_USERS]
                if len(grp) == 0:
                    break
                lo = np.full(len(grp), s * sub_bw)
                txs.append(TxConfig(cell_id, grp, lo, lo + sub_bw))
            instants.append(txs)
        return instants
    if direction != "UL":
        raise ValueError(f"direction must be 'UL' or 'DL', got {direction!r}")
    cur_u, cur_lo, cur_hi, used = [], [], [], 0.0
    for u, bw in zip(users, user_bw):
        if len(cur_u) == UL_MAX_USERS or used + bw > band + 1e-6:
            instants.append([TxConfig(cell_id, np.array(cur_u), np.array(cur_lo), np.array(cur_hi))])
            cur_u, cur_lo, cur_hi, used = [], [], [], 0.0
        cur_u.append(u)
        cur_lo.append(used)
        cur_hi.append(used + bw)
        used += bw
    instants.append([TxConfig(cell_id, np.array(cur_u), np.array(cur_lo), np.array(cur_hi))])
    return instants


def _reference_vector(n: int) -> np.ndarray:
    return np.exp(1j * 0.37 * np.arange(n) ** 1.5) / np.sqrt(n)


def dominant_subspace(a: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal basis (N, n) of the n dominant eigendirections of ``a @ a^H``.

    ``a`` holds the (power-weighted) victim or interferer vectors as columns.
    Equal eigenvalues are ordered by their overlap with a fixed reference
    vector so the selection is reproducible.
    """
    n_dim, m = a.shape
    if n <= 0:
        return np.zeros((n_dim, 0), dtype=complex)
    if m < n_dim:
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        lam = s**2
    else:
        lam, u = np.linalg.eigh(a @ a.conj().T)
    ref = _reference_vector(n_dim)
    scale = lam.max() if lam.size and lam.max() > 0 else 1.0
    proj = np.abs(ref.conj() @ u)
    order = np.lexsort((-proj, -np.round(lam / scale, 10)))
    return u[:, order[:n]]


def _normalise_columns(w: np.ndarray) -> np.ndarray:
    return w / np.linalg.norm(w, axis=0, keepdims=True)


def _rank_deficient(gram: np.ndarray) -> bool:
    s = np.linalg.svd(gram, compute_uv=False)
    return s[-1] <= 1e-10 * s[0]


def zf_precoder(h: np.ndarray, *, with_flag: bool = False):
    """Zero-forcing precoder for stacked user rows ``h`` (K, N), unit-norm columns.

    A rank-deficient Gram matrix gets diagonal loading of 1e-6 * trace.
    """
    h = np.atleast_2d(h)
    gram = h @ h.conj().T
    loaded = _rank_deficient(gram)
    if loaded:
        gram = gram + 1e-6 * np.trace(gram).real * np.eye(len(gram))
    w = _normalise_columns(h.conj().T @ np.linalg.inv(gram))
    return (w, loaded) if with_flag else w


def eda_precoder(h_served: np.ndarray, h_out: np.ndarray, n_nulls: int, *, with_flag: bool = False,
                 return_basis: bool = False):
    """ZF restricted to the complement of the victims' dominant eigendirections.

    ``h_out`` (M, N) holds the channel rows towards out-of-cell victims.
    """
    h_served = np.atleast_2d(h_served)
    k, n_ports = h_served.shape
    if n_nulls == 0:
        w, loaded = zf_precoder(h_served, with_flag=True)
        e = np.zeros((n_ports, 0), dtype=complex)
    else:
        if n_nulls >= n_ports - k:
            raise ValueError(f"{n_nulls} nulls leave no room for {k} users on {n_ports} ports")
        h_out = np.atleast_2d(h_out)
        e = dominant_subspace(h_out.conj().T, min(n_nulls, h_out.shape[0]))
        hp = h_served - (h_served @ e) @ e.conj().T
        w, loaded = zf_precoder(hp, with_flag=True)
    out = (w,)
    if with_flag:
        out += (loaded,)
    if return_basis:
        out += (e,)
    return out if len(out) > 1 else w


def zf_combiner(h_cols: np.ndarray, *, with_flag: bool = False):
    """ZF receive combiner (K, N) for stacked uplink channel columns (N, K); unit-norm rows."""
    h_cols = np.asarray(h_cols)
    if h_cols.ndim == 1:
        h_cols = h_cols[:, None]
    gram = h_cols.conj().T @ h_cols
    loaded = _rank_deficient(gram)
    if loaded:
        gram = gram + 1e-6 * np.trace(gram).real * np.eye(len(gram))
    v = np.linalg.inv(gram) @ h_cols.conj().T
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    return (v, loaded) if with_flag else v


def eda_combiner(h_cols: np.ndarray, h_interf: np.ndarray, n_nulls: int, *, with_flag: bool = False,
                 return_basis: bool = False):
    """Uplink dual of :func:`eda_precoder`.

    ``h_interf`` (N, M) holds received interference columns, already scaled by
    the square root of their power.
    """
    h_cols = np.asarray(h_cols)
    if h_cols.ndim == 1:
        h_cols = h_cols[:, None]
    n_ports, k = h_cols.shape
    if n_nulls == 0:
        v, loaded = zf_combiner(h_cols, with_flag=True)
        e = np.zeros((n_ports, 0), dtype=complex)
    else:
        if n_nulls >= n_ports - k:
            raise ValueError(f"{n_nulls} nulls leave no room for {k} users on {n_ports} ports")
        h_interf = np.asarray(h_interf)
        if h_interf.ndim == 1:
            h_interf = h_interf[:, None]
        e = dominant_subspace(h_interf, min(n_nulls, h_interf.shape[1]))
        hp = h_cols - e @ (e.conj().T @ h_cols)
        v, loaded = zf_combiner(hp, with_flag=True)
    out = (v,)
    if with_flag:
        out += (loaded,)
    if return_basis:
        out += (e,)
    return out if len(out) > 1 else v


def _overlap(lo_a, hi_a, lo_b, hi_b):
    return np.clip(np.minimum(hi_a[:, None], hi_b[None, :]) - np.maximum(lo_a[:, None], lo_b[None, :]), 0.0, None)


def compute_sinr(direction: str, tx_configs: list[TxConfig], channels, noise_figure_db: float):
    """Snapshot SINR of every scheduled user, as ``{user: sinr_db}``.

    ``channels[u, c]`` is the length-N channel row between user ``u`` and cell
    ``c`` (any array supporting that fancy indexing). Every TxConfig must carry
    its ``matrix`` (DL precoder columns / UL combiner rows) and
    ``tx_power_dbm``. Interference is counted from every other stream whose
    grant overlaps, in proportion to the overlap.
    """
    active = [tc for tc in tx_configs if len(tc.scheduled_users)]
    if not active:
        return {}
    users = np.concatenate([tc.scheduled_users for tc in active])
    lo = np.concatenate([tc.f_lo for tc in active])
    hi = np.concatenate([tc.f_hi for tc in active])
    p_mw = 10.0 ** (np.concatenate([np.asarray(tc.tx_power_dbm, dtype=float) for tc in active]) / 10.0)
    bw = hi - lo
    owner = np.concatenate([np.full(len(tc.scheduled_users), i) for i, tc in enumerate(active)])
    noise_mw_hz = 10.0 ** ((THERMAL_NOISE_DBM_HZ + noise_figure_db) / 10.0)
    sinr = np.empty(len(users))

    if direction == "DL":
        # receiver r, stream j: p_j |h_{r,c_j} w_j|^2 * overlap / B_j
        total = np.zeros(len(users))
        desired = np.zeros(len(users))
        for i, tc in enumerate(active):
            idx = np.nonzero(owner == i)[0]
            ov = _overlap(lo, hi, lo[idx], hi[idx]) / bw[idx]
            rx = np.nonzero(ov.any(axis=1))[0]
            g = channels[users[rx], tc.cell_id] @ tc.matrix
            pw = np.abs(g) ** 2 * p_mw[idx] * ov[rx]
            total[rx] += pw.sum(axis=1)
            pos = np.searchsorted(rx, idx)
            desired[idx] = pw[pos, np.arange(len(idx))]
        noise = noise_mw_hz * bw
        sinr = desired / (total - desired + noise)
    elif direction == "UL":
        for i, tc in enumerate(active):
            idx = np.nonzero(owner == i)[0]
            ov = _overlap(lo[idx], hi[idx], lo, hi) / bw
            tx = np.nonzero(ov.any(axis=0))[0]
            g = tc.matrix @ channels[users[tx], tc.cell_id].T
            pw = np.abs(g) ** 2 * p_mw[tx] * ov[:, tx]
            pos = np.searchsorted(tx, idx)
            des = pw[np.arange(len(idx)), pos]
            noise = noise_mw_hz * bw[idx] * np.sum(np.abs(tc.matrix) ** 2, axis=1)
            sinr[idx] = des / (pw.sum(axis=1) - des + noise)
    else:
        raise ValueError(f"direction must be 'UL' or 'DL', got {direction!r}")
    with np.errstate(divide="ignore"):
        sinr_db = 10.0 * np.log10(sinr)
    return dict(zip(users.tolist(), sinr_db.tolist()))
