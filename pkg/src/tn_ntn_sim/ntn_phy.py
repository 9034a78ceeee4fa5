"""LEO satellite access: 7-beam lattice, frequency reuse, link budgets, offloading.

The beam lattice is fixed in the satellite frame: the central beam points at
nadir and the six neighbours sit one HPBW away from it. A service area seen at
an elevation below 90 degrees is therefore off the central boresight, which is
where the gain loss at low elevation comes from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .antenna import AperturePattern, aperture_gain
from .geometry import EARTH_RADIUS_KM, SatelliteGeometry

BOLTZMANN_DBW_K_HZ = -228.6
OUTAGE_THRESHOLD_DB = -5.0
UE_NOISE_FIGURE_DB = 9.0
UE_MAX_POWER_DBM = 23.0
NTN_UL_GRANT = 360e3


@dataclass(frozen=True, eq=False)
class BeamLattice:
    boresights: np.ndarray  # (7, 3) unit vectors from the satellite, local ENU
    ground_centers: np.ndarray  # (7, 2) km in the service-area tangent plane
    colors: np.ndarray  # (7,) reuse partition per beam
    frf: int

    @property
    def n_beams(self) -> int:
        return len(self.boresights)

    def neighbours(self, beam: int) -> list[int]:
        if beam == 0:
            return list(range(1, self.n_beams))
        ring = self.n_beams - 1
        i = beam - 1
        return [0, 1 + (i - 1) % ring, 1 + (i + 1) % ring]


def frf_colors(n_beams: int, frf: int) -> np.ndarray:
    """Centre gets colour 0; the ring alternates 1, 2 so no two neighbours share a colour."""
    if frf == 1:
        return np.zeros(n_beams, dtype=int)
    if frf == 3:
        return np.concatenate([[0], 1 + np.arange(n_beams - 1) % 2])
    raise ValueError(f"unsupported frequency reuse factor {frf}")


def _ray_ground_point(origin_km, direction):
    centre = np.array([0.0, 0.0, -EARTH_RADIUS_KM])
    oc = origin_km - centre
    b = direction @ oc
    c = oc @ oc - EARTH_RADIUS_KM**2
    t = -b - np.sqrt(np.maximum(b * b - c, 0.0))
    return origin_km + t[..., None] * direction


def build_beams(sat: SatelliteGeometry, n_beams: int = 7, spacing_deg: float = 4.41, frf: int = 1) -> BeamLattice:
    nadir = sat.nadir
    ref = np.array([1.0, 0.0, 0.0])
    r1 = ref - (ref @ nadir) * nadir
    r1 /= np.linalg.norm(r1)
    r2 = np.cross(nadir, r1)
    s = np.radians(spacing_deg)
    dirs = [nadir]
    for k in range(n_beams - 1):
        phi = 2.0 * np.pi * k / (n_beams - 1)
        dirs.append(np.cos(s) * nadir + np.sin(s) * (np.cos(phi) * r1 + np.sin(phi) * r2))
    dirs = np.array(dirs)
    pts = _ray_ground_point(np.asarray(sat.satellite_position), dirs)
    return BeamLattice(dirs, pts[:, :2], frf_colors(n_beams, frf), frf)


def beam_offsets_deg(lattice: BeamLattice, sat: SatelliteGeometry, user_xyz_m) -> np.ndarray:
    """Angle (deg) between each beam's boresight and each user, shape (U, beams)."""
    v = np.atleast_2d(np.asarray(user_xyz_m, dtype=float)) - sat.position_m
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return np.degrees(np.arccos(np.clip(v @ lattice.boresights.T, -1.0, 1.0)))


def serving_beam(lattice: BeamLattice, sat: SatelliteGeometry, user_xyz_m, pattern: AperturePattern):
    gains = aperture_gain(pattern, beam_offsets_deg(lattice, sat, user_xyz_m))
    return np.argmax(gains, axis=1), gains


def ntn_dl_sinr(user_xyz_m, lattice: BeamLattice, sat: SatelliteGeometry, pattern: AperturePattern,
                eirp_density_dbw_mhz: float, loss_db, noise_figure_db: float = UE_NOISE_FIGURE_DB):
    """Downlink SINR (dB) and serving beam per user.

    Every beam radiates the same EIRP density; co-coloured beams interfere.
    Both signal and noise are per MHz, so the result does not depend on the
    allocated bandwidth.
    """
    beam, gains = serving_beam(lattice, sat, user_xyz_m, pattern)
    loss_db = np.broadcast_to(np.asarray(loss_db, dtype=float), beam.shape)
    rx = eirp_density_dbw_mhz + 30.0 + (gains - pattern.peak_gain) - loss_db[:, None]
    rx_mw = 10.0 ** (rx / 10.0)
    rows = np.arange(len(beam))
    co = lattice.colors[None, :] == lattice.colors[beam][:, None]
    co[rows, beam] = False
    interference = np.sum(np.where(co, rx_mw, 0.0), axis=1)
    noise = 10.0 ** ((-174.0 + 60.0 + noise_figure_db) / 10.0)
    sinr = rx_mw[rows, beam] / (interference + noise)
    return 10.0 * np.log10(sinr), beam


def ntn_ul_snr(loss_db, g_over_t_db: float, bandwidth_hz: float = NTN_UL_GRANT,
               tx_power_dbm: float = UE_MAX_POWER_DBM, rel_gain_db=0.0):
    """Uplink C/N in dB at full power over one grant; satellite pattern enters via ``rel_gain_db``."""
    eirp_dbw = tx_power_dbm - 30.0
    return (eirp_dbw + np.asarray(rel_gain_db) - np.asarray(loss_db) + g_over_t_db
            - BOLTZMANN_DBW_K_HZ - 10.0 * np.log10(bandwidth_hz))


def ntn_schedule(serving_beams, direction: str, band_hz: float, grant_hz: float = NTN_UL_GRANT):
    """Per-user (bandwidth Hz, time share) under single-user DL / multi-user UL round robin."""
    beams = np.asarray(serving_beams)
    if beams.size == 0:
        return np.zeros(0), np.zeros(0)
    _, inv, counts = np.unique(beams, return_inverse=True, return_counts=True)
    n = counts[inv].astype(float)
    if direction == "DL":
        return np.full(len(beams), float(band_hz)), 1.0 / n
    if direction == "UL":
        slots = max(1, int(np.floor(band_hz / grant_hz + 1e-9)))
        return np.full(len(beams), float(grant_hz)), np.minimum(1.0, slots / n)
    raise ValueError(f"direction must be 'UL' or 'DL', got {direction!r}")


def max_ul_grants(band_hz: float, grant_hz: float = NTN_UL_GRANT) -> int:
    return int(np.floor(band_hz / grant_hz + 1e-9))


def offload_rule(tn_sinr_db, threshold_db: float = OUTAGE_THRESHOLD_DB) -> np.ndarray:
    """Mask of users whose terrestrial SINR is strictly below the outage threshold."""
    return np.asarray(tn_sinr_db, dtype=float) < threshold_db
