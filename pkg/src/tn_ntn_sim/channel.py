"""Large-scale propagation and Rician small-scale channel synthesis.

Branch selection by receiver height (always exactly one branch):

* ``h <= 22.5 m``  -- urban macro (TR 38.901 UMa), ground users incl. indoor floors
* ``22.5 < h <= 300 m`` -- aerial urban macro (TR 36.777 UMa-AV)
* ``h > 300 m`` -- free space, LoS with probability one

All distances in metres, carrier in Hz, losses in dB.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .antenna import SPEED_OF_LIGHT

GROUND_MAX_HEIGHT = 22.5
AERIAL_MAX_HEIGHT = 300.0
EFFECTIVE_ENV_HEIGHT = 1.0
K_GROUND_LOS_DB = 9.0
K_AERIAL_LOS_DB = 15.0
NTN_ATMOSPHERIC_LOSS = 0.1

BRANCH_UMA = "UMa"
BRANCH_UMA_AV = "UMa-AV"
BRANCH_FREE_SPACE = "free-space"

# TR 38.811 S-band shadow-fading sigma for LoS, at elevations 10, 20, ..., 90 degrees
_NTN_ELEVATIONS = np.arange(10.0, 91.0, 10.0)
_NTN_SIGMA_LOS = {
    "dense_urban": np.array([3.5, 3.4, 2.9, 3.0, 3.1, 2.7, 2.5, 2.3, 1.2]),
    "rural": np.array([1.79, 1.14, 1.14, 0.92, 1.42, 1.56, 0.85, 0.72, 0.72]),
}


def model_branch(rx_height):
    h = np.asarray(rx_height, dtype=float)
    return np.where(h <= GROUND_MAX_HEIGHT, BRANCH_UMA,
                    np.where(h <= AERIAL_MAX_HEIGHT, BRANCH_UMA_AV, BRANCH_FREE_SPACE))


def fspl(d_m, carrier_hz):
    """Free-space loss, 32.45 + 20 log10(f_MHz) + 20 log10(d_km)."""
    return 32.45 + 20.0 * np.log10(np.asarray(carrier_hz) / 1e6) + 20.0 * np.log10(np.asarray(d_m) / 1e3)


def _uma_los_probability(d2d, h_ut):
    d = np.maximum(d2d, 1e-9)
    c = np.where(h_ut <= 13.0, 0.0, np.abs((h_ut - 13.0) / 10.0) ** 1.5)
    p = (18.0 / d + np.exp(-d / 63.0) * (1.0 - 18.0 / d)) * (
        1.0 + c * 1.25 * (d / 100.0) ** 3 * np.exp(-d / 150.0))
    return np.where(d2d <= 18.0, 1.0, np.minimum(p, 1.0))


def _uma_av_los_probability(d2d, h_ut):
    h = np.clip(h_ut, GROUND_MAX_HEIGHT, 100.0)
    p1 = 4300.0 * np.log10(h) - 3800.0
    d1 = np.maximum(460.0 * np.log10(h) - 700.0, 18.0)
    d = np.maximum(d2d, 1e-9)
    p = d1 / d + np.exp(-d / p1) * (1.0 - d1 / d)
    p = np.where(d2d <= d1, 1.0, p)
    return np.where(h_ut > 100.0, 1.0, p)


def los_probability(d2d, rx_height):
    d2d = np.asarray(d2d, dtype=float)
    h = np.asarray(rx_height, dtype=float)
    d2d, h = np.broadcast_arrays(d2d, h)
    ground = _uma_los_probability(d2d, np.minimum(h, GROUND_MAX_HEIGHT))
    aerial = _uma_av_los_probability(d2d, h)
    p = np.where(h <= GROUND_MAX_HEIGHT, ground, np.where(h <= AERIAL_MAX_HEIGHT, aerial, 1.0))
    return np.where(d2d <= 0.0, 1.0, p)


def _uma_los(d3d, d2d, h_bs, h_ut, fc_ghz):
    d_bp = 4.0 * (h_bs - EFFECTIVE_ENV_HEIGHT) * (h_ut - EFFECTIVE_ENV_HEIGHT) * fc_ghz * 1e9 / SPEED_OF_LIGHT
    pl1 = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
    pl2 = (28.0 + 40.0 * np.log10(d3d) + 20.0 * np.log10(fc_ghz)
           - 9.0 * np.log10(d_bp**2 + (h_bs - h_ut) ** 2))
    return np.where(d2d <= d_bp, pl1, pl2)


def pathloss(los, d3d, d2d, h_bs, h_ut, carrier):
    """Basic pathloss in dB (no shadowing, no entry loss)."""
    d3d = np.asarray(d3d, dtype=float)
    if np.any(d3d < 1.0):
        raise ValueError("pathloss is undefined for d3d < 1 m")
    los = np.asarray(los, dtype=bool)
    d2d = np.asarray(d2d, dtype=float)
    h_ut = np.asarray(h_ut, dtype=float)
    fc = carrier / 1e9
    hg = np.minimum(h_ut, GROUND_MAX_HEIGHT)
    uma_los = _uma_los(d3d, d2d, h_bs, hg, fc)
    uma_nlos = np.maximum(uma_los, 13.54 + 39.08 * np.log10(d3d) + 20.0 * np.log10(fc) - 0.6 * (hg - 1.5))
    ha = np.clip(h_ut, GROUND_MAX_HEIGHT, AERIAL_MAX_HEIGHT)
    av_los = 28.0 + 22.0 * np.log10(d3d) + 20.0 * np.log10(fc)
    av_nlos = np.maximum(av_los, -17.5 + (46.0 - 7.0 * np.log10(ha)) * np.log10(d3d)
                         + 20.0 * np.log10(40.0 * np.pi * fc / 3.0))
    ground = np.where(los, uma_los, uma_nlos)
    aerial = np.where(los, av_los, av_nlos)
    free = fspl(d3d, carrier)
    return np.where(h_ut <= GROUND_MAX_HEIGHT, ground, np.where(h_ut <= AERIAL_MAX_HEIGHT, aerial, free))


def shadowing_sigma(los, rx_height):
    los = np.asarray(los, dtype=bool)
    h = np.asarray(rx_height, dtype=float)
    ground = np.where(los, 4.0, 6.0)
    aerial = np.where(los, 4.64 * np.exp(-0.0066 * np.minimum(h, AERIAL_MAX_HEIGHT)), 6.0)
    return np.where(h <= GROUND_MAX_HEIGHT, ground, aerial)


def shadowing_draw(los, rx_height, rng: np.random.Generator, size=None):
    """Zero-mean log-normal shadowing in dB with the branch's sigma."""
    sigma = shadowing_sigma(los, rx_height)
    shape = np.shape(sigma) if size is None else size
    return sigma * rng.standard_normal(shape)


def entry_loss(indoor, depth_m, carrier):
    """Low-loss O2I model: glass/concrete wall loss plus 0.5 dB per metre indoors."""
    fc = carrier / 1e9
    l_glass = 2.0 + 0.2 * fc
    l_concrete = 5.0 + 4.0 * fc
    wall = 5.0 - 10.0 * np.log10(0.3 * 10 ** (-l_glass / 10.0) + 0.7 * 10 ** (-l_concrete / 10.0))
    return np.where(np.asarray(indoor, dtype=bool), wall + 0.5 * np.asarray(depth_m, dtype=float), 0.0)


def rician_k_db(los, rx_height):
    """Rician K in dB; NLoS links are pure scattering (K = -inf)."""
    los = np.asarray(los, dtype=bool)
    k = np.where(np.asarray(rx_height) <= GROUND_MAX_HEIGHT, K_GROUND_LOS_DB, K_AERIAL_LOS_DB)
    return np.where(los, k, -np.inf)


def ntn_shadowing_sigma(elevation_deg, clutter: str = "rural"):
    table = _NTN_SIGMA_LOS[clutter]
    return float(np.interp(elevation_deg, _NTN_ELEVATIONS, table))


def ntn_large_scale(sat_geom, user_xyz, carrier, rng=None, clutter: str = "rural", shadow_z=None):
    """Satellite-to-user loss: FSPL over the true range + shadowing + atmospheric loss.

    ``user_xyz`` is in metres in the service-area frame. Pass either ``rng`` or
    pre-drawn standard normals ``shadow_z``; with neither, shadowing is omitted.
    """
    user_xyz = np.atleast_2d(np.asarray(user_xyz, dtype=float))
    rng_m = np.linalg.norm(sat_geom.position_m - user_xyz, axis=-1)
    loss = fspl(rng_m, carrier) + NTN_ATMOSPHERIC_LOSS
    if shadow_z is None and rng is not None:
        shadow_z = rng.standard_normal(len(user_xyz))
    if shadow_z is not None:
        loss = loss + ntn_shadowing_sigma(sat_geom.elevation_deg, clutter) * np.asarray(shadow_z)
    return loss


@dataclass(eq=False)
class LinkState:
    tx_id: int
    rx_id: int
    d2d: float
    d3d: float
    los: bool
    pathloss: float
    shadowing: float
    entry_loss: float
    k_factor: float
    channel: np.ndarray | None = None

    @property
    def total_loss(self) -> float:
        return self.pathloss + self.shadowing + self.entry_loss


def synthesize_channels(gain_lin, steering, k_db, rng: np.random.Generator, polarizations: int = 2,
                        dtype=np.complex128):
    """Batch Rician synthesis for single-antenna users.

    ``gain_lin`` (...,) is the linear large-scale gain per port, ``steering``
    (..., E) the unit-modulus array phases of one polarization. Returns
    (..., polarizations * E) channels. The LoS ray reaches both slant
    polarizations with one common random phase (a single-polarized user antenna
    projects equally onto +45 and -45 degrees); scattering is drawn per port.
    """
    gain_lin = np.asarray(gain_lin, dtype=float)
    steering = np.asarray(steering)
    k = 10.0 ** (np.asarray(k_db, dtype=float) / 10.0)
    k = np.broadcast_to(k, gain_lin.shape)
    with np.errstate(invalid="ignore"):
        los_amp = np.sqrt(np.where(np.isinf(k), 1.0, k / (k + 1.0)))
    nlos_amp = np.sqrt(np.where(np.isinf(k), 0.0, 1.0 / (k + 1.0)))
    shape = gain_lin.shape
    n_el = steering.shape[-1]
    psi = rng.random(shape) * 2.0 * np.pi
    w = rng.standard_normal(shape + (polarizations * n_el, 2))
    h = (w[..., 0] + 1j * w[..., 1]).astype(dtype, copy=False)
    h *= np.sqrt(0.5)
    h *= nlos_amp[..., None]
    los = (los_amp * np.exp(1j * psi))[..., None] * steering
    for p in range(polarizations):
        h[..., p * n_el:(p + 1) * n_el] += los
    h *= np.sqrt(gain_lin)[..., None]
    return h


def synthesize_channel(link_gain_lin: float, a_tx, k_db: float, rng: np.random.Generator, a_rx=None):
    """Single-link channel, shape (rx_ports, tx_ports).

    ``a_tx``/``a_rx`` are unit-modulus steering vectors; the LoS term is the
    outer product a_rx a_tx^H with a random phase, the scattered term i.i.d.
    CN(0, 1).
    """
    a_tx = np.asarray(a_tx, dtype=complex).ravel()
    a_rx = np.ones(1, dtype=complex) if a_rx is None else np.asarray(a_rx, dtype=complex).ravel()
    k = 10.0 ** (k_db / 10.0)
    los_amp = 1.0 if np.isinf(k) else np.sqrt(k / (k + 1.0))
    nlos_amp = 0.0 if np.isinf(k) else np.sqrt(1.0 / (k + 1.0))
    psi = rng.random() * 2.0 * np.pi
    shape = (len(a_rx), len(a_tx))
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(0.5)
    los = np.outer(a_rx, a_tx.conj()) * np.exp(1j * psi)
    return np.sqrt(link_gain_lin) * (los_amp * los + nlos_amp * w)
