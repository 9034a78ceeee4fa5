"""Antenna patterns: sector element, tilted 8x8 X-pol panel, satellite circular aperture."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import j1

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ElementPattern:
    hpbw_h: float = 65.0
    hpbw_v: float = 65.0
    max_gain: float = 8.0
    front_back: float = 30.0
    sla_v: float = 30.0


def element_gain(pattern: ElementPattern, azimuth_deg, zenith_deg):
    """Parabolic sector pattern in dBi; angles are in the element's local frame.

    Boresight is azimuth 0, zenith 90.
    """
    phi = np.asarray(azimuth_deg, dtype=float)
    phi = (phi + 180.0) % 360.0 - 180.0
    theta = np.asarray(zenith_deg, dtype=float)
    a_h = -np.minimum(12.0 * (phi / pattern.hpbw_h) ** 2, pattern.front_back)
    a_v = -np.minimum(12.0 * ((theta - 90.0) / pattern.hpbw_v) ** 2, pattern.sla_v)
    return pattern.max_gain - np.minimum(-(a_h + a_v), pattern.front_back)


@dataclass(frozen=True)
class ArrayConfig:
    n_rows: int = 8
    n_cols: int = 8
    polarizations: int = 2
    element_spacing: float = 0.5  # wavelengths
    mech_tilt_deg: float = 12.0  # positive = downtilt
    element: ElementPattern = field(default_factory=ElementPattern)

    @property
    def ports(self) -> int:
        return self.n_rows * self.n_cols * self.polarizations

    @property
    def elements(self) -> int:
        return self.n_rows * self.n_cols


def panel_axes(azimuth_deg, tilt_deg) -> np.ndarray:
    """Rows are the panel's local x (boresight), y (horizontal) and z axes.

    Works elementwise on arrays of azimuths/tilts, returning shape (..., 3, 3).
    """
    a = np.radians(np.asarray(azimuth_deg, dtype=float))
    e = -np.radians(np.asarray(tilt_deg, dtype=float))
    a, e = np.broadcast_arrays(a, e)
    x = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1)
    y = np.stack([-np.sin(a), np.cos(a), np.zeros_like(a)], axis=-1)
    z = np.stack([-np.sin(e) * np.cos(a), -np.sin(e) * np.sin(a), np.cos(e)], axis=-1)
    return np.stack([x, y, z], axis=-2)


def local_angles(direction, azimuth_deg=0.0, tilt_deg=0.0):
    """Local (azimuth, zenith) in degrees and the local unit vector of a global direction."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    axes = panel_axes(azimuth_deg, tilt_deg)
    loc = np.einsum("...ij,...j->...i", axes, d)
    az = np.degrees(np.arctan2(loc[..., 1], loc[..., 0]))
    zen = np.degrees(np.arccos(np.clip(loc[..., 2], -1.0, 1.0)))
    return az, zen, loc


def steering_phases(config: ArrayConfig, local_dir: np.ndarray) -> np.ndarray:
    """Unit-modulus UPA phase vector(s) for local unit direction(s), shape (..., n_rows*n_cols).

    Elements lie in the panel's y-z plane; columns along y, rows along z.
    """
    k_d = 2.0 * np.pi * config.element_spacing
    cols = np.arange(config.n_cols)
    rows = np.arange(config.n_rows)
    py = np.tile(cols, config.n_rows)
    pz = np.repeat(rows, config.n_cols)
    ly = np.asarray(local_dir)[..., 1:2]
    lz = np.asarray(local_dir)[..., 2:3]
    return np.exp(1j * k_d * (py * ly + pz * lz))


def array_response(config: ArrayConfig, direction, azimuth_deg: float = 0.0) -> np.ndarray:
    """Per-polarization response (64 entries) of a tilted panel towards a global direction.

    Each entry carries sqrt(linear element gain), so the squared norm is the sum
    of element gains in that direction.
    """
    az, zen, loc = local_angles(direction, azimuth_deg, config.mech_tilt_deg)
    g = 10.0 ** (element_gain(config.element, az, zen) / 10.0)
    return np.sqrt(g)[..., None] * steering_phases(config, loc)


def _first_3db_u() -> float:
    return brentq(lambda u: 4.0 * (j1(u) / u) ** 2 - 0.5, 0.5, 3.0, xtol=1e-14)


@dataclass(frozen=True)
class AperturePattern:
    peak_gain: float = 30.0
    hpbw: float = 4.41
    carrier: float = 2e9

    @cached_property
    def u_3db(self) -> float:
        return _first_3db_u()

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi * self.carrier / SPEED_OF_LIGHT

    @cached_property
    def aperture_radius(self) -> float:
        """Radius in metres that puts the -3 dB point at hpbw/2."""
        return self.u_3db / (self.wavenumber * np.sin(np.radians(self.hpbw / 2.0)))


def aperture_gain(pattern: AperturePattern, offset_angle_deg):
    """Circular-aperture gain in dBi at an angle from boresight."""
    theta = np.radians(np.abs(np.asarray(offset_angle_deg, dtype=float)))
    u = pattern.wavenumber * pattern.aperture_radius * np.sin(theta)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(u == 0.0, 1.0, 4.0 * (j1(u) / np.where(u == 0.0, 1.0, u)) ** 2)
    return pattern.peak_gain + 10.0 * np.log10(np.maximum(rel, 1e-30))
