"""Experiment description, flat-file configuration and per-drop random streams.

Config files are flat ``key = value`` lines in TOML syntax::

    # dedicated aerial cells, 1 km apart
    isd_a = 1000
    precoder = "EDA"
    direction = "UL"

Satellite keys (``elevation_deg``, ``frf``, ``dl_bw``, ...) switch on the
non-terrestrial part; ``ntn = true`` does the same with all defaults.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRECODERS = ("ZF", "EDA")
DIRECTIONS = ("UL", "DL")
FRF_BANDWIDTH = {1: 30e6, 3: 10e6}

# purpose tags for the per-drop random substreams
STREAM_TAGS = {"users": 1, "los": 2, "shadowing": 3, "channel": 4, "schedule": 5, "ntn": 6}


class ScenarioError(ValueError):
    pass


class ConfigParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _parse_frf(value) -> int:
    if isinstance(value, str):
        v = value.strip().upper()
        if v.startswith("FRF"):
            v = v[3:]
        try:
            value = int(v)
        except ValueError:
            raise ValidationError("frf", f"expected FRF1 or FRF3, got {value!r}") from None
    if value not in FRF_BANDWIDTH:
        raise ValidationError("frf", f"expected FRF1 or FRF3, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class NtnConfig:
    orbit_altitude: float = 600.0  # km
    n_beams: int = 7
    elevation_deg: float = 90.0
    frf: int = 1
    dl_bw: float | None = None
    ul_bw: float | None = None
    carrier: float = 2e9
    eirp_density: float = 34.0  # dBW/MHz per beam
    g_over_t: float = 1.1  # dB/K
    beam_peak_gain: float = 30.0
    beam_hpbw_deg: float = 4.41
    district_area_km2: float = 10.8

    def __post_init__(self):
        object.__setattr__(self, "frf", _parse_frf(self.frf))
        default_bw = FRF_BANDWIDTH[self.frf]
        if self.dl_bw is None:
            object.__setattr__(self, "dl_bw", default_bw)
        if self.ul_bw is None:
            object.__setattr__(self, "ul_bw", default_bw)
        for key in ("dl_bw", "ul_bw"):
            if not np.isclose(getattr(self, key), default_bw):
                raise ValidationError(key, f"FRF{self.frf} requires {default_bw:g} Hz, got {getattr(self, key):g}")
        if not 0.0 < self.elevation_deg <= 90.0:
            raise ValidationError("elevation_deg", f"must lie in (0, 90], got {self.elevation_deg}")
        if self.n_beams != 7:
            raise ValidationError("n_beams", "only the 7-beam lattice is modelled")
        for key in ("orbit_altitude", "carrier", "beam_hpbw_deg", "district_area_km2"):
            if getattr(self, key) <= 0:
                raise ValidationError(key, "must be positive")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one simulated configuration.

    ``isd_a=None`` means no aerial operator: UAVs are then served by the
    terrestrial cells.
    """

    isd_t: float = 500.0
    isd_a: float | None = None
    precoder: str = "ZF"
    direction: str = "UL"
    carrier_tn: float = 3.5e9
    bandwidth_tn: float = 100e6
    gue_per_cell: int = 15
    uav_per_tn_cell: float = 1.0
    evtol_per_tn_cell: float = 0.0
    ntn: NtnConfig | None = None
    n_drops: int = 50
    seed: int = 0
    rings: int = 2
    p_tx_t_dbm: float = 46.0
    p_tx_a_dbm: float = 46.0
    tilt_t_deg: float = 12.0
    tilt_a_deg: float = -45.0
    bs_noise_figure: float = 7.0
    ue_noise_figure: float = 9.0
    dl_bw_gue: float = 50e6
    dl_bw_aerial: float = 50e6
    ul_bw_gue: float = 10e6
    ul_bw_aerial: float = 50e6
    k_ground_los_db: float = 9.0
    k_aerial_los_db: float = 15.0
    eda_victim_cap: int | None = None
    offload_all: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.isd_t <= 0:
            raise ValidationError("isd_t", "must be positive")
        if self.isd_a is not None and self.isd_a <= 0:
            raise ValidationError("isd_a", "must be positive")
        if self.precoder not in PRECODERS:
            raise ValidationError("precoder", f"expected one of {PRECODERS}, got {self.precoder!r}")
        if self.direction not in DIRECTIONS:
            raise ValidationError("direction", f"expected one of {DIRECTIONS}, got {self.direction!r}")
        for key in ("carrier_tn", "bandwidth_tn"):
            if getattr(self, key) <= 0:
                raise ValidationError(key, "must be positive")
        if self.n_drops < 1:
            raise ValidationError("n_drops", "must be >= 1")
        if self.rings < 0:
            raise ValidationError("rings", "must be >= 0")
        for key in ("gue_per_cell", "uav_per_tn_cell", "evtol_per_tn_cell"):
            if getattr(self, key) < 0:
                raise ValidationError(key, "must be >= 0")
        for key in ("dl_bw_gue", "dl_bw_aerial", "ul_bw_gue", "ul_bw_aerial"):
            if not 0 < getattr(self, key) <= self.bandwidth_tn:
                raise ValidationError(key, "grant must be positive and fit in the band")
        if self.ntn is not None and self.direction != "DL":
            raise ValidationError("direction", "satellite offloading is modelled for the downlink only")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed", "must be a 64-bit unsigned integer")

    @property
    def scenario_id(self) -> str:
        if self.name:
            return self.name
        parts = [f"T{self.isd_t:g}", "A-" if self.isd_a is None else f"A{self.isd_a:g}",
                 self.precoder, self.direction]
        if self.evtol_per_tn_cell:
            parts.append(f"ev{self.evtol_per_tn_cell:g}")
        if self.ntn is not None:
            parts += [f"el{self.ntn.elevation_deg:g}", f"FRF{self.ntn.frf}"]
            if self.offload_all:
                parts.append("all")
        return "_".join(parts)

    def with_(self, **changes) -> Scenario:
        return replace(self, **changes)


_SCENARIO_KEYS = {f.name for f in fields(Scenario)} - {"ntn"}
_NTN_KEYS = {f.name for f in fields(NtnConfig)}
_INT_KEYS = {"gue_per_cell", "n_drops", "seed", "rings", "n_beams", "eda_victim_cap"}


def scenario_from_mapping(data: dict) -> Scenario:
    """Build a validated Scenario from flat keys; omitted keys take defaults."""
    scen_kw, ntn_kw = {}, {}
    want_ntn = False
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigParseError(f"{key}: nested tables are not supported (flat keys only)")
        if key == "ntn":
            if not isinstance(value, bool):
                raise ValidationError("ntn", "expected true or false")
            want_ntn = value
            continue
        if key in _INT_KEYS:
            if isinstance(value, float) and value.is_integer():
                value = int(value)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValidationError(key, f"expected an integer, got {value!r}")
        if key in _NTN_KEYS:
            ntn_kw[key] = value
        elif key in _SCENARIO_KEYS:
            scen_kw[key] = value
        else:
            raise ValidationError(key, "unknown configuration key")
    if isinstance(scen_kw.get("isd_a"), str) and scen_kw["isd_a"].lower() in ("inf", "none", ""):
        scen_kw["isd_a"] = None
    for key, value in scen_kw.items():
        if key in ("precoder", "direction", "name"):
            if not isinstance(value, str):
                raise ValidationError(key, f"expected a string, got {value!r}")
        elif key == "offload_all":
            if not isinstance(value, bool):
                raise ValidationError(key, "expected true or false")
        elif value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ValidationError(key, f"expected a number, got {value!r}")
    if "precoder" in scen_kw:
        scen_kw["precoder"] = scen_kw["precoder"].upper()
    if "direction" in scen_kw:
        scen_kw["direction"] = scen_kw["direction"].upper()
    ntn = NtnConfig(**ntn_kw) if (ntn_kw or want_ntn) else None
    if ntn is not None and "direction" not in scen_kw:
        scen_kw["direction"] = "DL"
    return Scenario(ntn=ntn, **scen_kw)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    return scenario_from_mapping(data)


def substream(seed: int, drop: int, purpose: str) -> np.random.Generator:
    """Generator keyed by (seed, drop, purpose); independent of execution order."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(drop, STREAM_TAGS[purpose]))
    return np.random.Generator(np.random.PCG64(ss))
