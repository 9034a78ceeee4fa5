"""Hexagonal site layouts, user drops, wrap-around distances and LEO viewing geometry.

Sites sit on a hexagonal lattice whose nearest neighbours lie at 30, 90, 150, ...
degrees, so each site hexagon has a vertex at azimuth 0 and the three sector
cells (boresights 0, 120, 240 degrees) are the rhombi between alternate vertices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EARTH_RADIUS_KM = 6371.0
BS_HEIGHT = 25.0
SECTOR_AZIMUTHS = (0.0, 120.0, 240.0)
MIN_GUE_DISTANCE = 35.0

GUE_OUTDOOR = "GUE_outdoor"
GUE_INDOOR = "GUE_indoor"
UAV = "UAV"
EVTOL = "eVTOL"
USER_CLASSES = (GUE_OUTDOOR, GUE_INDOOR, UAV, EVTOL)

CLASS_HEIGHT = {GUE_OUTDOOR: 1.5, UAV: 150.0, EVTOL: 1500.0}
FLOOR_HEIGHT = 3.0
INDOOR_FRACTION = 0.8
MAX_INDOOR_DEPTH = 25.0


def _lattice_vectors(isd: float) -> np.ndarray:
    a1 = isd * np.array([np.cos(np.pi / 6), np.sin(np.pi / 6)])
    a2 = isd * np.array([0.0, 1.0])
    return np.stack([a1, a2])


def _rotation(deg: float) -> np.ndarray:
    c, s = np.cos(np.radians(deg)), np.sin(np.radians(deg))
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Site:
    position: tuple[float, float]
    height: float = BS_HEIGHT
    sectors: tuple[float, float, float] = SECTOR_AZIMUTHS


@dataclass(frozen=True, eq=False)
class HexLayout:
    """Sites of one operator plus the torus used for wrap-around.

    ``wrap_shifts`` holds the 7 image offsets (the zero shift first). Cells are
    numbered ``site * 3 + sector``.
    """

    isd: float
    rings: int
    site_xy: np.ndarray
    wrap_shifts: np.ndarray
    height: float = BS_HEIGHT

    @property
    def sites(self) -> list[Site]:
        return [Site((float(x), float(y)), self.height) for x, y in self.site_xy]

    @property
    def n_sites(self) -> int:
        return len(self.site_xy)

    @property
    def n_cells(self) -> int:
        return 3 * self.n_sites

    @property
    def cell_site(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_sites), 3)

    @property
    def cell_azimuth(self) -> np.ndarray:
        return np.tile(np.array(SECTOR_AZIMUTHS), self.n_sites)

    @property
    def cell_area(self) -> float:
        # a third of the site hexagon, (sqrt(3)/2) * isd**2
        return np.sqrt(3.0) / 6.0 * self.isd**2


def hex_site_count(rings: int) -> int:
    return 1 + 3 * rings * (rings + 1)


def wrap_shifts(isd: float, rings: int) -> np.ndarray:
    """Offsets of the six neighbouring copies of a ``rings``-ring cluster (plus zero)."""
    a = _lattice_vectors(isd)
    t1 = (rings + 1) * a[0] + rings * a[1]
    shifts = [np.zeros(2)] + [_rotation(60.0 * k) @ t1 for k in range(6)]
    return np.array(shifts)


def build_hex_layout(isd: float, rings: int) -> HexLayout:
    if isd <= 0:
        raise ValueError(f"isd must be positive, got {isd}")
    if rings < 0:
        raise ValueError(f"rings must be >= 0, got {rings}")
    a = _lattice_vectors(isd)
    pts = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if max(abs(q), abs(r), abs(q + r)) <= rings:
                pts.append(q * a[0] + r * a[1])
    # ring order: origin first, then by distance and angle
    pts = np.array(pts)
    key = np.lexsort((np.round(np.arctan2(pts[:, 1], pts[:, 0]), 9), np.round(np.hypot(pts[:, 0], pts[:, 1]), 6)))
    return HexLayout(isd=float(isd), rings=rings, site_xy=pts[key], wrap_shifts=wrap_shifts(isd, rings))


def wrap_into_torus(points: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Map points to their image closest to the origin (fundamental domain)."""
    points = np.asarray(points, dtype=float)
    out = points.copy()
    # the hex torus domain is reached in at most a couple of folds
    for _ in range(4):
        cand = out[..., None, :] - shifts
        idx = np.argmin(np.einsum("...ij,...ij->...i", cand, cand), axis=-1)
        new = np.take_along_axis(cand, idx[..., None, None], axis=-2)[..., 0, :]
        if np.allclose(new, out):
            break
        out = new
    return out


def build_offset_layout(isd: float, reference: HexLayout) -> HexLayout:
    """Layout of a second operator sharing ``reference``'s wrap-around torus.

    The lattice is co-centred with the reference but shifted by half a cell
    radius along x; only lattice points inside the torus domain are kept, so
    site density follows ``isd`` even when the lattices are incommensurate.
    """
    if isd <= 0:
        raise ValueError(f"isd must be positive, got {isd}")
    shifts = reference.wrap_shifts
    offset = np.array([0.5 * isd / np.sqrt(3.0), 0.0])
    extent = np.max(np.hypot(shifts[:, 0], shifts[:, 1]))
    n = int(np.ceil(2 * extent / isd)) + 2
    a = _lattice_vectors(isd)
    q, r = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    pts = q.reshape(-1, 1) * a[0] + r.reshape(-1, 1) * a[1] + offset
    d_self = np.einsum("ij,ij->i", pts, pts)
    cand = pts[:, None, :] - shifts[1:]
    d_img = np.einsum("ijk,ijk->ij", cand, cand)
    inside = np.all(d_self[:, None] < d_img - 1e-6, axis=1)
    pts = pts[inside]
    key = np.lexsort((np.round(np.arctan2(pts[:, 1], pts[:, 0]), 9), np.round(np.hypot(pts[:, 0], pts[:, 1]), 6)))
    return HexLayout(isd=float(isd), rings=reference.rings, site_xy=pts[key], wrap_shifts=shifts)


def wrap_displacement(user_xy: np.ndarray, site_xy: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Shortest displacement site -> user over the 7 torus images, shape (U, S, 2)."""
    d = user_xy[:, None, None, :] - site_xy[None, :, None, :] - shifts[None, None, :, :]
    idx = np.argmin(np.einsum("usik,usik->usi", d, d), axis=2)
    return np.take_along_axis(d, idx[:, :, None, None], axis=2)[:, :, 0, :]


def wrap_distance(a, b, layout: HexLayout) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a - b - layout.wrap_shifts
    return float(np.min(np.hypot(d[:, 0], d[:, 1])))


def sector_vertices(layout: HexLayout, cell: int) -> np.ndarray:
    """Rhombus corners (origin-relative edge vectors) of one sector cell."""
    az = layout.cell_azimuth[cell]
    radius = layout.isd / np.sqrt(3.0)
    e1 = radius * np.array([np.cos(np.radians(az - 60)), np.sin(np.radians(az - 60))])
    e2 = radius * np.array([np.cos(np.radians(az + 60)), np.sin(np.radians(az + 60))])
    return np.stack([e1, e2])


def in_cell(layout: HexLayout, cell: int, xy) -> bool:
    e = sector_vertices(layout, cell)
    rel = np.asarray(xy, dtype=float) - layout.site_xy[layout.cell_site[cell]]
    s, t = np.linalg.solve(e.T, rel)
    tol = 1e-9
    return bool(-tol <= s <= 1 + tol and -tol <= t <= 1 + tol)


def _uniform_in_cells(layout: HexLayout, cells: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    az = np.radians(layout.cell_azimuth[cells])
    radius = layout.isd / np.sqrt(3.0)
    e1 = radius * np.stack([np.cos(az - np.pi / 3), np.sin(az - np.pi / 3)], axis=-1)
    e2 = radius * np.stack([np.cos(az + np.pi / 3), np.sin(az + np.pi / 3)], axis=-1)
    st = rng.random((len(cells), 2))
    return layout.site_xy[layout.cell_site[cells]] + st[:, :1] * e1 + st[:, 1:] * e2


@dataclass(frozen=True)
class UserTerminal:
    cls: str
    position: tuple[float, float, float]
    indoor_floor: int | None = None
    operator: str = "MNO_T"
    antenna_gain: float = 0.0
    noise_figure: float = 9.0


@dataclass(eq=False)
class Users:
    """Struct-of-arrays view of one drop's user population."""

    xyz: np.ndarray
    cls: np.ndarray
    home_cell: np.ndarray
    floor: np.ndarray
    n_floors: np.ndarray
    indoor_depth: np.ndarray
    operator: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.operator is None:
            self.operator = np.full(len(self.cls), "MNO_T", dtype=object)

    def __len__(self) -> int:
        return len(self.cls)

    def __getitem__(self, i: int) -> UserTerminal:
        floor = int(self.floor[i]) if self.floor[i] > 0 else None
        return UserTerminal(
            cls=str(self.cls[i]),
            position=tuple(float(v) for v in self.xyz[i]),
            indoor_floor=floor,
            operator=str(self.operator[i]),
        )

    @property
    def indoor(self) -> np.ndarray:
        return self.cls == GUE_INDOOR

    @property
    def height(self) -> np.ndarray:
        return self.xyz[:, 2]


def aerial_count(density_per_cell: float, n_cells: int) -> int:
    """Number of aerial users for a density given per terrestrial cell."""
    return int(np.floor(density_per_cell * n_cells + 0.5))


def drop_users(layout: HexLayout, gue_per_cell: int, uav_per_cell: float, evtol_per_cell: float,
               rng: np.random.Generator) -> Users:
    """Drop GUEs per terrestrial cell and aerial users uniformly over the service area.

    GUEs keep at least ``MIN_GUE_DISTANCE`` horizontal separation from their
    site. Aerial counts are ``round(density * n_cells)`` so that the density per
    terrestrial cell area is fixed whatever the aerial operator's layout.
    """
    n_cells = layout.n_cells
    gue_cells = np.repeat(np.arange(n_cells), gue_per_cell)
    gue_xy = _uniform_in_cells(layout, gue_cells, rng)
    for _ in range(100):
        rel = gue_xy - layout.site_xy[layout.cell_site[gue_cells]]
        close = np.hypot(rel[:, 0], rel[:, 1]) < MIN_GUE_DISTANCE
        if not close.any():
            break
        gue_xy[close] = _uniform_in_cells(layout, gue_cells[close], rng)

    n_gue = len(gue_cells)
    indoor = rng.random(n_gue) < INDOOR_FRACTION
    n_floors = rng.integers(4, 9, size=n_gue)
    floor = 1 + np.floor(rng.random(n_gue) * n_floors).astype(int)
    depth = rng.random(n_gue) * MAX_INDOOR_DEPTH
    n_floors = np.where(indoor, n_floors, 0)
    floor = np.where(indoor, floor, 0)
    depth = np.where(indoor, depth, 0.0)
    gue_h = np.where(indoor, FLOOR_HEIGHT * (floor - 1) + 1.5, CLASS_HEIGHT[GUE_OUTDOOR])
    gue_cls = np.where(indoor, GUE_INDOOR, GUE_OUTDOOR).astype(object)

    parts_xy = [np.column_stack([gue_xy, gue_h])]
    parts_cls = [gue_cls]
    parts_cell = [gue_cells]
    for cls, density in ((UAV, uav_per_cell), (EVTOL, evtol_per_cell)):
        n = aerial_count(density, n_cells)
        cells = rng.integers(0, n_cells, size=n)
        xy = _uniform_in_cells(layout, cells, rng)
        parts_xy.append(np.column_stack([xy, np.full(n, CLASS_HEIGHT[cls])]))
        parts_cls.append(np.full(n, cls, dtype=object))
        parts_cell.append(cells)

    n_air = sum(len(c) for c in parts_cls[1:])
    return Users(
        xyz=np.concatenate(parts_xy),
        cls=np.concatenate(parts_cls),
        home_cell=np.concatenate(parts_cell),
        floor=np.concatenate([floor, np.zeros(n_air, dtype=int)]),
        n_floors=np.concatenate([n_floors, np.zeros(n_air, dtype=int)]),
        indoor_depth=np.concatenate([depth, np.zeros(n_air)]),
    )


@dataclass(frozen=True)
class SatelliteGeometry:
    elevation_deg: float
    slant_range: float  # km
    satellite_position: tuple[float, float, float]  # km, local ENU at the service-area centre
    orbit_altitude: float = 600.0

    @property
    def position_m(self) -> np.ndarray:
        return 1e3 * np.asarray(self.satellite_position)

    @property
    def nadir(self) -> np.ndarray:
        """Unit vector from the satellite towards the Earth centre."""
        centre = np.array([0.0, 0.0, -EARTH_RADIUS_KM])
        v = centre - np.asarray(self.satellite_position)
        return v / np.linalg.norm(v)


def slant_range(elevation_deg, orbit_km: float, earth_radius_km: float = EARTH_RADIUS_KM):
    s = np.sin(np.radians(elevation_deg))
    re = earth_radius_km
    return np.sqrt(re**2 * s**2 + 2 * re * orbit_km + orbit_km**2) - re * s


def satellite_geometry(elevation_deg: float, orbit_km: float = 600.0, azimuth_deg: float = 180.0) -> SatelliteGeometry:
    """Place the satellite at ``elevation_deg`` as seen from the service-area centre.

    ``azimuth_deg`` is the direction of the satellite from the centre; the
    default puts it towards -x, so the service area lies off nadir towards +x.
    """
    if not 0.0 < elevation_deg <= 90.0:
        raise ValueError(f"elevation must be in (0, 90], got {elevation_deg}")
    d = float(slant_range(elevation_deg, orbit_km))
    el, az = np.radians(elevation_deg), np.radians(azimuth_deg)
    pos = d * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    if elevation_deg == 90.0:
        pos = np.array([0.0, 0.0, d])
    return SatelliteGeometry(float(elevation_deg), d, tuple(float(v) for v in pos), float(orbit_km))
