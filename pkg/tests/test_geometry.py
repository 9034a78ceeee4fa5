import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from tn_ntn_sim import geometry as g


@pytest.mark.parametrize("rings,expected", [(0, 1), (1, 7), (2, 19), (3, 37), (4, 61), (5, 91)])
def test_site_count_matches_lattice_formula(rings, expected):
    lay = g.build_hex_layout(500.0, rings)
    assert lay.n_sites == expected == g.hex_site_count(rings)
    assert lay.n_cells == 3 * expected


def test_rings_zero_is_single_site_at_origin():
    lay = g.build_hex_layout(500.0, 0)
    np.testing.assert_allclose(lay.site_xy, [[0.0, 0.0]])


def test_first_ring_at_isd():
    lay = g.build_hex_layout(500.0, 1)
    d = np.hypot(*lay.site_xy[1:].T)
    np.testing.assert_allclose(d, 500.0, atol=1e-9)


def test_nearest_neighbour_spacing_is_isd():
    lay = g.build_hex_layout(750.0, 2)
    diff = lay.site_xy[:, None] - lay.site_xy[None]
    d = np.hypot(diff[..., 0], diff[..., 1])
    d[np.diag_indices_from(d)] = np.inf
    np.testing.assert_allclose(d.min(axis=1), 750.0, atol=1e-9)


def test_sector_azimuths_120_apart():
    lay = g.build_hex_layout(500.0, 1)
    az = lay.cell_azimuth.reshape(-1, 3)
    np.testing.assert_allclose(np.diff(az, axis=1), 120.0)


def _brute_wrap(a, b, lay):
    # independent: enumerate every image explicitly, one at a time
    best = math.inf
    for s in lay.wrap_shifts:
        best = min(best, math.dist(a, (b[0] + s[0], b[1] + s[1])))
    return best


def test_wrap_distance_trivial_cases():
    lay = g.build_hex_layout(500.0, 2)
    assert g.wrap_distance([10.0, 20.0], [10.0, 20.0], lay) == 0.0
    p = np.array([30.0, -40.0])
    assert g.wrap_distance(p, p + lay.wrap_shifts[3], lay) == pytest.approx(0.0, abs=1e-9)
    # near neighbours well inside the domain are unaffected by wrapping
    assert g.wrap_distance([0.0, 0.0], [300.0, 400.0], lay) == pytest.approx(500.0)


coord = st.floats(-1200.0, 1200.0, allow_nan=False)


@given(coord, coord, coord, coord)
def test_wrap_distance_matches_brute_force(ax, ay, bx, by):
    lay = g.build_hex_layout(500.0, 2)
    a, b = (ax, ay), (bx, by)
    d = g.wrap_distance(a, b, lay)
    assert d == pytest.approx(_brute_wrap(a, b, lay), abs=1e-9)
    assert d == pytest.approx(g.wrap_distance(b, a, lay), abs=1e-9)
    assert d <= math.dist(a, b) + 1e-9


def test_wrap_displacement_agrees_with_wrap_distance(rng):
    lay = g.build_hex_layout(500.0, 2)
    users = rng.uniform(-1000, 1000, size=(20, 2))
    disp = g.wrap_displacement(users, lay.site_xy, lay.wrap_shifts)
    for u in range(0, 20, 5):
        for s in range(0, 19, 4):
            assert np.hypot(*disp[u, s]) == pytest.approx(g.wrap_distance(users[u], lay.site_xy[s], lay))


@pytest.mark.parametrize("isd_a,sites", [(500.0, 19), (1000.0, 5), (1500.0, 2)])
def test_offset_layout_keeps_site_density(isd_a, sites):
    ref = g.build_hex_layout(500.0, 2)
    lay = g.build_offset_layout(isd_a, ref)
    assert lay.n_sites == sites
    # no site co-located with a terrestrial one
    diff = lay.site_xy[:, None] - ref.site_xy[None]
    assert np.hypot(diff[..., 0], diff[..., 1]).min() > 1.0


def test_uav_density_invariant_to_aerial_isd():
    ref = g.build_hex_layout(500.0, 2)
    # same torus area, so same number of UAVs; cells per UAV follow the aerial lattice
    per_cell = [57 / (3 * g.build_offset_layout(isd, ref).n_sites) for isd in (500.0, 1000.0, 1500.0)]
    assert per_cell[0] == pytest.approx(1.0)
    assert 3.0 <= per_cell[1] <= 5.0  # about 4 per aerial cell
    assert 7.0 <= per_cell[2] <= 11.0  # about 9 per aerial cell


def test_drop_counts_and_heights(rng):
    lay = g.build_hex_layout(500.0, 2)
    users = g.drop_users(lay, 15, 1.0, 0.5, rng)
    cls = users.cls
    gue = np.isin(cls, (g.GUE_INDOOR, g.GUE_OUTDOOR))
    assert gue.sum() == 855
    assert (cls == g.UAV).sum() == 57
    assert (cls == g.EVTOL).sum() == g.aerial_count(0.5, 57) == 29
    np.testing.assert_allclose(users.height[cls == g.GUE_OUTDOOR], 1.5)
    np.testing.assert_allclose(users.height[cls == g.UAV], 150.0)
    np.testing.assert_allclose(users.height[cls == g.EVTOL], 1500.0)
    ind = users.indoor
    assert np.all((users.n_floors[ind] >= 4) & (users.n_floors[ind] <= 8))
    assert np.all((users.floor[ind] >= 1) & (users.floor[ind] <= users.n_floors[ind]))
    np.testing.assert_allclose(users.height[ind], 3.0 * (users.floor[ind] - 1) + 1.5)
    assert np.all((users.indoor_depth[ind] >= 0) & (users.indoor_depth[ind] <= 25.0))


def test_indoor_fraction_about_80_percent():
    lay = g.build_hex_layout(500.0, 2)
    n = [g.drop_users(lay, 15, 0.0, 0.0, np.random.default_rng(k)).indoor.sum() for k in range(20)]
    # binomial(855, 0.8): mean 684, sd about 11.7
    assert abs(np.mean(n) - 684) < 3 * 11.7 / np.sqrt(20)


def test_zero_density_gives_no_users(rng):
    lay = g.build_hex_layout(500.0, 1)
    users = g.drop_users(lay, 0, 0.0, 0.0, rng)
    assert len(users) == 0


def test_gues_inside_their_cell(rng):
    lay = g.build_hex_layout(500.0, 2)
    users = g.drop_users(lay, 15, 0.0, 0.0, rng)
    for i in range(0, len(users), 7):
        assert g.in_cell(lay, users.home_cell[i], users.xyz[i, :2])
    rel = users.xyz[:, :2] - lay.site_xy[lay.cell_site[users.home_cell]]
    assert np.hypot(rel[:, 0], rel[:, 1]).min() >= g.MIN_GUE_DISTANCE


def _slant_oracle(el_deg, h, re=6371.0):
    # law of cosines in the Earth-centre / user / satellite triangle, solved numerically
    ang = math.radians(90.0 + el_deg)
    return brentq(lambda d: d * d + re * re - 2 * d * re * math.cos(ang) - (re + h) ** 2, 0.0, 10 * (re + h))


@pytest.mark.parametrize("el", [90.0, 87.0, 60.0, 30.0, 10.0])
def test_slant_range_law_of_cosines(el):
    assert g.slant_range(el, 600.0) == pytest.approx(_slant_oracle(el, 600.0), rel=1e-10)


def test_slant_range_zenith_exact():
    assert g.slant_range(90.0, 600.0) == 600.0
    sat = g.satellite_geometry(90.0)
    assert sat.slant_range == 600.0
    np.testing.assert_allclose(sat.satellite_position, (0.0, 0.0, 600.0))


@given(st.floats(0.5, 89.0), st.floats(0.01, 0.99))
def test_slant_range_strictly_decreasing(el, frac):
    hi = el + frac
    assert g.slant_range(el, 600.0) > g.slant_range(hi, 600.0) >= 600.0


def test_satellite_geometry_elevation_and_altitude():
    sat = g.satellite_geometry(87.0)
    p = np.asarray(sat.satellite_position)
    assert math.degrees(math.asin(p[2] / np.linalg.norm(p))) == pytest.approx(87.0)
    alt = np.linalg.norm(p - [0.0, 0.0, -g.EARTH_RADIUS_KM]) - g.EARTH_RADIUS_KM
    assert alt == pytest.approx(600.0, abs=1e-6)
    with pytest.raises(ValueError):
        g.satellite_geometry(0.0)
