import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfc

from nldiff import pde
from nldiff.geometry import DomainGeometry, SinusoidGraph
from nldiff.nonlinearity import heat, ramp, sine

HALF_LINE = DomainGeometry.half_space([1.0])
HALF_PLANE = DomainGeometry.half_space([0.0, 1.0])


def exact_ibvp(x, t):
    return erfc(np.maximum(x, 0.0) / (2 * math.sqrt(t)))


def test_grid_validation():
    with pytest.raises(ValueError):
        pde.Grid([0, 0], [1], [5, 5])
    with pytest.raises(ValueError):
        pde.Grid([0], [1], [2])
    g = pde.Grid([0, 0], [1, 2], [11, 21])
    assert g.h == pytest.approx((0.1, 0.1))
    assert g.points().shape == (11, 21, 2)
    assert g.node_weights().sum() == pytest.approx(2.0)


def test_mask_layers():
    g = pde.Grid([-0.5], [1.0], [11], HALF_LINE)
    # node at 0 lies on the boundary, node at -0.1 is exterior
    assert g.mask[5] == pde.BOUNDARY
    assert g.mask[4] == pde.EXTERIOR
    assert np.all(g.mask[6:] == pde.INTERIOR)


def test_resolution_rule():
    g = pde.Grid([0.0], [1.0], [11])
    with pytest.raises(pde.ResolutionError):
        pde.solve(heat(), HALF_LINE, g, pde.IBVP, [1e-3])


def test_ghost_needs_ibvp():
    g = pde.Grid([0.0], [1.0], [11], HALF_LINE)
    with pytest.raises(ValueError):
        pde.DiffusionOperator(g, pde.CAUCHY, closure="ghost")


def test_schedule_lands_on_outputs():
    out = [1e-3, 4e-3, 1.6e-2]
    steps = pde.time_schedule(out, ratio=1.1)
    t = np.cumsum(steps)
    for target in out:
        assert np.min(np.abs(t - target)) <= 1e-15
    assert steps[0] == pytest.approx(out[0] / 200)
    assert np.all(steps > 0)


def test_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        pde.time_schedule([2e-3, 1e-3])
    with pytest.raises(ValueError):
        pde.time_schedule([1e-3], ratio=1.0)


def test_ibvp_1d_against_erfc():
    g = pde.Grid([0.0], [1.0], [801])
    f = pde.solve(heat(), HALF_LINE, g, pde.IBVP, [0.01], ratio=1.00125, dt0=1e-6)
    x = g.axes()[0]
    assert np.max(np.abs(f.values[0] - exact_ibvp(x, 0.01))) <= 1e-4


def test_cauchy_1d_against_erfc():
    # even node count puts the jump at a cell face
    g = pde.Grid([-1.0], [2.0], [800])
    f = pde.solve(heat(), HALF_LINE, g, pde.CAUCHY, [0.01], ratio=1.00125, dt0=1e-6)
    x = g.axes()[0]
    assert np.max(np.abs(f.values[0] - 0.5 * erfc(x / (2 * math.sqrt(0.01))))) <= 1e-4


def test_equilibrium_is_fixed_point():
    g = pde.Grid([0.0, 0.0], [1.0, 1.0], [17, 17], HALF_PLANE)
    state = pde.initial_state(g, pde.IBVP)
    ones = pde.State(0.0, np.ones(g.n), state.operator)
    nxt = pde.step(ramp(), ones, 1e-3)
    assert np.max(np.abs(nxt.u - 1.0)) <= 1e-14


def test_half_plane_2d_against_erfc():
    h = 1 / 512
    g = pde.Grid([0.0, 0.0], [4 * h, 0.5], [5, 257])
    f = pde.solve(heat(), HALF_PLANE, g, pde.IBVP, [1e-3], ratio=1.003, dt0=1e-7)
    exact = exact_ibvp(f.grid.distance, 1e-3)
    assert np.max(np.abs(f.values[0] - exact)) <= 5e-4


def test_tilted_half_plane_ghost_closure():
    dom = DomainGeometry.half_space([0.6, 0.8])
    g = pde.Grid([-0.5, -0.5], [1.0, 1.0], [65, 65])
    f = pde.solve(heat(), dom, g, pde.IBVP, [1e-2], closure="ghost", ratio=1.05, dt0=1e-5)
    pts = f.grid.points()
    probe = (np.abs(pts[..., 0]) < 0.2) & (np.abs(pts[..., 1]) < 0.2) & (f.grid.mask == pde.INTERIOR)
    err = np.abs(f.values[0] - exact_ibvp(f.grid.distance, 1e-2))[probe]
    assert err.max() <= 5e-3


@pytest.fixture(scope="module")
def sinusoid_field():
    dom = DomainGeometry.graph_domain(SinusoidGraph(0.3))
    g = pde.Grid([-math.pi / 2, -0.4], [math.pi, 1.4], [97, 57])
    return pde.solve(sine(0.1), dom, g, pde.IBVP, [0.02, 0.05], closure="ghost", ratio=1.1, dt0=1e-4)


def test_decreasing_in_vertical_direction(sinusoid_field):
    f = sinusoid_field
    inside = f.grid.mask == pde.INTERIOR
    pair = inside[:, 1:] & inside[:, :-1]
    for u in f.values:
        du = np.diff(u, axis=1)
        assert np.all(du[pair] < 0)


def test_time_monotone_and_bounds(sinusoid_field):
    f = sinusoid_field
    assert np.all(f.values[1] >= f.values[0] - 1e-12)
    inside = f.grid.mask == pde.INTERIOR
    for u in f.values:
        assert np.all((u >= 0) & (u <= 1))
        assert np.all(u[inside] < 1)
    # strictly positive wherever the value is representable
    near = inside & (f.grid.distance < 6 * math.sqrt(0.02))
    assert np.all(f.values[0][near] > 0)
    assert np.all(f.values[0][~inside] == 1.0)


def test_ordering_identical():
    g = pde.Grid([0.0], [1.0], [101])
    u = pde.solve(heat(), HALF_LINE, g, pde.IBVP, [0.01, 0.02])
    rep = pde.ordering_check(u, u)
    assert rep.max_violation == 0.0 and rep.passed


def test_ordering_cauchy_ball_inside_complement():
    g = pde.Grid([-0.5, -0.5], [1.0, 1.0], [65, 65])
    times = [4e-3, 1e-2]
    small = pde.solve(heat(), DomainGeometry.ball_exterior([0.0, -0.25], 0.1), g, pde.CAUCHY, times)
    big = pde.solve(heat(), HALF_PLANE, g, pde.CAUCHY, times)
    assert pde.ordering_check(small, big).passed
    assert not pde.ordering_check(big, small).passed


def test_ordering_requires_matching_fields():
    a = pde.solve(heat(), HALF_LINE, pde.Grid([0.0], [1.0], [101]), pde.IBVP, [0.01])
    b = pde.solve(heat(), HALF_LINE, pde.Grid([0.0], [1.0], [51]), pde.IBVP, [0.01])
    with pytest.raises(ValueError):
        pde.ordering_check(a, b)


def test_deterministic_rerun():
    g = pde.Grid([0.0, 0.0], [0.5, 0.5], [33, 33])
    a = pde.solve(ramp(), HALF_PLANE, g, pde.IBVP, [0.01])
    b = pde.solve(ramp(), HALF_PLANE, g, pde.IBVP, [0.01])
    assert np.array_equal(a.values, b.values)


def test_export_round_trip(tmp_path):
    g = pde.Grid([0.0, 0.0], [0.5, 0.5], [17, 17])
    f = pde.solve(sine(0.1), HALF_PLANE, g, pde.IBVP, [0.01, 0.02])
    names = f.export_csv(tmp_path)
    assert [n.name for n in names] == ["field_t0.01.csv", "field_t0.02.csv"]
    back = np.loadtxt(names[1], delimiter=",", skiprows=1)
    assert np.array_equal(back[:, 2], f.values[1].ravel())
    meta = json.loads(f.metadata_json())
    assert meta["grid"]["n"] == [17, 17]
    assert meta["newton_iterations_max"] >= 1


def test_field_lookup():
    f = pde.solve(heat(), HALF_LINE, pde.Grid([0.0], [1.0], [101]), pde.IBVP, [0.01, 0.02])
    assert np.shares_memory(f.at(0.02), f.values[1])
    with pytest.raises(KeyError):
        f.at(0.015)


@settings(max_examples=10, deadline=None)
@given(lo=st.floats(-0.2, 0.2), gap=st.floats(0.01, 0.2), cauchy=st.booleans())
def test_nested_domains_ordered(lo, gap, cauchy):
    # {x > lo + gap} is inside {x > lo}: smaller domain, larger solution
    g = pde.Grid([-0.6], [1.2], [121])
    problem = pde.CAUCHY if cauchy else pde.IBVP
    inner = pde.solve(ramp(), DomainGeometry.half_space([1.0], lo + gap), g, problem, [4e-3, 1e-2])
    outer = pde.solve(ramp(), DomainGeometry.half_space([1.0], lo), g, problem, [4e-3, 1e-2])
    assert pde.ordering_check(outer, inner, 1e-8).passed
