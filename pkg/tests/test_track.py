"""Gate geometry: frames, crossings, virtual gates, track file parsing."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from racesim.track import (GateSpec, Track, TrackError, detect_crossing,
                           gate_frame_velocity, gate_to_world, load_track,
                           parse_track, virtual_gates, world_to_gate)


def make_gate(center=(0.0, 0.0, 0.0), yaw=0.0, d_g=1.0, inner=1.5, outer=2.7, visible=True):
    return GateSpec(np.array(center, dtype=float), yaw, d_g, inner, outer, visible)


# -- frames ---------------------------------------------------------------------

def test_gate_center_maps_to_origin():
    g = make_gate(center=(3.0, -2.0, -1.5), yaw=0.7)
    assert world_to_gate(g.center, g) == pytest.approx([0.0, 0.0, 0.0], abs=1e-12)


def test_aligned_frames_identity():
    g = make_gate()
    assert world_to_gate([-3.0, 0.0, 0.0], g) == pytest.approx([-3.0, 0.0, 0.0])


def test_rotated_gate_frame_matches_2d_rotation_oracle():
    # gate at (2,0,0), yaw pi/2; world point (2,-1,0) is one meter before the
    # gate along its normal (0,1,0): independent 2D rotation gives (-1, 0, 0)
    g = make_gate(center=(2.0, 0.0, 0.0), yaw=math.pi / 2.0)
    p = world_to_gate([2.0, -1.0, 0.0], g)
    assert p == pytest.approx([-1.0, 0.0, 0.0], abs=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
@settings(max_examples=200, deadline=None)
def test_roundtrip_world_gate_world(yaw, x, y, z):
    g = make_gate(center=(1.0, -2.0, -1.0), yaw=yaw)
    p = np.array([x, y, z])
    assert gate_to_world(world_to_gate(p, g), g) == pytest.approx(p, abs=1e-12)


def test_velocity_rotation_preserves_norm():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        g = make_gate(yaw=rng.uniform(-math.pi, math.pi))
        v = rng.uniform(-20, 20, 3)
        vg = gate_frame_velocity(v, g)
        assert np.linalg.norm(vg) == pytest.approx(np.linalg.norm(v), rel=1e-12)
    g0 = make_gate(yaw=0.0)
    assert gate_frame_velocity([1.0, 2.0, 3.0], g0) == pytest.approx([1.0, 2.0, 3.0])
    assert np.all(gate_frame_velocity(np.zeros(3), make_gate(yaw=1.0)) == 0.0)


# -- crossings --------------------------------------------------------------------

def test_symmetric_straddle_crossing():
    c = detect_crossing([-0.1, 0.0, 0.0], [0.1, 0.0, 0.0])
    assert c is not None
    assert (c.y_g, c.z_g) == (0.0, 0.0)
    assert c.frac == pytest.approx(0.5)


def test_no_sign_change_no_crossing():
    assert detect_crossing([-1.0, 0.0, 0.0], [-0.5, 0.0, 0.0]) is None
    assert detect_crossing([0.5, 0.0, 0.0], [1.0, 0.0, 0.0]) is None
    # backward crossings never fire
    assert detect_crossing([0.5, 0.0, 0.0], [-0.5, 0.0, 0.0]) is None


def test_interpolated_offsets_match_line_plane_oracle():
    # parametric line from (-1,0,0.5) to (1,0.4,0.3) hits x=0 at t=0.5:
    # y = 0 + 0.5*0.4 = 0.2, z = 0.5 + 0.5*(0.3-0.5) = 0.4
    c = detect_crossing([-1.0, 0.0, 0.5], [1.0, 0.4, 0.3])
    assert (c.y_g, c.z_g) == pytest.approx((0.2, 0.4), abs=1e-12)


def test_crossing_on_plane_counts_once():
    assert detect_crossing([-0.5, 0, 0], [0.0, 0, 0]) is not None
    assert detect_crossing([0.0, 0, 0], [0.5, 0, 0]) is None


# -- virtual gates ------------------------------------------------------------------

def test_zero_thickness_collapses_virtual_gates():
    g = make_gate(center=(1.0, 2.0, -1.0), yaw=0.3)
    pre, post = virtual_gates(g, 0.0)
    assert pre.center == pytest.approx(g.center)
    assert post.center == pytest.approx(g.center)


def test_virtual_gate_offsets_along_normal():
    g = make_gate()
    pre, post = virtual_gates(g, 0.8)
    assert pre.center == pytest.approx([-0.4, 0.0, 0.0], abs=1e-12)
    assert post.center == pytest.approx([0.4, 0.0, 0.0], abs=1e-12)
    assert not pre.visible and not post.visible
    assert pre.d_g == g.d_g and pre.yaw == g.yaw


def test_rotated_virtual_gates_match_rotation_of_axis_aligned_case():
    g = make_gate(yaw=math.pi / 2.0)
    pre, post = virtual_gates(g, 0.8)
    assert pre.center == pytest.approx([0.0, -0.4, 0.0], abs=1e-12)
    assert post.center == pytest.approx([0.0, 0.4, 0.0], abs=1e-12)
    # in the gate frame both sit on the normal axis
    assert world_to_gate(pre.center, g) == pytest.approx([-0.4, 0.0, 0.0], abs=1e-12)


def test_straight_sweep_crosses_pre_main_post_in_order():
    g = make_gate(center=(5.0, 0.0, 0.0))
    pre, post = virtual_gates(g, 0.8)
    xs = np.linspace(0.0, 10.0, 200)
    events = []
    for a, b in zip(xs[:-1], xs[1:]):
        pa, pb = np.array([a, 0.1, 0.0]), np.array([b, 0.1, 0.0])
        for kind, spec in (("pre", pre), ("main", g), ("post", post)):
            c = detect_crossing(world_to_gate(pa, spec), world_to_gate(pb, spec), kind=kind)
            if c is not None:
                events.append(kind)
    assert events == ["pre", "main", "post"]


# -- track files ----------------------------------------------------------------------

GOOD = """
# demo
t_g 0.8
gate 3.0 0.0 -1.5 0 default 1.5 2.7 1
gate 8.0 0.0 -1.5 90 1.2 1.5 2.7 0
"""


def test_parse_good_track():
    t = parse_track(GOOD, "demo.txt")
    assert len(t) == 2 and t.t_g == 0.8
    assert t.gates[0].d_g is None
    assert t.gates[1].d_g == 1.2
    assert t.gates[1].yaw == pytest.approx(math.pi / 2.0)
    assert not t.gates[1].visible
    assert t.gate(3).center == pytest.approx(t.gates[1].center)  # cyclic


def test_parse_reports_line_and_field():
    bad = "t_g 0.8\ngate 3.0 0.0 -1.5 abc default 1.5 2.7 1\ngate 8 0 -1.5 0 default 1.5 2.7 1\n"
    with pytest.raises(TrackError, match=r":2: field 'yaw'"):
        parse_track(bad, "bad.txt")


def test_parse_rejects_wrong_field_count():
    with pytest.raises(TrackError, match=r":2: gate takes"):
        parse_track("t_g 0.8\ngate 1 2 3\n", "short.txt")


def test_parse_requires_t_g_and_two_gates():
    with pytest.raises(TrackError, match="missing t_g"):
        parse_track("gate 3 0 -1.5 0 default 1.5 2.7 1\n" * 2, "no_tg.txt")
    with pytest.raises(TrackError, match="at least 2 gates"):
        parse_track("t_g 0.5\ngate 3 0 -1.5 0 default 1.5 2.7 1\n", "one.txt")


def test_parse_rejects_unknown_directive_and_bad_visible():
    with pytest.raises(TrackError, match="unknown directive"):
        parse_track("t_g 0.1\nwall 1 2 3\n", "x.txt")
    with pytest.raises(TrackError, match="field 'visible'"):
        parse_track("t_g 0.1\ngate 1 0 0 0 default 1.5 2.7 yes\n", "x.txt")


def test_load_missing_file_raises_track_error(tmp_path):
    with pytest.raises(TrackError, match="cannot read"):
        load_track(tmp_path / "nope.txt")


def test_shipped_tracks_parse(repo_tracks):
    for name in ("straight3.txt", "loop4.txt", "ladder3.txt"):
        t = load_track(repo_tracks / name)
        assert len(t) >= 2


def test_track_invariants():
    with pytest.raises(ValueError):
        Track(gates=[make_gate()], t_g=0.8)
    with pytest.raises(ValueError):
        make_gate(outer=1.0)  # outer must exceed inner for visible gates
