import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from headbasis.errors import DomainError, EmptyResultError, ParseError, ShapeError
from headbasis.pose import (OffsetClip, PoseClip, PoseFrame, clip_to_offsets, euler_to_rotation,
                          frames_from_array, read_trajectory, rotation_to_euler, segment_clips,
                          trajectory_array, wrap_angle, write_trajectory)

angle = st.floats(-math.pi, math.pi, exclude_min=True)
finite = st.floats(-1e3, 1e3)


def yaw_frames(yaws):
    return [PoseFrame((0.0, 0.0, y)) for y in yaws]


# --- Euler / rotation --------------------------------------------------------

def test_identity_rotation():
    assert np.array_equal(euler_to_rotation((0, 0, 0)), np.eye(3))


def test_half_turn_about_z():
    np.testing.assert_allclose(euler_to_rotation((0, 0, math.pi)), np.diag([-1.0, -1.0, 1.0]),
                               atol=1e-15)


def test_hand_multiplied_axis_rotations():
    r, p, y = 0.1, 0.2, 0.3
    rx = np.array([[1, 0, 0], [0, math.cos(r), -math.sin(r)], [0, math.sin(r), math.cos(r)]])
    ry = np.array([[math.cos(p), 0, math.sin(p)], [0, 1, 0], [-math.sin(p), 0, math.cos(p)]])
    rz = np.array([[math.cos(y), -math.sin(y), 0], [math.sin(y), math.cos(y), 0], [0, 0, 1]])
    m = euler_to_rotation((r, p, y))
    np.testing.assert_allclose(m, rx @ ry @ rz, atol=1e-15)
    assert np.max(np.abs(m.T @ m - np.eye(3))) < 1e-12


@given(angle, angle, angle)
def test_rotation_is_proper(r, p, y):
    m = euler_to_rotation((r, p, y))
    assert np.max(np.abs(m.T @ m - np.eye(3))) < 1e-12
    assert abs(np.linalg.det(m) - 1.0) < 1e-12


def test_non_finite_euler_rejected():
    with pytest.raises(DomainError):
        euler_to_rotation((0.0, math.nan, 0.0))


def test_identity_inverts_to_zero():
    assert rotation_to_euler(np.eye(3)) == (0.0, 0.0, 0.0)


def test_round_trip_1000_seeded_cases():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        e = (rng.uniform(-math.pi, math.pi), rng.uniform(-1.5, 1.5), rng.uniform(-math.pi, math.pi))
        back = rotation_to_euler(euler_to_rotation(e))
        worst = max(worst, max(abs(a - b) for a, b in zip(back, e)))
    assert worst < 1e-9


def test_gimbal_lock_tie_break():
    yaw = 0.7
    r, p, y = rotation_to_euler(euler_to_rotation((0.0, math.pi / 2, yaw)))
    assert (r, p) == (0.0, math.pi / 2)
    assert abs(y - yaw) < 1e-12
    # roll and yaw are coupled at the lock; only their combination is recoverable
    r, p, y = rotation_to_euler(euler_to_rotation((0.4, -math.pi / 2, 0.1)))
    assert r == 0.0 and p == -math.pi / 2
    np.testing.assert_allclose(euler_to_rotation((r, p, y)),
                               euler_to_rotation((0.4, -math.pi / 2, 0.1)), atol=1e-12)


@given(angle, st.floats(-math.pi / 2, math.pi / 2), angle)
def test_inverse_reproduces_matrix(r, p, y):
    m = euler_to_rotation((r, p, y))
    e = rotation_to_euler(m)
    assert -math.pi / 2 <= e[1] <= math.pi / 2
    assert np.max(np.abs(euler_to_rotation(e) - m)) < 1e-9


def test_non_orthonormal_rejected():
    with pytest.raises(DomainError):
        rotation_to_euler(np.diag([1.0, 1.0, 2.0]))
    with pytest.raises(DomainError):  # reflection
        rotation_to_euler(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ShapeError):
        rotation_to_euler(np.eye(2))


# --- PoseFrame ---------------------------------------------------------------

def test_pose_frame_range():
    PoseFrame((math.pi, 0.0, 0.0))
    with pytest.raises(DomainError):
        PoseFrame((-math.pi, 0.0, 0.0))
    with pytest.raises(DomainError):
        PoseFrame((0.0, 0.0, 0.0), (0.0, math.inf, 0.0))
    assert PoseFrame.from_vector([0, 0, 3 * math.pi, 1, 2, 3], wrap=True).euler[2] == \
        pytest.approx(math.pi)


@given(st.floats(-100, 100))
def test_wrap_angle_lands_in_range(theta):
    w = wrap_angle(theta)
    assert -math.pi < w <= math.pi
    assert abs(math.remainder(w - theta, 2 * math.pi)) < 1e-9


def test_wrap_angle_keeps_in_range_values_exactly():
    for v in (0.1, -3.0, math.pi):
        assert wrap_angle(v) == v


# --- segmentation and offsets ------------------------------------------------

def test_segment_counts():
    traj = yaw_frames(np.linspace(0, 1.1, 12))
    clips = segment_clips(traj, t=5, stride=5)
    assert len(clips) == 2
    assert clips[0].frames[0] == traj[0] and clips[1].frames[0] == traj[5]
    assert len(segment_clips(traj, t=5, stride=1)) == 8
    assert all(len(c) == 5 for c in clips)


@pytest.mark.parametrize("stride", [1, 3, 5])
def test_short_trajectory_is_an_error(stride):
    with pytest.raises(EmptyResultError, match="fewer than one clip"):
        segment_clips(yaw_frames([0, 0, 0, 0]), t=5, stride=stride)


@given(st.integers(5, 40), st.integers(2, 6))
def test_segments_reconcatenate_to_prefix(n, t):
    traj = yaw_frames(np.arange(n) * 0.01)
    if n < t:
        return
    clips = segment_clips(traj, t=t, stride=t)
    joined = [f for c in clips for f in c.frames]
    assert joined == traj[: len(joined)]
    assert len(joined) == (n // t) * t


def test_offsets_examples():
    const = PoseClip(tuple([PoseFrame((0.1, 0.2, 0.3), (1, 2, 3))] * 5))
    assert np.array_equal(clip_to_offsets(const).offsets, np.zeros((5, 6)))
    a = clip_to_offsets(PoseClip(tuple(yaw_frames([0, 0.1, 0.2, 0.3, 0.4]))))
    assert a.offsets[:, 2].tolist() == [0, 0.1, 0.2, 0.3, 0.4]
    # dyadic increments keep the shifted differences exact in binary
    b = clip_to_offsets(PoseClip(tuple(yaw_frames([0.5, 0.625, 0.75, 0.875, 1.0]))))
    c = clip_to_offsets(PoseClip(tuple(yaw_frames([0.0, 0.125, 0.25, 0.375, 0.5]))))
    assert b == c


@given(st.lists(st.floats(-1, 1), min_size=6 * 5, max_size=6 * 5), st.integers(-8, 8))
def test_offsets_translation_invariant(vals, k):
    arr = np.array(vals).reshape(5, 6)
    shift = np.full(6, k * 0.25)
    a = clip_to_offsets(arr).offsets
    b = clip_to_offsets(arr + shift).offsets
    # a constant shift cancels exactly only up to one rounding of each sum
    assert np.max(np.abs(a - b)) <= 1e-12
    assert np.all(b[0] == 0.0)


def test_offset_clip_invariants():
    with pytest.raises(DomainError):
        OffsetClip(np.ones((3, 6)))
    with pytest.raises(ShapeError):
        OffsetClip(np.zeros((3, 5)))
    clip = OffsetClip(np.zeros((3, 6)))
    with pytest.raises(ValueError):
        clip.offsets[1, 1] = 2.0


def test_clip_fps_validated():
    with pytest.raises(DomainError):
        PoseClip(tuple(yaw_frames([0, 0])), fps=0.0)
    assert PoseClip(tuple(yaw_frames([0, 0]))).fps == 25.0


# --- trajectory files ----------------------------------------------------------

def test_trajectory_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    arr = np.hstack([rng.uniform(-3, 3, (9, 3)), rng.normal(size=(9, 3))])
    frames = frames_from_array(arr)
    path = tmp_path / "t.csv"
    write_trajectory(path, frames)
    assert path.read_text().splitlines()[0] == "frame,roll,pitch,yaw,tx,ty,tz"
    assert np.array_equal(trajectory_array(read_trajectory(path)), arr)


@pytest.mark.parametrize("body", [
    "frame,roll,pitch,yaw,tx,ty,tz\n1,0,0,0,0,0,0\n",  # does not start at 0
    "frame,roll,pitch,yaw,tx,ty,tz\n0,0,0,0,0,0,0\n0,0,0,0,0,0,0\n",  # not increasing
    "frame,roll,pitch,yaw,tx,ty\n0,0,0,0,0,0\n",  # wrong header
    "frame,roll,pitch,yaw,tx,ty,tz\n0,0,0,nan,0,0,0\n",  # non-finite
    "frame,roll,pitch,yaw,tx,ty,tz\n0,0,0,4.0,0,0,0\n",  # angle outside (-pi, pi]
    "frame,roll,pitch,yaw,tx,ty,tz\n0,0,0,0,0,0\n",  # short record
    "",
])
def test_bad_trajectory_files(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ParseError):
        read_trajectory(path)
