import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from headbasis.encoders import AUDIO_FRAME_DIM, build_audio_encoder, build_pose_decoder
from headbasis.errors import DomainError, EmptyResultError, ShapeError
from headbasis.motion_space import MotionBasisBank, reconstruct
from headbasis.nets import SmallNet
from headbasis.pose import OffsetClip, PoseFrame, trajectory_array
from headbasis.sampling import (SampleConfig, assemble_window, audio_clip_blocks, center_feature,
                              decode_pose, probe_basis, sample_motion, sample_trajectories,
                              stitch_array, stitch_clips)


def yaw_clip(yaws):
    off = np.zeros((len(yaws), 6))
    off[:, 2] = yaws
    return OffsetClip(off)


# --- center feature and ball sampling ----------------------------------------

def test_center_feature_examples():
    bank = MotionBasisBank(np.array([[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [1.0, 1.0, 1.0]]))
    assert np.array_equal(center_feature(bank, np.array([0.0, 1.0, 0.0])), bank.basis[1])
    assert np.array_equal(center_feature(bank, np.array([0.5, 0.5, 0.0])), [1.0, 2.0, 0.0])
    w = np.random.default_rng(0).dirichlet(np.ones(3), size=5)
    assert center_feature(bank, w).tobytes() == reconstruct(bank, w).tobytes()


def test_zero_radius_returns_center():
    c = np.random.default_rng(1).normal(size=32)
    samples = sample_motion(c, SampleConfig(epsilon=0.0, seed=3, num_samples=5))
    assert all(np.array_equal(s, c) for s in samples)


def test_ball_radius_statistics():
    dim = 32
    c = np.random.default_rng(2).normal(size=dim)
    samples = np.array(sample_motion(c, SampleConfig(epsilon=1.0, seed=0, num_samples=10_000)))
    dist = np.linalg.norm(samples - c, axis=1)
    assert dist.max() <= 1.0
    assert dist.mean() == pytest.approx(dim / (dim + 1), rel=0.02)
    # directions are isotropic: the mean offset is near zero
    assert np.linalg.norm((samples - c).mean(axis=0)) < 0.05


def test_same_seed_same_samples():
    c = np.ones(8)
    a = sample_motion(c, SampleConfig(seed=9, num_samples=4))
    b = sample_motion(c, SampleConfig(seed=9, num_samples=4))
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a, b))


@given(arrays(np.float64, 6, elements=st.floats(-1e6, 1e6)),
       st.floats(0.0, 10.0), st.integers(0, 2**32 - 1))
def test_samples_never_leave_the_ball(center, eps, seed):
    for s in sample_motion(center, SampleConfig(epsilon=eps, seed=seed, num_samples=20)):
        assert np.linalg.norm(s - center) <= eps


def test_sample_config_validation():
    with pytest.raises(DomainError):
        SampleConfig(epsilon=-0.1)
    with pytest.raises(DomainError):
        SampleConfig(num_samples=0)
    with pytest.raises(ShapeError):
        sample_motion(np.ones((2, 2)), SampleConfig())


# --- decoding ----------------------------------------------------------------

def test_decoded_first_offset_is_zero():
    dec = build_pose_decoder(5, 8, rng=0)
    feats = np.random.default_rng(0).normal(size=(6, 8))
    clips = decode_pose(dec, feats)
    assert len(clips) == 6
    for clip, f in zip(clips, feats):
        assert np.all(clip.offsets[0] == 0.0) and clip.offsets.shape == (5, 6)
        assert decode_pose(dec, f) == decode_pose(dec, f)
        np.testing.assert_allclose(decode_pose(dec, f).offsets, clip.offsets, rtol=1e-12,
                                   atol=1e-15)


def test_decoder_output_must_be_whole_frames():
    with pytest.raises(ShapeError):
        decode_pose(SmallNet.build([4, 7], ["linear"], rng=0), np.ones(4))


# --- stitching ----------------------------------------------------------------

def test_single_zero_clip():
    frames = stitch_clips([OffsetClip(np.zeros((5, 6)))], PoseFrame((0.0, 0.0, 0.3)))
    assert [f.euler[2] for f in frames] == [0.3] * 5


def test_hand_composition():
    frames = stitch_clips([yaw_clip([0, 0.1, 0.2]), yaw_clip([0, 0.05, 0.1])], PoseFrame())
    np.testing.assert_allclose([f.euler[2] for f in frames], [0, 0.1, 0.2, 0.25, 0.3],
                               rtol=0, atol=1e-15)


def test_stitch_empty():
    with pytest.raises(EmptyResultError):
        stitch_clips([], PoseFrame())


@given(st.integers(1, 6), st.integers(2, 7), st.integers(0, 10_000))
def test_stitch_length_anchor_and_continuity(n, t, seed):
    rng = np.random.default_rng(seed)
    offs = []
    for _ in range(n):
        o = np.cumsum(rng.normal(scale=0.05, size=(t, 6)), axis=0)
        offs.append(o - o[0])
    initial = np.array([0.1, -0.2, 0.3, 1.0, 2.0, 10.0])
    traj = stitch_array(offs, initial)
    assert traj.shape == (t + (n - 1) * (t - 1), 6)
    assert np.array_equal(traj[0], initial)
    assert np.array_equal(traj[t - 1], initial + offs[0][-1])
    # every clip boundary is exactly the previous clip's end state
    for j in range(1, n):
        start = t - 1 + (j - 1) * (t - 1)
        np.testing.assert_array_equal(traj[start + 1], traj[start] + offs[j][1])
    max_inc = max(np.max(np.abs(np.diff(o, axis=0))) for o in offs)
    assert np.max(np.abs(np.diff(traj, axis=0))) <= max_inc + 1e-12


def test_stitch_wraps_angles():
    frames = stitch_clips([yaw_clip([0.0, 0.5, 1.0])], PoseFrame((0.0, 0.0, 3.0)))
    assert all(-np.pi < f.euler[2] <= np.pi for f in frames)
    assert frames[2].euler[2] == pytest.approx(4.0 - 2 * np.pi)


# --- windows ----------------------------------------------------------------

def test_window_single_frame_replicates():
    win = assemble_window(np.ones((1, 3)), np.zeros((1, 6)), 0, k=4)
    assert win.features.shape == (9, 9)
    assert np.all(win.features == win.features[0])


@given(st.integers(1, 20), st.integers(0, 10), st.data())
def test_window_center_and_edges(n, k, data):
    i = data.draw(st.integers(0, n - 1))
    expr = np.arange(n * 2, dtype=np.float64).reshape(n, 2)
    motion = -np.arange(n * 6, dtype=np.float64).reshape(n, 6)
    win = assemble_window(expr, motion, i, k)
    assert win.features.shape == (2 * k + 1, 8)
    assert np.array_equal(win.middle(), np.concatenate([expr[i], motion[i]]))
    for j, row in enumerate(win.features):
        src = min(max(i - k + j, 0), n - 1)
        assert np.array_equal(row, np.concatenate([expr[src], motion[src]]))


def test_window_k0_and_errors():
    expr, motion = np.eye(3), np.ones((3, 6))
    assert np.array_equal(assemble_window(expr, motion, 1, 0).features,
                          np.concatenate([expr[1], motion[1]])[None])
    with pytest.raises(IndexError):
        assemble_window(expr, motion, 3, 2)
    with pytest.raises(IndexError):
        assemble_window(expr, motion, -1, 2)
    with pytest.raises(ShapeError):
        assemble_window(expr, motion[:2], 0, 2)


# --- probing and end-to-end sampling -----------------------------------------------

def test_probe_of_zero_decoder_is_constant():
    dec = build_pose_decoder(5, 4, rng=0)
    for layer in dec.layers:
        layer.weight[:] = 0.0
        layer.bias[:] = 0.0
    bank = MotionBasisBank.random(3, 4, rng=0)
    start = PoseFrame((0.1, 0.2, 0.3), (0.0, 0.0, 10.0))
    frames = probe_basis(bank, dec, 1, start, num_clips=3)
    assert len(frames) == 5 + 2 * 4
    assert all(f == start for f in frames)
    with pytest.raises(IndexError):
        probe_basis(bank, dec, 3)


def test_audio_blocks_share_boundary_frames():
    a = np.arange(10, dtype=np.float64)[:, None] * np.ones((1, AUDIO_FRAME_DIM))
    blocks = audio_clip_blocks(a, 5)
    # frames 0-4, 4-8, 8-9 padded with frame 9
    assert blocks.shape == (3, 5 * AUDIO_FRAME_DIM)
    firsts = blocks.reshape(3, 5, AUDIO_FRAME_DIM)[:, :, 0]
    assert firsts.tolist() == [[0, 1, 2, 3, 4], [4, 5, 6, 7, 8], [8, 9, 9, 9, 9]]
    assert audio_clip_blocks(a[:1], 5).shape == (1, 5 * AUDIO_FRAME_DIM)
    with pytest.raises(ShapeError):
        audio_clip_blocks(np.ones((4, 3)), 5)


def _toy_model(seed=0):
    rng = np.random.default_rng(seed)
    bank = MotionBasisBank.random(4, 8, rng=rng)
    audio = build_audio_encoder(5, 4, rng=rng, hidden=8)
    audio.layers[-1].weight[:] = rng.normal(size=audio.layers[-1].weight.shape)
    dec = build_pose_decoder(5, 8, rng=rng, hidden=8)
    return bank, audio, dec


def test_sample_trajectories_contract():
    bank, audio_net, dec = _toy_model()
    audio = np.random.default_rng(1).normal(size=(13, AUDIO_FRAME_DIM))
    cfg = SampleConfig(epsilon=1.0, seed=4, num_samples=3)
    trajs = sample_trajectories(bank, audio_net, dec, audio, cfg, t=5)
    assert len(trajs) == 3 and all(tr.shape == (13, 6) for tr in trajs)
    again = sample_trajectories(bank, audio_net, dec, audio, cfg, t=5)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(trajs, again))
    # sample j does not depend on how many samples were requested
    more = sample_trajectories(bank, audio_net, dec, audio, cfg.__class__(1.0, 4, 5), t=5)
    assert all(a.tobytes() == b.tobytes() for a, b in zip(trajs, more))
    assert not np.array_equal(trajs[0], trajs[1])


def test_zero_epsilon_samples_coincide():
    bank, audio_net, dec = _toy_model(1)
    audio = np.random.default_rng(2).normal(size=(9, AUDIO_FRAME_DIM))
    trajs = sample_trajectories(bank, audio_net, dec, audio,
                                SampleConfig(epsilon=0.0, seed=0, num_samples=4), t=5)
    assert all(np.array_equal(trajs[0], tr) for tr in trajs)
    start = PoseFrame((0.0, 0.0, 0.0), (0.0, 0.0, 10.0))
    anchored = sample_trajectories(bank, audio_net, dec, audio, SampleConfig(0.0), 5, start)
    assert np.array_equal(anchored[0][0], trajectory_array([start])[0])


@pytest.mark.parametrize("eps", [1e-10, 3e-10, 1e-9])
def test_radius_near_center_ulp_terminates(eps):
    # eps comparable to the spacing of floats around the center
    center = np.full(4, 1e6)
    for s in sample_motion(center, SampleConfig(epsilon=eps, seed=0, num_samples=50)):
        assert np.linalg.norm(s - center) <= eps
