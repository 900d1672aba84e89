"""Pose-level one-to-many audio-to-head-motion library.

A clip-level motion basis space is learned from pose trajectories, audio
features are mapped into it as basis weights, and diverse motion is drawn
from a bounded ball around the audio-implied center feature, decoded to
offset clips and stitched into continuous head-pose trajectories.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .encoders import encode_audio_weights, encode_motion, extract_expression
from .errors import (ContractError, DegenerateQueryError, DomainError, EmptyResultError,
                     HeadBasisError, ParseError, ProjectionError, ShapeError, TrainingError)
from .evaluation import autoencoding_error, basis_agreement, class_probes
from .face import (FaceModel, expression_loss, landmark_loss, load_desk_face_model,
                   project_landmarks, reconstruct_shape)
from .metrics import diversity_metric, lmd_metric
from .motion_space import MotionBasisBank, attention_weights, basis_loss, cosine_distances, \
    kl_loss, reconstruct
from .nets import SmallNet, grad_check
from .pose import (OffsetClip, PoseClip, PoseFrame, clip_to_offsets, euler_to_rotation,
                   read_trajectory, rotation_to_euler, segment_clips, write_trajectory)
from .sampling import (SampleConfig, assemble_window, center_feature, decode_pose, probe_basis,
                       sample_motion, sample_trajectories, stitch_clips)
from .synth import SynthConfig, load_corpus, save_corpus, synth_dataset
from .training import Checkpoint, Model, train

__version__ = "0.1.0"
