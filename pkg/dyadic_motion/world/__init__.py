""" Synthetic dyadic-conversation world """

from .audio import AudioFeatureExtractor, DyadicAudioFeatures, SyntheticFeatureExtractor, synth_audio_features
from .behavior import (
    EXPRESSION_FIELDS, MOTION_FIELDS, POSE_FIELDS, FaceParams, FaceTrack, Identity,
    behavior_model, sample_identity,
)
from .dataset import Clip, generate_clip, generate_dataset, read_dataset, read_manifest, write_dataset
from .render import CONTOUR_INDEX_SET, N_LANDMARKS, RenderedFrame, face_landmarks, render_face, render_track
from .script import ConversationScript, ConversationState, gen_script
