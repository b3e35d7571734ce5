""" Evaluation metrics """

from .evaluate import GroundTruth, RunOutputs, build_report, compute_metrics
from .image import psnr, ssim
from .motion import frechet_distance, motion_mse, motion_sid, motion_var, window_continuity
from .registry import RESERVED, MetricRegistry
from .sync import SyncResult, av_sync_corr
