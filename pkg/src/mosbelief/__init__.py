"""Moving-object segmentation with a volumetric belief map for LiDAR sequences."""

from .belief import BeliefMap, VoxelUpdate, VoxelUpdates
from .core import (
    InputError,
    MovingLabel,
    PointCloud,
    Pose,
    RegistrationError,
    TimedPoint,
    VoxelIndex,
    logodds_to_prob,
    prob_to_logodds,
    voxelize,
)
from .local_map import LocalMap
from .metrics import ConfusionCounts, compute_metrics, confusion
from .pipeline import Engine, EngineConfig, FrameResult, FusionStrategy, emit_static_points
from .predictor import (
    FilePredictor,
    HeuristicConfig,
    HeuristicPredictor,
    LogitStore,
    PredictionInput,
    PredictionOutput,
    normalize_timestamps,
)
from .registration import OdometryConfig, OdometryState, register

__version__ = "0.1.0"
