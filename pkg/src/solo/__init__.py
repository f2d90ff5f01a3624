"""Robust online rigid-body registration of 3-D feature trajectories.

A low-rank plus sparse decomposition of an initial window yields a rank-4
shape basis; every later frame is registered by a cheap sparse projection onto
that basis followed by a Procrustes fit on the uncorrupted features.
"""

from .core import (
    DegenerateConfigurationError,
    FrameObservation,
    InitializationError,
    InsufficientInliersError,
    RigidMotion,
    ShapeBasis,
    SoloError,
    SupportSet,
    TrajectoryMatrix,
    center,
    extract_frame,
    stack_frames,
)
from .projection import ProjectionConfig, ProjectionResult, sparse_project, uncorrupted_set
from .ransac import RansacConfig, RansacError, RansacResult, ransac_register
from .registration import (
    OutlierConfig,
    Refinement,
    SoloState,
    UpdateResult,
    motion_error,
    procrustes,
    refine_motion,
    reject_outliers,
    shape_basis,
    solo_init,
    solo_update,
)
from .rpca import DecompositionResult, PcpConfig, pcp, pcp_completion, shrink, svt
from .simgen import GroundTruth, ScenarioConfig, generate, random_rotation

__version__ = "0.1.0"
