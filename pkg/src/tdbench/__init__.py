"""tdbench: a desk-scale LiDAR compression / detection / V2X benchmark suite.

The package synthesizes labeled LiDAR scenes, compresses them with two
point-cloud codecs (an octree occupancy codec and a quantize-and-pack codec),
runs a geometric 3D detector over the reconstructions, scores detection
quality with interpolated average precision, and replays the compressed
traffic through a discrete-event uplink model checked against published V2X
service requirements.
"""

__version__ = "0.1.0"

from .errors import (
    BitstreamError,
    CapacityError,
    ConfigError,
    FrameDataError,
    FrameFormatError,
    SceneError,
    StageError,
    TdbenchError,
)
from .geometry import Box3D, ClassLabel, LabeledFrame, Point3, PointCloud, points_in_box
from .netsim import (
    DelayBreakdown,
    NetworkScenario,
    RequirementProfile,
    SimulationSummary,
    check_compliance,
    required_data_rate,
    simulate,
)
from .pipeline import ExperimentSpec, run_pipeline, spec_hash
from .profiles import PROFILES, get_profile, teleoperated_profile

__all__ = [
    "__version__",
    "TdbenchError",
    "FrameFormatError",
    "FrameDataError",
    "BitstreamError",
    "CapacityError",
    "ConfigError",
    "SceneError",
    "StageError",
    "Box3D",
    "ClassLabel",
    "LabeledFrame",
    "Point3",
    "PointCloud",
    "points_in_box",
    "NetworkScenario",
    "DelayBreakdown",
    "SimulationSummary",
    "RequirementProfile",
    "simulate",
    "required_data_rate",
    "check_compliance",
    "PROFILES",
    "get_profile",
    "teleoperated_profile",
    "ExperimentSpec",
    "run_pipeline",
    "spec_hash",
]
