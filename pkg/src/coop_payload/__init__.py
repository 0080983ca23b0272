"""Grasp geometry and inertial parameters of a payload carried by several
robots, estimated from each robot's pose and wrench streams."""

from .dataset import DatasetFile, read_dataset, write_dataset
from .errors import (
    DatasetError,
    EstimationError,
    InsufficientExcitation,
    InsufficientOrientations,
    ObservabilityError,
)
from .geom import Transform, Twist, Wrench, adjoint
from .inertia import PrincipalInertia, estimate_inertia, principal_axes, psd_project
from .kinematics import GraspGraph, estimate_grasp_graph, estimate_pairwise
from .pipeline import RunConfig, preprocess, run_full_pipeline
from .report import EstimationReport, emit_report, parse_report
from .scenarios import load_noise_profile, load_scenario
from .sim import NoiseConfig, PayloadModel, ScenarioConfig, synthesize_dataset
from .statics import detect_static_windows, estimate_com, estimate_mass

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "DatasetFile",
    "EstimationError",
    "EstimationReport",
    "GraspGraph",
    "InsufficientExcitation",
    "InsufficientOrientations",
    "NoiseConfig",
    "ObservabilityError",
    "PayloadModel",
    "PrincipalInertia",
    "RunConfig",
    "ScenarioConfig",
    "Transform",
    "Twist",
    "Wrench",
    "adjoint",
    "detect_static_windows",
    "emit_report",
    "estimate_com",
    "estimate_grasp_graph",
    "estimate_inertia",
    "estimate_mass",
    "estimate_pairwise",
    "load_noise_profile",
    "load_scenario",
    "parse_report",
    "preprocess",
    "principal_axes",
    "psd_project",
    "read_dataset",
    "run_full_pipeline",
    "synthesize_dataset",
    "write_dataset",
]
