"""Simulation and labeling of multi-object grasps with a three-finger hand."""
from .classifier import (
    FeatureVector,
    MOGType,
    NoGraspError,
    build_taxonomy,
    classify_type,
    detect_combinations,
    extract_features,
    label_record,
    score_types,
    taxonomy_path,
)
from .closure import FrictionModel, HoldStatus, force_closure, hold_status
from .grasp import (
    Approach,
    StochasticPolicy,
    TrialState,
    run_grasp_trial,
    sample_step,
    sample_steps,
    step_routine,
)
from .hand import HandConfiguration, HandGeometry, JointLimits, forward_kinematics
from .records import GraspRecord, RecordValidationError, load_record, save_record
from .scene import Container, SceneState, ShapeSpec, settle_pile

__version__ = "0.1.0"
