"""Detect, measure and remedy negative data externalities on group performance."""
from .core import Allocation, GroupedDataset, GroupId, Instance, SeedSpec, dominated_pairs, subsample
from .externality import DeltaReport, ExternalityFinding, delta, detect, slope_scan
from .intervention import SplitModel, build_split, evaluate_intervention, predict_split
from .learners import LinearModel, TrainConfig, cv_select_lambda, predict, train
from .metrics import GroupRisk, auroc, group_auroc, mse_risk
from .sweep import RiskSurface, SweepPlan, grid_axis, run_sweep
from .synthetic import AffineGroupSpec, example1_spec, example2_spec, gen_affine

__version__ = "0.1.0"

__all__ = [
    "AffineGroupSpec",
    "Allocation",
    "DeltaReport",
    "ExternalityFinding",
    "GroupId",
    "GroupRisk",
    "GroupedDataset",
    "Instance",
    "LinearModel",
    "RiskSurface",
    "SeedSpec",
    "SplitModel",
    "SweepPlan",
    "TrainConfig",
    "auroc",
    "build_split",
    "cv_select_lambda",
    "delta",
    "detect",
    "dominated_pairs",
    "evaluate_intervention",
    "example1_spec",
    "example2_spec",
    "gen_affine",
    "grid_axis",
    "group_auroc",
    "mse_risk",
    "predict",
    "predict_split",
    "run_sweep",
    "slope_scan",
    "subsample",
    "train",
]
