"""Simulation and analysis of chemotaxis-consumption fronts with logistic growth."""
from ._kernels import BACKEND
from .front import (BracketInvalid, ClassifyConfig, Outcome, Verdict, bisect_chi_star,
                    bisect_speed, classify, track_front)
from .model import ConfigError, FieldState, GridSpec, InitialData, ModelParams, validate
from .stepper import BlowUp, run, run_heat, simulate, step
from .sweep import RunRecord, SweepPlan, execute, phase_table

__version__ = "0.1.0"

__all__ = ["BACKEND", "BlowUp", "BracketInvalid", "ClassifyConfig", "ConfigError", "FieldState",
           "GridSpec", "InitialData", "ModelParams", "Outcome", "RunRecord", "SweepPlan", "Verdict",
           "bisect_chi_star", "bisect_speed", "classify", "execute", "phase_table", "run",
           "run_heat", "simulate", "step", "track_front", "validate"]
