"""Simulation and analysis of switched Kolmogorov population models."""
from .model import (EnvironmentField, GaugeFunction, ModelError, ModelSpec, RateBoundError,
                    SubspaceIndex, SwitchLaw, drift, rate_matrix, restrict, validate)
from .simulate import SimConfig, Trajectory, flow_segment, sample_jump, simulate, simulate_ensemble

__version__ = "0.1.0"
