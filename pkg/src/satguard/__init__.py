"""Tuning and verification of saturated dynamic output feedback for uncertain
systems whose internal disturbance dynamics are excited by the control rate."""

from ._jit import NUMBA_ENABLED
from .controller import ControllerGains, ControllerState, Region, classify_region, control_output, filter_rhs, saturate
from .model import LinearInternalDynamics, PlantTruth, SignalSpec, SinusoidTerm, UncertaintyEnvelope
from .simulate import SimConfig, Trajectory, simulate
from .tuning import EnvelopeConstants, TuningReport, envelope_constants, feasibility_report, lambda_star

__version__ = "0.1.0"
