"""Toolkit for a fluidically innervated wearable pressure pad: simulator,
wire protocol, signal conditioning, calibration/relaxation fitting, cycle
ensembles, factorial statistics, session persistence, and a live host
service."""

__version__ = "0.1.0"

from .core import (
    PressureSample,
    TimeSeries,
    Unit,
    counts_to_pascals,
    merge_on_grid,
    pascals_to_counts,
)
from .cycles import CycleSet, SteadyState, ensemble_stats, normalize_cycles, segment_cycles, steady_state_cov
from .dsp import FilterSpec, lowpass_zero_phase, offset_by_rest, resample
from .fitting import ExpFit, LinFit, condition_correlation, expfit, linfit
from .padsim import PadParams, PadState, SessionData, run_scenario, step_pad
from .session import Session, read_session, write_session
from .stats import AnovaResult, FactorialTable, PosthocResult, anova2, f_cdf, posthoc
from .telemetry import (
    Frame,
    FrameDecoder,
    Publisher,
    StreamHealth,
    crc16,
    decode_frame,
    decode_stream,
    emulate_device,
    encode_frame,
)

__all__ = [
    "PressureSample", "TimeSeries", "Unit", "counts_to_pascals", "pascals_to_counts",
    "merge_on_grid", "CycleSet", "SteadyState", "segment_cycles", "normalize_cycles",
    "ensemble_stats", "steady_state_cov", "FilterSpec", "lowpass_zero_phase",
    "offset_by_rest", "resample", "LinFit", "ExpFit", "linfit", "expfit",
    "condition_correlation", "PadParams", "PadState", "SessionData", "run_scenario",
    "step_pad", "Session", "read_session", "write_session", "FactorialTable",
    "AnovaResult", "PosthocResult", "anova2", "f_cdf", "posthoc", "Frame",
    "FrameDecoder", "Publisher", "StreamHealth", "crc16", "encode_frame",
    "decode_frame", "decode_stream", "emulate_device",
]
