"""Carbon-aware EV charging scheduling toolkit."""

from .carbon import CarbonIntensitySeries, compute_intensity, seasonal_profile
from .ingest import (ChargingSession, GridMixSeries, LoadForecastSeries,
                     parse_grid_mix, parse_sessions, synth_sessions)
from .scheduler import (ScheduleResult, StationConfig, build_lp,
                        carbon_schedule, select_lambda, solve, tou_schedule)
from .timegrid import TimeGrid

__all__ = [
    "CarbonIntensitySeries", "ChargingSession", "GridMixSeries",
    "LoadForecastSeries", "ScheduleResult", "StationConfig", "TimeGrid",
    "build_lp", "carbon_schedule", "compute_intensity", "parse_grid_mix",
    "parse_sessions", "seasonal_profile", "select_lambda", "solve",
    "synth_sessions", "tou_schedule",
]

__version__ = "0.1.0"
