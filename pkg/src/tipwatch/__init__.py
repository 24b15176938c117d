"""Early-warning indicators for tipping from sliding-window ARMA model selection."""

__version__ = "0.1.0"

from .arma import ArmaModel, FittedArma, fit, simulate
from .series import TimeSeries, load_csv
from .upsilon import SelectionConfig, WindowResult, run_indicator, select_best

__all__ = [
    "ArmaModel",
    "FittedArma",
    "SelectionConfig",
    "TimeSeries",
    "WindowResult",
    "fit",
    "load_csv",
    "run_indicator",
    "select_best",
    "simulate",
]
