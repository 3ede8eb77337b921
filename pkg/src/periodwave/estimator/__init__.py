from .checkpoint import load_checkpoint, save_checkpoint
from .config import (
    EstimatorConfig,
    FreeUParams,
    MelEncoderConfig,
    full_band_config,
    multiband_config,
    tiny_config,
)
from .model import CondFeatures, MelEncoder, PeriodWaveEstimator, count_parameters, init_estimator

__all__ = [
    "CondFeatures",
    "EstimatorConfig",
    "FreeUParams",
    "MelEncoder",
    "MelEncoderConfig",
    "PeriodWaveEstimator",
    "count_parameters",
    "full_band_config",
    "init_estimator",
    "load_checkpoint",
    "multiband_config",
    "save_checkpoint",
    "tiny_config",
]
