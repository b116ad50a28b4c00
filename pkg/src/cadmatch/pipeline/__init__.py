"""Experiment orchestration: config, resumable stages, corpus transfer."""

from .config import (
    DatasetSection,
    ExperimentConfig,
    RetrievalSection,
    SamplingSection,
    config_hash,
    load_config,
)
from .stages import STAGES, run_all, run_stage
from .transfer import pretrain_then_transfer

__all__ = [
    "DatasetSection",
    "ExperimentConfig",
    "RetrievalSection",
    "STAGES",
    "SamplingSection",
    "config_hash",
    "load_config",
    "pretrain_then_transfer",
    "run_all",
    "run_stage",
]
