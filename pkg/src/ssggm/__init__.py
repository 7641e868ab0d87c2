"""Bayesian structure learning for Gaussian graphical models under a discrete spike-and-slab prior."""
from __future__ import annotations

from ._backend import available as available_backends
from .core import (
    CapabilityError,
    ColumnModel,
    ConfigError,
    Dataset,
    DegenerateDataError,
    ElicitationError,
    GenerationError,
    Hyperparams,
    InitializationError,
    NotPositiveDefiniteError,
    NumericalError,
    PrecisionState,
    SsggmError,
    load_csv,
    make_rng,
    standardize,
    validate_hyperparams,
)
from .samplers import Chain, ChainOutput, SamplerConfig, run_chain

__version__ = "0.1.0"
