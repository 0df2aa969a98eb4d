# Copyright 2026 The ANP Authors
# SPDX-License-Identifier: Apache-2.0
"""Neural processes with cross-attention."""

from ._anp import (
    CheckpointError,
    CholeskyError,
    ConfigError,
    IdxError,
    NeuralProcess,
    Trainer,
    gp_posterior,
    load_idx,
    make_grid,
    oracle_nll,
    parse_config,
    sample_curve,
    sample_episode,
    se_kernel,
    synthetic_shapes,
    thompson_bo,
)

__all__ = [
    "CheckpointError",
    "CholeskyError",
    "ConfigError",
    "IdxError",
    "NeuralProcess",
    "Trainer",
    "gp_posterior",
    "load_idx",
    "make_grid",
    "oracle_nll",
    "parse_config",
    "sample_curve",
    "sample_episode",
    "se_kernel",
    "synthetic_shapes",
    "thompson_bo",
]
