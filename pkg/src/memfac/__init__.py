"""Exact multitime correlation functions for non-Markovian open quantum
systems with a finite memory time.

The engine propagates a Markovian embedding (system plus damped auxiliary
mode) only over short windows of length set by the environment memory
time, and reconstructs correlation functions with arbitrary time
arguments from those windows, a stationary time-local map, and its
spectral decomposition.  A brute-force composite-space oracle and a
conventional quantum-regression engine are included for validation and
comparison.
"""

from .constants import HBAR, KB
from .liouville import (
    LiouvilleSpace,
    LiouvilleVector,
    OperatorBasis,
    SuperOperator,
    devectorize,
    embed_composite,
    env_injection_matrix,
    env_trace_matrix,
    liouvillian,
    partial_trace_env,
    sandwich_superop,
    trace_vector,
    vectorize,
)

__version__ = "0.1.0"
