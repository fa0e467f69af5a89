"""Multi-sample inference and online learning for GLM spiking networks."""

from .filters import FilterBank, TraceState, raised_cosine_bank
from .inference import (VoteTally, classify, decision_entropy, exact_majority_error,
                        hoeffding_bound, majority, rate_decode)
from .learners import Learner, LearnerConfig, comm_load, train_presentation
from .metrics import PredictionRecord, confidence, ece, grouped_entropy
from .network import (ModelParams, Network, RunState, Topology, init_params, run_clamped,
                      run_free, zero_params)
from .objectives import (cross_entropy, estimate_log_loss, log_marginal_estimate,
                         softmax_weights, update_log_weights)
from .raster import LabeledExample, SpikeRaster, parse_raster, write_raster

__all__ = [
    "FilterBank",
    "TraceState",
    "raised_cosine_bank",
    "VoteTally",
    "classify",
    "decision_entropy",
    "exact_majority_error",
    "hoeffding_bound",
    "majority",
    "rate_decode",
    "Learner",
    "LearnerConfig",
    "comm_load",
    "train_presentation",
    "PredictionRecord",
    "confidence",
    "ece",
    "grouped_entropy",
    "ModelParams",
    "Network",
    "RunState",
    "Topology",
    "init_params",
    "run_clamped",
    "run_free",
    "zero_params",
    "cross_entropy",
    "estimate_log_loss",
    "log_marginal_estimate",
    "softmax_weights",
    "update_log_weights",
    "LabeledExample",
    "SpikeRaster",
    "parse_raster",
    "write_raster",
]

__version__ = "0.1.0"
