"""Asynchronous decentralized learning simulator with push-sum gossip
and clustered weight compression."""

from .buffer import MessageBuffer, ProtocolViolation
from .clustering import BACKEND, lloyd_zero_anchored
from .codec import CentroidPayload, CentroidTable, comm_cost_bits, wcp_decode, wcp_encode
from .config import ExperimentConfig, ScheduleSpec, TopologySpec
from .data import DataSpec, generate, local_eval
from .engine import RunResult, Simulation, run_experiment, staleness_report
from .ledger import LemmaCheckError, SystemLedger
from .objectives import make_objective
from .params import LayerLayout, ParamVector, PruneMask
from .pushsum import DecodedMessage, PushSumState, aggregate, split_mass
from .trainer import TrainerConfig, local_update

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CentroidPayload",
    "CentroidTable",
    "DataSpec",
    "DecodedMessage",
    "ExperimentConfig",
    "LayerLayout",
    "LemmaCheckError",
    "MessageBuffer",
    "ParamVector",
    "ProtocolViolation",
    "PruneMask",
    "PushSumState",
    "RunResult",
    "ScheduleSpec",
    "Simulation",
    "SystemLedger",
    "TopologySpec",
    "TrainerConfig",
    "aggregate",
    "comm_cost_bits",
    "generate",
    "lloyd_zero_anchored",
    "local_eval",
    "local_update",
    "make_objective",
    "run_experiment",
    "split_mass",
    "staleness_report",
    "wcp_decode",
    "wcp_encode",
]
