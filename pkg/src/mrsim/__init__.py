"""Seeded simulator for MapReduce steps on a modeled p-PE distributed-memory machine."""

from .core import (
    EmittedPair,
    InputElement,
    ReduceRule,
    StepParameters,
    StepTrace,
    WorkloadError,
    WorkloadStep,
    compute_parameters,
    expand_step,
    load_workload,
    save_workload,
    sequential_reference,
)
from .machine import CommLedger, ExecutionReport, MachineConfig, exchange, hash_key, superstep_cost
from .pipeline import RunConfig, run_pipeline, run_step
from .workloads import GeneratorSpec, chain, generate

__version__ = "0.1.0"

__all__ = [
    "CommLedger",
    "EmittedPair",
    "ExecutionReport",
    "GeneratorSpec",
    "InputElement",
    "MachineConfig",
    "ReduceRule",
    "RunConfig",
    "StepParameters",
    "StepTrace",
    "WorkloadError",
    "WorkloadStep",
    "chain",
    "compute_parameters",
    "exchange",
    "expand_step",
    "generate",
    "hash_key",
    "load_workload",
    "run_pipeline",
    "run_step",
    "save_workload",
    "sequential_reference",
    "superstep_cost",
]
