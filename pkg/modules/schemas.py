"""
Pydantic Models for run configuration and file formats
"""

import json
import os
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, ValidationError

from .errors import ConfigError
from .planner import default_pba_budget
from .ts import CostKind, TsPolicy


# ========================================
# ENUMS
# ========================================

class PlanMode(str, Enum):
    CENTRAL = "central"
    SPECIALIZED = "specialized"
    HLNC = "hlnc"


class SeedMode(str, Enum):
    BASIS = "basis"
    RANDOM = "random"


# ========================================
# RUN CONFIGURATION
# ========================================

class NetworkSection(BaseModel):
    """Random geometric network generation"""
    n: int = Field(20, ge=1, description="Number of sensors")
    r: float = Field(6.0, gt=0, description="Communication radius")
    box: List[float] = Field([20.0, 15.0], min_length=2, max_length=2, description="Region width and height")
    seed: int = Field(0, description="Generator seed")
    require_connected: bool = Field(True, description="Resample until the graph is connected")
    max_tries: int = Field(200, ge=1, description="Resampling attempts")


class CommandSection(BaseModel):
    """Command layer for hierarchical planning"""
    K: int = Field(10, ge=1, description="Number of command nodes")
    R: float = Field(8.0, gt=0, description="Command radius")
    seed: int = Field(0, description="k-means seed")
    escalate_k: bool = Field(False, description="Retry with K+1 while coverage fails")
    k_hop: Optional[int] = Field(None, ge=0, description="Use k-hop command subgraphs instead of R-balls")
    max_period: int = Field(200000, ge=1, description="Cap on the stitched lasso length")


class PlannerSection(BaseModel):
    """Centralized planner"""
    mode: PlanMode = Field(PlanMode.CENTRAL, description="Planner to run")
    cost: CostKind = Field(CostKind.JACCARD, description="Transition cost")
    policy: TsPolicy = Field(TsPolicy.NON_INTERFERING, description="Product TS policy")
    liveness_only: bool = Field(True, description="Liveness-only automaton under the non_interfering policy")
    fairness: bool = Field(False, description="Conjoin link fairness into the specification")
    pba_budget: int = Field(default_factory=default_pba_budget, ge=1, description="Product automaton state budget")
    nba_budget: int = Field(50000, ge=1, description="Automaton translation state budget")

    class Config:
        use_enum_values = True


class ConsensusSection(BaseModel):
    epsilon: float = Field(0.5, gt=0, lt=1, description="Consensus step size")
    T: int = Field(200, ge=1, description="Simulation horizon")
    seed_mode: SeedMode = Field(SeedMode.BASIS, description="Initial state seeding")
    seed: int = Field(0, description="Initial state seed")
    window: Optional[int] = Field(None, ge=1, description="Joint connectivity window")
    paired: bool = Field(False, description="Also simulate the sequential schedule")
    allow_infeasible: bool = Field(False, description="Simulate schedules that break non-interference")

    class Config:
        use_enum_values = True


class OracleSection(BaseModel):
    P: int = Field(2, ge=1, description="Maximum prefix length")
    S: int = Field(4, ge=1, description="Maximum suffix length")
    max_edges: int = Field(4, ge=1, description="Largest network the oracle accepts")


class BenchSection(BaseModel):
    edges: List[int] = Field([2, 3, 4, 5, 6, 7, 8], description="Path lengths for the centralized sweep")
    K_values: List[int] = Field([2, 3, 4, 5, 6, 7, 8], description="Corridor cells for the hierarchical sweep")
    full_phi: bool = Field(True, description="Benchmark the complete-policy pipeline")
    budget: int = Field(200000, ge=1, description="PBA budget per centralized run")


class OutputSection(BaseModel):
    directory: str = Field("output", description="Directory for generated files")


class LoggingSection(BaseModel):
    level: str = Field("INFO", description="Log level")
    file_enabled: bool = Field(True, description="Also log to logs/lnc_YYYYMMDD.log")
    directory: str = Field("logs", description="Log directory")


class RunConfig(BaseModel):
    """Resolved configuration of one CLI run"""
    network: NetworkSection = Field(default_factory=NetworkSection)
    command: CommandSection = Field(default_factory=CommandSection)
    planner: PlannerSection = Field(default_factory=PlannerSection)
    consensus: ConsensusSection = Field(default_factory=ConsensusSection)
    oracle: OracleSection = Field(default_factory=OracleSection)
    bench: BenchSection = Field(default_factory=BenchSection)
    output: OutputSection = Field(default_factory=OutputSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)

    class Config:
        use_enum_values = True


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Unset (None) override leaves keep the base value, even when the base lacks the section"""
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict):
            current = out.get(key)
            merged = _deep_merge(current if isinstance(current, dict) else {}, value)
            if merged or key in out:
                out[key] = merged
        elif value is not None:
            out[key] = value
    return out


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Built-in defaults, then the JSON file, then overrides (CLI flags).

    Raises:
        ConfigError: unreadable file
        ValidationError: values out of range
    """
    data: Dict[str, Any] = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"Config file not found: {path}")
        try:
            with open(path, 'r') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    data = _deep_merge(data, overrides or {})
    return RunConfig(**data)


# ========================================
# FILE FORMATS
# ========================================

class ScheduleFile(BaseModel):
    """Schedule JSON: prefix/suffix lists of [i, j] links"""
    prefix: List[List[List[int]]] = Field(..., description="Prefix elements")
    suffix: List[List[List[int]]] = Field(..., min_length=1, description="Suffix elements")
    cost: Optional[float] = Field(None, ge=0, description="Plan cost")


class SensorNode(BaseModel):
    id: int
    x: float
    y: float


class CommandCenter(BaseModel):
    id: int
    x: float
    y: float


class NetworkFile(BaseModel):
    nodes: List[SensorNode]
    r: float = Field(..., gt=0)
    centers: Optional[List[CommandCenter]] = None
    R: Optional[float] = Field(None, gt=0)


class PlanReportFile(BaseModel):
    """Plan report JSON; flat planners fill the product sizes, hlnc the command layer"""
    mode: PlanMode = Field(..., description="Planner that produced the schedule")
    cost: float = Field(..., ge=0, description="Plan cost of the written schedule")
    efficiency_pct: float = Field(..., ge=0, le=100, description="Mean share of links active per step")
    planner: Optional[str] = None
    pba_states: Optional[int] = Field(None, ge=0)
    accepting: Optional[int] = Field(None, ge=0)
    sccs: Optional[int] = Field(None, ge=0)
    ts_states: Optional[int] = Field(None, ge=0)
    nba_states: Optional[int] = Field(None, ge=0)
    wallclock_ms: Optional[float] = Field(None, ge=0)
    K: Optional[int] = Field(None, ge=1, description="Command nodes")
    e_max: Optional[int] = Field(None, ge=0, description="Largest local subgraph, in links")
    rho: Optional[Dict[str, Any]] = Field(None, description="Command activation schedule")
    commands: Optional[List[Dict[str, Any]]] = Field(None, description="Per-command subgraph and local plan")
    stitched: Optional[Dict[str, Any]] = None
    timings_ms: Optional[Dict[str, float]] = None

    class Config:
        use_enum_values = True


class SimulationSummary(BaseModel):
    """Summary JSON of a consensus run"""
    converged: bool
    clusters: int = Field(..., ge=0)
    final_spread: float = Field(..., ge=0)
    efficiency_pct: Optional[float] = Field(None, ge=0)
    feasible: bool = True
    steps: int = Field(..., ge=1)
    joint_connectivity: Optional[bool] = None
    sequential: Optional['SimulationSummary'] = Field(None, description="Paired run along the sequential schedule")


__all__ = [
    'PlanMode', 'SeedMode', 'CostKind', 'TsPolicy', 'RunConfig', 'load_run_config', 'ScheduleFile',
    'NetworkFile', 'PlanReportFile', 'SimulationSummary', 'ValidationError',
]
