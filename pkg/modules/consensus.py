"""
Consensus Module for the LNC planner

Laplacian consensus over the switching graph induced by a link schedule,
with joint-connectivity, liveness and efficiency diagnostics.
"""

import logging
from dataclasses import dataclass, field
from math import lcm
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence

import networkx as nx
import numpy as np
import pandas as pd

from .errors import ConsensusError
from .ltl import build_liveness, eval_lasso
from .network import LinkId, as_graph
from .ts import Schedule

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.5
CLUSTER_GAP = 1e-3
CONVERGENCE_TOL = 1e-6


def _check_epsilon(epsilon: float):
    if not 0.0 < epsilon < 1.0:
        raise ConsensusError(f"Step size epsilon must lie in (0, 1), got {epsilon}")


# ========================================
# UPDATE RULES
# ========================================

def laplacian(n: int, active_edges: Iterable[Sequence[int]]) -> np.ndarray:
    """Un-normalized Laplacian D - A of the active subgraph on n nodes"""
    L = np.zeros((n, n))
    for i, j in active_edges:
        L[i, j] -= 1.0
        L[j, i] -= 1.0
        L[i, i] += 1.0
        L[j, j] += 1.0
    return L


def is_matching(active_edges: Iterable[Sequence[int]]) -> bool:
    """At most one active link incident to every node"""
    seen = set()
    for i, j in active_edges:
        if i in seen or j in seen:
            return False
        seen.update((i, j))
    return True


def step(y: np.ndarray, active_edges: Iterable[Sequence[int]], epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """y - epsilon * L(t) y"""
    _check_epsilon(epsilon)
    y = np.asarray(y, dtype=float)
    active = list(active_edges)
    if not active:
        return y.copy()
    return y - epsilon * laplacian(len(y), active) @ y


def step_message_passing(y: np.ndarray, active_edges: Iterable[Sequence[int]],
                         epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """
    Per-node update: nodes without an active link keep their value, a node
    with one active link to j moves to (1 - epsilon) y_i + epsilon y_j.

    Raises:
        ConsensusError: some node has more than one active link
    """
    _check_epsilon(epsilon)
    y = np.asarray(y, dtype=float)
    partner: Dict[int, int] = {}
    for i, j in active_edges:
        if i in partner or j in partner:
            raise ConsensusError(f"Node with several active links at link ({i}, {j})")
        partner[i] = j
        partner[j] = i
    out = y.copy()
    for i, j in partner.items():
        out[i] = (1.0 - epsilon) * y[i] + epsilon * y[j]
    return out


# ========================================
# SWITCHING GRAPH
# ========================================

class SwitchingGraph:
    """Active subgraph G(t) of a base network under a schedule"""

    def __init__(self, net, schedule: Schedule):
        self.base = as_graph(net)
        self.schedule = schedule
        edges = {LinkId.of(u, v) for u, v in self.base.edges()}
        unknown = sorted(schedule.items() - edges)
        if unknown:
            raise ConsensusError(f"Schedule activates links missing from the network: {unknown}")

    def edges_at(self, t: int) -> FrozenSet[LinkId]:
        return self.schedule.at(t)

    def graph_at(self, t: int) -> nx.Graph:
        return self.base.edge_subgraph(self.edges_at(t)).copy()

    def vertices_at(self, t: int) -> FrozenSet[int]:
        return frozenset(v for e in self.edges_at(t) for v in e)

    def neighbors_at(self, i: int, t: int) -> List[int]:
        return sorted(e.j if e.i == i else e.i for e in self.edges_at(t) if i in e)

    def union_graph(self, t0: int, t1: int) -> nx.Graph:
        """Union of G(t) for t0 <= t < t1 spanning every base node"""
        g = nx.Graph()
        g.add_nodes_from(self.base.nodes())
        for t in range(t0, t1):
            g.add_edges_from(self.edges_at(t))
        return g


# ========================================
# SIMULATION
# ========================================

@dataclass
class ConsensusTrajectory:
    """States y(0..T) with per-step spread and sum"""
    states: np.ndarray
    epsilon: float
    schedule: Schedule
    feasible: bool = True
    fallback_steps: List[int] = field(default_factory=list)

    @property
    def T(self) -> int:
        return len(self.states) - 1

    @property
    def spread(self) -> np.ndarray:
        return self.states.max(axis=1) - self.states.min(axis=1)

    @property
    def sums(self) -> np.ndarray:
        return self.states.sum(axis=1)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_spread(self) -> float:
        return float(self.spread[-1])

    def converged(self, tol: float = CONVERGENCE_TOL) -> bool:
        return self.final_spread < tol

    def clusters(self, gap: float = CLUSTER_GAP) -> List[List[int]]:
        return consensus_clusters(self.final, gap)

    def to_frame(self) -> pd.DataFrame:
        n = self.states.shape[1]
        df = pd.DataFrame(self.states, columns=[f"y_{i}" for i in range(n)])
        df.insert(0, 't', np.arange(len(self.states)))
        df['spread'] = self.spread
        df['sum'] = self.sums
        return df

    def summary(self, efficiency_pct: Optional[float] = None) -> Dict[str, Any]:
        return {
            'converged': self.converged(),
            'clusters': len(self.clusters()),
            'final_spread': self.final_spread,
            'efficiency_pct': efficiency_pct,
            'feasible': self.feasible,
            'steps': self.T,
        }


def initial_state(n: int, mode: str = 'basis', seed: int = 0, index: Optional[int] = None) -> np.ndarray:
    """
    Seed vector y(0).

    Args:
        mode: 'basis' puts 1 on one node (index, or a seeded choice), 'random'
            draws uniform values in [0, 1)
    """
    rng = np.random.default_rng(seed)
    if mode == 'basis':
        y = np.zeros(n)
        if n:
            y[index if index is not None else int(rng.integers(n))] = 1.0
        return y
    if mode == 'random':
        return rng.uniform(0.0, 1.0, size=n)
    raise ConsensusError(f"Unknown seed mode: {mode}")


def run(net, schedule: Schedule, y0, epsilon: float = DEFAULT_EPSILON, T: int = 100,
        allow_infeasible: bool = False) -> ConsensusTrajectory:
    """
    T consensus steps along the schedule, prefix first then the suffix cycled.

    Raises:
        ConsensusError: dimension mismatch, T < 1, or an infeasible schedule
            without allow_infeasible
    """
    _check_epsilon(epsilon)
    if T < 1:
        raise ConsensusError(f"Horizon T must be >= 1, got {T}")
    graph = as_graph(net)
    y = np.asarray(y0, dtype=float)
    if y.shape != (graph.number_of_nodes(),):
        raise ConsensusError(f"Initial state has shape {y.shape}, network has {graph.number_of_nodes()} nodes")
    switching = SwitchingGraph(graph, schedule)

    feasible_positions = {t: is_matching(schedule.element(t)) for t in range(schedule.word_length)}
    if not all(feasible_positions.values()) and not allow_infeasible:
        raise ConsensusError("Schedule activates two links at one node; pass allow_infeasible to simulate anyway")

    states = np.empty((T + 1, len(y)))
    states[0] = y
    fallback: List[int] = []
    for t in range(T):
        position = t if t < len(schedule.prefix) else len(schedule.prefix) + (t - len(schedule.prefix)) % schedule.period
        if not feasible_positions[position]:
            fallback.append(t)
        y = step(y, switching.edges_at(t), epsilon)
        states[t + 1] = y
    if fallback:
        logger.warning(f"Matrix Laplacian fallback on {len(fallback)} infeasible step(s); run flagged")
    return ConsensusTrajectory(states, epsilon, schedule, feasible=not fallback, fallback_steps=fallback)


def consensus_clusters(values, gap: float = CLUSTER_GAP) -> List[List[int]]:
    """Single-linkage grouping of node values split at gaps larger than gap"""
    y = np.asarray(values, dtype=float)
    if not len(y):
        return []
    order = np.argsort(y, kind='stable')
    clusters = [[int(order[0])]]
    for prev, cur in zip(order[:-1], order[1:]):
        if y[cur] - y[prev] > gap:
            clusters.append([])
        clusters[-1].append(int(cur))
    return [sorted(c) for c in clusters]


# ========================================
# DIAGNOSTICS
# ========================================

def check_joint_connectivity(net, schedule: Schedule, window: int, max_repeats: int = 64) -> bool:
    """
    Every window of the suffix-periodic timeline has a connected spanning
    union; windows tile lcm(window, period) steps from the suffix start.

    Raises:
        ConsensusError: window < 1 or window > period * max_repeats
    """
    if window < 1:
        raise ConsensusError(f"Window must be >= 1, got {window}")
    if window > schedule.period * max_repeats:
        raise ConsensusError(f"Window {window} exceeds suffix period {schedule.period} x {max_repeats} repetitions")
    graph = as_graph(net)
    if graph.number_of_nodes() == 0 or not nx.is_connected(graph):
        return False
    switching = SwitchingGraph(graph, schedule)
    start = len(schedule.prefix)
    span = lcm(window, schedule.period)
    for t0 in range(start, start + span, window):
        if not nx.is_connected(switching.union_graph(t0, t0 + window)):
            logger.debug(f"Window starting at t={t0} is not connected")
            return False
    return True


def liveness_check(net, schedule: Schedule, method: str = 'direct') -> bool:
    """Every link appears in the suffix (direct) or the recurrence formula holds (ltl)"""
    graph = as_graph(net)
    if method == 'direct':
        active = schedule.suffix_items()
        return all(LinkId.of(u, v) in active for u, v in graph.edges())
    if method == 'ltl':
        prefix, suffix = schedule.word()
        return eval_lasso(build_liveness(graph), prefix, suffix)
    raise ValueError(f"Unknown liveness method: {method}")


def efficiency(schedule: Schedule, net) -> float:
    """Mean fraction of links active per suffix step, in percent"""
    m = as_graph(net).number_of_edges()
    if m == 0:
        return 0.0
    return 100.0 * float(np.mean([len(el) for el in schedule.suffix])) / m


def local_spread(states: np.ndarray, groups: Mapping[int, Iterable[int]]) -> np.ndarray:
    """Mean over groups of the within-group spread, per step"""
    columns = []
    for members in groups.values():
        idx = sorted(members)
        if len(idx) > 1:
            block = states[:, idx]
            columns.append(block.max(axis=1) - block.min(axis=1))
    if not columns:
        return np.zeros(len(states))
    return np.mean(columns, axis=0)


def compare_runs(net, schedules: Mapping[str, Schedule], y0, groups: Mapping[int, Iterable[int]],
                 epsilon: float = DEFAULT_EPSILON, T: int = 100) -> pd.DataFrame:
    """
    Paired simulation: global spread and mean per-subgraph spread for every
    named schedule, one row per step.
    """
    df = pd.DataFrame({'t': np.arange(T + 1)})
    for name, schedule in schedules.items():
        trajectory = run(net, schedule, y0, epsilon, T)
        df[f"{name}_global_spread"] = trajectory.spread
        df[f"{name}_local_spread"] = local_spread(trajectory.states, groups)
    return df
