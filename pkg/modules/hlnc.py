"""
Hierarchical LNC Module

Command-node activation planning under psi, optimal local planning on each
command subgraph, and stitching of the local plans into one global
schedule. Inactive command nodes freeze their local-plan pointers and
active ones advance one element per step.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from .errors import CoverageError, PlanningError
from .ltl import build_all_fairness, build_command_liveness, build_phi, build_psi, conj, eval_lasso, node_prop
from .network import (CommandLayer, LinkId, SensorNetwork, as_graph, build_command_layer, connected_components,
                      coverage_check, greedy_k_hop_anchors, interferes, k_hop_command_layer,
                      local_subgraph, uncovered_edges)
from .planner import PlannerOptions, PlanReport, plan_centralized_outcome, synthesize
from .ts import CostFn, CostKind, Schedule, build_command_ts, fold_to_lasso

logger = logging.getLogger(__name__)

DEFAULT_MAX_PERIOD = 200000


@dataclass
class CommandPlan:
    """Activation trace rho of the command nodes"""
    rho: Schedule
    components: List[List[int]]
    reports: List[PlanReport] = field(default_factory=list)

    def active_at(self, t: int):
        return self.rho.at(t)


@dataclass
class HierarchicalPlan:
    rho: CommandPlan
    layer: CommandLayer
    local_plans: Dict[int, Schedule]
    stitched: Schedule
    local_reports: Dict[int, PlanReport] = field(default_factory=dict)
    timings_ms: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, cost: Optional[float] = None) -> Dict[str, Any]:
        commands = []
        for j in sorted(self.local_plans):
            g_j = self.layer.subgraphs[j]
            entry = {
                'j': j,
                'vertices': sorted(int(v) for v in g_j.nodes()),
                'edges': [[e.i, e.j] for e in sorted(LinkId.of(u, v) for u, v in g_j.edges())],
                'tau': self.local_plans[j].to_dict(),
            }
            if j in self.local_reports:
                entry['report'] = self.local_reports[j].to_dict()
            commands.append(entry)
        return {
            'rho': self.rho.rho.to_dict(),
            'commands': commands,
            'stitched': self.stitched.to_dict(cost),
            'timings_ms': {k: round(v, 3) for k, v in self.timings_ms.items()},
        }


@dataclass
class FeasibilityReport:
    """Outcome of the non-interference / liveness audit of a schedule"""
    ok: bool
    interference: Optional[Dict[str, Any]] = None
    uncovered: List[LinkId] = field(default_factory=list)
    unknown: List[Any] = field(default_factory=list)
    ltl_ok: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            'ok': self.ok,
            'interference': self.interference,
            'uncovered': [[e.i, e.j] for e in self.uncovered],
            'unknown': [list(x) if isinstance(x, tuple) else x for x in self.unknown],
            'ltl_ok': self.ltl_ok,
        }

    def summary(self) -> str:
        if self.ok:
            return "feasible"
        if self.unknown:
            return f"schedule activates links not in the network: {self.unknown}"
        if self.interference:
            i = self.interference
            return f"interference at t={i['t']}: links {i['links'][0]} and {i['links'][1]} co-active"
        if self.uncovered:
            return f"links never active in the suffix: {[tuple(e) for e in self.uncovered]}"
        return "schedule violates the link specification"


# ========================================
# COMMAND ACTIVATIONS
# ========================================

def merge_lassos(schedules: Sequence[Schedule], max_period: int = DEFAULT_MAX_PERIOD) -> Schedule:
    """Pointwise union of several lassos, folded back into closed form"""
    if len(schedules) == 1:
        return schedules[0].closed()
    if not schedules:
        return Schedule((frozenset(),), (frozenset(),))

    def step(config):
        element = frozenset().union(*(s.element(p) for s, p in zip(schedules, config)))
        return element, tuple(s.successor(p) for s, p in zip(schedules, config))

    horizon = 1
    for s in schedules:
        horizon *= s.word_length
    merged, _ = fold_to_lasso(tuple(0 for _ in schedules), step, min(horizon, max_period))
    return merged


def plan_command_activations(g_cmd: nx.Graph, cost: Optional[Callable] = None,
                             budget: Optional[int] = None) -> CommandPlan:
    """
    Optimal rho satisfying psi, planned separately on each G_cmd component.

    Command states are independent node sets of G_cmd, so the automaton
    only has to enforce that every node recurs.
    """
    cost = cost or CostFn.jaccard()
    components = connected_components(g_cmd)
    if not components:
        return CommandPlan(Schedule((frozenset(),), (frozenset(),)), [])
    parts: List[Schedule] = []
    reports: List[PlanReport] = []
    for members in components:
        sub = g_cmd.subgraph(members)
        ts = build_command_ts(sub, state_budget=budget or 10 ** 6)
        outcome = synthesize(ts, build_command_liveness(sub), cost, budget, planner='command')
        parts.append(outcome.schedule)
        reports.append(outcome.report)
    rho = merge_lassos(parts)

    prefix, suffix = rho.word(node_prop)
    if not eval_lasso(build_psi(g_cmd), prefix, suffix):
        raise PlanningError("Command activation plan violates psi")
    logger.info(f"Command plan: {len(components)} component(s), period {rho.period}")
    return CommandPlan(rho, components, reports)


# ========================================
# LOCAL PLANS AND STITCHING
# ========================================

def plan_local_subgraph(g_j: nx.Graph, cost: Optional[Callable] = None,
                        options: Optional[PlannerOptions] = None) -> Tuple[Schedule, Optional[PlanReport]]:
    if g_j.number_of_edges() == 0:
        return Schedule((frozenset(),), (frozenset(),)), None
    outcome = plan_centralized_outcome(g_j, cost, options)
    return outcome.schedule, outcome.report


def plan_local(net: SensorNetwork, c_j, R: float, cost: Optional[Callable] = None,
               options: Optional[PlannerOptions] = None) -> Schedule:
    """Optimal schedule for phi restricted to the subgraph within R of c_j"""
    schedule, _ = plan_local_subgraph(local_subgraph(net, c_j, R), cost, options)
    return schedule


def stitch(rho: Schedule, local_plans: Dict[int, Schedule], horizon: Optional[int] = None,
           max_period: int = DEFAULT_MAX_PERIOD) -> Schedule:
    """
    Fold the hierarchical execution into a lasso.

    The configuration is (position in rho, pointer into every local plan);
    at each step the active command nodes emit their current local element
    and advance, the others keep their pointer.

    Raises:
        HorizonError: no repeated configuration within the horizon
    """
    order = sorted(local_plans)
    missing = sorted(rho.items() - set(order))
    if missing:
        raise PlanningError(f"No local plan for command nodes {missing}")
    plans = [local_plans[j] for j in order]
    slot = {j: k for k, j in enumerate(order)}

    def step(config):
        pos, pointers = config
        active = rho.element(pos)
        element = frozenset()
        nxt = list(pointers)
        for j in active:
            k = slot[j]
            element |= plans[k].element(pointers[k])
            nxt[k] = plans[k].successor(pointers[k])
        return element, (rho.successor(pos), tuple(nxt))

    if horizon is None:
        horizon = rho.word_length
        for plan in plans:
            horizon *= plan.word_length
        horizon = min(horizon, max_period)
    stitched, _ = fold_to_lasso((0, tuple(0 for _ in plans)), step, horizon)
    logger.debug(f"Stitched schedule: prefix {len(stitched.prefix)}, period {stitched.period}")
    return stitched


# ========================================
# AUDIT
# ========================================

def audit_feasibility(net, schedule: Schedule, fairness: bool = False) -> FeasibilityReport:
    """
    Check non-interference at every distinct step, suffix coverage of every
    link, and the full formula on the lasso word.
    """
    graph = as_graph(net)
    edges = {LinkId.of(u, v) for u, v in graph.edges()}
    report = FeasibilityReport(ok=True)
    unknown = set()

    for t in range(schedule.word_length):
        element = schedule.element(t)
        unknown.update(x for x in element if x not in edges)
        if report.interference is None:
            active = sorted(x for x in element if x in edges)
            for a in range(len(active)):
                clash = [b for b in active[a + 1:] if interferes(active[a], b)]
                if clash:
                    report.interference = {
                        't': t,
                        'links': [list(active[a]), list(clash[0])],
                    }
                    break

    report.unknown = sorted(unknown, key=repr)
    in_suffix = schedule.suffix_items()
    report.uncovered = sorted(e for e in edges if e not in in_suffix)

    if not report.unknown:
        formula = build_phi(graph)
        if fairness:
            formula = conj([formula, build_all_fairness(graph)])
        prefix, suffix = schedule.word()
        report.ltl_ok = eval_lasso(formula, prefix, suffix)
    else:
        report.ltl_ok = False

    report.ok = (report.ltl_ok and report.interference is None and not report.uncovered
                 and not report.unknown)
    if not report.ok:
        logger.debug(f"Audit failed: {report.summary()}")
    return report


# ========================================
# ALGORITHM
# ========================================

def command_layer_cost(net, layer: CommandLayer, cost: Optional[Callable]) -> Callable:
    """
    Cost on sets of command nodes, of the same kind as the link cost.

    Hausdorff uses the command center coordinates; a link table has no
    meaning for command nodes, so it falls back to Jaccard. Plain callables
    are used as given.
    """
    if cost is None:
        return CostFn.jaccard()
    if not isinstance(cost, CostFn):
        return cost
    kind = CostKind(cost.kind)
    if kind == CostKind.HAUSDORFF:
        if layer.centers.ndim == 2 and layer.centers.shape[1] == 2 and isinstance(net, SensorNetwork):
            C = layer.centers
            return CostFn.hausdorff(lambda j: (C[j],), net.diameter)
        logger.info("Command layer without coordinates: using Jaccard for the command plan")
        return CostFn.jaccard()
    if kind == CostKind.TABLE:
        logger.info("Cost table covers link sets only: using Jaccard for the command plan")
        return CostFn.jaccard()
    return cost


def _plan_with_layer(net, layer: CommandLayer, cost: Optional[Callable], options: Optional[PlannerOptions],
                     max_period: int, started: float) -> HierarchicalPlan:
    timings: Dict[str, float] = {}

    t0 = time.perf_counter()
    command_plan = plan_command_activations(layer.graph, command_layer_cost(net, layer, cost),
                                            budget=options.pba_budget if options else None)
    timings['command_plan'] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    local_plans: Dict[int, Schedule] = {}
    local_reports: Dict[int, PlanReport] = {}
    for j in sorted(layer.subgraphs):
        schedule, report = plan_local_subgraph(layer.subgraphs[j], cost, options)
        local_plans[j] = schedule
        layer.graph.nodes[j]['tau'] = schedule
        if report is not None:
            local_reports[j] = report
        logger.debug(f"Command node {j}: |E_j|={layer.subgraphs[j].number_of_edges()}, "
                     f"period {schedule.period}")
    timings['local_plans'] = (time.perf_counter() - t0) * 1000.0

    t0 = time.perf_counter()
    stitched = stitch(command_plan.rho, local_plans, max_period=max_period)
    timings['stitch'] = (time.perf_counter() - t0) * 1000.0

    audit = audit_feasibility(net, stitched)
    if not audit.ok:
        raise PlanningError(f"Stitched schedule failed its audit: {audit.summary()}")
    timings['total'] = (time.perf_counter() - started) * 1000.0
    logger.info(f"HLNC plan: K={layer.K}, e_max={layer.e_max()}, stitched period {stitched.period}, "
                f"{timings['total']:.1f} ms")
    return HierarchicalPlan(command_plan, layer, local_plans, stitched, local_reports, timings)


def plan_hlnc(net: SensorNetwork, centers, R: float, cost: Optional[Callable] = None,
              options: Optional[PlannerOptions] = None, max_period: int = DEFAULT_MAX_PERIOD) -> HierarchicalPlan:
    """
    Hierarchical plan for a geometric command layer.

    Raises:
        CoverageError: the centers and R do not certify coverage
    """
    started = time.perf_counter()
    eps = coverage_check(net, centers, R)
    layer = build_command_layer(net, centers, R)
    if eps is None:
        missing = uncovered_edges(net, layer)
        detail = f"uncovered links {[tuple(e) for e in missing]}" if missing else "no coverage witness"
        raise CoverageError(f"Command layer does not certify coverage ({detail}); raise K or R", missing)
    return _plan_with_layer(net, layer, cost, options, max_period, started)


def plan_hlnc_k_hop(net, k: int, anchors: Optional[Sequence[int]] = None, cost: Optional[Callable] = None,
                    options: Optional[PlannerOptions] = None,
                    max_period: int = DEFAULT_MAX_PERIOD) -> HierarchicalPlan:
    """Hierarchical plan with command subgraphs given by k-hop neighborhoods"""
    started = time.perf_counter()
    graph = as_graph(net)
    anchors = list(anchors) if anchors is not None else greedy_k_hop_anchors(graph, k)
    layer = k_hop_command_layer(graph, anchors, k)
    covered = layer.covered_edges()
    missing = sorted(LinkId.of(u, v) for u, v in graph.edges() if LinkId.of(u, v) not in covered)
    if missing:
        raise CoverageError(f"k-hop layer leaves links uncovered: {[tuple(e) for e in missing]}", missing)
    logger.info(f"k-hop command layer: k={k}, anchors={anchors}")
    return _plan_with_layer(net, layer, cost, options, max_period, started)
