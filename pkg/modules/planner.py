"""
Planner Module for the LNC planner

Centralized optimal synthesis: product Büchi automaton construction, SCC
analysis and minimum-cost lasso search, plus a specialized link-activation
planner that searches the non-interfering product TS directly.
"""

import heapq
import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Hashable, Iterable, List, Optional, Tuple, Union

import networkx as nx

from .errors import BudgetExceededError, InfeasibleError, PlanningError
from .ltl import (DEFAULT_NBA_BUDGET, Gba, Ltl, Nba, build_all_fairness, build_liveness, build_phi, conj,
                  eval_lasso, is_nnf, size, to_nnf, translate_to_gba)
from .network import as_graph, graph_edges
from .ts import CostFn, Element, ProductTs, Schedule, TsPolicy, build_product_ts, plan_cost

logger = logging.getLogger(__name__)

DEFAULT_PBA_BUDGET = 10 ** 6
COST_TOL = 1e-9

PbaState = Tuple[int, int]
Automaton = Union[Nba, Gba]


def default_pba_budget() -> int:
    """PBA state budget, overridable through LNC_PBA_BUDGET"""
    raw = os.getenv('LNC_PBA_BUDGET')
    if raw:
        try:
            value = int(raw)
            if value > 0:
                return value
        except ValueError:
            pass
        logger.warning(f"Ignoring invalid LNC_PBA_BUDGET={raw!r}")
    return DEFAULT_PBA_BUDGET


@dataclass
class PlannerOptions:
    """
    Options for the centralized pipeline.

    liveness_only only takes effect with the non_interfering policy, where
    the safety half of phi already holds for every TS state.
    """
    policy: TsPolicy = TsPolicy.NON_INTERFERING
    liveness_only: bool = True
    fairness: bool = False
    pba_budget: int = field(default_factory=default_pba_budget)
    nba_budget: int = DEFAULT_NBA_BUDGET
    verify: bool = True

    def __post_init__(self):
        self.policy = TsPolicy(self.policy)

    @property
    def uses_liveness_only(self) -> bool:
        return self.liveness_only and self.policy == TsPolicy.NON_INTERFERING

    @classmethod
    def faithful(cls, **kwargs) -> 'PlannerOptions':
        """Complete product TS with the full phi automaton"""
        return cls(policy=TsPolicy.COMPLETE, liveness_only=False, **kwargs)


@dataclass
class PlanReport:
    pba_states: int
    accepting: int
    sccs: int
    cost: float
    wallclock_ms: float
    ts_states: int = 0
    nba_states: int = 0
    planner: str = 'centralized'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'pba_states': self.pba_states,
            'accepting': self.accepting,
            'sccs': self.sccs,
            'cost': self.cost,
            'wallclock_ms': round(self.wallclock_ms, 3),
            'ts_states': self.ts_states,
            'nba_states': self.nba_states,
            'planner': self.planner,
        }


@dataclass
class LassoPlan:
    """Optimal accepting lasso and its projection onto the transition system"""
    prefix_path: Tuple[Hashable, ...]
    cycle_path: Tuple[Hashable, ...]
    schedule: Schedule
    prefix_cost: float
    suffix_cost: float

    @property
    def cost(self) -> float:
        return self.prefix_cost + self.suffix_cost


@dataclass
class PlanOutcome:
    schedule: Schedule
    report: PlanReport
    plan: Optional[LassoPlan] = None


# ========================================
# SHORTEST PATHS
# ========================================

@dataclass
class _Search:
    dist: Dict[Hashable, float]
    hops: Dict[Hashable, int]
    pred: Dict[Hashable, Optional[Hashable]]
    found: Optional[Hashable] = None


def _dijkstra(starts: Iterable[Tuple[float, int, Hashable, Optional[Hashable]]],
              successors: Callable[[Hashable], Iterable[Tuple[Hashable, float]]],
              is_target: Optional[Callable[[Hashable], bool]] = None,
              bound: float = math.inf) -> _Search:
    """
    Lazy-deletion Dijkstra keyed on (cost, hops, node).

    Args:
        starts: (cost, hops, node, parent) seeds
        successors: node -> (next node, edge cost)
        is_target: stop as soon as a target is settled
        bound: stop once the settled cost exceeds bound
    """
    heap = list(starts)
    heapq.heapify(heap)
    search = _Search({}, {}, {})
    while heap:
        cost, hops, node, parent = heapq.heappop(heap)
        if node in search.dist:
            continue
        if cost > bound:
            break
        search.dist[node] = cost
        search.hops[node] = hops
        search.pred[node] = parent
        if is_target is not None and is_target(node):
            search.found = node
            break
        for nxt, w in successors(node):
            if nxt not in search.dist:
                heapq.heappush(heap, (cost + w, hops + 1, nxt, node))
    return search


def _path_to(search: _Search, node: Hashable) -> List[Hashable]:
    path = [node]
    while search.pred[path[-1]] is not None:
        path.append(search.pred[path[-1]])
    return path[::-1]


def _cycle_through(search: _Search, anchor: Hashable) -> List[Hashable]:
    """[c_1, ..., c_L = anchor] from a search seeded with anchor's successors"""
    path = [anchor]
    node = search.pred[anchor]
    while node != anchor:
        path.append(node)
        node = search.pred[node]
    return path[::-1]


class _PairCost:
    """Transition cost on TS bitsets, memoized"""

    def __init__(self, ts: ProductTs, cost: Callable[[Element, Element], float]):
        self.ts = ts
        self.cost = cost
        self._memo: Dict[Tuple[int, int], float] = {}

    def __call__(self, a: int, b: int) -> float:
        key = (a, b)
        if key not in self._memo:
            self._memo[key] = float(self.cost(self.ts.items_of(a), self.ts.items_of(b)))
        return self._memo[key]


# ========================================
# PRODUCT BÜCHI AUTOMATON
# ========================================

class Pba:
    """
    Product of the TS with a Büchi automaton, restricted to states reachable
    from the initial set.

    States are (TS bitset, automaton state) pairs stored in a networkx
    DiGraph. A transition (q, s) -> (q', s') exists when q -> q' in the TS
    and some automaton transition s -> s' has a label satisfied by the
    observation of q. Over a generalized automaton each edge carries the
    attribute 'marks': the alternative acceptance masks its transitions
    contribute.
    """

    def __init__(self, ts: ProductTs, automaton: Automaton, graph: nx.DiGraph, initial: Tuple[PbaState, ...]):
        self.ts = ts
        self.automaton = automaton
        self.graph = graph
        self.initial = initial
        self._accepting: Optional[FrozenSet[PbaState]] = None

    @property
    def generalized(self) -> bool:
        return isinstance(self.automaton, Gba)

    @property
    def accepting(self) -> FrozenSet[PbaState]:
        """
        Anchors for accepting cycles: states with an accepting automaton state
        (Nba), or members of components whose edges cover every acceptance
        set (Gba)
        """
        if self._accepting is None:
            if self.generalized:
                self._accepting = frozenset(v for comp in accepting_components(self) for v in comp)
            else:
                self._accepting = frozenset(v for v in self.graph.nodes() if v[1] in self.automaton.accepting)
        return self._accepting

    def __len__(self) -> int:
        return self.graph.number_of_nodes()

    def is_empty(self) -> bool:
        return not self.initial

    def observation(self, v: PbaState):
        return self.ts.observe(v[0])


def _moves(automaton: Automaton, s: int, obs) -> Dict[int, FrozenSet[int]]:
    """Enabled automaton moves from s: target -> alternative acceptance masks"""
    moves: Dict[int, set] = {}
    if isinstance(automaton, Gba):
        for label, marks, dst in automaton.successors(s):
            if label.satisfied_by(obs):
                moves.setdefault(dst, set()).add(sum(1 << i for i in marks))
    else:
        for label, dst in automaton.successors(s):
            if label.satisfied_by(obs):
                moves.setdefault(dst, set()).add(0)
    return {dst: frozenset(masks) for dst, masks in moves.items()}


def build_pba(ts: ProductTs, automaton: Automaton, budget: Optional[int] = None) -> Pba:
    """
    Build the reachable part of the product automaton breadth-first.

    Args:
        ts: product transition system
        automaton: Nba (state-based acceptance) or Gba (generalized,
            transition-based acceptance)
        budget: product state budget

    Raises:
        BudgetExceededError: more than budget product states
    """
    budget = budget if budget is not None else default_pba_budget()
    missing = automaton.props() - {p for q in ts.states for p in ts.observe(q)}
    if missing:
        logger.debug(f"Automaton propositions never observed by the TS: {sorted(map(str, missing))}")

    graph = nx.DiGraph()
    initial = tuple(sorted((ts.initial, s) for s in automaton.initial))
    for v in initial:
        graph.add_node(v)
    if len(graph) > budget:
        raise BudgetExceededError("PBA states", budget, len(graph))

    frontier = list(initial)
    while frontier:
        nxt_frontier: List[PbaState] = []
        for q, s in frontier:
            moves = _moves(automaton, s, ts.observe(q))
            if not moves:
                continue
            for q2 in ts.successors(q):
                for s2 in sorted(moves):
                    target = (q2, s2)
                    if target not in graph:
                        graph.add_node(target)
                        if graph.number_of_nodes() > budget:
                            raise BudgetExceededError("PBA states", budget, graph.number_of_nodes())
                        nxt_frontier.append(target)
                    graph.add_edge((q, s), target, marks=moves[s2])
        frontier = nxt_frontier

    pba = Pba(ts, automaton, graph, initial)
    logger.debug(f"PBA: {len(pba)} states, {graph.number_of_edges()} transitions")
    return pba


def scc_decompose(digraph: nx.DiGraph) -> nx.DiGraph:
    """
    Condensation with deterministic numbering (components ordered by their
    smallest member). Node attribute 'members' holds each component;
    graph attribute 'mapping' maps original nodes to components.
    """
    components = sorted((frozenset(c) for c in nx.strongly_connected_components(digraph)),
                        key=lambda c: min(c))
    return nx.condensation(digraph, scc=components)


def is_trivial_component(digraph: nx.DiGraph, members: Iterable[Hashable]) -> bool:
    """A single node without a self-loop carries no cycle"""
    members = list(members)
    return len(members) == 1 and not digraph.has_edge(members[0], members[0])


def accepting_components(pba: Pba) -> List[FrozenSet[PbaState]]:
    """Nontrivial components of a generalized product whose internal edges cover every acceptance set"""
    full = pba.automaton.full_mask
    found = []
    for comp in nx.strongly_connected_components(pba.graph):
        if is_trivial_component(pba.graph, comp):
            continue
        covered = 0
        for v in comp:
            for w, data in pba.graph[v].items():
                if w in comp:
                    for mask in data['marks']:
                        covered |= mask
        if covered == full:
            found.append(frozenset(comp))
    return sorted(found, key=min)


def _cheapest_cycle(pba: Pba, anchor: PbaState, members: FrozenSet[PbaState],
                    step_cost: Callable[[PbaState, PbaState], float],
                    bound: float) -> Tuple[Optional[Tuple[float, int, List[PbaState]]], int]:
    """
    Cheapest accepting cycle through anchor inside its component.

    Returns:
        ((cost, hops, [c_1, ..., c_L = anchor]) or None, states settled)
    """
    graph = pba.graph
    if not pba.generalized:
        def inside(v: PbaState):
            for w in graph.successors(v):
                if w in members:
                    yield w, step_cost(v, w)

        seeds = [(c, 1, w, anchor) for w, c in inside(anchor)]
        search = _dijkstra(seeds, inside, is_target=lambda v: v == anchor, bound=bound)
        if search.found is None:
            return None, len(search.dist)
        return (search.dist[anchor], search.hops[anchor], _cycle_through(search, anchor)), len(search.dist)

    # Generalized acceptance: carry the union of acceptance masks seen so far
    full = pba.automaton.full_mask
    start = (anchor, -1)
    target = (anchor, full)

    def covering(node: Tuple[PbaState, int]):
        v, mask = node
        mask = max(mask, 0)
        for w, data in graph[v].items():
            if w in members:
                c = step_cost(v, w)
                for m in data['marks']:
                    yield (w, mask | m), c

    seeds = [(c, 1, nxt, start) for nxt, c in covering(start)]
    search = _dijkstra(seeds, covering, is_target=lambda node: node == target, bound=bound)
    if search.found is None:
        return None, len(search.dist)
    path = [target]
    node = search.pred[target]
    while node != start:
        path.append(node)
        node = search.pred[node]
    cycle = [v for v, _ in reversed(path)]
    return (search.dist[target], search.hops[target], cycle), len(search.dist)


def find_optimal_lasso(pba: Pba, cost: Callable[[Element, Element], float],
                       budget: Optional[int] = None) -> LassoPlan:
    """
    Minimum-cost accepting lasso.

    Shortest prefix from the initial set to every candidate anchor, then for
    each anchor in an accepting component the cheapest accepting cycle back
    to it inside that component. Ties are broken on (suffix length, prefix
    length, state order).

    Args:
        pba: product automaton
        cost: transition cost on pairs of link sets
        budget: cap on the states settled by all cycle searches together

    Raises:
        InfeasibleError: the product is empty or has no accepting cycle
        BudgetExceededError: cycle searches exceeded budget
    """
    if pba.is_empty():
        raise InfeasibleError("Product automaton is empty: no initial state")
    budget = budget if budget is not None else default_pba_budget()
    pair_cost = _PairCost(pba.ts, cost)
    graph = pba.graph

    def step_cost(v: PbaState, w: PbaState) -> float:
        return pair_cost(v[0], w[0])

    def successors(v: PbaState):
        for w in graph.successors(v):
            yield w, step_cost(v, w)

    condensed = scc_decompose(graph)
    mapping = condensed.graph['mapping']
    nontrivial = {c for c in condensed.nodes()
                  if not is_trivial_component(graph, condensed.nodes[c]['members'])}
    candidates = [a for a in pba.accepting if mapping[a] in nontrivial]
    logger.debug(f"{condensed.number_of_nodes()} SCCs, {len(nontrivial)} nontrivial, "
                 f"{len(candidates)} anchor candidates")
    if not candidates:
        raise InfeasibleError("No accepting state lies on a cycle: specification is unsatisfiable on this TS")

    prefix = _dijkstra(((0.0, 0, v, None) for v in pba.initial), successors)
    candidates.sort(key=lambda a: (prefix.dist[a], prefix.hops[a], a))

    best_key = None
    best = None
    explored = 0
    for a in candidates:
        d_a = prefix.dist[a]
        best_total = best_key[0] if best_key else math.inf
        if d_a > best_total + COST_TOL:
            break
        members = condensed.nodes[mapping[a]]['members']
        found, settled = _cheapest_cycle(pba, a, members, step_cost, best_total - d_a + COST_TOL)
        explored += settled
        if explored > budget:
            raise BudgetExceededError("Lasso-search states", budget, explored)
        if found is None:
            continue
        c_a, hops, cycle_path = found
        key = (round(d_a + c_a, 9), hops, prefix.hops[a] + 1, a)
        if best_key is None or key < best_key:
            best_key = key
            best = (d_a, c_a, _path_to(prefix, a), cycle_path)

    if best is None:
        raise InfeasibleError("No accepting lasso found")
    d_a, c_a, prefix_path, cycle_path = best
    schedule = Schedule(
        tuple(pba.ts.items_of(v[0]) for v in prefix_path),
        tuple(pba.ts.items_of(v[0]) for v in cycle_path),
    )
    return LassoPlan(tuple(prefix_path), tuple(cycle_path), schedule, d_a, c_a)


# ========================================
# PIPELINES
# ========================================

def synthesize(ts: ProductTs, spec: Union[Ltl, Automaton], cost: Callable[[Element, Element], float],
               pba_budget: Optional[int] = None, nba_budget: int = DEFAULT_NBA_BUDGET,
               planner: str = 'centralized') -> PlanOutcome:
    """
    Generic TS x LTL synthesis: translate, build the product, search the lasso.

    Formulas are translated to a generalized automaton so the cycle search
    sees every acceptance set at once; a prebuilt Nba or Gba is used as is.
    """
    started = time.perf_counter()
    if isinstance(spec, (Nba, Gba)):
        automaton = spec
    else:
        # Not translate_to_nba: its level counter fixes the order in which
        # acceptance sets are visited, and on a path of links the cheapest
        # cycle then needs an extra lap. The mask search below stays optimal.
        formula = spec if is_nnf(spec) else to_nnf(spec)
        automaton = translate_to_gba(formula, max_states=nba_budget)
        logger.info(f"Automaton: {len(automaton.states)} states, {automaton.acceptance_sets} acceptance sets "
                    f"for a formula of size {size(formula)}")
    pba = build_pba(ts, automaton, pba_budget)
    logger.info(f"Product automaton: {len(pba)} states ({len(pba.accepting)} accepting)")
    plan = find_optimal_lasso(pba, cost, pba_budget)
    sccs = nx.number_strongly_connected_components(pba.graph)
    report = PlanReport(
        pba_states=len(pba),
        accepting=len(pba.accepting),
        sccs=sccs,
        cost=plan.cost,
        wallclock_ms=(time.perf_counter() - started) * 1000.0,
        ts_states=len(ts),
        nba_states=len(automaton.states),
        planner=planner,
    )
    return PlanOutcome(plan.schedule, report, plan)


def link_specification(net, options: PlannerOptions) -> Ltl:
    """Formula the product automaton is built from under the given options"""
    graph = as_graph(net)
    formula = build_liveness(graph) if options.uses_liveness_only else build_phi(graph)
    if options.fairness:
        formula = conj([formula, build_all_fairness(graph)])
    return formula


def verify_schedule(net, schedule: Schedule, fairness: bool = False) -> bool:
    graph = as_graph(net)
    formula = build_phi(graph)
    if fairness:
        formula = conj([formula, build_all_fairness(graph)])
    prefix, suffix = schedule.word()
    return eval_lasso(formula, prefix, suffix)


def _empty_outcome(planner: str, started: float) -> PlanOutcome:
    schedule = Schedule((frozenset(),), (frozenset(),))
    report = PlanReport(0, 0, 0, 0.0, (time.perf_counter() - started) * 1000.0, planner=planner)
    return PlanOutcome(schedule, report)


def _check(net, outcome: PlanOutcome, fairness: bool, what: str):
    if not verify_schedule(net, outcome.schedule, fairness):
        raise PlanningError(f"{what} schedule does not satisfy the link specification")


def plan_centralized_outcome(net, cost: Optional[Callable] = None,
                             options: Optional[PlannerOptions] = None) -> PlanOutcome:
    """plan_centralized with its planning report"""
    options = options or PlannerOptions()
    cost = cost or CostFn.jaccard()
    started = time.perf_counter()
    if not graph_edges(net):
        logger.info("Network has no links: constant empty schedule")
        return _empty_outcome('centralized', started)

    ts = build_product_ts(net, options.policy, options.pba_budget)
    formula = link_specification(net, options)
    outcome = synthesize(ts, formula, cost, options.pba_budget, options.nba_budget)
    outcome.report.wallclock_ms = (time.perf_counter() - started) * 1000.0
    if options.verify:
        _check(net, outcome, options.fairness, "Centralized")
    logger.info(f"Centralized plan: cost {outcome.report.cost:.4f}, prefix {len(outcome.schedule.prefix)}, "
                f"period {outcome.schedule.period}, {outcome.report.wallclock_ms:.1f} ms")
    return outcome


def plan_centralized(net, cost: Optional[Callable] = None, options: Optional[PlannerOptions] = None) -> Schedule:
    """
    Optimal prefix-suffix schedule satisfying phi.

    Args:
        net: SensorNetwork or networkx graph
        cost: transition cost on pairs of link sets (Jaccard by default)
        options: PlannerOptions

    Returns:
        Schedule in closed form

    Raises:
        BudgetExceededError, TranslationBudgetError, InfeasibleError
    """
    return plan_centralized_outcome(net, cost, options).schedule


def plan_specialized_outcome(net, cost: Optional[Callable] = None, budget: Optional[int] = None) -> PlanOutcome:
    """
    Search the non-interfering TS for a cheapest covering cycle.

    For each cycle start q: Dijkstra over (state, covered links) from q back
    to (q, all links); then the cheapest prefix from the empty set to q.
    """
    cost = cost or CostFn.jaccard()
    budget = budget if budget is not None else default_pba_budget()
    started = time.perf_counter()
    if not graph_edges(net):
        return _empty_outcome('specialized', started)

    ts = build_product_ts(net, TsPolicy.NON_INTERFERING, budget)
    pair_cost = _PairCost(ts, cost)
    full = (1 << len(ts.universe)) - 1

    def ts_successors(q: int):
        for q2 in ts.successors(q):
            yield q2, pair_cost(q, q2)

    prefix = _dijkstra([(0.0, 0, ts.initial, None)], ts_successors)

    def covering_successors(node: Tuple[int, int]):
        q, mask = node
        for q2 in ts.successors(q):
            yield (q2, mask | q2), pair_cost(q, q2)

    best_key = None
    best = None
    explored = 0
    for q in sorted(ts.states, key=lambda s: (prefix.dist[s], prefix.hops[s], s)):
        bound = best_key[0] - prefix.dist[q] + COST_TOL if best_key else math.inf
        if bound < 0:
            break
        target = (q, full)
        seeds = [(w, 1, nxt, (q, q)) for nxt, w in covering_successors((q, q))]
        cycle = _dijkstra(seeds, covering_successors, is_target=lambda v, _t=target: v == _t, bound=bound)
        explored += len(cycle.dist)
        if explored > budget:
            raise BudgetExceededError("Covering-search states", budget, explored)
        if cycle.found is None:
            continue
        total = prefix.dist[q] + cycle.dist[target]
        key = (round(total, 9), cycle.hops[target], prefix.hops[q] + 1, q)
        if best_key is None or key < best_key:
            best_key = key
            path = [target]
            node = cycle.pred[target]
            while node != (q, q):
                path.append(node)
                node = cycle.pred[node]
            best = (q, path[::-1], prefix.dist[q], cycle.dist[target])

    if best is None:
        raise InfeasibleError("No covering cycle in the non-interfering TS")
    q, cycle_path, prefix_cost, suffix_cost = best
    schedule = Schedule(
        tuple(ts.items_of(s) for s in _path_to(prefix, q)),
        tuple(ts.items_of(s) for s, _ in cycle_path),
    )
    report = PlanReport(
        pba_states=explored,
        accepting=0,
        sccs=0,
        cost=prefix_cost + suffix_cost,
        wallclock_ms=(time.perf_counter() - started) * 1000.0,
        ts_states=len(ts),
        planner='specialized',
    )
    outcome = PlanOutcome(schedule, report)
    _check(net, outcome, False, "Specialized")
    logger.info(f"Specialized plan: cost {report.cost:.4f}, period {schedule.period}, "
                f"{report.wallclock_ms:.1f} ms")
    return outcome


def plan_specialized_lnc(net, cost: Optional[Callable] = None) -> Schedule:
    return plan_specialized_outcome(net, cost).schedule


def schedule_cost(schedule: Schedule, cost: Optional[Callable] = None) -> float:
    return plan_cost(schedule, cost or CostFn.jaccard())
