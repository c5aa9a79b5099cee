"""
Transition System Module for the LNC planner

Link and product transition systems, transition costs (Jaccard, Hausdorff,
explicit tables), prefix-suffix schedules and their cost accounting.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from math import lcm
from typing import Any, Callable, Dict, FrozenSet, Hashable, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import BudgetExceededError, HorizonError
from .ltl import AtomicProp, Letter, prop_of
from .network import LinkId, as_graph, graph_edges, interferes

logger = logging.getLogger(__name__)

Element = FrozenSet[Hashable]


# ========================================
# SCHEDULES
# ========================================

@dataclass(frozen=True)
class Schedule:
    """
    Lasso schedule prefix . suffix^omega of activated item sets.

    Items are LinkIds for link schedules and ints for command-node plans.
    Planner output is in closed form: the last prefix element equals the
    last suffix element, so the suffix cycles back to the prefix's end.
    """
    prefix: Tuple[Element, ...]
    suffix: Tuple[Element, ...]

    def __post_init__(self):
        object.__setattr__(self, 'prefix', tuple(frozenset(x) for x in self.prefix))
        object.__setattr__(self, 'suffix', tuple(frozenset(x) for x in self.suffix))
        if not self.suffix:
            raise ValueError("Schedule suffix must be nonempty")

    @property
    def period(self) -> int:
        return len(self.suffix)

    @property
    def word_length(self) -> int:
        return len(self.prefix) + len(self.suffix)

    def successor(self, position: int) -> int:
        """Next position in the lasso word prefix + suffix"""
        nxt = position + 1
        return nxt if nxt < self.word_length else len(self.prefix)

    def element(self, position: int) -> Element:
        return self.prefix[position] if position < len(self.prefix) else self.suffix[position - len(self.prefix)]

    def at(self, t: int) -> Element:
        """tau(t) on the infinite timeline"""
        if t < len(self.prefix):
            return self.prefix[t]
        return self.suffix[(t - len(self.prefix)) % len(self.suffix)]

    def unroll(self, steps: int) -> Iterator[Element]:
        for t in range(steps):
            yield self.at(t)

    def items(self) -> FrozenSet[Hashable]:
        out = set()
        for element in self.prefix + self.suffix:
            out |= element
        return frozenset(out)

    def suffix_items(self) -> FrozenSet[Hashable]:
        return frozenset().union(*self.suffix)

    def is_closed(self) -> bool:
        return bool(self.prefix) and self.prefix[-1] == self.suffix[-1]

    def closed(self) -> 'Schedule':
        """Same infinite word, rewritten so that prefix[-1] == suffix[-1]"""
        if self.is_closed():
            return self
        head = self.suffix[0]
        return Schedule(self.prefix + (head,), self.suffix[1:] + (head,))

    def word(self, observe: Callable[[Hashable], AtomicProp] = prop_of) -> Tuple[List[Letter], List[Letter]]:
        """Observation word (prefix letters, suffix letters)"""
        def letters(elements):
            return [frozenset(observe(x) for x in el) for el in elements]
        return letters(self.prefix), letters(self.suffix)

    def to_dict(self, cost: Optional[float] = None) -> Dict[str, Any]:
        return {
            'prefix': [encode_element(el) for el in self.prefix],
            'suffix': [encode_element(el) for el in self.suffix],
            'cost': cost,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'Schedule':
        return cls(
            tuple(decode_element(el) for el in data['prefix']),
            tuple(decode_element(el) for el in data['suffix']),
        )

    @classmethod
    def constant(cls, element: Iterable[Hashable] = ()) -> 'Schedule':
        el = frozenset(element)
        return cls((frozenset(), el) if el else (frozenset(),), (el,))


def encode_element(element: Element) -> List:
    out = []
    for x in sorted(element):
        out.append([int(x[0]), int(x[1])] if isinstance(x, tuple) else int(x))
    return out


def decode_element(raw: Iterable) -> Element:
    out = set()
    for x in raw:
        if isinstance(x, (list, tuple)):
            out.add(LinkId.of(x[0], x[1]))
        else:
            out.add(int(x))
    return frozenset(out)


def fold_to_lasso(initial: Hashable, step: Callable[[Hashable], Tuple[Element, Hashable]],
                  horizon: int) -> Tuple[Schedule, Hashable]:
    """
    Run a deterministic configuration machine until a configuration repeats.

    Args:
        initial: starting configuration
        step: configuration -> (emitted element, next configuration)
        horizon: maximum number of steps

    Returns:
        (closed Schedule of the emitted word, configuration at the loop start)

    Raises:
        HorizonError: no repetition within horizon steps
    """
    seen: Dict[Hashable, int] = {}
    emitted: List[Element] = []
    config = initial
    for t in range(horizon + 1):
        if config in seen:
            start = seen[config]
            schedule = Schedule(tuple(emitted[:start]), tuple(emitted[start:])).closed()
            return schedule, config
        seen[config] = t
        element, config = step(config)
        emitted.append(element)
    raise HorizonError(f"No repeated configuration within horizon {horizon}")


def sequential_schedule(net) -> Schedule:
    """tau_seq: one link per step in canonical order, closed form"""
    edges = graph_edges(net)
    if not edges:
        return Schedule((frozenset(),), (frozenset(),))
    suffix = tuple(frozenset([e]) for e in edges)
    return Schedule((frozenset(), suffix[-1]), suffix)


# ========================================
# TRANSITION SYSTEMS
# ========================================

class TsPolicy(str, Enum):
    COMPLETE = "complete"
    NON_INTERFERING = "non_interfering"


STANDBY = 'standby'
SWITCH = 'switch'
ACTIVE = 'active'
INACTIVE = 'inactive'


@dataclass(frozen=True)
class LinkTs:
    """Two-state transition system of a single link"""
    edge: LinkId
    states: Tuple[str, str] = (INACTIVE, ACTIVE)
    initial: str = INACTIVE
    inputs: Tuple[str, str] = (STANDBY, SWITCH)
    transitions: Tuple[Tuple[str, str, str], ...] = ()

    def step(self, state: str, control: str) -> str:
        for src, inp, dst in self.transitions:
            if src == state and inp == control:
                return dst
        raise ValueError(f"No transition from {state} on {control}")

    def observe(self, state: str) -> FrozenSet[AtomicProp]:
        return frozenset([prop_of(self.edge)]) if state == ACTIVE else frozenset()


def build_link_ts(e: Tuple[int, int]) -> LinkTs:
    edge = LinkId.of(e[0], e[1])
    transitions = (
        (INACTIVE, STANDBY, INACTIVE),
        (ACTIVE, STANDBY, ACTIVE),
        (INACTIVE, SWITCH, ACTIVE),
        (ACTIVE, SWITCH, INACTIVE),
    )
    return LinkTs(edge=edge, transitions=transitions)


class ProductTs:
    """
    Product of per-item transition systems.

    States are bitsets over the ordered item universe; the initial state is
    the empty set. Under the complete policy every subset is a state and
    every ordered pair of states is a transition. Under the non_interfering
    policy only conflict-free subsets are states. Successors are produced
    lazily and never materialized as a relation.
    """

    def __init__(self, universe: Sequence[Hashable], conflicts: Callable[[Hashable, Hashable], bool],
                 policy: TsPolicy = TsPolicy.NON_INTERFERING, state_budget: int = 10 ** 6,
                 observe: Callable[[Hashable], AtomicProp] = prop_of):
        self.universe: Tuple[Hashable, ...] = tuple(universe)
        self.policy = TsPolicy(policy)
        self.observe_item = observe
        self.state_budget = state_budget
        m = len(self.universe)
        self.conflict_mask = [0] * m
        for a in range(m):
            for b in range(m):
                if a != b and conflicts(self.universe[a], self.universe[b]):
                    self.conflict_mask[a] |= 1 << b
        self.initial = 0
        self.states: Tuple[int, ...] = self._enumerate()
        self._obs: Dict[int, FrozenSet[AtomicProp]] = {}
        self._items: Dict[int, Element] = {}
        logger.debug(f"Product TS ({self.policy.value}): {m} items, {len(self.states)} states")

    def _enumerate(self) -> Tuple[int, ...]:
        m = len(self.universe)
        if self.policy == TsPolicy.COMPLETE:
            count = 1 << m
            if count > self.state_budget:
                raise BudgetExceededError("Product TS states", self.state_budget, count)
            return tuple(range(count))
        found: List[int] = []

        def grow(index: int, bits: int, blocked: int):
            if index == m:
                found.append(bits)
                if len(found) > self.state_budget:
                    raise BudgetExceededError("Product TS states", self.state_budget, len(found))
                return
            grow(index + 1, bits, blocked)
            if not (blocked >> index) & 1:
                grow(index + 1, bits | (1 << index), blocked | self.conflict_mask[index])

        grow(0, 0, 0)
        return tuple(sorted(found))

    def __len__(self) -> int:
        return len(self.states)

    def successors(self, state: int) -> Iterator[int]:
        """Complete transition relation among the admitted states"""
        return iter(self.states)

    def items_of(self, state: int) -> Element:
        if state not in self._items:
            self._items[state] = frozenset(x for k, x in enumerate(self.universe) if (state >> k) & 1)
        return self._items[state]

    def bits_of(self, items: Iterable[Hashable]) -> int:
        index = {x: k for k, x in enumerate(self.universe)}
        bits = 0
        for x in items:
            bits |= 1 << index[x]
        return bits

    def observe(self, state: int) -> FrozenSet[AtomicProp]:
        if state not in self._obs:
            self._obs[state] = frozenset(self.observe_item(x) for x in self.items_of(state))
        return self._obs[state]

    def is_independent(self, state: int) -> bool:
        for k in range(len(self.universe)):
            if (state >> k) & 1 and state & self.conflict_mask[k]:
                return False
        return True


def build_product_ts(net, policy: TsPolicy = TsPolicy.NON_INTERFERING, state_budget: int = 10 ** 6) -> ProductTs:
    """Product TS over the links of a network (conflict = shared endpoint)"""
    return ProductTs(graph_edges(net), interferes, policy, state_budget)


def build_command_ts(g_cmd, policy: TsPolicy = TsPolicy.NON_INTERFERING, state_budget: int = 10 ** 6) -> ProductTs:
    """Node-activation TS over command nodes (conflict = command-graph adjacency)"""
    graph = as_graph(g_cmd)
    return ProductTs(sorted(graph.nodes()), lambda a, b: graph.has_edge(a, b), policy, state_budget)


# ========================================
# COSTS
# ========================================

class CostKind(str, Enum):
    JACCARD = "jaccard"
    HAUSDORFF = "hausdorff"
    TABLE = "table"


def jaccard_cost(a: Iterable[Hashable], b: Iterable[Hashable]) -> float:
    """1 - |A & B| / |A | B|, with d(empty, empty) = 0"""
    a, b = frozenset(a), frozenset(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return 1.0 - len(a & b) / union


def hausdorff_distance(p: np.ndarray, q: np.ndarray) -> float:
    d = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


@dataclass
class CostFn:
    """Transition cost on ordered pairs of activated item sets"""
    kind: CostKind
    fn: Callable[[Element, Element], float] = field(repr=False)

    def __call__(self, a: Iterable[Hashable], b: Iterable[Hashable]) -> float:
        value = self.fn(frozenset(a), frozenset(b))
        if value < 0:
            raise ValueError(f"Negative transition cost {value}")
        return value

    @classmethod
    def jaccard(cls) -> 'CostFn':
        return cls(CostKind.JACCARD, jaccard_cost)

    @classmethod
    def hausdorff(cls, points_of: Callable[[Hashable], Sequence[Sequence[float]]], empty_distance: float) -> 'CostFn':
        """
        Hausdorff distance between the coordinates of the activated sensors.

        Args:
            points_of: item -> coordinates it activates (both endpoints of a link)
            empty_distance: distance from the empty set to any nonempty set
        """
        def fn(a: Element, b: Element) -> float:
            if not a and not b:
                return 0.0
            if not a or not b:
                return float(empty_distance)
            pa = np.array([p for x in sorted(a) for p in points_of(x)], dtype=float)
            pb = np.array([p for x in sorted(b) for p in points_of(x)], dtype=float)
            return hausdorff_distance(pa, pb)
        return cls(CostKind.HAUSDORFF, fn)

    @classmethod
    def for_network(cls, net, kind: CostKind = CostKind.JACCARD) -> 'CostFn':
        kind = CostKind(kind)
        if kind == CostKind.JACCARD:
            return cls.jaccard()
        if kind == CostKind.HAUSDORFF:
            X = net.positions
            return cls.hausdorff(lambda e: (X[e[0]], X[e[1]]), net.diameter)
        raise ValueError(f"Cost kind {kind.value} needs an explicit table")

    @classmethod
    def from_table(cls, table: Mapping[Tuple[FrozenSet, FrozenSet], float], default: float = 1.0) -> 'CostFn':
        def fn(a: Element, b: Element) -> float:
            return float(table.get((a, b), default))
        return cls(CostKind.TABLE, fn)


def hausdorff_cost(net) -> CostFn:
    """Hausdorff cost over endpoint coordinates; d(empty, A) is the bounds diameter"""
    return CostFn.for_network(net, CostKind.HAUSDORFF)


def cost_to_go(trace: Sequence[Iterable[Hashable]], c: Callable[[Element, Element], float]) -> float:
    """Sum of transition costs over consecutive elements"""
    if not len(trace):
        raise ValueError("Trace must contain at least one element")
    items = [frozenset(x) for x in trace]
    return float(sum(c(items[t - 1], items[t]) for t in range(1, len(items))))


def plan_cost(s: Schedule, c: Callable[[Element, Element], float]) -> float:
    """Prefix cost-to-go plus one period of the suffix, wrap transition included"""
    prefix_cost = cost_to_go(s.prefix, c) if s.prefix else 0.0
    suffix = list(s.suffix)
    return prefix_cost + cost_to_go(suffix + [suffix[0]], c)


def schedule_period_lcm(schedules: Iterable[Schedule]) -> int:
    out = 1
    for s in schedules:
        out = lcm(out, s.period)
    return out
