"""
Oracle Module for the LNC planner

Brute-force ground truth for small instances. Lassos are enumerated
exhaustively and checked with the semantic LTL evaluator; nothing here
goes through automata or graph search, so results are independent of
the planner.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Hashable, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import OracleBoundError
from .ltl import (AtomicProp, Gba, Ltl, Nba, accepts_lasso, atoms, build_phi, eval_lasso, prop_of, to_string,
                  translate_to_nba)
from .network import as_graph, graph_edges, interferes
from .ts import CostFn, Element, Schedule, plan_cost

logger = logging.getLogger(__name__)

MAX_ORACLE_EDGES = 4


def independent_subsets(universe: Sequence[Hashable],
                        conflicts: Callable[[Hashable, Hashable], bool]) -> List[Element]:
    """All conflict-free subsets, ordered by size then by sorted members"""
    out = []
    for k in range(len(universe) + 1):
        for combo in itertools.combinations(universe, k):
            if all(not conflicts(a, b) for a, b in itertools.combinations(combo, 2)):
                out.append(frozenset(combo))
    return out


@dataclass
class LassoEnumeration:
    """
    Every closed-form lasso over the given item sets within the bounds.

    A lasso has prefix[0] = empty set, 1 <= len(prefix) <= P,
    1 <= len(suffix) <= S and suffix[-1] == prefix[-1].
    """
    elements: Tuple[Element, ...]
    max_prefix: int = 2
    max_suffix: int = 4

    def __post_init__(self):
        if self.max_prefix < 1 or self.max_suffix < 1:
            raise OracleBoundError(f"Bounds must be >= 1, got P={self.max_prefix}, S={self.max_suffix}")

    def prefixes(self) -> Iterator[Tuple[Element, ...]]:
        empty = frozenset()
        for k in range(1, self.max_prefix + 1):
            for tail in itertools.product(self.elements, repeat=k - 1):
                yield (empty,) + tail

    def partition(self, head: Element) -> Iterator[Tuple[Tuple[Element, ...], Tuple[Element, ...]]]:
        """Lassos whose suffix starts with head"""
        for prefix in self.prefixes():
            last = prefix[-1]
            if head == last:
                yield prefix, (last,)
            for length in range(2, self.max_suffix + 1):
                for middle in itertools.product(self.elements, repeat=length - 2):
                    yield prefix, (head,) + middle + (last,)

    def __iter__(self) -> Iterator[Tuple[Tuple[Element, ...], Tuple[Element, ...]]]:
        for head in self.elements:
            yield from self.partition(head)

    def __len__(self) -> int:
        n = len(self.elements)
        prefixes = sum(n ** (k - 1) for k in range(1, self.max_prefix + 1))
        return prefixes * sum(n ** (length - 1) for length in range(1, self.max_suffix + 1))


def _select(candidates, formula: Ltl, cost: Callable, observe: Callable[[Hashable], AtomicProp],
            required: FrozenSet[Hashable]) -> Tuple[Optional[Schedule], Optional[float], int]:
    best_key = None
    best = None
    checked = 0
    for prefix, suffix in candidates:
        if required and not required <= frozenset().union(*suffix):
            continue
        checked += 1
        word_pre = [frozenset(observe(x) for x in el) for el in prefix]
        word_suf = [frozenset(observe(x) for x in el) for el in suffix]
        if not eval_lasso(formula, word_pre, word_suf):
            continue
        schedule = Schedule(prefix, suffix)
        value = plan_cost(schedule, cost)
        key = (round(value, 9), len(suffix), len(prefix),
               tuple(tuple(sorted(el)) for el in suffix), tuple(tuple(sorted(el)) for el in prefix))
        if best_key is None or key < best_key:
            best_key, best = key, (schedule, value)
    if best is None:
        return None, None, checked
    return best[0], best[1], checked


def brute_force_formula(formula: Ltl, universe: Sequence[Hashable], cost: Optional[Callable] = None,
                        P: int = 2, S: int = 4,
                        conflicts: Optional[Callable[[Hashable, Hashable], bool]] = None,
                        observe: Callable[[Hashable], AtomicProp] = prop_of,
                        require_coverage: bool = False) -> Tuple[Optional[Schedule], Optional[float]]:
    """
    Cheapest bounded lasso over item sets of universe satisfying formula.

    Args:
        conflicts: restrict enumeration to conflict-free sets (None: all subsets)
        require_coverage: skip lassos whose suffix misses an item; only sound
            when the formula demands every item infinitely often
    """
    cost = cost or CostFn.jaccard()
    universe = sorted(universe)
    elements = tuple(independent_subsets(universe, conflicts or (lambda a, b: False)))
    enumeration = LassoEnumeration(elements, P, S)
    required = frozenset(universe) if require_coverage else frozenset()
    # suffix-head partitions are independent; reduce them by key order
    results = []
    checked = 0
    for head in elements:
        schedule, value, n = _select(enumeration.partition(head), formula, cost, observe, required)
        checked += n
        if schedule is not None:
            results.append((round(value, 9), schedule.period, len(schedule.prefix),
                            tuple(tuple(sorted(el)) for el in schedule.suffix),
                            tuple(tuple(sorted(el)) for el in schedule.prefix), schedule, value))
    logger.debug(f"Oracle checked {checked} of {len(enumeration)} bounded lassos")
    if not results:
        return None, None
    best = min(results, key=lambda r: r[:5])
    return best[5], best[6]


def brute_force_optimal(net, cost: Optional[Callable] = None, P: int = 2, S: int = 4,
                        max_edges: int = MAX_ORACLE_EDGES) -> Optional[Schedule]:
    """
    Minimum-cost schedule among bounded lassos satisfying phi.

    Enumeration is limited to non-interfering link sets, since any state
    with two interfering links already falsifies phi.

    Raises:
        OracleBoundError: more than max_edges links
    """
    schedule, _ = brute_force_optimal_with_cost(net, cost, P, S, max_edges)
    return schedule


def brute_force_optimal_with_cost(net, cost: Optional[Callable] = None, P: int = 2, S: int = 4,
                                  max_edges: int = MAX_ORACLE_EDGES) -> Tuple[Optional[Schedule], Optional[float]]:
    edges = graph_edges(net)
    if len(edges) > max_edges:
        raise OracleBoundError(f"Oracle limited to {max_edges} links, network has {len(edges)}")
    if not edges:
        return Schedule((frozenset(),), (frozenset(),)), 0.0
    formula = build_phi(as_graph(net))
    return brute_force_formula(formula, edges, cost, P, S, conflicts=interferes, require_coverage=True)


# ========================================
# TRANSLATION CHECKS
# ========================================

@dataclass
class TranslationReport:
    formula: str
    props: Tuple[str, ...]
    checked: int = 0
    disagreements: List[Dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def to_dict(self) -> Dict:
        return {
            'formula': self.formula,
            'props': list(self.props),
            'checked': self.checked,
            'disagreements': self.disagreements[:20],
            'disagreement_count': len(self.disagreements),
        }


def all_letters(props: Sequence[AtomicProp]) -> List[FrozenSet[AtomicProp]]:
    return [frozenset(c) for k in range(len(props) + 1) for c in itertools.combinations(props, k)]


def verify_translation(f: Ltl, max_props: int = 2, max_len: int = 3,
                       automaton: Optional[Union[Nba, Gba]] = None) -> TranslationReport:
    """
    Compare automaton acceptance with semantic evaluation on every lasso
    over 2^AP with prefix length 0..max_len and suffix length 1..max_len.

    Raises:
        OracleBoundError: the formula has more than max_props propositions
    """
    props = sorted(atoms(f))
    if len(props) > max_props:
        raise OracleBoundError(f"Formula has {len(props)} propositions, limit {max_props}")
    automaton = automaton if automaton is not None else translate_to_nba(f)
    letters = all_letters(props)
    report = TranslationReport(formula=to_string(f), props=tuple(p.name for p in props))
    for k in range(max_len + 1):
        for prefix in itertools.product(letters, repeat=k):
            for length in range(1, max_len + 1):
                for suffix in itertools.product(letters, repeat=length):
                    report.checked += 1
                    expected = eval_lasso(f, prefix, suffix)
                    accepted = accepts_lasso(automaton, prefix, suffix)
                    if expected != accepted:
                        report.disagreements.append({
                            'prefix': [sorted(p.name for p in letter) for letter in prefix],
                            'suffix': [sorted(p.name for p in letter) for letter in suffix],
                            'semantic': expected,
                            'automaton': accepted,
                        })
    if report.disagreements:
        logger.warning(f"Translation of {report.formula}: {len(report.disagreements)} disagreements "
                       f"in {report.checked} lassos")
    return report
