"""
LTL Module for the LNC planner

Formula syntax tree, text parser/printer, negation normal form, semantic
evaluation on ultimately periodic words, translation to nondeterministic
Büchi automata, and builders for the link-activation specifications:

- phi_ij: local non-interference plus liveness of one link
- phi: conjunction of phi_ij over every link
- psi: the same pattern over command nodes
- chi_ij: opt-in fairness between neighboring links
"""

import logging
import re
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, FrozenSet, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from .errors import LtlSyntaxError, NetworkError, TranslationBudgetError, UndeclaredPropositionError
from .network import LinkId, as_graph, link_neighborhood

logger = logging.getLogger(__name__)

DEFAULT_NBA_BUDGET = 50000

Letter = FrozenSet['AtomicProp']


# ========================================
# ATOMIC PROPOSITIONS
# ========================================

@dataclass(frozen=True, order=True)
class AtomicProp:
    """Proposition for an activated link (kind='link') or command node (kind='node')"""
    kind: str
    indices: Tuple[int, ...]

    def __post_init__(self):
        if self.kind == 'link':
            if len(self.indices) != 2 or self.indices[0] >= self.indices[1]:
                raise ValueError(f"Link proposition needs i < j, got {self.indices}")
        elif self.kind == 'node':
            if len(self.indices) != 1 or self.indices[0] < 0:
                raise ValueError(f"Node proposition needs one index >= 0, got {self.indices}")
        else:
            raise ValueError(f"Unknown proposition kind: {self.kind}")

    @property
    def name(self) -> str:
        if self.kind == 'link':
            return f"e_{self.indices[0]}_{self.indices[1]}"
        return f"c_{self.indices[0]}"

    def __str__(self) -> str:
        return self.name


def link_prop(i: int, j: int) -> AtomicProp:
    a, b = (int(i), int(j)) if i < j else (int(j), int(i))
    return AtomicProp('link', (a, b))


def node_prop(j: int) -> AtomicProp:
    return AtomicProp('node', (int(j),))


def prop_of(item: Hashable) -> AtomicProp:
    """Proposition observed when a schedule item (link or command node) is active"""
    if isinstance(item, tuple):
        return link_prop(item[0], item[1])
    return node_prop(item)


_LINK_NAME = re.compile(r'^e_(\d+)_(\d+)$')
_NODE_NAME = re.compile(r'^c_(\d+)$')


def prop_from_name(name: str) -> AtomicProp:
    m = _LINK_NAME.match(name)
    if m:
        i, j = int(m.group(1)), int(m.group(2))
        if i == j:
            raise UndeclaredPropositionError(name)
        return link_prop(i, j)
    m = _NODE_NAME.match(name)
    if m:
        return node_prop(int(m.group(1)))
    raise UndeclaredPropositionError(name)


# ========================================
# SYNTAX TREE
# ========================================

@dataclass(frozen=True)
class Ltl:
    pass


@dataclass(frozen=True)
class TrueConst(Ltl):
    pass


@dataclass(frozen=True)
class FalseConst(Ltl):
    pass


@dataclass(frozen=True)
class Atom(Ltl):
    prop: AtomicProp


@dataclass(frozen=True)
class Not(Ltl):
    operand: Ltl


@dataclass(frozen=True)
class And(Ltl):
    operands: Tuple[Ltl, ...]

    def __post_init__(self):
        if len(self.operands) < 2:
            raise ValueError("And needs at least two operands")


@dataclass(frozen=True)
class Or(Ltl):
    operands: Tuple[Ltl, ...]

    def __post_init__(self):
        if len(self.operands) < 2:
            raise ValueError("Or needs at least two operands")


@dataclass(frozen=True)
class Next(Ltl):
    operand: Ltl


@dataclass(frozen=True)
class Until(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Release(Ltl):
    left: Ltl
    right: Ltl


@dataclass(frozen=True)
class Always(Ltl):
    operand: Ltl


@dataclass(frozen=True)
class Eventually(Ltl):
    operand: Ltl


TRUE = TrueConst()
FALSE = FalseConst()


def conj(items: Iterable[Ltl]) -> Ltl:
    """Conjunction with constant folding, flattening and duplicate removal"""
    out: List[Ltl] = []
    seen: Set[Ltl] = set()
    for item in items:
        parts = item.operands if isinstance(item, And) else (item,)
        for part in parts:
            if isinstance(part, TrueConst):
                continue
            if isinstance(part, FalseConst):
                return FALSE
            if part not in seen:
                seen.add(part)
                out.append(part)
    if not out:
        return TRUE
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def disj(items: Iterable[Ltl]) -> Ltl:
    """Disjunction with constant folding, flattening and duplicate removal"""
    out: List[Ltl] = []
    seen: Set[Ltl] = set()
    for item in items:
        parts = item.operands if isinstance(item, Or) else (item,)
        for part in parts:
            if isinstance(part, FalseConst):
                continue
            if isinstance(part, TrueConst):
                return TRUE
            if part not in seen:
                seen.add(part)
                out.append(part)
    if not out:
        return FALSE
    if len(out) == 1:
        return out[0]
    return Or(tuple(out))


def implies(premise: Ltl, conclusion: Ltl) -> Ltl:
    return disj([Not(premise), conclusion])


def size(f: Ltl) -> int:
    """Symbol count of a formula"""
    if isinstance(f, (TrueConst, FalseConst, Atom)):
        return 1
    if isinstance(f, (Not, Next, Always, Eventually)):
        return 1 + size(f.operand)
    if isinstance(f, (Until, Release)):
        return 1 + size(f.left) + size(f.right)
    if isinstance(f, (And, Or)):
        return len(f.operands) - 1 + sum(size(g) for g in f.operands)
    raise TypeError(f"Not a formula: {f!r}")


def children(f: Ltl) -> Tuple[Ltl, ...]:
    if isinstance(f, (Not, Next, Always, Eventually)):
        return (f.operand,)
    if isinstance(f, (Until, Release)):
        return (f.left, f.right)
    if isinstance(f, (And, Or)):
        return f.operands
    return ()


def subformulas(f: Ltl) -> List[Ltl]:
    """All distinct subformulas, children before parents"""
    out: List[Ltl] = []
    seen: Set[Ltl] = set()

    def visit(g: Ltl):
        if g in seen:
            return
        for c in children(g):
            visit(c)
        seen.add(g)
        out.append(g)

    visit(f)
    return out


def atoms(f: Ltl) -> FrozenSet[AtomicProp]:
    return frozenset(g.prop for g in subformulas(f) if isinstance(g, Atom))


# ========================================
# TEXT FORMAT
# ========================================

@lru_cache(maxsize=None)
def to_string(f: Ltl) -> str:
    """Print a formula in the ASCII syntax accepted by parse()"""
    if isinstance(f, TrueConst):
        return 'true'
    if isinstance(f, FalseConst):
        return 'false'
    if isinstance(f, Atom):
        return f.prop.name
    if isinstance(f, Not):
        return '!' + to_string(f.operand)
    if isinstance(f, Next):
        return 'X ' + to_string(f.operand)
    if isinstance(f, Always):
        return 'G ' + to_string(f.operand)
    if isinstance(f, Eventually):
        return 'F ' + to_string(f.operand)
    if isinstance(f, Until):
        return f"({to_string(f.left)} U {to_string(f.right)})"
    if isinstance(f, Release):
        return f"({to_string(f.left)} R {to_string(f.right)})"
    if isinstance(f, And):
        return '(' + ' & '.join(to_string(g) for g in f.operands) + ')'
    if isinstance(f, Or):
        return '(' + ' | '.join(to_string(g) for g in f.operands) + ')'
    raise TypeError(f"Not a formula: {f!r}")


_TOKEN = re.compile(r'\s*(?:(->)|([!&|()])|([A-Za-z_][A-Za-z0-9_]*))')
_UNARY = {'!': Not, 'X': Next, 'G': Always, 'F': Eventually}


class _Parser:
    """Recursive descent; precedence unary > U/R > & > | > ->"""

    def __init__(self, text: str, aliases: Mapping[str, AtomicProp],
                 declared: Optional[FrozenSet[AtomicProp]]):
        self.text = text
        self.aliases = aliases
        self.declared = declared
        self.tokens: List[Tuple[str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == '':
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
                raise LtlSyntaxError(f"Unexpected character {text[start]!r}", start, text)
            tok = m.group(1) or m.group(2) or m.group(3)
            self.tokens.append((tok, m.start(m.lastindex)))
            pos = m.end()
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def position(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise LtlSyntaxError("Unexpected end of input", len(self.text), self.text)
        self.i += 1
        return tok

    def parse(self) -> Ltl:
        f = self.implication()
        if self.peek() is not None:
            raise LtlSyntaxError(f"Unexpected token {self.peek()!r}", self.position(), self.text)
        return f

    def implication(self) -> Ltl:
        left = self.disjunction()
        if self.peek() == '->':
            self.take()
            return Or((Not(left), self.implication()))
        return left

    def disjunction(self) -> Ltl:
        items = [self.conjunction()]
        while self.peek() == '|':
            self.take()
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conjunction(self) -> Ltl:
        items = [self.binary_temporal()]
        while self.peek() == '&':
            self.take()
            items.append(self.binary_temporal())
        return items[0] if len(items) == 1 else And(tuple(items))

    def binary_temporal(self) -> Ltl:
        left = self.unary()
        tok = self.peek()
        if tok == 'U':
            self.take()
            return Until(left, self.binary_temporal())
        if tok == 'R':
            self.take()
            return Release(left, self.binary_temporal())
        return left

    def unary(self) -> Ltl:
        tok = self.peek()
        if tok in _UNARY:
            self.take()
            return _UNARY[tok](self.unary())
        return self.primary()

    def primary(self) -> Ltl:
        pos = self.position()
        tok = self.take()
        if tok == '(':
            f = self.implication()
            if self.peek() != ')':
                raise LtlSyntaxError("Expected ')'", self.position(), self.text)
            self.take()
            return f
        if tok == 'true':
            return TRUE
        if tok == 'false':
            return FALSE
        if tok in ('U', 'R', '&', '|', ')', '->'):
            raise LtlSyntaxError(f"Unexpected token {tok!r}", pos, self.text)
        if tok in self.aliases:
            prop = self.aliases[tok]
        else:
            try:
                prop = prop_from_name(tok)
            except UndeclaredPropositionError:
                raise UndeclaredPropositionError(tok, pos)
        if self.declared is not None and prop not in self.declared:
            raise UndeclaredPropositionError(tok, pos)
        return Atom(prop)


def parse(text: str, aliases: Optional[Mapping[str, AtomicProp]] = None,
          declared: Optional[Iterable[AtomicProp]] = None) -> Ltl:
    """
    Parse formula text.

    Args:
        text: formula using true/false, e_<i>_<j>, c_<j>, ! & | -> X U R G F
        aliases: extra names mapped to propositions (e.g. {'p': link_prop(0, 1)})
        declared: if given, every proposition must belong to this set

    Returns:
        Syntax tree; '->' is desugared to Or(Not(a), b)
    """
    decl = frozenset(declared) if declared is not None else None
    return _Parser(text, aliases or {}, decl).parse()


# ========================================
# NEGATION NORMAL FORM
# ========================================

def to_nnf(f: Ltl) -> Ltl:
    """Push negations down to atoms using the temporal dualities"""
    return _nnf(f, False)


def _nnf(f: Ltl, negate: bool) -> Ltl:
    if isinstance(f, TrueConst):
        return FALSE if negate else TRUE
    if isinstance(f, FalseConst):
        return TRUE if negate else FALSE
    if isinstance(f, Atom):
        return Not(f) if negate else f
    if isinstance(f, Not):
        return _nnf(f.operand, not negate)
    if isinstance(f, And):
        parts = tuple(_nnf(g, negate) for g in f.operands)
        return Or(parts) if negate else And(parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(g, negate) for g in f.operands)
        return And(parts) if negate else Or(parts)
    if isinstance(f, Next):
        return Next(_nnf(f.operand, negate))
    if isinstance(f, Until):
        if negate:
            return Release(_nnf(f.left, True), _nnf(f.right, True))
        return Until(_nnf(f.left, False), _nnf(f.right, False))
    if isinstance(f, Release):
        if negate:
            return Until(_nnf(f.left, True), _nnf(f.right, True))
        return Release(_nnf(f.left, False), _nnf(f.right, False))
    if isinstance(f, Always):
        if negate:
            return Eventually(_nnf(f.operand, True))
        return Always(_nnf(f.operand, False))
    if isinstance(f, Eventually):
        if negate:
            return Always(_nnf(f.operand, True))
        return Eventually(_nnf(f.operand, False))
    raise TypeError(f"Not a formula: {f!r}")


def is_nnf(f: Ltl) -> bool:
    return all(isinstance(g.operand, Atom) for g in subformulas(f) if isinstance(g, Not))


# ========================================
# SEMANTICS ON LASSO WORDS
# ========================================

def _letters(word: Iterable[Iterable[AtomicProp]]) -> List[Letter]:
    return [frozenset(letter) for letter in word]


def _until_values(a: np.ndarray, b: np.ndarray, loop_start: int) -> np.ndarray:
    """Least fixpoint of U = b | (a & X U) on a lasso of positions"""
    n = len(a)
    out = np.zeros(n, dtype=bool)
    hits = np.flatnonzero(b[loop_start:])
    if len(hits):
        j = loop_start + int(hits[-1])
        out[j] = True
        cur = True
        for _ in range(n - loop_start - 1):
            j = j - 1 if j > loop_start else n - 1
            cur = bool(b[j] or (a[j] and cur))
            out[j] = cur
    for j in range(loop_start - 1, -1, -1):
        out[j] = bool(b[j] or (a[j] and out[j + 1]))
    return out


def eval_lasso(f: Ltl, prefix: Sequence[Iterable[AtomicProp]],
               suffix: Sequence[Iterable[AtomicProp]]) -> bool:
    """
    Truth value of f at position 0 of prefix . suffix^omega.

    Each subformula is evaluated once over the |prefix| + |suffix| distinct
    positions; Until is solved exactly by a backward pass around the loop.
    """
    if not suffix:
        raise ValueError("Lasso suffix must be nonempty")
    word = _letters(prefix) + _letters(suffix)
    k = len(prefix)
    n = len(word)
    succ = np.append(np.arange(1, n), k)
    memo: Dict[int, np.ndarray] = {}
    keep: List[Ltl] = []

    def ev(g: Ltl) -> np.ndarray:
        key = id(g)
        if key in memo:
            return memo[key]
        if isinstance(g, TrueConst):
            val = np.ones(n, dtype=bool)
        elif isinstance(g, FalseConst):
            val = np.zeros(n, dtype=bool)
        elif isinstance(g, Atom):
            val = np.array([g.prop in letter for letter in word], dtype=bool)
        elif isinstance(g, Not):
            val = ~ev(g.operand)
        elif isinstance(g, And):
            val = np.logical_and.reduce([ev(c) for c in g.operands])
        elif isinstance(g, Or):
            val = np.logical_or.reduce([ev(c) for c in g.operands])
        elif isinstance(g, Next):
            val = ev(g.operand)[succ]
        elif isinstance(g, Until):
            val = _until_values(ev(g.left), ev(g.right), k)
        elif isinstance(g, Release):
            val = ~_until_values(~ev(g.left), ~ev(g.right), k)
        elif isinstance(g, Eventually):
            val = _until_values(np.ones(n, dtype=bool), ev(g.operand), k)
        elif isinstance(g, Always):
            val = ~_until_values(np.ones(n, dtype=bool), ~ev(g.operand), k)
        else:
            raise TypeError(f"Not a formula: {g!r}")
        keep.append(g)
        memo[key] = val
        return val

    return bool(ev(f)[0])


# ========================================
# BÜCHI AUTOMATA
# ========================================

@dataclass(frozen=True)
class Label:
    """Conjunction of literals guarding an automaton transition"""
    must_true: FrozenSet[AtomicProp] = frozenset()
    must_false: FrozenSet[AtomicProp] = frozenset()

    def __post_init__(self):
        if self.must_true & self.must_false:
            raise ValueError(f"Contradictory label: {sorted(map(str, self.must_true & self.must_false))}")

    def satisfied_by(self, letter: Iterable[AtomicProp]) -> bool:
        letter = letter if isinstance(letter, (set, frozenset)) else frozenset(letter)
        return self.must_true <= letter and not (self.must_false & letter)

    def weaker_or_equal(self, other: 'Label') -> bool:
        """True when every letter satisfying other also satisfies self"""
        return self.must_true <= other.must_true and self.must_false <= other.must_false

    def sort_key(self) -> Tuple:
        return (len(self.must_true) + len(self.must_false),
                sorted(p.name for p in self.must_true),
                sorted(p.name for p in self.must_false))


@dataclass(frozen=True)
class Nba:
    """Büchi automaton with literal-labeled transitions over the alphabet 2^AP"""
    states: Tuple[int, ...]
    initial: FrozenSet[int]
    accepting: FrozenSet[int]
    transitions: Tuple[Tuple[int, Label, int], ...]
    _out: Dict[int, List[Tuple[Label, int]]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        out: Dict[int, List[Tuple[Label, int]]] = {s: [] for s in self.states}
        for src, label, dst in self.transitions:
            out[src].append((label, dst))
        object.__setattr__(self, '_out', out)

    def successors(self, state: int) -> List[Tuple[Label, int]]:
        return self._out.get(state, [])

    def props(self) -> FrozenSet[AtomicProp]:
        found: Set[AtomicProp] = set()
        for _, label, _ in self.transitions:
            found |= label.must_true | label.must_false
        return frozenset(found)

    def with_accepting(self, accepting: Iterable[int]) -> 'Nba':
        return Nba(self.states, self.initial, frozenset(accepting), self.transitions)


@dataclass(frozen=True)
class Gba:
    """
    Transition-based generalized Büchi automaton.

    A run is accepting when every acceptance set 0..acceptance_sets-1 marks
    some transition taken infinitely often. With no acceptance sets every
    infinite run is accepting.
    """
    states: Tuple[int, ...]
    initial: FrozenSet[int]
    acceptance_sets: int
    transitions: Tuple[Tuple[int, Label, FrozenSet[int], int], ...]
    _out: Dict[int, List[Tuple[Label, FrozenSet[int], int]]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        out: Dict[int, List[Tuple[Label, FrozenSet[int], int]]] = {s: [] for s in self.states}
        for src, label, marks, dst in self.transitions:
            out[src].append((label, marks, dst))
        object.__setattr__(self, '_out', out)

    @property
    def full_mask(self) -> int:
        return (1 << self.acceptance_sets) - 1

    def successors(self, state: int) -> List[Tuple[Label, FrozenSet[int], int]]:
        return self._out.get(state, [])

    def props(self) -> FrozenSet[AtomicProp]:
        found: Set[AtomicProp] = set()
        for _, label, _, _ in self.transitions:
            found |= label.must_true | label.must_false
        return frozenset(found)


def _expand(obligations: FrozenSet[Ltl]) -> List[Tuple[FrozenSet[Ltl], FrozenSet[Ltl]]]:
    """Tableau node splitting: every consistent (now, next) cover of the obligations"""
    covers = []
    start = tuple(sorted(obligations, key=to_string))
    stack: List[Tuple[Tuple[Ltl, ...], FrozenSet[Ltl], FrozenSet[Ltl]]] = [(start, frozenset(), frozenset())]
    while stack:
        todo, old, nxt = stack.pop()
        if not todo:
            covers.append((old, nxt))
            continue
        g, rest = todo[0], todo[1:]
        if g in old:
            stack.append((rest, old, nxt))
            continue
        here = old | {g}
        if isinstance(g, TrueConst):
            stack.append((rest, here, nxt))
        elif isinstance(g, FalseConst):
            continue
        elif isinstance(g, (Atom, Not)):
            if isinstance(g, Not) and not isinstance(g.operand, Atom):
                raise ValueError(f"Formula not in negation normal form: {to_string(g)}")
            complement = g.operand if isinstance(g, Not) else Not(g)
            if complement in old:
                continue
            stack.append((rest, here, nxt))
        elif isinstance(g, And):
            stack.append((g.operands + rest, here, nxt))
        elif isinstance(g, Or):
            for c in reversed(g.operands):
                stack.append(((c,) + rest, here, nxt))
        elif isinstance(g, Next):
            stack.append((rest, here, nxt | {g.operand}))
        elif isinstance(g, Until):
            stack.append(((g.left,) + rest, here, nxt | {g}))
            stack.append(((g.right,) + rest, here, nxt))
        elif isinstance(g, Eventually):
            stack.append((rest, here, nxt | {g}))
            stack.append(((g.operand,) + rest, here, nxt))
        elif isinstance(g, Release):
            stack.append(((g.left, g.right) + rest, here, nxt))
            stack.append(((g.right,) + rest, here, nxt | {g}))
        elif isinstance(g, Always):
            stack.append(((g.operand,) + rest, here, nxt | {g}))
        else:
            raise TypeError(f"Not a formula: {g!r}")
    return covers


def _reduce_obligations(obligations: Iterable[Ltl]) -> FrozenSet[Ltl]:
    """Drop obligations that another obligation re-adds on expansion (g under G g or R g)"""
    obs = set(obligations)
    obs.discard(TRUE)
    implied = {g.operand for g in obs if isinstance(g, Always)}
    implied |= {g.right for g in obs if isinstance(g, Release)}
    return frozenset(g for g in obs if g not in implied)


def _label_of(old: FrozenSet[Ltl]) -> Label:
    pos = frozenset(g.prop for g in old if isinstance(g, Atom))
    neg = frozenset(g.operand.prop for g in old if isinstance(g, Not))
    return Label(pos, neg)


def _prune_subsumed(moves: Iterable[Tuple[Label, Hashable]]) -> FrozenSet[Tuple[Label, Hashable]]:
    """Drop a move when a weaker label reaches the same target"""
    by_target: Dict[Hashable, List[Label]] = {}
    for label, dst in set(moves):
        by_target.setdefault(dst, []).append(label)
    kept = set()
    for dst, labels in by_target.items():
        for lab in labels:
            if not any(other != lab and other.weaker_or_equal(lab) for other in labels):
                kept.add((lab, dst))
    return frozenset(kept)


def translate_to_gba(f: Ltl, max_states: int = DEFAULT_NBA_BUDGET) -> Gba:
    """
    Tableau construction of a generalized Büchi automaton.

    States are reduced obligation sets; each Until/Eventually subformula owns
    one acceptance set, marking the transitions on which it is either absent
    or fulfilled.

    Raises:
        TranslationBudgetError: more than max_states obligation sets
    """
    f = f if is_nnf(f) else to_nnf(f)
    untils = sorted({g for g in subformulas(f) if isinstance(g, (Until, Eventually))}, key=to_string)
    goal = {g: (g.right if isinstance(g, Until) else g.operand) for g in untils}

    init = _reduce_obligations([f])
    index: Dict[FrozenSet[Ltl], int] = {init: 0}
    queue = deque([init])
    transitions = []
    while queue:
        key = queue.popleft()
        src = index[key]
        moves = set()
        for old, nxt in _expand(key):
            marks = frozenset(i for i, u in enumerate(untils) if u not in old or goal[u] in old)
            dst_key = _reduce_obligations(nxt)
            if dst_key not in index:
                if len(index) >= max_states:
                    raise TranslationBudgetError(max_states, len(index) + 1)
                index[dst_key] = len(index)
                queue.append(dst_key)
            moves.add((_label_of(old), marks, index[dst_key]))
        for label, marks, dst in sorted(_prune_marked(moves), key=lambda m: (m[2], m[0].sort_key(), sorted(m[1]))):
            transitions.append((src, label, marks, dst))
    return Gba(
        states=tuple(range(len(index))),
        initial=frozenset({0}),
        acceptance_sets=len(untils),
        transitions=tuple(transitions),
    )


def translate_to_nba(f: Ltl, max_states: int = DEFAULT_NBA_BUDGET) -> Nba:
    """
    Translate an LTL formula into a Büchi automaton.

    The generalized automaton from translate_to_gba is degeneralized with a
    level counter that may skip several satisfied levels per step. The result
    is reduced by label subsumption and by merging states with identical
    outgoing transitions.

    Args:
        f: formula (normalized to NNF if it is not already)
        max_states: budget on tableau and automaton states

    Returns:
        Nba with canonical integer state numbering

    Raises:
        TranslationBudgetError: construction exceeded max_states
    """
    gba = translate_to_gba(f, max_states)
    k = gba.acceptance_sets

    # state = (tableau state, level, entered-by-wrap)
    def advance(level: int, marks: FrozenSet[int]) -> Tuple[int, bool]:
        if k == 0:
            return 0, True
        wrapped = False
        for _ in range(k):
            if level not in marks:
                break
            level = (level + 1) % k
            if level == 0:
                wrapped = True
        return level, wrapped

    start = (0, 0, False)
    seen = {start}
    queue = deque([start])
    delta: Dict[Tuple, Set[Tuple[Label, Tuple]]] = {}
    while queue:
        state = queue.popleft()
        q, level, _ = state
        out = set()
        for label, marks, dst in gba.successors(q):
            nlevel, wrapped = advance(level, marks)
            target = (dst, nlevel, wrapped)
            out.add((label, target))
            if target not in seen:
                if len(seen) >= max_states:
                    raise TranslationBudgetError(max_states, len(seen) + 1)
                seen.add(target)
                queue.append(target)
        delta[state] = set(_prune_subsumed(out))

    accepting = {s for s in seen if s[2]}
    nba = _simplify(delta, {start}, accepting)
    logger.debug(f"Translated formula of size {size(f)}: tableau {len(gba.states)} states, "
                 f"automaton {len(nba.states)} states / {len(nba.transitions)} transitions")
    return nba


def _prune_marked(moves: Set[Tuple[Label, FrozenSet[int], int]]) -> Set[Tuple[Label, FrozenSet[int], int]]:
    kept = set()
    for lab, marks, dst in moves:
        dominated = any(
            (olab, omarks) != (lab, marks) and odst == dst
            and olab.weaker_or_equal(lab) and marks <= omarks
            for olab, omarks, odst in moves
        )
        if not dominated:
            kept.add((lab, marks, dst))
    return kept


def _transient_states(delta: Mapping[Hashable, Iterable[Tuple[Label, Hashable]]]) -> Set[Hashable]:
    g = nx.DiGraph()
    g.add_nodes_from(delta)
    for src, moves in delta.items():
        for _, dst in moves:
            g.add_edge(src, dst)
    transient = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) == 1:
            node = next(iter(comp))
            if not g.has_edge(node, node):
                transient.add(node)
    return transient


def _simplify(delta: Dict[Hashable, Set[Tuple[Label, Hashable]]], initial: Set[Hashable],
              accepting: Set[Hashable]) -> Nba:
    """Merge equivalent states, drop states that cannot reach an accepting cycle, renumber"""
    delta = {s: set(moves) for s, moves in delta.items()}
    initial = set(initial)
    accepting = set(accepting)

    while True:
        transient = _transient_states(delta)
        groups: Dict[FrozenSet, List[Hashable]] = {}
        for s in sorted(delta, key=repr):
            groups.setdefault(frozenset(delta[s]), []).append(s)
        rename: Dict[Hashable, Hashable] = {}
        for members in groups.values():
            if len(members) < 2:
                continue
            steady = [s for s in members if s not in transient]
            classes: Dict[bool, List[Hashable]] = {}
            for s in steady:
                classes.setdefault(s in accepting, []).append(s)
            if classes:
                target_class = classes[min(classes, key=lambda flag: repr(classes[flag][0]))]
                heads = {flag: cls[0] for flag, cls in classes.items()}
                for flag, cls in classes.items():
                    for s in cls[1:]:
                        rename[s] = heads[flag]
                for s in members:
                    if s in transient and s != target_class[0]:
                        rename[s] = target_class[0]
            else:
                for s in members[1:]:
                    rename[s] = members[0]
        if not rename:
            break
        merged: Dict[Hashable, Set[Tuple[Label, Hashable]]] = {}
        for s, moves in delta.items():
            if s in rename:
                continue
            merged[s] = set(_prune_subsumed((lab, rename.get(d, d)) for lab, d in moves))
        delta = merged
        initial = {rename.get(s, s) for s in initial}
        accepting = {s for s in accepting if s in delta}

    # Keep states that can reach a nontrivial accepting component
    g = nx.DiGraph()
    g.add_nodes_from(delta)
    for src, moves in delta.items():
        for _, dst in moves:
            g.add_edge(src, dst)
    good = set()
    for comp in nx.strongly_connected_components(g):
        node = next(iter(comp))
        if (len(comp) > 1 or g.has_edge(node, node)) and comp & accepting:
            good |= comp
    alive = set(good)
    for s in good:
        alive |= nx.ancestors(g, s)

    # Canonical BFS numbering from the initial states
    order: Dict[Hashable, int] = {}
    queue = deque(sorted(initial, key=repr))
    for s in queue:
        order[s] = len(order)
    transitions = []
    while queue:
        s = queue.popleft()
        if s not in alive:
            continue
        moves = sorted((m for m in delta[s] if m[1] in alive), key=lambda m: (m[0].sort_key(), repr(m[1])))
        for lab, dst in moves:
            if dst not in order:
                order[dst] = len(order)
                queue.append(dst)
            transitions.append((order[s], lab, order[dst]))
    transitions.sort(key=lambda t: (t[0], t[2], t[1].sort_key()))
    return Nba(
        states=tuple(range(len(order))),
        initial=frozenset(order[s] for s in initial),
        accepting=frozenset(order[s] for s in order if s in accepting and s in alive),
        transitions=tuple(transitions),
    )


def nba_accepts_lasso(b: Nba, prefix: Sequence[Iterable[AtomicProp]],
                      suffix: Sequence[Iterable[AtomicProp]]) -> bool:
    """Product with the lasso positions, then search for a reachable accepting cycle"""
    if not suffix:
        raise ValueError("Lasso suffix must be nonempty")
    word = _letters(prefix) + _letters(suffix)
    k = len(prefix)
    n = len(word)

    def successors(node: Tuple[int, int]) -> List[Tuple[int, int]]:
        s, i = node
        nxt = i + 1 if i + 1 < n else k
        return [(t, nxt) for label, t in b.successors(s) if label.satisfied_by(word[i])]

    reached = set()
    stack = [(s, 0) for s in b.initial]
    while stack:
        node = stack.pop()
        if node in reached:
            continue
        reached.add(node)
        stack.extend(successors(node))

    for node in sorted(reached):
        if node[0] not in b.accepting:
            continue
        seen = set()
        stack = successors(node)
        while stack:
            cur = stack.pop()
            if cur == node:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(successors(cur))
    return False


def gba_accepts_lasso(b: Gba, prefix: Sequence[Iterable[AtomicProp]],
                      suffix: Sequence[Iterable[AtomicProp]]) -> bool:
    """Accept when a reachable component of the lasso product covers every acceptance set"""
    if not suffix:
        raise ValueError("Lasso suffix must be nonempty")
    word = _letters(prefix) + _letters(suffix)
    k = len(prefix)
    n = len(word)
    g = nx.DiGraph()
    stack = [(s, 0) for s in b.initial]
    g.add_nodes_from(stack)
    while stack:
        s, i = stack.pop()
        nxt = i + 1 if i + 1 < n else k
        for label, marks, t in b.successors(s):
            if not label.satisfied_by(word[i]):
                continue
            mask = sum(1 << m for m in marks)
            if g.has_edge((s, i), (t, nxt)):
                g.edges[(s, i), (t, nxt)]['masks'].add(mask)
                continue
            if (t, nxt) not in g:
                stack.append((t, nxt))
            g.add_edge((s, i), (t, nxt), masks={mask})

    for comp in nx.strongly_connected_components(g):
        node = next(iter(comp))
        if len(comp) == 1 and not g.has_edge(node, node):
            continue
        covered = 0
        for u, v, data in g.subgraph(comp).edges(data=True):
            for mask in data['masks']:
                covered |= mask
        if covered == b.full_mask:
            return True
    return False


def accepts_lasso(b: Union[Nba, Gba], prefix: Sequence[Iterable[AtomicProp]],
                  suffix: Sequence[Iterable[AtomicProp]]) -> bool:
    if isinstance(b, Gba):
        return gba_accepts_lasso(b, prefix, suffix)
    return nba_accepts_lasso(b, prefix, suffix)


def nba_to_json(b: Nba) -> Dict:
    return {
        'states': list(b.states),
        'initial': sorted(b.initial),
        'accepting': sorted(b.accepting),
        'transitions': [
            {
                'from': src,
                'must_true': sorted(p.name for p in label.must_true),
                'must_false': sorted(p.name for p in label.must_false),
                'to': dst,
            }
            for src, label, dst in b.transitions
        ],
    }


def nba_from_json(data: Mapping) -> Nba:
    transitions = tuple(
        (int(t['from']),
         Label(frozenset(prop_from_name(n) for n in t.get('must_true', [])),
               frozenset(prop_from_name(n) for n in t.get('must_false', []))),
         int(t['to']))
        for t in data['transitions']
    )
    return Nba(
        states=tuple(int(s) for s in data['states']),
        initial=frozenset(int(s) for s in data['initial']),
        accepting=frozenset(int(s) for s in data['accepting']),
        transitions=transitions,
    )


# ========================================
# SPECIFICATION BUILDERS
# ========================================

def _edge(g: nx.Graph, e: Tuple[int, int]) -> LinkId:
    link = LinkId.of(e[0], e[1])
    if not g.has_edge(link.i, link.j):
        raise NetworkError(f"Edge {tuple(link)} not in graph")
    return link


def _atom(link: LinkId) -> Atom:
    return Atom(link_prop(link.i, link.j))


def build_phi_ij(g, e: Tuple[int, int]) -> Ltl:
    """G(pi_ij -> AND of !pi over interfering links) & G F pi_ij"""
    graph = as_graph(g)
    link = _edge(graph, e)
    others = sorted(link_neighborhood(graph, link) - {link})
    me = _atom(link)
    safety = Always(implies(me, conj(Not(_atom(o)) for o in others)))
    liveness = Always(Eventually(me))
    return And((safety, liveness))


def build_phi(g) -> Ltl:
    """Conjunction of phi_ij over every link; True for a graph without links"""
    graph = as_graph(g)
    edges = sorted(LinkId.of(u, v) for u, v in graph.edges())
    return conj(build_phi_ij(graph, e) for e in edges)


def build_liveness(g) -> Ltl:
    """Every link active infinitely often"""
    graph = as_graph(g)
    edges = sorted(LinkId.of(u, v) for u, v in graph.edges())
    return conj(Always(Eventually(_atom(e))) for e in edges)


def build_psi(g_cmd: nx.Graph) -> Ltl:
    """Command-node analogue of phi over the command graph"""
    parts = []
    for j in sorted(g_cmd.nodes()):
        me = Atom(node_prop(j))
        excluded = conj(Not(Atom(node_prop(k))) for k in sorted(g_cmd.neighbors(j)) if k != j)
        parts.append(And((Always(implies(me, excluded)), Always(Eventually(me)))))
    return conj(parts)


def build_command_liveness(g_cmd: nx.Graph) -> Ltl:
    return conj(Always(Eventually(Atom(node_prop(j)))) for j in sorted(g_cmd.nodes()))


def build_fairness(g, e: Tuple[int, int]) -> Ltl:
    """
    Fairness for link e: once e activates it stays off until some
    interfering link has been activated.

    Encoded as G(e -> X(!e U any_other)). The Until is anchored one step
    later because e itself holds at the step it fires; without the X the
    obligation !e would be violated immediately. Nesting the Until inside
    a second G would likewise demand !e forever and exclude liveness, so
    the conjunct only constrains the gap after each activation.

    Raises:
        NetworkError: e has no interfering link (the disjunction would be empty)
    """
    graph = as_graph(g)
    link = _edge(graph, e)
    others = sorted(link_neighborhood(graph, link) - {link})
    if not others:
        raise NetworkError(f"Edge {tuple(link)} has no interfering links; fairness undefined")
    me = _atom(link)
    return Always(implies(me, Next(Until(Not(me), disj(_atom(o) for o in others)))))


def build_all_fairness(g) -> Ltl:
    graph = as_graph(g)
    parts = []
    for u, v in sorted(graph.edges()):
        link = LinkId.of(u, v)
        if len(link_neighborhood(graph, link)) > 1:
            parts.append(build_fairness(graph, link))
    return conj(parts)


def canonical_conjunction(formulas: Iterable[Ltl]) -> Ltl:
    """Flattened, duplicate-free conjunction with conjuncts sorted by text"""
    flat = conj(formulas)
    if isinstance(flat, And):
        return And(tuple(sorted(flat.operands, key=to_string)))
    return flat


def semantic_laplacian_step(g, assignment: Mapping[int, Ltl]) -> Dict[int, Ltl]:
    """Each node takes the conjunction of the formulas on its closed neighborhood"""
    graph = as_graph(g)
    missing = [i for i in graph.nodes() if i not in assignment]
    if missing:
        raise ValueError(f"Nodes without formula: {missing}")
    return {
        i: canonical_conjunction(assignment[j] for j in sorted(set(graph.neighbors(i)) | {i}))
        for i in graph.nodes()
    }


def word_of(schedule_elements: Iterable[Iterable[Hashable]],
            observe: Callable[[Hashable], AtomicProp] = prop_of) -> List[Letter]:
    """Map a sequence of activated item sets to letters over propositions"""
    return [frozenset(observe(x) for x in element) for element in schedule_elements]
