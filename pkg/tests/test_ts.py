"""
Tests for the transition-system module: schedules, product TS, costs
"""

import os
import sys

import networkx as nx
import pytest
from hypothesis import given, strategies as st

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.errors import BudgetExceededError, HorizonError
from modules.ltl import link_prop
from modules.network import LinkId, path_network
from modules.ts import (ACTIVE, INACTIVE, STANDBY, SWITCH, CostFn, CostKind, Schedule, TsPolicy, build_command_ts,
                        build_link_ts, build_product_ts, cost_to_go, decode_element, encode_element, fold_to_lasso,
                        hausdorff_cost, jaccard_cost, plan_cost, schedule_period_lcm, sequential_schedule)


A = LinkId(0, 1)
B = LinkId(1, 2)
C = LinkId(2, 3)
E = frozenset()


def fs(*items):
    return frozenset(items)


# ========================================
# SCHEDULES
# ========================================

class TestSchedule:
    """Test lasso schedules"""

    def test_timeline(self):
        s = Schedule((E, fs(A)), (fs(B), fs(A)))
        assert [s.at(t) for t in range(6)] == [E, fs(A), fs(B), fs(A), fs(B), fs(A)]
        assert s.period == 2
        assert s.word_length == 4

    def test_successor_loops_to_suffix_start(self):
        s = Schedule((E,), (fs(A), fs(B)))
        assert [s.successor(p) for p in range(3)] == [1, 2, 1]

    def test_closed_form(self):
        s = Schedule((E,), (fs(A), fs(B)))
        assert not s.is_closed()
        closed = s.closed()
        assert closed.is_closed()
        assert list(closed.unroll(7)) == list(s.unroll(7))

    def test_items(self):
        s = Schedule((E, fs(C)), (fs(A), fs(C)))
        assert s.items() == {A, C}
        assert s.suffix_items() == {A, C}

    def test_empty_suffix_rejected(self):
        with pytest.raises(ValueError):
            Schedule((E,), ())

    def test_word(self):
        prefix, suffix = Schedule((E,), (fs(A, C),)).word()
        assert prefix == [frozenset()]
        assert suffix == [frozenset([link_prop(0, 1), link_prop(2, 3)])]

    def test_dict_form(self):
        s = Schedule((E, fs(A)), (fs(B), fs(A)))
        data = s.to_dict(cost=3.0)
        assert data['prefix'] == [[], [[0, 1]]]
        assert data['cost'] == 3.0
        assert Schedule.from_dict(data) == s

    def test_node_items_encode_as_ints(self):
        assert encode_element(fs(2, 0)) == [0, 2]
        assert decode_element([[2, 1], 3]) == fs(LinkId(1, 2), 3)

    def test_constant(self):
        assert Schedule.constant() == Schedule((E,), (E,))
        assert Schedule.constant([A]) == Schedule((E, fs(A)), (fs(A),))

    def test_sequential_schedule(self, p4):
        s = sequential_schedule(p4)
        assert s.suffix == (fs(A), fs(B), fs(C))
        assert s.prefix == (E, fs(C))
        assert s.is_closed()

    def test_sequential_schedule_without_links(self):
        g = nx.Graph()
        g.add_node(0)
        assert sequential_schedule(g) == Schedule((E,), (E,))

    def test_period_lcm(self):
        s2 = Schedule((E,), (fs(A), fs(B)))
        s3 = Schedule((E,), (fs(A), fs(B), fs(C)))
        assert schedule_period_lcm([s2, s3]) == 6


class TestFold:
    """Test folding a deterministic machine into a lasso"""

    def test_counter_mod_three(self):
        schedule, config = fold_to_lasso(0, lambda k: (fs(k), (k + 1) % 3), horizon=10)
        assert config == 0
        assert schedule.period == 3
        assert schedule.is_closed()
        assert [schedule.at(t) for t in range(6)] == [fs(0), fs(1), fs(2), fs(0), fs(1), fs(2)]

    def test_transient_then_loop(self):
        step = {0: (fs('a'), 1), 1: (fs('b'), 2), 2: (fs('c'), 1)}
        schedule, _ = fold_to_lasso(0, lambda k: step[k], horizon=10)
        assert [schedule.at(t) for t in range(5)] == [fs('a'), fs('b'), fs('c'), fs('b'), fs('c')]

    def test_horizon(self):
        with pytest.raises(HorizonError):
            fold_to_lasso(0, lambda k: (E, k + 1), horizon=5)


# ========================================
# TRANSITION SYSTEMS
# ========================================

class TestLinkTs:
    """Test the two-state link system"""

    def test_switch_and_standby(self):
        ts = build_link_ts((2, 1))
        assert ts.edge == LinkId(1, 2)
        assert ts.initial == INACTIVE
        assert ts.step(INACTIVE, SWITCH) == ACTIVE
        assert ts.step(ACTIVE, SWITCH) == INACTIVE
        assert ts.step(ACTIVE, STANDBY) == ACTIVE
        assert ts.observe(ACTIVE) == {link_prop(1, 2)}
        assert ts.observe(INACTIVE) == frozenset()


class TestProductTs:
    """Test product transition systems"""

    def test_complete_policy_has_every_subset(self, p3):
        ts = build_product_ts(p3, TsPolicy.COMPLETE)
        assert len(ts) == 4
        assert ts.initial == 0

    def test_non_interfering_policy(self, p4):
        ts = build_product_ts(p4, TsPolicy.NON_INTERFERING)
        found = {ts.items_of(q) for q in ts.states}
        assert found == {E, fs(A), fs(B), fs(C), fs(A, C)}
        assert all(ts.is_independent(q) for q in ts.states)

    def test_transitions_are_complete_among_states(self, p4):
        ts = build_product_ts(p4)
        assert sorted(ts.successors(ts.bits_of([B]))) == sorted(ts.states)

    def test_observation(self, p4):
        ts = build_product_ts(p4)
        assert ts.observe(ts.bits_of([A, C])) == {link_prop(0, 1), link_prop(2, 3)}

    def test_state_budget(self):
        net = path_network(8)
        with pytest.raises(BudgetExceededError):
            build_product_ts(net, TsPolicy.COMPLETE, state_budget=100)
        with pytest.raises(BudgetExceededError):
            build_product_ts(net, TsPolicy.NON_INTERFERING, state_budget=10)

    def test_command_ts(self):
        ts = build_command_ts(nx.path_graph(3))
        assert {ts.items_of(q) for q in ts.states} == {E, fs(0), fs(1), fs(2), fs(0, 2)}


# ========================================
# COSTS
# ========================================

class TestCosts:
    """Test transition costs and plan cost accounting"""

    def test_jaccard(self):
        assert jaccard_cost(E, E) == 0.0
        assert jaccard_cost(E, fs(A)) == 1.0
        assert jaccard_cost(fs(A, C), fs(A)) == pytest.approx(0.5)
        assert jaccard_cost(fs(A), fs(B)) == 1.0

    @given(st.sets(st.sampled_from([A, B, C])), st.sets(st.sampled_from([A, B, C])))
    def test_jaccard_is_a_bounded_symmetric_cost(self, a, b):
        d = jaccard_cost(a, b)
        assert 0.0 <= d <= 1.0
        assert d == jaccard_cost(b, a)
        assert (d == 0.0) == (frozenset(a) == frozenset(b))

    def test_hausdorff(self, p3):
        cost = hausdorff_cost(p3)
        assert cost.kind == CostKind.HAUSDORFF
        assert cost(fs(A), fs(A)) == 0.0
        assert cost(fs(A), fs(B)) == pytest.approx(1.0)
        assert cost(E, fs(A)) == pytest.approx(p3.diameter)

    def test_table_cost(self):
        cost = CostFn.from_table({(E, fs(A)): 0.25}, default=2.0)
        assert cost(E, [A]) == 0.25
        assert cost([A], E) == 2.0

    def test_negative_cost_rejected(self):
        cost = CostFn(CostKind.TABLE, lambda a, b: -1.0)
        with pytest.raises(ValueError):
            cost(E, E)

    def test_table_kind_needs_a_table(self, p3):
        with pytest.raises(ValueError):
            CostFn.for_network(p3, CostKind.TABLE)

    def test_cost_to_go(self):
        assert cost_to_go([E, fs(A), fs(B)], jaccard_cost) == 2.0
        assert cost_to_go([E], jaccard_cost) == 0.0
        with pytest.raises(ValueError):
            cost_to_go([], jaccard_cost)

    def test_plan_cost_counts_the_wrap(self):
        s = Schedule((E, fs(A)), (fs(B), fs(A)))
        assert plan_cost(s, jaccard_cost) == pytest.approx(3.0)

    def test_plan_cost_of_constant(self):
        assert plan_cost(Schedule.constant([A]), jaccard_cost) == pytest.approx(1.0)
