"""
Tests for the planner module: product automaton, optimal lasso search and
the centralized/specialized pipelines
"""

import os
import sys

import networkx as nx
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from conftest import OPTIMAL_COST, make_network
from modules.errors import BudgetExceededError, InfeasibleError
from modules.ltl import Gba, build_liveness, build_phi, parse, translate_to_gba, translate_to_nba
from modules.network import LinkId, path_network
from modules.oracle import brute_force_optimal_with_cost
from modules.planner import (DEFAULT_PBA_BUDGET, PlannerOptions, _cheapest_cycle, accepting_components, build_pba,
                             default_pba_budget, find_optimal_lasso, is_trivial_component, link_specification,
                             plan_centralized, plan_centralized_outcome, plan_specialized_lnc,
                             plan_specialized_outcome, scc_decompose, schedule_cost, synthesize, verify_schedule)
from modules.ts import CostFn, Schedule, TsPolicy, build_product_ts, hausdorff_cost, plan_cost


E = frozenset()


# ========================================
# FIXTURES
# ========================================

@pytest.fixture
def jaccard():
    return CostFn.jaccard()


@pytest.fixture
def p5():
    """Path with four links: the optimum alternates {a, c} and {b, d}"""
    return path_network(4)


def small_graphs():
    """Seeded random graphs with one to six links"""
    graphs = []
    for m in range(1, 7):
        for seed in range(3):
            graphs.append(nx.gnm_random_graph(5, m, seed=seed))
    return graphs


# ========================================
# PRODUCT AUTOMATON
# ========================================

class TestProductAutomaton:
    """Test PBA construction and SCC analysis"""

    def test_initial_states_pair_empty_set_with_automaton_start(self, p3):
        ts = build_product_ts(p3)
        gba = translate_to_gba(build_liveness(p3.graph))
        pba = build_pba(ts, gba)
        assert pba.initial == tuple((0, s) for s in sorted(gba.initial))
        assert pba.generalized

    def test_labels_read_the_source_observation(self, single_edge):
        ts = build_product_ts(single_edge)
        pba = build_pba(ts, translate_to_gba(build_liveness(single_edge.graph)))
        a = ts.bits_of([LinkId(0, 1)])
        marked = [data['marks'] for (u, _), (v, _), data in pba.graph.edges(data=True) if u == a]
        assert marked and all(1 in masks for masks in marked)
        unmarked = [data['marks'] for (u, _), _, data in pba.graph.edges(data=True) if u == 0]
        assert all(masks == {0} for masks in unmarked)

    def test_accepting_components_cover_every_set(self, p3):
        ts = build_product_ts(p3)
        pba = build_pba(ts, translate_to_gba(build_liveness(p3.graph)))
        components = accepting_components(pba)
        assert components
        assert pba.accepting == frozenset().union(*components)

    def test_budget(self, p4):
        ts = build_product_ts(p4)
        with pytest.raises(BudgetExceededError) as exc:
            build_pba(ts, translate_to_gba(build_phi(p4.graph)), budget=3)
        assert exc.value.what == "PBA states"

    def test_scc_decompose(self):
        g = nx.DiGraph([(0, 1), (1, 0), (1, 2), (3, 3)])
        condensed = scc_decompose(g)
        members = [condensed.nodes[c]['members'] for c in sorted(condensed.nodes())]
        assert members == [{0, 1}, {2}, {3}]
        assert is_trivial_component(g, [2])
        assert not is_trivial_component(g, [3])
        assert not is_trivial_component(g, [0, 1])


class TestLassoSearch:
    """Test the minimum-cost accepting lasso"""

    def test_unsatisfiable_formula(self, single_edge, jaccard):
        ts = build_product_ts(single_edge, TsPolicy.COMPLETE)
        with pytest.raises(InfeasibleError):
            synthesize(ts, parse('G e_0_1 & G !e_0_1'), jaccard)

    def test_plan_components(self, p3, jaccard):
        ts = build_product_ts(p3)
        pba = build_pba(ts, translate_to_gba(build_liveness(p3.graph)))
        plan = find_optimal_lasso(pba, jaccard)
        assert plan.prefix_cost == pytest.approx(1.0)
        assert plan.suffix_cost == pytest.approx(2.0)
        assert plan.cycle_path[-1] == plan.prefix_path[-1]
        assert plan_cost(plan.schedule, jaccard) == pytest.approx(plan.cost)

    def test_buchi_automaton_input(self, p3, jaccard):
        """A degeneralized automaton only accepts after a full level round, so its optimum is costlier"""
        ts = build_product_ts(p3)
        liveness = build_liveness(p3.graph)
        through_nba = synthesize(ts, translate_to_nba(liveness), jaccard)
        through_gba = synthesize(ts, translate_to_gba(liveness), jaccard)
        assert through_nba.report.cost == pytest.approx(4.0)
        assert through_gba.report.cost == pytest.approx(3.0)
        assert verify_schedule(p3, through_nba.schedule)
        assert verify_schedule(p3, through_gba.schedule)

    def test_search_budget(self, p4, jaccard):
        ts = build_product_ts(p4)
        pba = build_pba(ts, translate_to_gba(build_liveness(p4.graph)))
        with pytest.raises(BudgetExceededError):
            find_optimal_lasso(pba, jaccard, budget=2)

    def test_failed_cycle_search_reports_settled_states(self, p4, jaccard):
        """Searches cut off by the cost bound still count toward the budget"""
        ts = build_product_ts(p4)
        pba = build_pba(ts, translate_to_gba(build_liveness(p4.graph)))
        anchor = min(pba.accepting)
        condensed = scc_decompose(pba.graph)
        members = condensed.nodes[condensed.graph["mapping"][anchor]]["members"]

        def step_cost(v, w):
            return jaccard(ts.items_of(v[0]), ts.items_of(w[0]))

        # every cycle covering the three links costs at least 2
        found, settled = _cheapest_cycle(pba, anchor, members, step_cost, bound=1.5)
        assert found is None
        assert settled > 0


# ========================================
# CENTRALIZED PIPELINE
# ========================================

class TestCentralized:
    """Test the centralized planner on the reference networks"""

    def test_optimal_costs(self, reference_network, jaccard):
        name, net = reference_network
        schedule = plan_centralized(net, jaccard)
        assert plan_cost(schedule, jaccard) == pytest.approx(OPTIMAL_COST[name])

    def test_closed_form(self, reference_network):
        _, net = reference_network
        schedule = plan_centralized(net)
        assert schedule.prefix[0] == E
        assert schedule.is_closed()
        assert verify_schedule(net, schedule)

    def test_single_edge_plan(self, single_edge):
        schedule = plan_centralized(single_edge)
        assert schedule == Schedule((E, frozenset([LinkId(0, 1)])), (frozenset([LinkId(0, 1)]),))

    def test_p4_alternates(self, p4):
        schedule = plan_centralized(p4)
        assert set(schedule.suffix) == {frozenset([LinkId(0, 1), LinkId(2, 3)]), frozenset([LinkId(1, 2)])}

    def test_order_free_acceptance(self, p5, jaccard):
        outcome = plan_centralized_outcome(p5, jaccard)
        assert outcome.report.cost == pytest.approx(3.0)
        assert outcome.schedule.period == 2

    def test_matches_oracle(self, reference_network, jaccard):
        _, net = reference_network
        _, oracle_cost = brute_force_optimal_with_cost(net, jaccard)
        assert schedule_cost(plan_centralized(net, jaccard), jaccard) == pytest.approx(oracle_cost)

    def test_matches_oracle_on_four_link_path(self, p5, jaccard):
        _, oracle_cost = brute_force_optimal_with_cost(p5, jaccard)
        assert oracle_cost == pytest.approx(3.0)

    @pytest.mark.parametrize('name', ['p3', 'k3', 's3'])
    def test_faithful_pipeline_agrees(self, name, jaccard):
        net = make_network(name)
        outcome = plan_centralized_outcome(net, jaccard, PlannerOptions.faithful())
        assert outcome.report.cost == pytest.approx(OPTIMAL_COST[name])
        assert outcome.report.ts_states == 2 ** len(net.edges)

    def test_fairness(self, p3):
        options = PlannerOptions(fairness=True)
        schedule = plan_centralized(p3, options=options)
        assert verify_schedule(p3, schedule, fairness=True)
        assert schedule_cost(schedule) == pytest.approx(3.0)

    def test_specification_choice(self, p3):
        assert link_specification(p3, PlannerOptions()) == build_liveness(p3.graph)
        assert link_specification(p3, PlannerOptions.faithful()) == build_phi(p3.graph)
        complete = PlannerOptions(policy=TsPolicy.COMPLETE)
        assert not complete.uses_liveness_only

    def test_hausdorff_cost(self, p3):
        schedule = plan_centralized(p3, hausdorff_cost(p3))
        assert verify_schedule(p3, schedule)

    def test_table_cost_prefers_cheap_transitions(self, two_disjoint):
        a, b = LinkId(0, 1), LinkId(2, 3)
        both = frozenset([a, b])
        table = {(E, frozenset([a])): 0.1, (frozenset([a]), both): 0.1, (both, both): 0.0}
        schedule = plan_centralized(two_disjoint, CostFn.from_table(table, default=5.0))
        assert schedule.prefix == (E, frozenset([a]), both)
        assert schedule.suffix == (both,)

    def test_network_without_links(self):
        g = nx.Graph()
        g.add_nodes_from([0, 1, 2])
        outcome = plan_centralized_outcome(g)
        assert outcome.schedule == Schedule((E,), (E,))
        assert outcome.report.cost == 0.0

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            plan_centralized(path_network(8), options=PlannerOptions(pba_budget=20))

    def test_report(self, k3):
        outcome = plan_centralized_outcome(k3)
        report = outcome.report.to_dict()
        assert report['pba_states'] > 0
        assert report['accepting'] > 0
        assert report['sccs'] > 0
        assert report['cost'] == pytest.approx(4.0)
        assert report['planner'] == 'centralized'


class TestBudgetEnvironment:
    """Test the LNC_PBA_BUDGET override"""

    def test_default(self, monkeypatch):
        monkeypatch.delenv('LNC_PBA_BUDGET', raising=False)
        assert default_pba_budget() == DEFAULT_PBA_BUDGET

    def test_override(self, monkeypatch):
        monkeypatch.setenv('LNC_PBA_BUDGET', '1234')
        assert default_pba_budget() == 1234
        assert PlannerOptions().pba_budget == 1234

    def test_invalid_value_ignored(self, monkeypatch):
        monkeypatch.setenv('LNC_PBA_BUDGET', 'lots')
        assert default_pba_budget() == DEFAULT_PBA_BUDGET


# ========================================
# SPECIALIZED PIPELINE
# ========================================

class TestSpecialized:
    """Test the covering-cycle planner against the centralized one"""

    def test_reference_costs(self, reference_network, jaccard):
        name, net = reference_network
        schedule = plan_specialized_lnc(net, jaccard)
        assert schedule_cost(schedule, jaccard) == pytest.approx(OPTIMAL_COST[name])
        assert verify_schedule(net, schedule)
        assert schedule.is_closed()

    @pytest.mark.parametrize('graph', small_graphs(), ids=lambda g: f"m{g.number_of_edges()}")
    def test_agrees_with_centralized(self, graph, jaccard):
        central = plan_centralized_outcome(graph, jaccard)
        special = plan_specialized_outcome(graph, jaccard)
        assert special.report.cost == pytest.approx(central.report.cost)
        assert verify_schedule(graph, special.schedule)

    def test_four_link_path(self, p5, jaccard):
        assert plan_specialized_outcome(p5, jaccard).report.cost == pytest.approx(3.0)

    def test_network_without_links(self):
        g = nx.Graph()
        g.add_node(0)
        assert plan_specialized_lnc(g) == Schedule((E,), (E,))
