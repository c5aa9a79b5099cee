"""
Acceptance sweeps: seeded feasibility scans, desk-scale optimality,
translation corpus, coverage, consensus and complexity trends.

Long-running; deselect with -m "not slow".
"""

import os
import sys

import networkx as nx
import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from conftest import OPTIMAL_COST, POSITIONS, make_network
from modules.consensus import check_joint_connectivity, consensus_clusters, run
from modules.hlnc import audit_feasibility, plan_hlnc, plan_hlnc_k_hop
from modules.ltl import (TRUE, Always, And, Atom, Eventually, Next, Not, Or, Release, Until, build_fairness,
                         build_liveness, build_phi, build_phi_ij, build_psi, link_prop, parse)
from modules.network import (LinkId, as_graph, build_command_layer, build_geometric_graph, corridor_instance,
                             coverage_check, kmeans_place, path_network, random_geometric_network, uncovered_edges)
from modules.oracle import brute_force_optimal_with_cost, verify_translation
from modules.planner import PlannerOptions, plan_centralized_outcome, plan_specialized_outcome
from modules.ts import CostFn, sequential_schedule

pytestmark = pytest.mark.slow

P = link_prop(0, 1)
Q = link_prop(1, 2)
TOL = 1e-9


def strip_instance(seed: int, n: int = 10, r: float = 1.0, R: float = 2.5, max_k: int = 6):
    """Seeded thin-strip network with the smallest k-means layer that certifies coverage"""
    net = random_geometric_network(n, r, (float(n), 1.2), seed=seed)
    for K in range(2, max_k + 1):
        centers = kmeans_place(net.positions, K, seed=seed)
        if coverage_check(net, centers, R) is not None:
            return net, centers, R
    return net, None, R


def random_formula(rng: np.random.Generator, size: int):
    """Formula over two link propositions with at most size nodes"""
    if size <= 1:
        return [Atom(P), Atom(Q), TRUE][int(rng.integers(3))]
    kind = int(rng.integers(8))
    if kind < 4 or size == 2:
        op = [Not, Next, Always, Eventually][kind % 4]
        return op(random_formula(rng, size - 1))
    left = int(rng.integers(1, size - 1))
    a, b = random_formula(rng, left), random_formula(rng, size - 1 - left)
    if kind == 4:
        return And((a, b))
    if kind == 5:
        return Or((a, b))
    if kind == 6:
        return Until(a, b)
    return Release(a, b)


def translation_corpus():
    path3 = nx.path_graph(3)
    single = nx.path_graph(2)
    corpus = [
        build_phi(path3),
        build_phi(single),
        build_phi_ij(path3, (0, 1)),
        build_phi_ij(path3, (1, 2)),
        build_liveness(path3),
        build_psi(nx.path_graph(2)),
        build_fairness(path3, (0, 1)),
        build_fairness(path3, (1, 2)),
        parse('G (e_0_1 -> X !e_0_1)'),
        parse('F G e_0_1'),
        parse('G F e_0_1 & F G !e_1_2'),
        parse('(e_0_1 U e_1_2) R e_0_1'),
        parse('X (e_0_1 U G e_1_2)'),
        parse('!(G F e_0_1)'),
    ]
    rng = np.random.default_rng(2024)
    while len(corpus) < 34:
        corpus.append(random_formula(rng, int(rng.integers(1, 9))))
    return corpus


# ========================================
# FEASIBILITY AND OPTIMALITY
# ========================================

class TestFeasibilitySoundness:
    """Hierarchical plans on seeded random networks never break the audit"""

    def test_seeded_networks(self):
        planned = 0
        for seed in range(50):
            net, centers, R = strip_instance(seed)
            if centers is None:
                continue
            layer = build_command_layer(net, centers, R)
            if layer.e_max() > 6:
                continue
            plan = plan_hlnc(net, centers, R)
            audit = audit_feasibility(net, plan.stitched)
            assert audit.ok, f"seed {seed}: {audit.summary()}"
            planned += 1
        assert planned > 0


class TestDeskScaleOptimality:
    """Planner cost equals the brute-force optimum on every small network"""

    @pytest.mark.parametrize('name', sorted(POSITIONS))
    @pytest.mark.parametrize('faithful', [False, True])
    def test_reference_networks(self, name, faithful):
        net = make_network(name)
        cost = CostFn.jaccard()
        options = PlannerOptions.faithful() if faithful else PlannerOptions()
        _, oracle_cost = brute_force_optimal_with_cost(net, cost, P=2, S=4)
        planned = plan_centralized_outcome(net, cost, options).report.cost
        assert abs(planned - oracle_cost) <= TOL
        assert abs(planned - OPTIMAL_COST[name]) <= TOL

    @pytest.mark.parametrize('seed', range(5))
    @pytest.mark.parametrize('m', [1, 2, 3, 4])
    def test_random_graphs(self, seed, m):
        g = nx.gnm_random_graph(5, m, seed=seed)
        cost = CostFn.jaccard()
        _, oracle_cost = brute_force_optimal_with_cost(g, cost, P=2, S=4)
        assert abs(plan_centralized_outcome(g, cost).report.cost - oracle_cost) <= TOL


class TestCrossPlannerAgreement:
    """Specialized and centralized planners agree up to six links"""

    @pytest.mark.parametrize('seed', range(4))
    @pytest.mark.parametrize('m', [4, 5, 6])
    def test_random_graphs(self, seed, m):
        g = nx.gnm_random_graph(6, m, seed=seed)
        cost = CostFn.jaccard()
        central = plan_centralized_outcome(g, cost).report.cost
        special = plan_specialized_outcome(g, cost).report.cost
        assert abs(central - special) <= TOL


# ========================================
# TRANSLATION
# ========================================

class TestTranslationCorpus:
    """Automaton acceptance matches the semantics on every short lasso"""

    @pytest.mark.parametrize('index', range(34))
    def test_corpus(self, index):
        formula = translation_corpus()[index]
        report = verify_translation(formula, max_props=2, max_len=3)
        assert report.ok, report.disagreements[:3]


# ========================================
# COVERAGE
# ========================================

class TestCoverageTheorem:
    """A coverage witness puts every link inside some command subgraph"""

    def test_certified_instances_cover_every_link(self):
        certified = 0
        for seed in range(30):
            net, centers, R = strip_instance(seed)
            if centers is None:
                continue
            eps = coverage_check(net, centers, R)
            assert net.r < eps < R
            assert uncovered_edges(net, build_command_layer(net, centers, R)) == []
            certified += 1
        assert certified > 0

    def test_center_ring_with_uncovered_link(self):
        net = build_geometric_graph([(0.0, 0.0), (1.0, 0.0)], 1.2)
        ring = [(3.0, 0.0), (-3.0, 0.0), (0.0, 3.0), (0.0, -3.0)]
        assert coverage_check(net, ring, 1.5) is None
        assert uncovered_edges(net, build_command_layer(net, ring, 1.5)) == [LinkId(0, 1)]


# ========================================
# CONSENSUS
# ========================================

class TestConsensusProperties:
    """Sum conservation, monotone spread and convergence under joint connectivity"""

    @pytest.mark.parametrize('seed', range(5))
    def test_sequential_schedule_on_connected_networks(self, seed):
        net = random_geometric_network(10, 4.0, (10.0, 10.0), seed=seed, require_connected=True)
        schedule = sequential_schedule(net)
        assert check_joint_connectivity(net, schedule, schedule.period)
        y0 = np.random.default_rng(seed).uniform(0.0, 1.0, size=net.n)
        trajectory = run(net, schedule, y0, epsilon=0.5, T=10000)
        sums = trajectory.sums
        assert np.all(np.abs(sums - sums[0]) <= 1e-9 * max(1.0, abs(sums[0])))
        assert np.all(np.diff(trajectory.spread) <= 1e-12)
        assert trajectory.final_spread < 1e-6


def split_start(n: int, link: LinkId) -> np.ndarray:
    """All nodes at 0.5 except the endpoints of link, at 1.0 and 0.0"""
    y0 = np.full(n, 0.5)
    y0[link.i], y0[link.j] = 1.0, 0.0
    return y0


def hierarchical_instances():
    for K in range(2, 7):
        net, centers, R = corridor_instance(K)
        yield f"corridor{K}", net, plan_hlnc(net, centers, R).stitched
    for k in (1, 2):
        for m in range(4, 9):
            g = nx.path_graph(m)
            yield f"path{m}-k{k}", g, plan_hlnc_k_hop(g, k).stitched
            c = nx.cycle_graph(m)
            yield f"cycle{m}-k{k}", c, plan_hlnc_k_hop(c, k).stitched


class TestConsensusClusters:
    """Hierarchical trace still split in two or more clusters where the sequential one agrees"""

    def test_seeded_instances(self):
        witnesses = []
        for name, net, stitched in hierarchical_instances():
            n = as_graph(net).number_of_nodes()
            seq = sequential_schedule(net)
            t_seq = next(t for t in range(seq.word_length) if seq.at(t))
            (link,) = seq.at(t_seq)
            t_hier = next(t for t in range(10 * stitched.word_length)
                          if any({x.i, x.j} & {link.i, link.j} for x in stitched.at(t)))
            # only a different link touching the endpoints keeps them apart
            if link in stitched.at(t_hier) or t_hier < t_seq:
                continue
            y0 = split_start(n, link)
            T = t_hier + 1
            hier_run = run(net, stitched, y0, epsilon=0.5, T=T)
            seq_run = run(net, seq, y0, epsilon=0.5, T=T)
            assert len(consensus_clusters(hier_run.final)) >= 2, name
            assert consensus_clusters(seq_run.final) == [list(range(n))], name
            witnesses.append(name)
        assert witnesses


# ========================================
# COMPLEXITY
# ========================================

class TestComplexityTrend:
    """Centralized product size grows with |E|; hierarchical work grows linearly in K"""

    def test_centralized_product_grows(self):
        sizes = []
        for m in range(2, 6):
            report = plan_centralized_outcome(path_network(m), options=PlannerOptions.faithful()).report
            sizes.append(report.pba_states)
        assert all(b > a for a, b in zip(sizes, sizes[1:]))

    def test_hierarchical_work_is_linear_in_k(self):
        totals = []
        for K in range(2, 9):
            net, centers, R = corridor_instance(K)
            plan = plan_hlnc(net, centers, R)
            assert plan.layer.e_max() <= 6
            assert audit_feasibility(net, plan.stitched).ok
            totals.append(sum(r.pba_states for r in plan.local_reports.values()))
        steps = {b - a for a, b in zip(totals[1:], totals[2:])}
        assert len(steps) == 1
