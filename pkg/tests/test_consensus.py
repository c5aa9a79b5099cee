"""
Tests for Laplacian consensus over scheduled links
"""

import os
import sys

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.consensus import (SwitchingGraph, check_joint_connectivity, compare_runs, consensus_clusters, efficiency,
                               initial_state, is_matching, laplacian, liveness_check, local_spread, run, step,
                               step_message_passing)
from modules.errors import ConsensusError
from modules.network import LinkId
from modules.planner import plan_centralized
from modules.ts import Schedule


E = frozenset()
A = LinkId(0, 1)
B = LinkId(1, 2)
C = LinkId(2, 3)


def fs(*items):
    return frozenset(items)


# ========================================
# FIXTURES
# ========================================

@pytest.fixture
def alternating():
    """P4 schedule alternating {a, c} and {b}"""
    return Schedule((E, fs(B)), (fs(A, C), fs(B)))


# ========================================
# UPDATE RULES
# ========================================

class TestUpdateRules:
    """Test the Laplacian and the per-node update"""

    def test_laplacian_rows_sum_to_zero(self):
        L = laplacian(4, [(0, 1), (1, 2)])
        assert np.allclose(L.sum(axis=1), 0.0)
        assert L[1, 1] == 2.0
        assert L[0, 1] == -1.0

    def test_matching(self):
        assert is_matching([(0, 1), (2, 3)])
        assert not is_matching([(0, 1), (1, 2)])
        assert is_matching([])

    def test_step_averages_one_link(self):
        y = step(np.array([1.0, 0.0, 0.0]), [(0, 1)], 0.5)
        assert np.allclose(y, [0.5, 0.5, 0.0])

    def test_step_without_links_copies(self):
        y0 = np.array([1.0, 2.0])
        y = step(y0, [], 0.5)
        assert np.array_equal(y, y0)
        assert y is not y0

    @pytest.mark.parametrize('epsilon', [0.0, 1.0, -0.2])
    def test_epsilon_range(self, epsilon):
        with pytest.raises(ConsensusError):
            step(np.zeros(2), [(0, 1)], epsilon)

    def test_message_passing_rejects_shared_node(self):
        with pytest.raises(ConsensusError):
            step_message_passing(np.zeros(3), [(0, 1), (1, 2)])

    @settings(max_examples=50, deadline=None)
    @given(y=st.lists(st.floats(-10, 10), min_size=4, max_size=4),
           epsilon=st.floats(0.05, 0.95),
           matching=st.sampled_from([[], [(0, 1)], [(0, 1), (2, 3)], [(1, 2)], [(0, 3), (1, 2)]]))
    def test_message_passing_equals_matrix_form_on_matchings(self, y, epsilon, matching):
        y = np.array(y)
        assert np.allclose(step(y, matching, epsilon), step_message_passing(y, matching, epsilon))

    @settings(max_examples=50, deadline=None)
    @given(y=st.lists(st.floats(-10, 10), min_size=4, max_size=4), epsilon=st.floats(0.05, 0.95))
    def test_sum_is_invariant(self, y, epsilon):
        y = np.array(y)
        assert step(y, [(0, 1), (2, 3)], epsilon).sum() == pytest.approx(y.sum(), abs=1e-9)


# ========================================
# SWITCHING GRAPH
# ========================================

class TestSwitchingGraph:
    """Test the active subgraph view of a schedule"""

    def test_views(self, p4, alternating):
        sg = SwitchingGraph(p4, alternating)
        assert sg.edges_at(2) == fs(A, C)
        assert sg.vertices_at(1) == {1, 2}
        assert sg.neighbors_at(1, 1) == [2]
        assert sorted(sg.graph_at(2).edges()) == [(0, 1), (2, 3)]
        assert nx.is_connected(sg.union_graph(2, 4))

    def test_unknown_link(self, p4):
        with pytest.raises(ConsensusError):
            SwitchingGraph(p4, Schedule.constant([LinkId(0, 3)]))


# ========================================
# SIMULATION
# ========================================

class TestRun:
    """Test consensus runs along link schedules"""

    def test_converges_to_the_average(self, p4, alternating):
        trajectory = run(p4, alternating, [1.0, 0.0, 0.0, 0.0], epsilon=0.5, T=400)
        assert trajectory.converged()
        assert np.allclose(trajectory.final, 0.25, atol=1e-6)
        assert np.allclose(trajectory.sums, 1.0)
        assert trajectory.clusters() == [[0, 1, 2, 3]]

    def test_uncovered_link_splits_the_network(self, p4):
        schedule = Schedule((E, fs(A, C)), (fs(A, C),))
        trajectory = run(p4, schedule, [1.0, 0.0, 0.0, 0.0], T=200)
        assert not trajectory.converged()
        assert trajectory.clusters() == [[2, 3], [0, 1]]

    def test_planned_schedule_converges(self, k3):
        trajectory = run(k3, plan_centralized(k3), initial_state(3, 'basis', index=0), T=300)
        assert trajectory.converged()
        assert np.allclose(trajectory.final, 1.0 / 3.0, atol=1e-6)

    def test_infeasible_schedule_rejected(self, p3):
        with pytest.raises(ConsensusError):
            run(p3, Schedule.constant([A, B]), [1.0, 0.0, 0.0])

    def test_infeasible_schedule_flagged(self, p3):
        trajectory = run(p3, Schedule.constant([A, B]), [1.0, 0.0, 0.0], T=5, allow_infeasible=True)
        assert not trajectory.feasible
        assert trajectory.fallback_steps == [1, 2, 3, 4]
        assert trajectory.summary()['feasible'] is False

    def test_dimension_mismatch(self, p3):
        with pytest.raises(ConsensusError):
            run(p3, Schedule.constant([A]), [1.0, 0.0])

    def test_horizon(self, p3):
        with pytest.raises(ConsensusError):
            run(p3, Schedule.constant([A]), [1.0, 0.0, 0.0], T=0)

    def test_frame(self, p3):
        df = run(p3, Schedule((E, fs(A)), (fs(B), fs(A))), [1.0, 0.0, 0.0], T=4).to_frame()
        assert list(df.columns) == ['t', 'y_0', 'y_1', 'y_2', 'spread', 'sum']
        assert len(df) == 5
        assert df['spread'].iloc[0] == 1.0


class TestInitialState:
    """Test seeded initial vectors"""

    def test_basis(self):
        y = initial_state(5, 'basis', index=2)
        assert y.sum() == 1.0
        assert y[2] == 1.0

    def test_seeded_random_is_reproducible(self):
        assert np.array_equal(initial_state(6, 'random', seed=4), initial_state(6, 'random', seed=4))

    def test_unknown_mode(self):
        with pytest.raises(ConsensusError):
            initial_state(3, 'gaussian')


# ========================================
# DIAGNOSTICS
# ========================================

class TestDiagnostics:
    """Test connectivity, liveness and efficiency checks"""

    def test_clusters(self):
        assert consensus_clusters([0.5, 0.1, 0.5004, 0.1]) == [[1, 3], [0, 2]]
        assert consensus_clusters([]) == []

    def test_joint_connectivity(self, p4, alternating):
        assert check_joint_connectivity(p4, alternating, 2)
        assert not check_joint_connectivity(p4, alternating, 1)

    def test_joint_connectivity_window_bounds(self, p4, alternating):
        with pytest.raises(ConsensusError):
            check_joint_connectivity(p4, alternating, 0)
        with pytest.raises(ConsensusError):
            check_joint_connectivity(p4, alternating, 1000, max_repeats=4)

    def test_liveness_methods_agree(self, p4, alternating):
        assert liveness_check(p4, alternating)
        assert liveness_check(p4, alternating, method='ltl')
        partial = Schedule((E, fs(A)), (fs(A),))
        assert not liveness_check(p4, partial)
        assert not liveness_check(p4, partial, method='ltl')

    def test_efficiency(self, p4, alternating):
        assert efficiency(alternating, p4) == pytest.approx(50.0)

    def test_local_spread(self):
        states = np.array([[1.0, 0.0, 0.0, 1.0], [0.5, 0.5, 0.0, 1.0]])
        spread = local_spread(states, {0: [0, 1], 1: [2, 3], 2: [3]})
        assert np.allclose(spread, [1.0, 0.5])

    def test_compare_runs(self, p4, alternating):
        sequential = Schedule((E, fs(C)), (fs(A), fs(B), fs(C)))
        df = compare_runs(p4, {'lnc': alternating, 'seq': sequential}, [1.0, 0.0, 0.0, 0.0],
                          {0: [0, 1, 2], 1: [1, 2, 3]}, T=30)
        assert len(df) == 31
        assert {'lnc_global_spread', 'seq_local_spread'} <= set(df.columns)
        assert df['lnc_global_spread'].iloc[-1] < 1.0
