"""
Shared fixtures: the small reference networks used across the test modules
"""

import math
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.network import build_geometric_graph, corridor_instance


# ========================================
# REFERENCE NETWORKS
# ========================================

H = math.sqrt(3.0) / 2.0

POSITIONS = {
    'single_edge': [(0.0, 0.0), (1.0, 0.0)],
    'two_disjoint': [(0.0, 0.0), (1.0, 0.0), (5.0, 0.0), (6.0, 0.0)],
    'p3': [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
    'k3': [(0.0, 0.0), (1.0, 0.0), (0.5, H)],
    's3': [(0.0, 0.0), (1.0, 0.0), (-0.5, H), (-0.5, -H)],
    'p4': [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)],
}

# Optimal Jaccard plan cost of each reference network
OPTIMAL_COST = {
    'single_edge': 1.0,
    'two_disjoint': 1.0,
    'p3': 3.0,
    'k3': 4.0,
    's3': 4.0,
    'p4': 3.0,
}


def make_network(name: str):
    return build_geometric_graph(POSITIONS[name], 1.0)


@pytest.fixture
def single_edge():
    return make_network('single_edge')


@pytest.fixture
def two_disjoint():
    return make_network('two_disjoint')


@pytest.fixture
def p3():
    return make_network('p3')


@pytest.fixture
def k3():
    return make_network('k3')


@pytest.fixture
def s3():
    return make_network('s3')


@pytest.fixture
def p4():
    return make_network('p4')


@pytest.fixture(params=sorted(POSITIONS))
def reference_network(request):
    """(name, network) for every reference network"""
    return request.param, make_network(request.param)


@pytest.fixture
def corridor3():
    """Three-cell corridor: 12 sensors on a line, path-shaped command graph"""
    return corridor_instance(3)
