"""
Network Module for the LNC planner

Geometric sensor networks, link neighborhoods, command-node placement
(k-means), coverage certification and the graph utilities used by the
hierarchical planner.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from .errors import NetworkError

logger = logging.getLogger(__name__)

# Relative slack used when comparing a distance against r, R or 2R
TIE_TOL = 1e-9


class LinkId(NamedTuple):
    """Undirected link identity, always stored with i < j"""
    i: int
    j: int

    @classmethod
    def of(cls, a: int, b: int) -> 'LinkId':
        a, b = int(a), int(b)
        if a == b:
            raise NetworkError(f"Self-loop link ({a}, {b}) is not allowed")
        return cls(a, b) if a < b else cls(b, a)


def within(distance, threshold: float):
    """Closed-ball test with a relative tie tolerance"""
    return distance <= threshold * (1.0 + TIE_TOL) + 1e-12


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


# ========================================
# SENSOR NETWORK
# ========================================

@dataclass(eq=False)
class SensorNetwork:
    """
    Static sensor network with proximity links.

    Attributes:
        positions: (N, d) coordinates
        r: communication radius
        bounds: (2, d) array, lower and upper corner of the region
        graph: networkx graph on 0..N-1, node attribute 'pos'
        edges: canonical sorted LinkIds
        ids: external sensor identifiers, index-aligned with positions
    """
    positions: np.ndarray
    r: float
    bounds: np.ndarray
    graph: nx.Graph
    edges: Tuple[LinkId, ...]
    ids: Tuple[int, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def diameter(self) -> float:
        """Diagonal of the bounding region"""
        return float(np.linalg.norm(self.bounds[1] - self.bounds[0]))

    def edge_index(self) -> Dict[LinkId, int]:
        return {e: k for k, e in enumerate(self.edges)}


def as_graph(obj) -> nx.Graph:
    """Accept a SensorNetwork or a bare networkx graph"""
    if isinstance(obj, nx.Graph):
        return obj
    graph = getattr(obj, 'graph', None)
    if isinstance(graph, nx.Graph):
        return graph
    raise TypeError(f"Expected a graph or SensorNetwork, got {type(obj).__name__}")


def graph_edges(g) -> List[LinkId]:
    return sorted(LinkId.of(u, v) for u, v in as_graph(g).edges())


def build_geometric_graph(positions, r: float, bounds=None, ids: Optional[Sequence[int]] = None) -> SensorNetwork:
    """
    Threshold graph E = {ij : |x_i - x_j| <= r}; ties at exactly r are links.

    Raises:
        NetworkError: r <= 0, non-finite or duplicate positions, points outside bounds
    """
    X = np.asarray(positions, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 2) if X.size else np.zeros((0, 2))
    if r <= 0:
        raise NetworkError(f"Communication radius must be positive, got {r}")
    if X.size and not np.all(np.isfinite(X)):
        raise NetworkError("Sensor positions must be finite")
    n = len(X)
    if n and len(np.unique(X, axis=0)) < n:
        raise NetworkError("Duplicate sensor positions are not allowed")

    if bounds is None:
        lo = X.min(axis=0) if n else np.zeros(X.shape[1])
        hi = X.max(axis=0) if n else np.zeros(X.shape[1])
        box = np.vstack([lo, hi])
    else:
        box = np.asarray(bounds, dtype=float).reshape(2, -1)
        if n and (np.any(X < box[0] - 1e-12) or np.any(X > box[1] + 1e-12)):
            raise NetworkError("Sensor positions fall outside the declared bounds")

    graph = nx.Graph()
    for i in range(n):
        graph.add_node(i, pos=tuple(X[i]))
    edges = []
    if n > 1:
        dist = _pairwise(X, X)
        ii, jj = np.nonzero(np.triu(within(dist, r), k=1))
        for i, j in zip(ii.tolist(), jj.tolist()):
            graph.add_edge(i, j)
            edges.append(LinkId(i, j))
    net = SensorNetwork(
        positions=X,
        r=float(r),
        bounds=box,
        graph=graph,
        edges=tuple(sorted(edges)),
        ids=tuple(ids) if ids is not None else tuple(range(n)),
    )
    logger.debug(f"Geometric graph: {n} sensors, {len(edges)} links at r={r}")
    return net


def link_neighborhood(net, e: Tuple[int, int]) -> Set[LinkId]:
    """Links sharing an endpoint with e, e included"""
    g = as_graph(net)
    link = LinkId.of(e[0], e[1])
    if not g.has_edge(link.i, link.j):
        raise NetworkError(f"Unknown edge {tuple(link)}")
    out = {link}
    for end in (link.i, link.j):
        for other in g.neighbors(end):
            out.add(LinkId.of(end, other))
    return out


def interferes(a: LinkId, b: LinkId) -> bool:
    return a != b and bool({a.i, a.j} & {b.i, b.j})


def random_geometric_network(n: int, r: float, box: Tuple[float, float] = (10.0, 10.0), seed: int = 0,
                             require_connected: bool = False, max_tries: int = 200) -> SensorNetwork:
    """Uniform points in a box; optionally resample until the graph is connected"""
    rng = np.random.default_rng(seed)
    bounds = np.array([[0.0, 0.0], [float(box[0]), float(box[1])]])
    for attempt in range(1, max_tries + 1):
        X = rng.uniform(bounds[0], bounds[1], size=(n, 2))
        net = build_geometric_graph(X, r, bounds=bounds)
        if not require_connected or n == 0 or nx.is_connected(net.graph):
            if attempt > 1:
                logger.debug(f"Connected instance found after {attempt} draws")
            return net
    raise NetworkError(f"No connected network with n={n}, r={r} after {max_tries} draws")


def corridor_instance(cells: int, spacing: float = 1.0) -> Tuple[SensorNetwork, np.ndarray, float]:
    """
    Sensors on a line, four per command cell, with centers that certify
    coverage and a path-shaped command graph.

    Returns:
        (network, centers, R) with r = spacing and R = 3 * spacing
    """
    if cells < 1:
        raise NetworkError("A corridor needs at least one cell")
    n = 4 * cells
    X = np.column_stack([np.arange(n) * spacing, np.zeros(n)])
    net = build_geometric_graph(X, spacing)
    centers = np.column_stack([(1.5 + 4.0 * np.arange(cells)) * spacing, np.zeros(cells)])
    return net, centers, 3.0 * spacing


def path_network(links: int, spacing: float = 1.0) -> SensorNetwork:
    """Sensors on a line forming a path with the given number of links"""
    n = links + 1
    X = np.column_stack([np.arange(n) * spacing, np.zeros(n)])
    return build_geometric_graph(X, spacing)


# ========================================
# COMMAND LAYER
# ========================================

@dataclass
class KMeansResult:
    """Lloyd iteration outcome; history holds the squared objective per iteration"""
    centers: np.ndarray
    labels: np.ndarray
    objective: float
    history: List[float]
    iterations: int


def kmeans_objective(positions, centers) -> float:
    """Sum over sensors of the distance to the nearest center (unsquared)"""
    X = np.asarray(positions, dtype=float)
    C = np.asarray(centers, dtype=float)
    if not len(X):
        return 0.0
    return float(_pairwise(X, C).min(axis=1).sum())


def kmeans_fit(positions, K: int, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """
    Squared-norm Lloyd iteration from seeded farthest-point initialization.

    Raises:
        NetworkError: K outside 1..N
    """
    X = np.asarray(positions, dtype=float)
    N = len(X)
    if K < 1 or K > N:
        raise NetworkError(f"K must satisfy 1 <= K <= N={N}, got {K}")
    rng = np.random.default_rng(seed)

    chosen = [int(rng.integers(N))]
    nearest = np.linalg.norm(X - X[chosen[0]], axis=1)
    for _ in range(1, K):
        nxt = int(np.argmax(nearest))
        chosen.append(nxt)
        nearest = np.minimum(nearest, np.linalg.norm(X - X[nxt], axis=1))
    centers = X[chosen].copy()

    labels = None
    history: List[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        new_labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(N), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(K):
            members = X[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
            else:
                centers[j] = X[int(np.argmax(d2.min(axis=1)))]
                logger.debug(f"k-means: reseeded empty cluster {j}")
    return KMeansResult(
        centers=centers,
        labels=labels if labels is not None else np.zeros(N, dtype=int),
        objective=kmeans_objective(X, centers),
        history=history,
        iterations=iterations,
    )


def kmeans_place(positions, K: int, seed: int = 0) -> np.ndarray:
    """Command-node centers as k-means cluster means"""
    return kmeans_fit(positions, K, seed).centers


def coverage_radius(net: SensorNetwork, centers) -> float:
    """rho* = max over sensors of the distance to the nearest center"""
    C = np.asarray(centers, dtype=float).reshape(-1, net.positions.shape[1] if net.n else 2)
    if not net.n:
        return 0.0
    if not len(C):
        return float('inf')
    return float(_pairwise(net.positions, C).min(axis=1).max())


def coverage_check(net: SensorNetwork, centers, R: float) -> Optional[float]:
    """
    Certify that every link lies in some command subgraph.

    Returns:
        epsilon = R - rho* when it exceeds r (the largest witness), else None

    Raises:
        NetworkError: R <= r
    """
    if R <= net.r:
        raise NetworkError(f"Command radius R={R} must exceed communication radius r={net.r}")
    eps = R - coverage_radius(net, centers)
    if eps > net.r:
        return float(eps)
    logger.debug(f"Coverage check failed: R - rho* = {eps:.6g} <= r = {net.r}")
    return None


def build_command_graph(centers, R: float) -> nx.Graph:
    """Command nodes joined when their R-balls intersect (distance <= 2R)"""
    C = np.asarray(centers, dtype=float)
    g = nx.Graph()
    for j in range(len(C)):
        g.add_node(j, pos=tuple(C[j]))
    if len(C) > 1:
        dist = _pairwise(C, C)
        ii, jj = np.nonzero(np.triu(within(dist, 2.0 * R), k=1))
        g.add_edges_from(zip(ii.tolist(), jj.tolist()))
    return g


def local_subgraph(net: SensorNetwork, c, R: float) -> nx.Graph:
    """Subgraph induced by the sensors within R of center c"""
    if not net.n:
        return nx.Graph()
    d = np.linalg.norm(net.positions - np.asarray(c, dtype=float), axis=1)
    members = np.flatnonzero(within(d, R)).tolist()
    return net.graph.subgraph(members).copy()


@dataclass(eq=False)
class CommandLayer:
    """
    Command nodes with their subgraphs.

    graph carries node attributes 'pos' (geometric layers) and 'subgraph'.
    For k-hop layers, anchors holds the sensor node each command node sits on.
    """
    centers: np.ndarray
    R: Optional[float]
    graph: nx.Graph
    subgraphs: Dict[int, nx.Graph]
    epsilon_witness: Optional[float] = None
    anchors: Tuple[int, ...] = ()
    hops: Optional[int] = None

    @property
    def K(self) -> int:
        return self.graph.number_of_nodes()

    def e_max(self) -> int:
        return max((g.number_of_edges() for g in self.subgraphs.values()), default=0)

    def covered_edges(self) -> Set[LinkId]:
        return {LinkId.of(u, v) for g in self.subgraphs.values() for u, v in g.edges()}


def build_command_layer(net: SensorNetwork, centers, R: float) -> CommandLayer:
    C = np.asarray(centers, dtype=float)
    g_cmd = build_command_graph(C, R)
    subgraphs = {j: local_subgraph(net, C[j], R) for j in range(len(C))}
    for j, sub in subgraphs.items():
        g_cmd.nodes[j]['subgraph'] = sub
    eps = coverage_check(net, C, R)
    layer = CommandLayer(centers=C, R=float(R), graph=g_cmd, subgraphs=subgraphs, epsilon_witness=eps)
    logger.info(f"Command layer: K={layer.K}, |E_cmd|={g_cmd.number_of_edges()}, "
                f"e_max={layer.e_max()}, epsilon={eps}")
    return layer


def uncovered_edges(net: SensorNetwork, layer: CommandLayer) -> List[LinkId]:
    covered = layer.covered_edges()
    return [e for e in net.edges if e not in covered]


def ball_components(centers, R: float) -> List[List[int]]:
    """Connected components of the union of closed R-balls, as command-node groups"""
    return connected_components(build_command_graph(centers, R))


def k_hop_subgraph(g, j: int, k: int) -> nx.Graph:
    """Subgraph induced by the closed k-hop neighborhood of j"""
    graph = as_graph(g)
    if j not in graph:
        raise NetworkError(f"Node {j} not in graph")
    if k < 0:
        raise NetworkError(f"Hop count must be >= 0, got {k}")
    return nx.ego_graph(graph, j, radius=k).copy()


def k_hop_command_layer(g, anchors: Sequence[int], k: int) -> CommandLayer:
    """Command layer for networks without geometry: G_j = N_k(anchor_j)"""
    graph = as_graph(g)
    subgraphs = {idx: k_hop_subgraph(graph, a, k) for idx, a in enumerate(anchors)}
    g_cmd = nx.Graph()
    for idx, a in enumerate(anchors):
        g_cmd.add_node(idx, anchor=int(a), subgraph=subgraphs[idx])
    for a in range(len(anchors)):
        for b in range(a + 1, len(anchors)):
            if set(subgraphs[a].nodes()) & set(subgraphs[b].nodes()):
                g_cmd.add_edge(a, b)
    return CommandLayer(
        centers=np.zeros((len(anchors), 0)),
        R=None,
        graph=g_cmd,
        subgraphs=subgraphs,
        anchors=tuple(int(a) for a in anchors),
        hops=k,
    )


def greedy_k_hop_anchors(g, k: int) -> List[int]:
    """Pick anchors until every link lies in some k-hop subgraph (largest gain first)"""
    graph = as_graph(g)
    remaining = set(graph_edges(graph))
    anchors: List[int] = []
    covers = {v: set(graph_edges(k_hop_subgraph(graph, v, k))) for v in sorted(graph.nodes())}
    while remaining:
        best = max(sorted(covers), key=lambda v: len(covers[v] & remaining))
        gain = covers[best] & remaining
        if not gain:
            raise NetworkError(f"Links {sorted(remaining)} cannot be covered with k={k}")
        anchors.append(best)
        remaining -= gain
    return sorted(anchors)


def connected_components(g) -> List[List[int]]:
    """Components as sorted node lists, ordered by smallest member"""
    graph = as_graph(g)
    return sorted((sorted(c) for c in nx.connected_components(graph)), key=lambda c: c[0])


# ========================================
# FILE FORMATS
# ========================================

def load_positions_csv(path: str) -> Tuple[List[int], np.ndarray]:
    """Read an id,x,y sensor table"""
    df = pd.read_csv(path, comment='#')
    missing = {'id', 'x', 'y'} - set(df.columns)
    if missing:
        raise NetworkError(f"CSV {path} lacks columns {sorted(missing)}")
    df = df.sort_values('id')
    return df['id'].astype(int).tolist(), df[['x', 'y']].to_numpy(dtype=float)


def save_positions_csv(net: SensorNetwork, path: str):
    pd.DataFrame({
        'id': list(net.ids),
        'x': net.positions[:, 0],
        'y': net.positions[:, 1],
    }).to_csv(path, index=False)


def network_to_dict(net: SensorNetwork, centers=None, R: Optional[float] = None) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        'nodes': [
            {'id': int(net.ids[i]), 'x': float(net.positions[i, 0]), 'y': float(net.positions[i, 1])}
            for i in range(net.n)
        ],
        'r': float(net.r),
    }
    if centers is not None:
        C = np.asarray(centers, dtype=float)
        data['centers'] = [{'id': j, 'x': float(C[j, 0]), 'y': float(C[j, 1])} for j in range(len(C))]
        data['R'] = float(R) if R is not None else None
    return data


def network_from_dict(data: Dict[str, Any]) -> Tuple[SensorNetwork, Optional[np.ndarray], Optional[float]]:
    nodes = sorted(data['nodes'], key=lambda n: n['id'])
    ids = [int(n['id']) for n in nodes]
    if len(set(ids)) != len(ids):
        raise NetworkError("Duplicate sensor ids in network file")
    X = np.array([[n['x'], n['y']] for n in nodes], dtype=float).reshape(-1, 2)
    net = build_geometric_graph(X, float(data['r']), ids=ids)
    centers = None
    if data.get('centers'):
        cs = sorted(data['centers'], key=lambda c: c['id'])
        centers = np.array([[c['x'], c['y']] for c in cs], dtype=float)
    R = data.get('R')
    return net, centers, (float(R) if R is not None else None)
