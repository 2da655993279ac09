"""
ADMG Core
Immutable acyclic directed mixed graphs, the graph file format and the structural queries
(ancestry, causal and forbidden nodes, projections, districts) every criterion builds on
"""
import logging
import re
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from ..config import get_settings
from ..models.civ_models import Edge, EdgeKind
from ..utils.errors import (
    CivError, CycleError, DuplicateEdgeError, GraphSyntaxError, PreconditionError, UnknownNodeError
)

logger = logging.getLogger(__name__)

NODE_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
EDGE_LINE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*(<->|->)\s*([A-Za-z_][A-Za-z0-9_]*)\s*\Z")

# arrival marks
HEAD = "head"
TAIL = "tail"


class Admg:
    """
    Acyclic directed mixed graph over named nodes

    Instances are immutable; equality and hashing are structural (node set and edge set).
    """

    def __init__(self, nodes: Sequence[str], edges: Iterable[Edge] = ()):
        node_list: List[str] = []
        for name in nodes:
            if not isinstance(name, str) or not NODE_PATTERN.match(name):
                raise PreconditionError(f"Invalid node name '{name}'")
            if name in node_list:
                raise PreconditionError(f"Node '{name}' declared twice")
            node_list.append(name)

        self._nodes: Tuple[str, ...] = tuple(node_list)
        self._index: Dict[str, int] = {name: i for i, name in enumerate(self._nodes)}

        dag = nx.DiGraph()
        dag.add_nodes_from(self._nodes)
        bidirected = nx.Graph()
        bidirected.add_nodes_from(self._nodes)

        edge_set: Set[Edge] = set()
        for edge in edges:
            for endpoint in (edge.tail, edge.head):
                if endpoint not in self._index:
                    raise UnknownNodeError(f"Edge {edge} uses undeclared node '{endpoint}'")
            if edge.tail == edge.head:
                raise PreconditionError(f"Self-loop on '{edge.tail}' is not allowed")
            if edge.kind == EdgeKind.BIDIRECTED:
                edge = Edge.bidirected(edge.tail, edge.head)
            if edge in edge_set:
                raise DuplicateEdgeError(f"Duplicate edge {edge}")
            edge_set.add(edge)
            if edge.kind == EdgeKind.DIRECTED:
                dag.add_edge(edge.tail, edge.head)
            else:
                bidirected.add_edge(edge.tail, edge.head)

        if not nx.is_directed_acyclic_graph(dag):
            cycle = nx.find_cycle(dag)
            raise CycleError(f"Directed cycle through {' -> '.join(u for u, _ in cycle)}")

        self._edges: FrozenSet[Edge] = frozenset(edge_set)
        self._dag = nx.freeze(dag)
        self._bidirected = nx.freeze(bidirected)

    @property
    def nodes(self) -> Tuple[str, ...]:
        return self._nodes

    @property
    def edges(self) -> FrozenSet[Edge]:
        return self._edges

    @property
    def dag(self) -> nx.DiGraph:
        """Directed part as a frozen networkx graph"""
        return self._dag

    @property
    def bidirected_graph(self) -> nx.Graph:
        return self._bidirected

    @cached_property
    def directed_edges(self) -> Tuple[Tuple[str, str], ...]:
        return tuple(sorted(self._dag.edges(), key=lambda e: (self._index[e[0]], self._index[e[1]])))

    @cached_property
    def bidirected_edges(self) -> Tuple[Tuple[str, str], ...]:
        pairs = (tuple(sorted(e, key=self._index.__getitem__)) for e in self._bidirected.edges())
        return tuple(sorted(pairs, key=lambda e: (self._index[e[0]], self._index[e[1]])))

    @cached_property
    def incidence(self) -> Dict[str, Tuple[Tuple[str, str, str], ...]]:
        """Per node: (neighbour, mark at node, mark at neighbour) for every incident edge"""
        inc: Dict[str, List[Tuple[str, str, str]]] = {n: [] for n in self._nodes}
        for tail, head in self.directed_edges:
            inc[tail].append((head, TAIL, HEAD))
            inc[head].append((tail, HEAD, TAIL))
        for a, b in self.bidirected_edges:
            inc[a].append((b, HEAD, HEAD))
            inc[b].append((a, HEAD, HEAD))
        return {n: tuple(v) for n, v in inc.items()}

    def index(self, node: str) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNodeError(f"Unknown node '{node}'") from None

    def check_nodes(self, nodes: Iterable[str]) -> FrozenSet[str]:
        """Return nodes as a frozenset, raising UnknownNodeError for any name not in the graph"""
        result = frozenset(nodes)
        unknown = [n for n in result if n not in self._index]
        if unknown:
            raise UnknownNodeError(f"Unknown node(s): {', '.join(sorted(unknown))}")
        return result

    def sort(self, nodes: Iterable[str]) -> List[str]:
        """Order nodes by graph node order"""
        return sorted(nodes, key=self.index)

    def has_edge(self, tail: str, head: str, kind: EdgeKind = EdgeKind.DIRECTED) -> bool:
        if kind == EdgeKind.DIRECTED:
            return self._dag.has_edge(tail, head)
        return self._bidirected.has_edge(tail, head)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Admg):
            return NotImplemented
        return set(self._nodes) == set(other._nodes) and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((frozenset(self._nodes), self._edges))

    def __repr__(self) -> str:
        return f"Admg(nodes={list(self._nodes)}, edges={len(self._edges)})"


def parse_graph(text: str) -> Admg:
    """
    Parse the graph file format

    One statement per line, '#' starts a comment, 'node A B C' declares nodes,
    'A -> B' and 'A <-> B' declare edges. Node order is first-mention order.

    Raises:
        GraphSyntaxError: Malformed line (line number reported)
        DuplicateEdgeError: Same edge declared twice
        CycleError: Directed cycle
    """
    nodes: List[str] = []
    edges: List[Edge] = []
    seen: Set[Edge] = set()

    def mention(name: str) -> None:
        if name not in nodes:
            nodes.append(name)

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = EDGE_LINE.match(line)
        if match:
            a, arrow, b = match.groups()
            if a == b:
                raise GraphSyntaxError(f"self-loop on '{a}'", line_no)
            edge = Edge.directed(a, b) if arrow == "->" else Edge.bidirected(a, b)
            if edge in seen:
                raise DuplicateEdgeError(f"line {line_no}: duplicate edge {edge}")
            seen.add(edge)
            mention(a)
            mention(b)
            edges.append(edge)
            continue
        tokens = line.split()
        if tokens[0] == "node":
            for name in tokens[1:]:
                if not NODE_PATTERN.match(name):
                    raise GraphSyntaxError(f"invalid node name '{name}'", line_no)
                mention(name)
            continue
        raise GraphSyntaxError(f"cannot parse '{raw.strip()}'", line_no)

    return Admg(nodes, edges)


def serialize_graph(g: Admg) -> str:
    """Write g in the graph file format; a node line is emitted only when edges alone would lose nodes or their order"""
    lines = [f"{a} -> {b}" for a, b in g.directed_edges]
    lines += [f"{a} <-> {b}" for a, b in g.bidirected_edges]

    mentioned: List[str] = []
    for a, b in g.directed_edges + g.bidirected_edges:
        for name in (a, b):
            if name not in mentioned:
                mentioned.append(name)
    if tuple(mentioned) != g.nodes:
        lines.insert(0, "node " + " ".join(g.nodes))
    return "".join(f"{line}\n" for line in lines)


def load_graph(ref: Union[str, Path]) -> Admg:
    """
    Load a graph from a path, or from the fixtures directory by name (e.g. "g1b")
    """
    path = Path(ref)
    if not path.exists():
        candidate = get_settings().fixtures_path / str(ref)
        if not candidate.exists():
            raise CivError(f"Graph file '{ref}' not found", code="file_not_found")
        path = candidate
    logger.debug(f"Loading graph from {path}")
    return parse_graph(path.read_text(encoding="utf-8"))


def parents(g: Admg, s: Iterable[str]) -> FrozenSet[str]:
    result: Set[str] = set()
    for n in g.check_nodes(s):
        result.update(g.dag.predecessors(n))
    return frozenset(result)


def children(g: Admg, s: Iterable[str]) -> FrozenSet[str]:
    result: Set[str] = set()
    for n in g.check_nodes(s):
        result.update(g.dag.successors(n))
    return frozenset(result)


def ancestors(g: Admg, s: Iterable[str]) -> FrozenSet[str]:
    """Ancestors of s; every node is its own ancestor"""
    result: Set[str] = set()
    for n in g.check_nodes(s):
        result.add(n)
        result.update(nx.ancestors(g.dag, n))
    return frozenset(result)


def descendants(g: Admg, s: Iterable[str]) -> FrozenSet[str]:
    """Descendants of s; every node is its own descendant"""
    result: Set[str] = set()
    for n in g.check_nodes(s):
        result.add(n)
        result.update(nx.descendants(g.dag, n))
    return frozenset(result)


def siblings(g: Admg, s: Iterable[str]) -> FrozenSet[str]:
    """Nodes joined to s by a bidirected edge; every node is its own sibling"""
    result: Set[str] = set()
    for n in g.check_nodes(s):
        result.add(n)
        result.update(g.bidirected_graph.neighbors(n))
    return frozenset(result)


def topological_order(g: Admg) -> List[str]:
    """Topological order of the directed part, ties broken by node order"""
    return list(nx.lexicographical_topological_sort(g.dag, key=g.index))


def has_causal_path(g: Admg, x: str, y: str) -> bool:
    return x != y and y in descendants(g, [x])


def is_reduced(g: Admg, x: str, y: str) -> bool:
    """True when de(x) = {x, y}"""
    return descendants(g, [x]) == frozenset((x, y))


def causal_nodes(g: Admg, x: str, y: str) -> FrozenSet[str]:
    """Nodes on causal paths from x to y, excluding x"""
    g.check_nodes((x, y))
    if x == y:
        raise PreconditionError("Treatment and outcome must differ")
    on_paths = descendants(g, [x]) & ancestors(g, [y])
    return on_paths - {x}


def forbidden_nodes(g: Admg, x: str, y: str) -> FrozenSet[str]:
    """de(cn(x, y)) together with x"""
    return descendants(g, causal_nodes(g, x, y)) | {x}


def remove_causal_out_edges(g: Admg, x: str, y: str) -> Admg:
    """Drop the first edge x -> c of every causal path from x to y"""
    cn = causal_nodes(g, x, y)
    kept = [e for e in g.edges
            if not (e.kind == EdgeKind.DIRECTED and e.tail == x and e.head in cn)]
    if len(kept) == len(g.edges):
        return g
    return Admg(g.nodes, kept)


tilde_graph = remove_causal_out_edges


def latent_projection(g: Admg, l: Iterable[str]) -> Admg:
    """
    Project g over the latent nodes l

    a -> b is kept when a causal path a -> ... -> b has all intermediate nodes in l.
    a <-> b is kept when a collider-free path with all intermediate nodes in l has
    arrowheads at both a and b.
    """
    latent = g.check_nodes(l)
    if not latent:
        return g
    retained = [n for n in g.nodes if n not in latent]

    # directed ancestors of each node reachable through latent nodes only
    latent_anc: Dict[str, Set[str]] = {}
    for n in topological_order(g):
        anc: Set[str] = set()
        for p in g.dag.predecessors(n):
            if p in latent:
                anc.add(p)
                anc.update(latent_anc[p])
        latent_anc[n] = anc

    edges: Set[Edge] = set()
    for b in retained:
        heads = latent_anc[b] | {b}
        for a in parents(g, heads):
            if a not in latent and a != b:
                edges.add(Edge.directed(a, b))

    for i, a in enumerate(retained):
        tops_a = latent_anc[a] | {a}
        for b in retained[i + 1:]:
            tops_b = latent_anc[b] | {b}
            # common latent fork, or a bidirected edge between the two source sets
            joined = bool(latent_anc[a] & latent_anc[b]) or any(
                g.bidirected_graph.has_edge(u, v) for u in tops_a for v in tops_b
            )
            if joined:
                edges.add(Edge.bidirected(a, b))

    return Admg(retained, edges)


def reduce_for_estimation(g: Admg, x: str, y: str) -> Admg:
    """Project out (forb u de(x)) minus {x, y}, so the result has de(x) = {x, y}"""
    forb = forbidden_nodes(g, x, y)
    de_x = descendants(g, [x])
    if not has_causal_path(g, x, y):
        logger.warning(f"{y} is not a descendant of {x}; the total effect is zero")
    return latent_projection(g, (forb | de_x) - {x, y})


def district(g: Admg, n: str, w: Iterable[str]) -> FrozenSet[str]:
    """Bidirected-connected component of n once the nodes of w are deleted"""
    w_set = g.check_nodes(w)
    g.check_nodes([n])
    if n in w_set:
        raise PreconditionError(f"Node '{n}' must not be in the removed set")
    keep = [v for v in g.nodes if v not in w_set]
    return frozenset(nx.node_connected_component(g.bidirected_graph.subgraph(keep), n))


def district_plus(g: Admg, n: str, w: Iterable[str]) -> FrozenSet[str]:
    """(district u parents of the district) minus w"""
    w_set = g.check_nodes(w)
    dis = district(g, n, w_set)
    return (dis | parents(g, dis)) - w_set


def random_admg(n_nodes: int, p_directed: float = 0.3, p_bidirected: float = 0.2,
                seed: Optional[int] = None) -> Admg:
    """
    Draw a random ADMG on V1..Vn; directed edges only point from lower to higher index

    Args:
        n_nodes: Number of nodes
        p_directed: Probability of each forward directed edge
        p_bidirected: Probability of each bidirected edge
        seed: Seed for numpy's default generator

    Returns:
        Random ADMG, node order is a topological order
    """
    rng = np.random.default_rng(seed)
    nodes = [f"V{i + 1}" for i in range(n_nodes)]
    edges: List[Edge] = []
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if rng.random() < p_directed:
                edges.append(Edge.directed(nodes[i], nodes[j]))
            if rng.random() < p_bidirected:
                edges.append(Edge.bidirected(nodes[i], nodes[j]))
    return Admg(nodes, edges)
