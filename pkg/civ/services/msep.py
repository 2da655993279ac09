"""
m-separation
Walk-based reachability over (node, arrival mark) states; a collider is open exactly
when it is in the conditioning set
"""
import logging
from collections import deque
from typing import Deque, FrozenSet, Iterable, Optional, Set, Tuple

from .admg_core import HEAD, Admg
from ..utils.errors import OverlapError

logger = logging.getLogger(__name__)


def _walk(g: Admg, s: FrozenSet[str], w: FrozenSet[str]) -> Set[str]:
    start: Optional[str] = None
    queue: Deque[Tuple[str, Optional[str]]] = deque((n, start) for n in s)
    visited: Set[Tuple[str, Optional[str]]] = set(queue)
    seen_nodes: Set[str] = set(s)

    while queue:
        node, arrival = queue.popleft()
        for neighbour, mark_here, mark_there in g.incidence[node]:
            if arrival is not None:
                collider = arrival == HEAD and mark_here == HEAD
                if collider != (node in w):
                    continue
            state = (neighbour, mark_there)
            if state not in visited:
                visited.add(state)
                seen_nodes.add(neighbour)
                queue.append(state)
    return seen_nodes


def reachable(g: Admg, s: Iterable[str], w: Iterable[str] = ()) -> FrozenSet[str]:
    """
    Nodes connected to s by a walk that is open given w

    Args:
        g: Graph
        s: Start nodes
        w: Conditioning set, disjoint from s

    Returns:
        Reachable nodes outside w, including s itself
    """
    s_set = g.check_nodes(s)
    w_set = g.check_nodes(w)
    if s_set & w_set:
        raise OverlapError(f"Start and conditioning sets overlap on {g.sort(s_set & w_set)}")
    return frozenset(_walk(g, s_set, w_set) - w_set)


def m_separated(g: Admg, s: Iterable[str], t: Iterable[str], w: Iterable[str] = ()) -> bool:
    """
    Decide whether w m-separates s from t in g

    Args:
        g: Graph
        s, t, w: Pairwise disjoint node sets

    Returns:
        True when every walk between s and t is blocked by w; True when s or t is empty

    Raises:
        OverlapError: If the sets are not pairwise disjoint
        UnknownNodeError: If a node is not in g
    """
    s_set, t_set, w_set = g.check_nodes(s), g.check_nodes(t), g.check_nodes(w)
    overlap = (s_set & t_set) | (s_set & w_set) | (t_set & w_set)
    if overlap:
        raise OverlapError(f"Separation query sets overlap on {g.sort(overlap)}")
    if not s_set or not t_set:
        return True
    return _walk(g, s_set, w_set).isdisjoint(t_set)
