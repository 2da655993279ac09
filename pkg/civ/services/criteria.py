"""
Instrument Criteria
Validity of conditional instrumental sets, adjustment-set checks, tuple enumeration and the
graphical pairwise efficiency comparison
"""
import functools
import itertools
import logging
from typing import FrozenSet, Iterable, List, Optional, Tuple

from .admg_core import Admg, forbidden_nodes, is_reduced, remove_causal_out_edges
from .msep import m_separated
from ..config import get_settings
from ..models.civ_models import CondInstrumentSet, Dominance, ValidityReport, Verdict
from ..utils.civ_helpers import measure_execution_time
from ..utils.errors import (
    EnumerationCapError, InvalidTupleError, OverlapError, PreconditionError, UnreducedGraphError
)

logger = logging.getLogger(__name__)

Conditions = Tuple[bool, bool, bool, bool]


class InstrumentValidator:
    """Validity checks for a fixed (graph, treatment, outcome); the edge-removed graph and forbidden set are built once"""

    def __init__(self, g: Admg, x: str, y: str):
        g.check_nodes((x, y))
        if x == y:
            raise PreconditionError("Treatment and outcome must differ")
        self.graph = g
        self.x = x
        self.y = y
        self.tilde = remove_causal_out_edges(g, x, y)
        self.forbidden = forbidden_nodes(g, x, y)

    def _check_tuple(self, z: Iterable[str], w: Iterable[str]) -> Tuple[FrozenSet[str], FrozenSet[str]]:
        z_set = self.graph.check_nodes(z)
        w_set = self.graph.check_nodes(w)
        if z_set & w_set:
            raise OverlapError(f"Instrumental and conditioning sets overlap on {self.graph.sort(z_set & w_set)}")
        if {self.x, self.y} & (z_set | w_set):
            raise PreconditionError("Treatment and outcome cannot be instruments or conditioning nodes")
        return z_set, w_set

    def check(self, z: Iterable[str], w: Iterable[str]) -> ValidityReport:
        z_set, w_set = self._check_tuple(z, w)
        cond_i = not ((z_set | w_set) & self.forbidden)
        cond_ii = bool(z_set) and not m_separated(self.graph, z_set, [self.x], w_set)
        cond_iii = m_separated(self.tilde, z_set, [self.y], w_set)
        return ValidityReport(valid=cond_i and cond_ii and cond_iii,
                              cond_i=cond_i, cond_ii=cond_ii, cond_iii=cond_iii)

    def is_valid(self, z: Iterable[str], w: Iterable[str]) -> bool:
        return self.check(z, w).valid


@functools.lru_cache(maxsize=256)
def validator_for(g: Admg, x: str, y: str) -> InstrumentValidator:
    return InstrumentValidator(g, x, y)


def is_valid_cis(g: Admg, x: str, y: str, t: CondInstrumentSet) -> ValidityReport:
    """
    Check (Z, W) against the three validity conditions

    (i) no node of Z u W is forbidden, (ii) Z is not m-separated from x given W,
    (iii) Z is m-separated from y given W once the first edges of causal paths are removed.
    """
    return validator_for(g, x, y).check(t.z, t.w)


def is_valid_adjustment(g: Admg, x: str, y: str, w: Iterable[str]) -> bool:
    """W is a valid adjustment set: no forbidden node and x, y separated given W after edge removal"""
    validator = validator_for(g, x, y)
    w_set = g.check_nodes(w)
    if {x, y} & w_set:
        raise PreconditionError("Treatment and outcome cannot be in an adjustment set")
    if w_set & validator.forbidden:
        return False
    return m_separated(validator.tilde, [x], [y], w_set)


def _order_key(g: Admg, t: CondInstrumentSet):
    z = tuple(sorted(g.index(n) for n in t.z))
    w = tuple(sorted(g.index(n) for n in t.w))
    return len(z), z, len(w), w


@measure_execution_time
def enumerate_valid_cis(g: Admg, x: str, y: str, candidates: Optional[Iterable[str]] = None,
                        cap: Optional[int] = None) -> List[CondInstrumentSet]:
    """
    Brute-force all valid tuples over the candidate nodes

    Args:
        g: Graph
        x, y: Treatment and outcome
        candidates: Nodes to assign to Z, W or neither; defaults to every node but x and y
        cap: Maximum candidate count, defaults to settings.enumeration_cap

    Returns:
        Valid tuples ordered by |Z|, then Z, then |W|, then W (node order)

    Raises:
        EnumerationCapError: More candidates than the cap
    """
    validator = validator_for(g, x, y)
    if candidates is None:
        pool = [n for n in g.nodes if n not in (x, y)]
    else:
        pool = g.sort(g.check_nodes(candidates) - {x, y})
    cap = get_settings().enumeration_cap if cap is None else cap
    if len(pool) > cap:
        raise EnumerationCapError(f"{len(pool)} candidates exceed the enumeration cap of {cap}")

    # forbidden nodes can never appear in a valid tuple
    usable = [n for n in pool if n not in validator.forbidden]
    logger.debug(f"Enumerating 3^{len(usable)} assignments for ({x}, {y})")

    found: List[CondInstrumentSet] = []
    for assignment in itertools.product((0, 1, 2), repeat=len(usable)):
        z = [n for n, a in zip(usable, assignment) if a == 1]
        if not z:
            continue
        w = [n for n, a in zip(usable, assignment) if a == 2]
        if validator.is_valid(z, w):
            found.append(CondInstrumentSet.of(z, w))

    found.sort(key=lambda t: _order_key(g, t))
    logger.info(f"Found {len(found)} valid conditional instrumental sets for ({x}, {y})")
    return found


def _separated(g: Admg, s: FrozenSet[str], t: FrozenSet[str], w: FrozenSet[str]) -> bool:
    # an empty side is trivially separated; a node is never separated from itself
    if not s or not t:
        return True
    if s & t:
        return False
    return m_separated(g, s, t, w)


def _require_valid(validator: InstrumentValidator, t: CondInstrumentSet, name: str) -> None:
    if not validator.is_valid(t.z, t.w):
        raise InvalidTupleError(f"Tuple {name} is not a valid conditional instrumental set")


def dominance_conditions(g: Admg, x: str, y: str, t1: CondInstrumentSet, t2: CondInstrumentSet) -> Conditions:
    """
    Evaluate conditions (a)-(d) under which t2 is at least as efficient as t1

    Returns:
        Tuple of the four booleans (a), (b), (c), (d); a disjunctive condition is true when
        either branch holds

    Raises:
        InvalidTupleError: If either tuple is invalid
    """
    validator = validator_for(g, x, y)
    _require_valid(validator, t1, "t1")
    _require_valid(validator, t2, "t2")
    z1, w1, z2, w2 = t1.z, t1.w, t2.z, t2.w
    w12 = w1 - w2
    w21 = w2 - w1
    xs = frozenset([x])

    cond_a = _separated(validator.tilde, w12, frozenset([y]), w2)
    cond_b = _separated(g, w12, z2, w2) or _separated(g, w12 - z2, xs, z2 | w2)
    cond_c = (
        (_separated(g, w21 - z1, z1, w1) and _separated(g, w21 & z1, xs, w1 | (w21 - z1)))
        or _separated(g, w21, xs, w1)
    )
    cond_d = _separated(g, z1 - (z2 | w21), xs, z2 | w1 | w21)
    return cond_a, cond_b, cond_c, cond_d


def compare_cis(g: Admg, x: str, y: str, t1: CondInstrumentSet, t2: CondInstrumentSet) -> Dominance:
    """
    Compare two valid tuples for every compatible model with nondegenerate instrument strength

    Raises:
        UnreducedGraphError: If de(x) is not {x, y}
        InvalidTupleError: If either tuple is invalid
    """
    if not is_reduced(g, x, y):
        raise UnreducedGraphError(f"de({x}) must equal {{{x}, {y}}}; reduce the graph with reduce_for_estimation first")
    forward = dominance_conditions(g, x, y, t1, t2)
    reverse = dominance_conditions(g, x, y, t2, t1)
    if all(forward) and all(reverse):
        verdict = Verdict.EQUAL
    elif all(forward):
        verdict = Verdict.SECOND_AT_MOST_FIRST
    elif all(reverse):
        verdict = Verdict.FIRST_AT_MOST_SECOND
    else:
        verdict = Verdict.INCONCLUSIVE
    return Dominance(verdict=verdict, forward_conditions=forward, reverse_conditions=reverse)


def suggests_instrument_over_conditioning(g: Admg, x: str, y: str, z: Iterable[str], w: Iterable[str],
                                          s: Iterable[str]) -> bool:
    """
    True when (Z u S, W) is valid given that (Z, W u S) is; the former is then at least as efficient

    Raises:
        PreconditionError: If (Z, W u S) is not valid
    """
    validator = validator_for(g, x, y)
    z_set, w_set, s_set = g.check_nodes(z), g.check_nodes(w), g.check_nodes(s)
    if s_set & (z_set | w_set):
        raise OverlapError(f"S overlaps Z or W on {g.sort(s_set & (z_set | w_set))}")
    if not validator.is_valid(z_set, w_set | s_set):
        raise PreconditionError("(Z, W u S) must be a valid conditional instrumental set")
    return validator.is_valid(z_set | s_set, w_set)


def conditioning_is_safe(g: Admg, x: str, y: str, z: Iterable[str], w: Iterable[str], n: str) -> bool:
    """
    True when n may join W but not Z; conditioning on n then cannot increase the asymptotic variance

    Raises:
        PreconditionError: If (Z, W) is invalid or n is already used
    """
    validator = validator_for(g, x, y)
    z_set, w_set = g.check_nodes(z), g.check_nodes(w)
    g.check_nodes([n])
    if n in z_set | w_set or n in (x, y):
        raise PreconditionError(f"Node '{n}' is already part of the query")
    if not validator.is_valid(z_set, w_set):
        raise PreconditionError("(Z, W) must be a valid conditional instrumental set")
    return validator.is_valid(z_set, w_set | {n}) and not validator.is_valid(z_set | {n}, w_set)
