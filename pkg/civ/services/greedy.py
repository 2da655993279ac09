"""
Greedy Forward Selection
Grows a valid tuple one node at a time, preferring the instrumental set. Only the running
guards keep every step from increasing the asymptotic variance
"""
import logging
from typing import List, Optional, Sequence

from .admg_core import Admg, is_reduced
from .criteria import validator_for
from .msep import m_separated
from ..models.civ_models import (
    CondInstrumentSet, GreedyAction, GreedyStep, GreedyTrace, GuardMode, StepReason
)
from ..utils.errors import InvalidTupleError, PreconditionError, UnreducedGraphError

logger = logging.getLogger(__name__)


def greedy_forward(g: Admg, x: str, y: str, start: CondInstrumentSet,
                   order: Optional[Sequence[str]] = None,
                   guard_mode: GuardMode = GuardMode.PUBLISHED) -> GreedyTrace:
    """
    Visit the remaining nodes in order; add each to Z' when (Z' u N, W') is valid and N is
    connected to x, else to W' when (Z', W' u N) is valid and N is connected to y in the
    edge-removed graph, else discard it

    Args:
        g: Reduced graph (de(x) = {x, y})
        x, y: Treatment and outcome
        start: Valid starting tuple
        order: Permutation of the nodes outside {x, y} and the start tuple; defaults to node order
        guard_mode: Which conditioning sets the two dependence guards use

    Returns:
        Trace of every visited node and the final tuple

    Raises:
        UnreducedGraphError: If de(x) is not {x, y}
        InvalidTupleError: If start is not valid
        PreconditionError: If order is not a permutation of the remaining nodes
    """
    if not is_reduced(g, x, y):
        raise UnreducedGraphError(f"de({x}) must equal {{{x}, {y}}}; reduce the graph with reduce_for_estimation first")
    validator = validator_for(g, x, y)
    if not validator.is_valid(start.z, start.w):
        raise InvalidTupleError("Start tuple is not a valid conditional instrumental set")

    remaining = [n for n in g.nodes if n not in (x, y) and n not in start.nodes]
    if order is None:
        order = remaining
    else:
        order = list(order)
        if len(order) != len(set(order)) or set(order) != set(remaining):
            raise PreconditionError(f"Order must be a permutation of {remaining}")

    z_run, w_run = set(start.z), set(start.w)
    steps: List[GreedyStep] = []
    for node in order:
        if guard_mode == GuardMode.RUNNING:
            x_guard, y_guard = w_run | z_run, set(w_run)
        else:
            x_guard, y_guard = set(start.w) | z_run, set(start.w)

        z_valid = validator.is_valid(z_run | {node}, w_run)
        dep_x = z_valid and not m_separated(g, [node], [x], x_guard)
        w_valid = False
        dep_y = False
        if dep_x:
            action, reason = GreedyAction.ADDED_TO_Z, StepReason.INSTRUMENT_VALID_AND_DEPENDENT
            z_run.add(node)
        else:
            w_valid = validator.is_valid(z_run, w_run | {node})
            dep_y = w_valid and not m_separated(validator.tilde, [node], [y], y_guard)
            if dep_y:
                action, reason = GreedyAction.ADDED_TO_W, StepReason.CONDITIONING_VALID_AND_DEPENDENT
                w_run.add(node)
            elif z_valid or w_valid:
                action, reason = GreedyAction.DISCARDED, StepReason.SEPARATED_FROM_TARGETS
            else:
                action, reason = GreedyAction.DISCARDED, StepReason.NO_VALID_EXTENSION

        logger.debug(f"Greedy step {node}: {action.value} ({reason.value})")
        steps.append(GreedyStep(node=node, action=action, reason=reason,
                                z_extension_valid=z_valid, dependent_on_x=dep_x,
                                w_extension_valid=w_valid, dependent_on_y=dep_y))

    result = CondInstrumentSet.of(z_run, w_run)
    return GreedyTrace(start=start, order=tuple(order), guard_mode=guard_mode,
                       steps=tuple(steps), result=result)
