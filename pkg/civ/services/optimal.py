"""
Optimal Tuple Construction
Builds (Z_opt, W_opt) from the bidirected districts of the treatment and the outcome
"""
import logging

from .admg_core import Admg, district_plus, has_causal_path, is_reduced, parents, siblings
from ..models.civ_models import OptimalResult
from ..utils.errors import PreconditionError, UnreducedGraphError

logger = logging.getLogger(__name__)


def optimal_cis(g: Admg, x: str, y: str) -> OptimalResult:
    """
    W_opt = dis+(y | removing x) minus {x, y}; Z_opt = dis+(x | removing y) minus ({x, y} u W_opt)

    The tuple is valid whenever Z_opt is non-empty, and graphically optimal when Z_opt meets
    pa(x) u sib(x). Both node sets are returned even when Z_opt is empty.

    Raises:
        PreconditionError: If y is not a descendant of x
        UnreducedGraphError: If de(x) is not {x, y}
    """
    g.check_nodes((x, y))
    if not has_causal_path(g, x, y):
        raise PreconditionError(f"{y} is not a descendant of {x}")
    if not is_reduced(g, x, y):
        raise UnreducedGraphError(f"de({x}) must equal {{{x}, {y}}}; reduce the graph with reduce_for_estimation first")

    w_opt = district_plus(g, y, [x]) - {x, y}
    z_opt = district_plus(g, x, [y]) - ({x, y} | w_opt)
    is_valid = bool(z_opt)
    certified = is_valid and bool(z_opt & (parents(g, [x]) | siblings(g, [x])))
    if not is_valid:
        logger.info(f"Constructed instrumental set is empty for ({x}, {y})")
    return OptimalResult(w_opt=tuple(g.sort(w_opt)), z_opt=tuple(g.sort(z_opt)),
                         is_valid=is_valid, optimality_certified=certified)
