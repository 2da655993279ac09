"""
Analysis router for the civ HTTP API
Graph queries on posted graph text: validity, enumeration, comparison, greedy selection,
the constructed optimal tuple, m-separation and asymptotic variances
"""
import logging
from typing import Any, Dict, List

from fastapi import APIRouter, Depends, HTTPException

from ..auth.api_key import get_api_key
from ..models.civ_models import (
    AvarRequest, CompareRequest, CondInstrumentSet, EnumerateRequest, GraphRequest, GreedyRequest,
    MsepRequest, TupleRequest
)
from ..services.admg_core import Admg, parse_graph, remove_causal_out_edges
from ..services.avar import AvarQuery, avar_summary
from ..services.criteria import compare_cis, enumerate_valid_cis, is_valid_adjustment, is_valid_cis
from ..services.greedy import greedy_forward
from ..services.msep import m_separated
from ..services.optimal import optimal_cis
from ..services.sem import implied_covariance, load_linear_sem, total_effect
from ..utils.errors import CivError

logger = logging.getLogger(__name__)

router = APIRouter()


def _tuple_dict(g: Admg, t: CondInstrumentSet) -> Dict[str, List[str]]:
    return {"Z": g.sort(g.check_nodes(t.z)), "W": g.sort(g.check_nodes(t.w))}


def _run(name: str, func, *args) -> Dict[str, Any]:
    try:
        return func(*args)
    except CivError:
        raise
    except Exception as e:
        logger.error(f"{name} error: {e}")
        raise HTTPException(status_code=500, detail=str(e))


def _validate(request: TupleRequest) -> Dict[str, Any]:
    g = parse_graph(request.graph)
    t = CondInstrumentSet.of(request.z, request.w)
    return {**is_valid_cis(g, request.x, request.y, t).to_dict(), **_tuple_dict(g, t)}


def _enumerate(request: EnumerateRequest) -> Dict[str, Any]:
    g = parse_graph(request.graph)
    tuples = enumerate_valid_cis(g, request.x, request.y, candidates=request.candidates, cap=request.cap)
    return {"count": len(tuples), "tuples": [_tuple_dict(g, t) for t in tuples]}


def _compare(request: CompareRequest) -> Dict[str, Any]:
    g = parse_graph(request.graph)
    t1 = CondInstrumentSet.of(request.z1, request.w1)
    t2 = CondInstrumentSet.of(request.z2, request.w2)
    return {**compare_cis(g, request.x, request.y, t1, t2).to_dict(),
            "t1": _tuple_dict(g, t1), "t2": _tuple_dict(g, t2)}


def _greedy(request: GreedyRequest) -> Dict[str, Any]:
    g = parse_graph(request.graph)
    start = CondInstrumentSet.of(request.z, request.w)
    trace = greedy_forward(g, request.x, request.y, start, order=request.order, guard_mode=request.guard_mode)
    return {
        "order": list(trace.order),
        "guard_mode": trace.guard_mode.value,
        "steps": [{"node": s.node, "action": s.action.value, "reason": s.reason.value} for s in trace.steps],
        "result": _tuple_dict(g, trace.result),
    }


def _msep(request: MsepRequest) -> Dict[str, Any]:
    g = parse_graph(request.graph)
    target = remove_causal_out_edges(g, request.x, request.y) if request.tilde else g
    return {
        "graph": "tilde" if request.tilde else "original",
        "s": g.sort(g.check_nodes(request.s)),
        "t": g.sort(g.check_nodes(request.t)),
        "w": g.sort(g.check_nodes(request.w)),
        "separated": m_separated(target, request.s, request.t, request.w),
    }


def _avar(request: AvarRequest) -> Dict[str, Any]:
    g = parse_graph(request.graph)
    model = load_linear_sem(request.sem, g)
    t = CondInstrumentSet.of(request.z, request.w)
    g.check_nodes(t.nodes)
    tau = request.tau if request.tau is not None else total_effect(model, request.x, request.y)
    query = AvarQuery(implied_covariance(model), tau, request.x, request.y, t)
    summary = avar_summary(query, adjustment_valid=is_valid_adjustment(g, request.x, request.y, t.w))
    return {"tuple": _tuple_dict(g, t), **summary}


@router.post("/validate")
async def validate(request: TupleRequest, api_key: str = Depends(get_api_key)):
    """Check the three validity conditions for (Z, W)"""
    logger.info(f"Validate request for Z={sorted(request.z)}, W={sorted(request.w)}")
    return _run("Validate", _validate, request)


@router.post("/enumerate")
async def enumerate_tuples(request: EnumerateRequest, api_key: str = Depends(get_api_key)):
    """List every valid tuple over the candidate nodes"""
    return _run("Enumerate", _enumerate, request)


@router.post("/compare")
async def compare(request: CompareRequest, api_key: str = Depends(get_api_key)):
    return _run("Compare", _compare, request)


@router.post("/greedy")
async def greedy(request: GreedyRequest, api_key: str = Depends(get_api_key)):
    """
    Extend a valid start tuple one node at a time

    The response lists every step with its action and reason, then the final tuple.
    """
    return _run("Greedy", _greedy, request)


@router.post("/optimal")
async def optimal(request: GraphRequest, api_key: str = Depends(get_api_key)):
    """Constructed optimal tuple of a reduced graph"""
    g = parse_graph(request.graph)
    return _run("Optimal", lambda: optimal_cis(g, request.x, request.y).to_dict())


@router.post("/msep")
async def msep(request: MsepRequest, api_key: str = Depends(get_api_key)):
    return _run("M-separation", _msep, request)


@router.post("/avar")
async def avar(request: AvarRequest, api_key: str = Depends(get_api_key)):
    """Residual variance, instrument strength and both asymptotic-variance formulas"""
    return _run("Asymptotic variance", _avar, request)
