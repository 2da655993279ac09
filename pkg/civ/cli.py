"""
civ command line
Binds the graph, model and simulation services for batch use and reproduction scripts

Exit status: 0 on success, 1 on usage errors, 2 on domain errors (one JSON line on stderr).
"""
import argparse
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

from pydantic import ValidationError

from .config import get_settings
from .models.civ_models import CondInstrumentSet, GuardMode, StudyConfig
from .services.admg_core import Admg, load_graph, random_admg, remove_causal_out_edges, serialize_graph
from .services.avar import AvarQuery, avar_summary
from .services.criteria import compare_cis, enumerate_valid_cis, is_valid_adjustment, is_valid_cis
from .services.estimator import ols, tsls
from .services.greedy import greedy_forward
from .services.msep import m_separated
from .services.optimal import optimal_cis
from .services.sem import DataMatrix, implied_covariance, load_linear_sem, total_effect
from .services.simulate import run_study
from .utils.civ_helpers import parse_node_list, parse_tuple_label
from .utils.errors import CivError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _int_list(text: str) -> List[int]:
    return [int(part) for part in parse_node_list(text)]


def _nodes(g: Admg, names: Sequence[str]) -> List[str]:
    return g.sort(g.check_nodes(names))


def _tuple_dict(g: Admg, t: CondInstrumentSet) -> Dict[str, List[str]]:
    return {"Z": _nodes(g, t.z), "W": _nodes(g, t.w)}


def _cmd_msep(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    target = remove_causal_out_edges(g, args.x, args.y) if args.tilde else g
    s, t, w = parse_node_list(args.s), parse_node_list(args.t), parse_node_list(args.w)
    return {
        "graph": "tilde" if args.tilde else "original",
        "s": _nodes(g, s), "t": _nodes(g, t), "w": _nodes(g, w),
        "separated": m_separated(target, s, t, w),
    }


def _cmd_validate(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    t = CondInstrumentSet.of(parse_node_list(args.z), parse_node_list(args.w))
    report = is_valid_cis(g, args.x, args.y, t)
    return {**report.to_dict(), **_tuple_dict(g, t)}


def _cmd_enumerate(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    candidates = parse_node_list(args.candidates) if args.candidates is not None else None
    tuples = enumerate_valid_cis(g, args.x, args.y, candidates=candidates, cap=args.cap)
    return {"count": len(tuples), "tuples": [_tuple_dict(g, t) for t in tuples]}


def _cmd_compare(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    t1 = CondInstrumentSet.of(parse_node_list(args.z1), parse_node_list(args.w1))
    t2 = CondInstrumentSet.of(parse_node_list(args.z2), parse_node_list(args.w2))
    return {**compare_cis(g, args.x, args.y, t1, t2).to_dict(),
            "t1": _tuple_dict(g, t1), "t2": _tuple_dict(g, t2)}


def _cmd_greedy(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    start = CondInstrumentSet.of(parse_node_list(args.z), parse_node_list(args.w))
    order = parse_node_list(args.order) if args.order is not None else None
    trace = greedy_forward(g, args.x, args.y, start, order=order, guard_mode=GuardMode(args.guards))
    return {
        "order": list(trace.order),
        "guard_mode": trace.guard_mode.value,
        "steps": [{"node": s.node, "action": s.action.value, "reason": s.reason.value} for s in trace.steps],
        "result": _tuple_dict(g, trace.result),
    }


def _cmd_optimal(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    return optimal_cis(g, args.x, args.y).to_dict()


def _cmd_avar(args: argparse.Namespace) -> Dict[str, Any]:
    g = load_graph(args.graph)
    model = load_linear_sem(args.sem, g)
    z, w = parse_tuple_label(args.tuple)
    t = CondInstrumentSet.of(z, w)
    g.check_nodes(t.nodes)
    tau = args.tau if args.tau is not None else total_effect(model, args.x, args.y)
    query = AvarQuery(implied_covariance(model), tau, args.x, args.y, t)
    summary = avar_summary(query, adjustment_valid=is_valid_adjustment(g, args.x, args.y, t.w))
    return {"tuple": _tuple_dict(g, t), **summary}


def _cmd_estimate(args: argparse.Namespace) -> Dict[str, Any]:
    if not args.ols and args.tuple is None:
        raise UsageError("estimate needs --tuple unless --ols is given")
    data = DataMatrix.from_csv(args.data)
    if args.ols:
        w = parse_node_list(args.w)
        report = ols(data, args.x, args.y, w)
        payload: Dict[str, Any] = {"estimator": "ols", "W": w}
    else:
        z, w = parse_tuple_label(args.tuple)
        report = tsls(data, args.x, args.y, CondInstrumentSet.of(z, w))
        payload = {"estimator": "tsls", "Z": z, "W": w}
    return {**payload, **report.model_dump()}


def _cmd_simulate(args: argparse.Namespace) -> Dict[str, Any]:
    cfg = StudyConfig(
        graph=args.graph, x=args.x, y=args.y, n_models=args.n_models, n_datasets=args.n_datasets,
        sample_sizes=args.sample_sizes, base_seed=args.seed,
        tuples=args.tuples.split("|") if args.tuples else None, include_ols=not args.no_ols,
        jobs=args.jobs or get_settings().default_jobs,
    )
    result = run_study(cfg)
    if args.out:
        result.to_csv(args.out, include_asymptotic=args.asymptotic_column)
        logger.info(f"Wrote {len(result.rows)} rows to {args.out}")
    summary = result.summary_records()
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as f:
            json.dump(summary, f, ensure_ascii=False, indent=2, sort_keys=True)
    return {"graph": cfg.graph, "rows": len(result.rows), "summary": summary}


def _cmd_random_graph(args: argparse.Namespace) -> Dict[str, Any]:
    g = random_admg(args.nodes, args.p_directed, args.p_bidirected, seed=args.seed)
    return {"graph": serialize_graph(g)}


def _cmd_serve(args: argparse.Namespace) -> Dict[str, Any]:
    import uvicorn

    uvicorn.run("civ.main:app", host=args.host, port=args.port)
    return {}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="print compact JSON")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    graph = _Parser(add_help=False, parents=[common])
    graph.add_argument("--graph", required=True, help="graph file or fixture name")
    graph.add_argument("--x", default="X", help="treatment node")
    graph.add_argument("--y", default="Y", help="outcome node")

    parser = _Parser(prog="civ", description="Conditional instrumental sets in acyclic directed mixed graphs")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("msep", parents=[graph], help="m-separation query")
    p.add_argument("--s", required=True)
    p.add_argument("--t", required=True)
    p.add_argument("--w", default="")
    p.add_argument("--tilde", action="store_true", help="query the graph without the first edges of causal paths")
    p.set_defaults(handler=_cmd_msep)

    p = sub.add_parser("validate", parents=[graph], help="validity of a conditional instrumental set")
    p.add_argument("--z", required=True)
    p.add_argument("--w", default="")
    p.set_defaults(handler=_cmd_validate)

    p = sub.add_parser("enumerate", parents=[graph], help="all valid conditional instrumental sets")
    p.add_argument("--candidates", default=None)
    p.add_argument("--cap", type=int, default=None)
    p.set_defaults(handler=_cmd_enumerate)

    p = sub.add_parser("compare", parents=[graph], help="graphical efficiency comparison of two tuples")
    p.add_argument("--z1", required=True)
    p.add_argument("--w1", default="")
    p.add_argument("--z2", required=True)
    p.add_argument("--w2", default="")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("greedy", parents=[graph], help="greedy forward selection")
    p.add_argument("--z", required=True)
    p.add_argument("--w", default="")
    p.add_argument("--order", default=None)
    p.add_argument("--guards", choices=[m.value for m in GuardMode], default=GuardMode.PUBLISHED.value)
    p.set_defaults(handler=_cmd_greedy)

    p = sub.add_parser("optimal", parents=[graph], help="constructed optimal tuple")
    p.set_defaults(handler=_cmd_optimal)

    p = sub.add_parser("avar", parents=[graph], help="asymptotic variances under a parameter file")
    p.add_argument("--sem", required=True, help="SEM parameter JSON file")
    p.add_argument("--tuple", required=True, help='e.g. "Z=A;W=B,C"')
    p.add_argument("--tau", type=float, default=None, help="override the model's total effect")
    p.set_defaults(handler=_cmd_avar)

    p = sub.add_parser("estimate", parents=[common], help="2SLS or OLS estimate from a CSV file")
    p.add_argument("--data", required=True)
    p.add_argument("--x", default="X")
    p.add_argument("--y", default="Y")
    p.add_argument("--tuple", default=None)
    p.add_argument("--ols", action="store_true")
    p.add_argument("--w", default="")
    p.set_defaults(handler=_cmd_estimate)

    p = sub.add_parser("simulate", parents=[graph], help="Monte Carlo study")
    p.add_argument("--n-models", type=int, default=100)
    p.add_argument("--n-datasets", type=int, default=50)
    p.add_argument("--sample-sizes", type=_int_list, default=[20, 500])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--tuples", default=None, help='"|"-separated tuple labels')
    p.add_argument("--no-ols", action="store_true")
    p.add_argument("--out", default=None, help="CSV file for the per-model rows")
    p.add_argument("--asymptotic-column", action="store_true", help="also write asymptotic_sd_ratio to the CSV")
    p.add_argument("--summary", default=None, help="JSON file for the summary")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("random-graph", parents=[common], help="draw a random ADMG")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--p-directed", type=float, default=0.3)
    p.add_argument("--p-bidirected", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=_cmd_random_graph)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.set_defaults(handler=_cmd_serve)

    return parser


def _render(command: str, payload: Dict[str, Any], as_json: bool) -> str:
    if as_json:
        return json.dumps(payload, ensure_ascii=False, sort_keys=True)
    if command == "greedy":
        lines = [f"{'node':<12}{'action':<12}reason"]
        lines += [f"{s['node']:<12}{s['action']:<12}{s['reason']}" for s in payload["steps"]]
        lines.append(json.dumps(payload["result"], ensure_ascii=False, sort_keys=True))
        return "\n".join(lines)
    if command == "random-graph":
        return payload["graph"].rstrip("\n")
    return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True)


def _configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, get_settings().log_level.upper(), logging.INFO)
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
    )


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse argv, run one command and print its result on stdout

    Returns:
        Exit status
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    _configure_logging(args.verbose)
    handler: Callable[[argparse.Namespace], Dict[str, Any]] = args.handler
    try:
        payload = handler(args)
    except (UsageError, ValidationError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except CivError as e:
        print(json.dumps(e.to_dict(), ensure_ascii=False, sort_keys=True), file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as e:
        print(json.dumps({"error": "io_error", "detail": str(e)}, ensure_ascii=False, sort_keys=True), file=sys.stderr)
        return EXIT_DOMAIN
    except Exception as e:
        logger.error(f"Command {args.command} failed: {e}")
        raise

    if payload:
        print(_render(args.command, payload, args.json))
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch())
