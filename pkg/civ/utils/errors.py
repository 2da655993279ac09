"""
Domain errors for civ
Every error carries a stable machine-parsable code used by the CLI and the HTTP API
"""
from typing import Any, Dict, Optional


class CivError(Exception):
    """Base class for all domain failures"""

    code = "domain_error"

    def __init__(self, detail: str, code: Optional[str] = None):
        super().__init__(detail)
        self.detail = detail
        if code is not None:
            self.code = code

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "detail": self.detail}


class GraphSyntaxError(CivError):
    code = "syntax_error"

    def __init__(self, detail: str, line: int):
        super().__init__(f"line {line}: {detail}")
        self.line = line


class CycleError(CivError):
    code = "directed_cycle"


class DuplicateEdgeError(CivError):
    code = "duplicate_edge"


class UnknownNodeError(CivError):
    code = "unknown_node"


class OverlapError(CivError):
    code = "overlapping_sets"


class InvalidTupleError(CivError):
    code = "invalid_tuple"


class PreconditionError(CivError):
    code = "precondition_violation"


class UnreducedGraphError(CivError):
    code = "unreduced_graph"


class DegenerateConditioningError(CivError):
    code = "degenerate_conditioning"


class NotPositiveDefiniteError(CivError):
    code = "not_positive_definite"


class WeakInstrumentError(CivError):
    code = "weak_instrument"


class RankDeficiencyError(CivError):
    code = "rank_deficient"


class EnumerationCapError(CivError):
    code = "cap_exceeded"


class SemSpecError(CivError):
    code = "sem_spec_error"
