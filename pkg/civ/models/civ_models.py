"""
civ Data Models
Provides the typed records exchanged between graph services, the CLI and the HTTP API
"""
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class EdgeKind(str, Enum):
    DIRECTED = "directed"
    BIDIRECTED = "bidirected"


class Edge(BaseModel):
    """A directed edge tail -> head, or a bidirected edge stored with the smaller endpoint first"""
    model_config = ConfigDict(frozen=True)

    kind: EdgeKind
    tail: str
    head: str

    @classmethod
    def directed(cls, tail: str, head: str) -> "Edge":
        return cls(kind=EdgeKind.DIRECTED, tail=tail, head=head)

    @classmethod
    def bidirected(cls, a: str, b: str) -> "Edge":
        first, second = sorted((a, b))
        return cls(kind=EdgeKind.BIDIRECTED, tail=first, head=second)

    def __str__(self) -> str:
        arrow = "->" if self.kind == EdgeKind.DIRECTED else "<->"
        return f"{self.tail} {arrow} {self.head}"


class CondInstrumentSet(BaseModel):
    """Instrumental set z with conditioning set w"""
    model_config = ConfigDict(frozen=True)

    z: FrozenSet[str] = frozenset()
    w: FrozenSet[str] = frozenset()

    @classmethod
    def of(cls, z: Iterable[str] = (), w: Iterable[str] = ()) -> "CondInstrumentSet":
        return cls(z=frozenset(z), w=frozenset(w))

    @property
    def nodes(self) -> FrozenSet[str]:
        return self.z | self.w


class ValidityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    valid: bool
    cond_i: bool
    cond_ii: bool
    cond_iii: bool

    def to_dict(self) -> Dict[str, object]:
        return {
            "valid": self.valid,
            "conditions": {"i": self.cond_i, "ii": self.cond_ii, "iii": self.cond_iii},
        }


class Verdict(str, Enum):
    SECOND_AT_MOST_FIRST = "SecondAtMostFirst"
    FIRST_AT_MOST_SECOND = "FirstAtMostSecond"
    EQUAL = "Equal"
    INCONCLUSIVE = "Inconclusive"


class Dominance(BaseModel):
    """Outcome of the pairwise comparison; forward applies conditions (a)-(d) to (t1, t2)"""
    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    forward_conditions: Tuple[bool, bool, bool, bool]
    reverse_conditions: Tuple[bool, bool, bool, bool]

    def to_dict(self) -> Dict[str, object]:
        return {
            "verdict": self.verdict.value,
            "forward": list(self.forward_conditions),
            "reverse": list(self.reverse_conditions),
        }


class GreedyAction(str, Enum):
    ADDED_TO_Z = "AddedToZ"
    ADDED_TO_W = "AddedToW"
    DISCARDED = "Discarded"


class GuardMode(str, Enum):
    # W u Z' for the instrument guard, W for the conditioning guard
    PUBLISHED = "published"
    # W' u Z' and W'; no step increases the asymptotic variance
    RUNNING = "running"


class StepReason(str, Enum):
    INSTRUMENT_VALID_AND_DEPENDENT = "instrument_valid_and_dependent_on_x"
    CONDITIONING_VALID_AND_DEPENDENT = "conditioning_valid_and_dependent_on_y"
    NO_VALID_EXTENSION = "no_valid_extension"
    SEPARATED_FROM_TARGETS = "valid_extension_but_separated"


class GreedyStep(BaseModel):
    model_config = ConfigDict(frozen=True)

    node: str
    action: GreedyAction
    reason: StepReason
    z_extension_valid: bool
    dependent_on_x: bool
    w_extension_valid: bool
    dependent_on_y: bool


class GreedyTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    start: CondInstrumentSet
    order: Tuple[str, ...]
    guard_mode: GuardMode
    steps: Tuple[GreedyStep, ...]
    result: CondInstrumentSet


class OptimalResult(BaseModel):
    """Constructed tuple with its validity and optimality flags; node lists follow graph order"""
    model_config = ConfigDict(frozen=True)

    w_opt: Tuple[str, ...]
    z_opt: Tuple[str, ...]
    is_valid: bool
    optimality_certified: bool

    @property
    def cis(self) -> CondInstrumentSet:
        return CondInstrumentSet.of(self.z_opt, self.w_opt)

    def to_dict(self) -> Dict[str, object]:
        return {
            "Z_opt": list(self.z_opt),
            "W_opt": list(self.w_opt),
            "valid": self.is_valid,
            "certified": self.optimality_certified,
        }


class EstimateReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    estimate: float
    sample_strength: float
    sample_residual_var: float
    n: int


class ErrorFamily(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


class SemConfig(BaseModel):
    """Parameter ranges for random model generation"""
    model_config = ConfigDict(frozen=True)

    coef_low: float = Field(0.1, gt=0)
    coef_high: float = 2.0
    var_low: float = Field(0.1, gt=0)
    var_high: float = 1.0
    gaussian_probability: float = Field(0.5, ge=0, le=1)
    family: Optional[ErrorFamily] = None


class StudyConfig(BaseModel):
    graph: str
    x: str = "X"
    y: str = "Y"
    n_models: int = Field(100, ge=1)
    n_datasets: int = Field(50, ge=1)
    sample_sizes: List[int] = Field(default_factory=lambda: [20, 500])
    base_seed: int = Field(0, ge=0)
    tuples: Optional[List[str]] = None
    include_ols: bool = True
    jobs: int = Field(1, ge=1)
    sem: SemConfig = Field(default_factory=SemConfig)

    @field_validator("sample_sizes")
    @classmethod
    def _check_sizes(cls, value: List[int]) -> List[int]:
        if not value or any(n < 1 for n in value):
            raise ValueError("sample_sizes must be a non-empty list of positive counts")
        return value


# HTTP request bodies

class GraphRequest(BaseModel):
    graph: str = Field(..., description="Graph file text")
    x: str = "X"
    y: str = "Y"


class TupleRequest(GraphRequest):
    z: List[str] = []
    w: List[str] = []


class EnumerateRequest(GraphRequest):
    candidates: Optional[List[str]] = None
    cap: Optional[int] = None


class CompareRequest(GraphRequest):
    z1: List[str]
    w1: List[str] = []
    z2: List[str]
    w2: List[str] = []


class GreedyRequest(TupleRequest):
    order: Optional[List[str]] = None
    guard_mode: GuardMode = GuardMode.PUBLISHED


class MsepRequest(GraphRequest):
    s: List[str]
    t: List[str]
    w: List[str] = []
    tilde: bool = False


class AvarRequest(TupleRequest):
    sem: Dict[str, object]
    tau: Optional[float] = None
