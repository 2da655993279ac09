"""
Linear Structural Equation Models
Implied covariance, conditional covariance and regression arithmetic, total effects,
random model generation and sampling for models compatible with an ADMG
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg

from .admg_core import Admg, topological_order
from ..config import get_settings
from ..models.civ_models import Edge, EdgeKind, ErrorFamily, SemConfig
from ..utils.civ_helpers import SeedLike, make_rng
from ..utils.errors import (
    DegenerateConditioningError, NotPositiveDefiniteError, OverlapError, SemSpecError, UnknownNodeError
)

logger = logging.getLogger(__name__)

NodeSpec = Union[Sequence[str], frozenset, set]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LinearSem:
    """
    V = A V + eps with cov(eps) = Omega

    coeffs[i, j] is the coefficient of the edge node_j -> node_i (graph node order).
    """
    graph: Admg
    coeffs: np.ndarray
    err_cov: np.ndarray

    def __post_init__(self):
        p = len(self.graph.nodes)
        coeffs, err_cov = _frozen(self.coeffs), _frozen(self.err_cov)
        if coeffs.shape != (p, p) or err_cov.shape != (p, p):
            raise SemSpecError(f"Coefficient and error covariance matrices must be {p}x{p}")
        if not np.allclose(err_cov, err_cov.T):
            raise SemSpecError("Error covariance must be symmetric")

        nodes = self.graph.nodes
        for i in range(p):
            for j in range(p):
                if coeffs[i, j] != 0 and not self.graph.has_edge(nodes[j], nodes[i]):
                    raise SemSpecError(f"Coefficient on missing edge {nodes[j]} -> {nodes[i]}")
                if i < j and err_cov[i, j] != 0 and not self.graph.has_edge(nodes[i], nodes[j], EdgeKind.BIDIRECTED):
                    raise SemSpecError(f"Error covariance on missing edge {nodes[i]} <-> {nodes[j]}")
        if np.linalg.eigvalsh(err_cov).min() < -1e-12 * max(1.0, np.abs(err_cov).max()):
            raise SemSpecError("Error covariance must be positive semidefinite")

        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "err_cov", err_cov)

    def coef(self, tail: str, head: str) -> float:
        return float(self.coeffs[self.graph.index(head), self.graph.index(tail)])


@dataclass(frozen=True, eq=False)
class CanonicalSem:
    """
    Latent-expanded sampling form: every bidirected edge a <-> b of the base graph is a latent
    node L with L -> a and L -> b; all errors are independent
    """
    base_graph: Admg
    expanded_graph: Admg
    coeffs: np.ndarray
    error_var: np.ndarray
    family: ErrorFamily
    latents: Tuple[Tuple[str, str, str], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _frozen(self.coeffs))
        object.__setattr__(self, "error_var", _frozen(self.error_var))

    @property
    def observed(self) -> Tuple[str, ...]:
        return self.base_graph.nodes


@dataclass(frozen=True, eq=False)
class CovModel:
    """Labelled symmetric positive-definite covariance matrix"""
    labels: Tuple[str, ...]
    sigma: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        sigma = _frozen(self.sigma)
        if sigma.shape != (len(labels), len(labels)):
            raise SemSpecError("Covariance shape does not match the labels")
        if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12):
            raise NotPositiveDefiniteError("Covariance matrix is not symmetric")
        sigma = (sigma + sigma.T) / 2
        sigma.setflags(write=False)
        if labels:
            eig = np.linalg.eigvalsh(sigma)
            if eig.min() <= get_settings().pd_tolerance * eig.max():
                raise NotPositiveDefiniteError(
                    f"Covariance matrix is not positive definite (eigenvalues {eig.min():.3g} .. {eig.max():.3g})"
                )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_index", {name: i for i, name in enumerate(labels)})

    def indices(self, nodes: NodeSpec) -> List[int]:
        """Label positions; sets are taken in label order, sequences keep their order"""
        if isinstance(nodes, (set, frozenset)):
            nodes = sorted(nodes, key=lambda n: self._index.get(n, -1))
        try:
            return [self._index[n] for n in nodes]
        except KeyError as e:
            raise UnknownNodeError(f"Unknown covariance label {e.args[0]}") from None

    def block(self, s: NodeSpec, t: NodeSpec) -> np.ndarray:
        return self.sigma[np.ix_(self.indices(s), self.indices(t))]

    def restrict(self, nodes: NodeSpec) -> "CovModel":
        idx = self.indices(nodes)
        return CovModel(tuple(self.labels[i] for i in idx), self.sigma[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """n observations (rows) of the labelled variables (columns)"""
    labels: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[1] != len(self.labels) or values.shape[0] < 1:
            raise SemSpecError("Data must be a non-empty n x p matrix matching its labels")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def columns(self, names: Sequence[str]) -> np.ndarray:
        index = {name: i for i, name in enumerate(self.labels)}
        missing = [name for name in names if name not in index]
        if missing:
            raise UnknownNodeError(f"Data has no column(s) {', '.join(missing)}")
        return self.values[:, [index[name] for name in names]]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, columns=list(self.labels))

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "DataMatrix":
        return cls(tuple(str(c) for c in frame.columns), frame.to_numpy(dtype=float))

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "DataMatrix":
        return cls.from_frame(pd.read_csv(path))


def _inverse_lower(coeffs: np.ndarray) -> np.ndarray:
    p = coeffs.shape[0]
    return np.linalg.solve(np.eye(p) - coeffs, np.eye(p))


def implied_covariance(m: LinearSem) -> CovModel:
    """Sigma = (I - A)^-1 Omega (I - A)^-T"""
    b = _inverse_lower(m.coeffs)
    return CovModel(m.graph.nodes, b @ m.err_cov @ b.T)


def total_effect(m: LinearSem, x: str, y: str) -> float:
    """The (y, x) entry of (I - A)^-1, the sum over causal paths of coefficient products"""
    return float(_inverse_lower(m.coeffs)[m.graph.index(y), m.graph.index(x)])


def _cho(block: np.ndarray, what: str):
    try:
        return linalg.cho_factor(block)
    except linalg.LinAlgError:
        raise DegenerateConditioningError(f"Conditioning block for {what} is singular") from None


def conditional_cov(c: CovModel, s: NodeSpec, t: NodeSpec, w: NodeSpec = ()) -> np.ndarray:
    """
    Sigma_st.w = Sigma_st - Sigma_sw Sigma_ww^-1 Sigma_wt

    Returns:
        |s| x |t| matrix

    Raises:
        DegenerateConditioningError: If Sigma_ww is singular
    """
    sigma_st = c.block(s, t)
    if not len(w):
        return sigma_st
    factor = _cho(c.block(w, w), f"{sorted(w)}")
    return sigma_st - c.block(s, w) @ linalg.cho_solve(factor, c.block(w, t))


def regression_coef(c: CovModel, s: NodeSpec, t: NodeSpec, w: NodeSpec = ()) -> np.ndarray:
    """
    Coefficients of t in the population regression of s on (t, w)

    Returns:
        |s| x |t| matrix
    """
    t_idx, w_idx = c.indices(t), c.indices(w)
    if set(t_idx) & set(w_idx):
        raise OverlapError("Regressor sets t and w must be disjoint")
    design = [c.labels[i] for i in t_idx + w_idx]
    factor = _cho(c.block(design, design), f"{design}")
    beta = linalg.cho_solve(factor, c.block(design, s))
    return beta[:len(t_idx)].T


def _expand(graph: Admg, coef: Mapping[Tuple[str, str], float], error_var: Mapping[str, float],
            latent: Mapping[Tuple[str, str], Tuple[float, float, float]], family: ErrorFamily) -> CanonicalSem:
    nodes = list(graph.nodes)
    latents: List[Tuple[str, str, str]] = []
    for a, b in graph.bidirected_edges:
        name = f"_L_{a}_{b}"
        while name in nodes:
            name += "_"
        nodes.append(name)
        latents.append((name, a, b))

    edges = [Edge.directed(t, h) for t, h in graph.directed_edges]
    for name, a, b in latents:
        edges += [Edge.directed(name, a), Edge.directed(name, b)]
    expanded = Admg(nodes, edges)

    p = len(nodes)
    coeffs = np.zeros((p, p))
    variances = np.zeros(p)
    for tail, head in graph.directed_edges:
        coeffs[expanded.index(head), expanded.index(tail)] = coef[(tail, head)]
    for n in graph.nodes:
        variances[expanded.index(n)] = error_var[n]
    for name, a, b in latents:
        to_a, to_b, var_l = latent[(a, b)]
        li = expanded.index(name)
        coeffs[expanded.index(a), li] = to_a
        coeffs[expanded.index(b), li] = to_b
        variances[li] = var_l
    return CanonicalSem(graph, expanded, coeffs, variances, family, tuple(latents))


def canonical_sem(graph: Admg, coef: Optional[Mapping[Tuple[str, str], float]] = None,
                  error_var: Optional[Mapping[str, float]] = None,
                  latent: Optional[Mapping[Tuple[str, str], Tuple[float, float, float]]] = None,
                  family: ErrorFamily = ErrorFamily.GAUSSIAN, default: float = 1.0) -> CanonicalSem:
    """
    Build a latent-expanded model from explicit parameters

    Args:
        graph: Base graph
        coef: Coefficient per directed edge (tail, head)
        error_var: Error variance per node
        latent: Per bidirected edge (a, b) in stored orientation: (coefficient to a, coefficient to b, latent variance)
        family: Error distribution family
        default: Value for every parameter not given

    Returns:
        Canonical model
    """
    coef = dict(coef or {})
    error_var = dict(error_var or {})
    latent = dict(latent or {})
    for key in coef:
        if key not in graph.directed_edges:
            raise SemSpecError(f"No directed edge {key[0]} -> {key[1]}")
    for key in latent:
        if key not in graph.bidirected_edges:
            raise SemSpecError(f"No bidirected edge {key[0]} <-> {key[1]}")
    full_coef = {e: coef.get(e, default) for e in graph.directed_edges}
    full_var = {n: error_var.get(n, default) for n in graph.nodes}
    full_latent = {e: latent.get(e, (default, default, default)) for e in graph.bidirected_edges}
    return _expand(graph, full_coef, full_var, full_latent, family)


def random_sem(g: Admg, seed: SeedLike, config: Optional[SemConfig] = None) -> CanonicalSem:
    """
    Draw a random compatible model

    Error variances are uniform on [var_low, var_high]; coefficients have magnitude uniform on
    [coef_low, coef_high] and a random sign; latents are drawn by the same rules. The error
    family is Gaussian with probability gaussian_probability, else uniform.
    """
    config = config or SemConfig()
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed

    def draw_coef() -> float:
        magnitude = rng.uniform(config.coef_low, config.coef_high)
        return float(magnitude if rng.random() < 0.5 else -magnitude)

    def draw_var() -> float:
        return float(rng.uniform(config.var_low, config.var_high))

    error_var = {n: draw_var() for n in g.nodes}
    coef = {e: draw_coef() for e in g.directed_edges}
    latent = {}
    for e in g.bidirected_edges:
        var_l = draw_var()
        latent[e] = (draw_coef(), draw_coef(), var_l)
    if config.family is not None:
        family = config.family
    else:
        family = ErrorFamily.GAUSSIAN if rng.random() < config.gaussian_probability else ErrorFamily.UNIFORM
    return _expand(g, coef, error_var, latent, family)


def marginal_linear_sem(m: CanonicalSem) -> LinearSem:
    """Marginalize the latents: omega_ij = sum_L a_iL a_jL var(L), omega_ii adds var(eps_i)"""
    g = m.base_graph
    p = len(g.nodes)
    obs = [m.expanded_graph.index(n) for n in g.nodes]
    lat = [m.expanded_graph.index(name) for name, _, _ in m.latents]

    coeffs = m.coeffs[np.ix_(obs, obs)]
    loadings = m.coeffs[np.ix_(obs, lat)]
    err_cov = np.diag(m.error_var[obs]) + loadings @ np.diag(m.error_var[lat]) @ loadings.T
    # exact zeros off the bidirected pattern
    mask = np.eye(p, dtype=bool)
    for a, b in g.bidirected_edges:
        mask[g.index(a), g.index(b)] = mask[g.index(b), g.index(a)] = True
    return LinearSem(g, coeffs, np.where(mask, err_cov, 0.0))


def expanded_covariance(m: CanonicalSem) -> CovModel:
    """Covariance of all expanded variables, latents included"""
    b = _inverse_lower(m.coeffs)
    return CovModel(m.expanded_graph.nodes, b @ np.diag(m.error_var) @ b.T)


def sample(m: CanonicalSem, n: int, seed: Union[SeedLike, np.random.Generator]) -> DataMatrix:
    """
    Draw n i.i.d. observations by forward simulation in topological order; latent columns are dropped

    Uniform errors have support [-sqrt(3v), sqrt(3v)] so their variance is v.
    """
    if n < 1:
        raise SemSpecError("Sample size must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    p = len(m.expanded_graph.nodes)
    scale = np.sqrt(m.error_var)
    if m.family == ErrorFamily.GAUSSIAN:
        errors = rng.standard_normal((n, p)) * scale
    else:
        errors = rng.uniform(-1.0, 1.0, (n, p)) * (np.sqrt(3.0) * scale)

    values = np.zeros((n, p))
    for node in topological_order(m.expanded_graph):
        i = m.expanded_graph.index(node)
        values[:, i] = errors[:, i] + values @ m.coeffs[i]
    obs = [m.expanded_graph.index(name) for name in m.observed]
    return DataMatrix(m.observed, values[:, obs])


def load_linear_sem(source: Union[str, Path, Mapping[str, Any]], graph: Admg) -> LinearSem:
    """
    Read a parameter file: {"edges": [{"from", "to", "kind", "coef_or_cov"}], "error_var": {node: v}}

    Edges of the graph without an entry get coefficient (or covariance) 0.

    Raises:
        SemSpecError: If the file names an edge that is not in the graph or misses an error variance
    """
    if isinstance(source, Mapping):
        params = source
    else:
        with open(source, "r", encoding="utf-8") as f:
            params = json.load(f)

    p = len(graph.nodes)
    coeffs = np.zeros((p, p))
    err_cov = np.zeros((p, p))
    try:
        for entry in params.get("edges", []):
            a, b = entry["from"], entry["to"]
            kind = EdgeKind(entry.get("kind", EdgeKind.DIRECTED.value))
            value = float(entry["coef_or_cov"])
            if not graph.has_edge(a, b, kind):
                raise SemSpecError(f"Parameter file names missing edge {a} {'->' if kind == EdgeKind.DIRECTED else '<->'} {b}")
            if kind == EdgeKind.DIRECTED:
                coeffs[graph.index(b), graph.index(a)] = value
            else:
                err_cov[graph.index(a), graph.index(b)] = err_cov[graph.index(b), graph.index(a)] = value
        error_var = params["error_var"]
        for n in graph.nodes:
            err_cov[graph.index(n), graph.index(n)] = float(error_var[n])
    except (KeyError, TypeError, ValueError) as e:
        raise SemSpecError(f"Malformed parameter file: {e}") from None
    return LinearSem(graph, coeffs, err_cov)


def linear_sem_to_dict(m: LinearSem) -> Dict[str, Any]:
    g = m.graph
    edges = [{"from": a, "to": b, "kind": EdgeKind.DIRECTED.value, "coef_or_cov": m.coef(a, b)}
             for a, b in g.directed_edges]
    edges += [{"from": a, "to": b, "kind": EdgeKind.BIDIRECTED.value,
               "coef_or_cov": float(m.err_cov[g.index(a), g.index(b)])}
              for a, b in g.bidirected_edges]
    return {"edges": edges, "error_var": {n: float(m.err_cov[g.index(n), g.index(n)]) for n in g.nodes}}
