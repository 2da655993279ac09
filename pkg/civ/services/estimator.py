"""
Finite-Sample Estimators
Basmann two-stage least squares and ordinary least squares on mean-centered data
"""
import logging
from typing import Iterable, List, Optional

import numpy as np

from .sem import DataMatrix
from ..config import get_settings
from ..models.civ_models import CondInstrumentSet, EstimateReport
from ..utils.errors import OverlapError, PreconditionError, RankDeficiencyError

logger = logging.getLogger(__name__)


def _check_rank(matrix: np.ndarray, what: str, tolerance: float) -> None:
    singular = np.linalg.svd(matrix, compute_uv=False)
    if singular.size == 0 or singular[-1] <= tolerance * singular[0]:
        raise RankDeficiencyError(f"{what} is rank deficient (weak or collinear design)")


def _residual_var(target: np.ndarray, design: np.ndarray) -> float:
    if design.shape[1] == 0:
        return float(target @ target / target.shape[0])
    coef = np.linalg.lstsq(design, target, rcond=None)[0]
    residual = target - design @ coef
    return float(residual @ residual / target.shape[0])


def _ordered(data: DataMatrix, nodes: Iterable[str]) -> List[str]:
    wanted = set(nodes)
    missing = wanted - set(data.labels)
    if missing:
        data.columns(sorted(missing))
    return [n for n in data.labels if n in wanted]


def tsls(data: DataMatrix, x: str, y: str, t: CondInstrumentSet,
         rank_tolerance: Optional[float] = None) -> EstimateReport:
    """
    Two-stage least squares estimate of the effect of x on y with instruments Z and covariates W

    The estimate is the first entry of gamma = (S_hat' S_hat)^-1 S_hat' Y where S = (X, W),
    T = (Z, W) and S_hat is the projection of S on T.

    Raises:
        RankDeficiencyError: If T or the projected S is rank deficient, or n is too small
    """
    tolerance = get_settings().rank_tolerance if rank_tolerance is None else rank_tolerance
    if t.z & t.w:
        raise OverlapError("Instrumental and conditioning sets overlap")
    if {x, y} & t.nodes:
        raise PreconditionError("Treatment and outcome cannot be instruments or conditioning nodes")
    z, w = _ordered(data, t.z), _ordered(data, t.w)
    if not z:
        raise RankDeficiencyError("An empty instrumental set leaves the model unidentified")
    n = data.n
    if n <= len(z) + len(w) + 1:
        raise RankDeficiencyError(f"n = {n} is too small for {len(z) + len(w)} instruments and covariates")

    columns = data.columns([y, x] + z + w)
    columns = columns - columns.mean(axis=0)
    y_col, s_mat = columns[:, 0], columns[:, [1] + list(range(2 + len(z), 2 + len(z) + len(w)))]
    t_mat = columns[:, 2:]
    w_mat = columns[:, 2 + len(z):]

    _check_rank(t_mat, "Instrument design", tolerance)
    first_stage = np.linalg.lstsq(t_mat, s_mat, rcond=None)[0]
    s_hat = t_mat @ first_stage
    _check_rank(s_hat, "Projected design", tolerance)
    gamma = np.linalg.lstsq(s_hat, y_col, rcond=None)[0]

    x_col = columns[:, 1]
    strength = _residual_var(x_col, w_mat) - _residual_var(x_col, t_mat)
    residual = y_col - s_mat @ gamma
    return EstimateReport(estimate=float(gamma[0]), sample_strength=strength,
                          sample_residual_var=float(residual @ residual / n), n=n)


def ols(data: DataMatrix, x: str, y: str, w: Iterable[str] = (),
        rank_tolerance: Optional[float] = None) -> EstimateReport:
    """
    Least squares coefficient of x in the regression of y on (x, w)

    sample_strength reports the residual variance of x given w.
    """
    tolerance = get_settings().rank_tolerance if rank_tolerance is None else rank_tolerance
    w = _ordered(data, w)
    if {x, y} & set(w):
        raise PreconditionError("Treatment and outcome cannot be covariates")
    n = data.n
    if n <= len(w) + 1:
        raise RankDeficiencyError(f"n = {n} is too small for {len(w)} covariates")

    columns = data.columns([y, x] + w)
    columns = columns - columns.mean(axis=0)
    y_col, design = columns[:, 0], columns[:, 1:]
    _check_rank(design, "Regression design", tolerance)
    coef = np.linalg.lstsq(design, y_col, rcond=None)[0]
    residual = y_col - design @ coef
    return EstimateReport(estimate=float(coef[0]), sample_strength=_residual_var(columns[:, 1], columns[:, 2:]),
                          sample_residual_var=float(residual @ residual / n), n=n)
