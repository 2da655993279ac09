"""
Asymptotic Variance
Residual variance, conditional instrumental strength, the two asymptotic-variance formulas
for two-stage least squares and the OLS baseline, all computed from a covariance model
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import linalg

from .sem import CovModel, conditional_cov
from ..config import get_settings
from ..models.civ_models import CondInstrumentSet
from ..utils.errors import DegenerateConditioningError, RankDeficiencyError, WeakInstrumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AvarQuery:
    """Covariance model, true total effect tau of x on y, and the tuple under study"""
    cov: CovModel
    tau: float
    x: str
    y: str
    cis: CondInstrumentSet

    def _ordered(self, nodes) -> List[str]:
        return [self.cov.labels[i] for i in self.cov.indices(frozenset(nodes))]

    @property
    def z(self) -> List[str]:
        return self._ordered(self.cis.z)

    @property
    def w(self) -> List[str]:
        return self._ordered(self.cis.w)


def residual_variance(q: AvarQuery) -> float:
    """Variance of Y - tau X given W"""
    c, x, y, tau, w = q.cov, q.x, q.y, q.tau, q.w
    sigma_yy = c.block([y], [y])[0, 0]
    sigma_yx = c.block([y], [x])[0, 0]
    sigma_xx = c.block([x], [x])[0, 0]
    var_tilde = sigma_yy - 2.0 * tau * sigma_yx + tau ** 2 * sigma_xx
    if not w:
        return float(var_tilde)

    cov_tilde_w = c.block([y], w) - tau * c.block([x], w)
    try:
        factor = linalg.cho_factor(c.block(w, w))
    except linalg.LinAlgError:
        raise DegenerateConditioningError(f"Conditioning block for {w} is singular") from None
    return float(var_tilde - (cov_tilde_w @ linalg.cho_solve(factor, cov_tilde_w.T))[0, 0])


def instrument_strength(q: AvarQuery) -> float:
    """sigma_xx.w - sigma_xx.zw, computed as Sigma_xz.w Sigma_zz.w^-1 Sigma_zx.w"""
    z, w = q.z, q.w
    if not z:
        return 0.0
    sigma_xz_w = conditional_cov(q.cov, [q.x], z, w)
    sigma_zz_w = conditional_cov(q.cov, z, z, w)
    try:
        factor = linalg.cho_factor(sigma_zz_w)
    except linalg.LinAlgError:
        raise DegenerateConditioningError(f"Instrument block {z} is singular given {w}") from None
    return float((sigma_xz_w @ linalg.cho_solve(factor, sigma_xz_w.T))[0, 0])


def avar_new_formula(q: AvarQuery, strength_tolerance: Optional[float] = None) -> float:
    """
    Asymptotic variance of the 2SLS estimator: residual variance over instrument strength

    Raises:
        WeakInstrumentError: If the standardized strength is at most the tolerance
    """
    tolerance = get_settings().strength_tolerance if strength_tolerance is None else strength_tolerance
    strength = instrument_strength(q)
    sigma_xx = q.cov.block([q.x], [q.x])[0, 0]
    if strength / sigma_xx <= tolerance:
        raise WeakInstrumentError(f"Instrument strength {strength:.3g} is numerically zero")
    return residual_variance(q) / strength


def avar_traditional(q: AvarQuery, rank_tolerance: Optional[float] = None) -> float:
    """
    Traditional form (eta_ys.t (Sigma_st Sigma_tt^-1 Sigma_ts)^-1)[0, 0] with S = (X, W), T = (Z, W)

    Raises:
        RankDeficiencyError: If Sigma_st Sigma_tt^-1 Sigma_ts is singular
    """
    tolerance = get_settings().rank_tolerance if rank_tolerance is None else rank_tolerance
    c = q.cov
    s = [q.x] + q.w
    t = q.z + q.w
    if not q.z:
        raise RankDeficiencyError("An empty instrumental set leaves the model unidentified")

    try:
        tt_factor = linalg.cho_factor(c.block(t, t))
    except linalg.LinAlgError:
        raise DegenerateConditioningError(f"Instrument block {t} is singular") from None
    sigma_st = c.block(s, t)
    projected = sigma_st @ linalg.cho_solve(tt_factor, sigma_st.T)
    eig = np.linalg.eigvalsh(projected)
    if eig.min() <= tolerance * eig.max():
        raise RankDeficiencyError("Projected design is rank deficient")
    projected_inv = np.linalg.inv(projected)

    gamma = c.block([q.y], t) @ linalg.cho_solve(tt_factor, sigma_st.T) @ projected_inv
    eta = (c.block([q.y], [q.y]) - 2.0 * gamma @ c.block(s, [q.y]) + gamma @ c.block(s, s) @ gamma.T)[0, 0]
    return float(eta * projected_inv[0, 0])


def avar_ols(cov: CovModel, x: str, y: str, w) -> float:
    """sigma_yy.xw / sigma_xx.w for the coefficient of x in the regression of y on (x, w)"""
    w = [cov.labels[i] for i in cov.indices(frozenset(w))]
    sigma_yy_xw = conditional_cov(cov, [y], [y], [x] + w)[0, 0]
    sigma_xx_w = conditional_cov(cov, [x], [x], w)[0, 0]
    return float(sigma_yy_xw / sigma_xx_w)


def avar_summary(q: AvarQuery, adjustment_valid: bool) -> Dict[str, Any]:
    """All quantities for one tuple; the OLS entry is None unless W is a valid adjustment set"""
    residual = residual_variance(q)
    strength = instrument_strength(q)
    summary: Dict[str, Any] = {
        "tau": float(q.tau),
        "residual_variance": residual,
        "strength": strength,
        "avar_new": avar_new_formula(q),
        "avar_traditional": avar_traditional(q),
        "avar_ols_if_adjustment": avar_ols(q.cov, q.x, q.y, q.cis.w) if adjustment_valid else None,
    }
    logger.debug(f"Asymptotic variance summary: {summary}")
    return summary
