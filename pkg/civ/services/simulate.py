"""
Monte Carlo Study
Random compatible models per graph, repeated sampling, RMSE per tuple and its ratio to the
constructed optimal tuple, emitted as plot-ready tables
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .admg_core import Admg, load_graph, reduce_for_estimation
from .avar import AvarQuery, avar_new_formula
from .criteria import enumerate_valid_cis, is_valid_cis
from .estimator import ols, tsls
from .optimal import optimal_cis
from .sem import implied_covariance, marginal_linear_sem, random_sem, sample, total_effect
from ..models.civ_models import CondInstrumentSet, StudyConfig
from ..utils.civ_helpers import measure_execution_time, parse_tuple_label, tuple_label
from ..utils.errors import CivError, InvalidTupleError, PreconditionError

logger = logging.getLogger(__name__)

OLS_LABEL = "OLS"
ROW_COLUMNS = ["graph", "model_id", "error_family", "n", "tuple", "rmse", "ratio_to_optimal", "skipped"]
# kept on the row table for the summary; written to CSV only on request
ASYMPTOTIC_COLUMN = "asymptotic_sd_ratio"

# stream namespaces for SeedSequence spawn keys
MODEL_STREAM = 0
DATA_STREAM = 1


@dataclass(frozen=True)
class StudyTuple:
    label: str
    cis: Optional[CondInstrumentSet]

    @property
    def is_ols(self) -> bool:
        return self.cis is None


@dataclass(frozen=True, eq=False)
class StudyResult:
    rows: pd.DataFrame
    summary: pd.DataFrame

    def to_csv(self, path: Union[str, Path, None] = None, include_asymptotic: bool = False) -> Optional[str]:
        columns = ROW_COLUMNS + [ASYMPTOTIC_COLUMN] if include_asymptotic else ROW_COLUMNS
        return self.rows.to_csv(path, index=False, columns=columns)

    def summary_records(self) -> List[Dict[str, Any]]:
        records = self.summary.to_dict(orient="records")
        return [{k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.items()}
                for r in records]


def _study_tuples(cfg: StudyConfig, g: Admg) -> Tuple[StudyTuple, List[StudyTuple]]:
    reduced = reduce_for_estimation(g, cfg.x, cfg.y)
    opt = optimal_cis(reduced, cfg.x, cfg.y)
    if not opt.is_valid:
        raise PreconditionError(f"Graph {cfg.graph} has an empty constructed instrumental set")
    optimal = opt.cis

    if cfg.tuples:
        chosen = []
        for label in cfg.tuples:
            z, w = parse_tuple_label(label)
            t = CondInstrumentSet.of(z, w)
            if not is_valid_cis(g, cfg.x, cfg.y, t).valid:
                raise InvalidTupleError(f"Study tuple {label} is not valid for ({cfg.x}, {cfg.y})")
            chosen.append(t)
    else:
        chosen = enumerate_valid_cis(g, cfg.x, cfg.y)
    if optimal not in chosen:
        chosen.insert(0, optimal)

    tuples = [StudyTuple(tuple_label(g.sort(t.z), g.sort(t.w)), t) for t in chosen]
    if cfg.include_ols:
        tuples.append(StudyTuple(OLS_LABEL, None))
    opt_tuple = next(t for t in tuples if t.cis == optimal)
    return opt_tuple, tuples


def _rmse(errors: List[float]) -> float:
    if not errors:
        return float("nan")
    return float(np.sqrt(np.mean(np.square(errors))))


def _run_model(cfg: StudyConfig, g: Admg, model_id: int, opt_tuple: StudyTuple,
               tuples: List[StudyTuple]) -> List[Dict[str, Any]]:
    model_seed = np.random.SeedSequence(cfg.base_seed, spawn_key=(MODEL_STREAM, model_id))
    canonical = random_sem(g, model_seed, cfg.sem)
    marginal = marginal_linear_sem(canonical)
    tau = total_effect(marginal, cfg.x, cfg.y)
    cov = implied_covariance(marginal)

    asymptotic: Dict[str, float] = {}
    for t in tuples:
        if t.is_ols:
            asymptotic[t.label] = float("nan")
            continue
        try:
            asymptotic[t.label] = avar_new_formula(AvarQuery(cov, tau, cfg.x, cfg.y, t.cis))
        except CivError as e:
            logger.debug(f"Model {model_id}: no asymptotic variance for {t.label}: {e}")
            asymptotic[t.label] = float("nan")

    rows: List[Dict[str, Any]] = []
    for n_index, n in enumerate(cfg.sample_sizes):
        errors: Dict[str, List[float]] = {t.label: [] for t in tuples}
        skipped: Dict[str, int] = {t.label: 0 for t in tuples}
        for dataset_id in range(cfg.n_datasets):
            data_seed = np.random.SeedSequence(cfg.base_seed, spawn_key=(DATA_STREAM, model_id, n_index, dataset_id))
            data = sample(canonical, n, data_seed)
            for t in tuples:
                try:
                    if t.is_ols:
                        report = ols(data, cfg.x, cfg.y)
                    else:
                        report = tsls(data, cfg.x, cfg.y, t.cis)
                    errors[t.label].append(report.estimate - tau)
                except CivError as e:
                    skipped[t.label] += 1
                    logger.debug(f"Model {model_id}, n={n}, dataset {dataset_id}: skipped {t.label}: {e}")

        opt_rmse = _rmse(errors[opt_tuple.label])
        opt_avar = asymptotic[opt_tuple.label]
        for t in tuples:
            rmse = _rmse(errors[t.label])
            rows.append({
                "graph": cfg.graph,
                "model_id": model_id,
                "error_family": canonical.family.value,
                "n": n,
                "tuple": t.label,
                "rmse": rmse,
                "ratio_to_optimal": opt_rmse / rmse if rmse > 0 else float("nan"),
                "skipped": skipped[t.label],
                ASYMPTOTIC_COLUMN: math.sqrt(opt_avar / asymptotic[t.label])
                if asymptotic[t.label] > 0 else float("nan"),
            })
    return rows


def _geo_mean(values: pd.Series) -> float:
    finite = values[np.isfinite(values) & (values > 0)]
    if finite.empty:
        return float("nan")
    return float(np.exp(np.log(finite).mean()))


def summarize(rows: pd.DataFrame, labels: List[str]) -> pd.DataFrame:
    """Geometric mean ratio and share of models won by the optimal tuple, per (tuple, n)"""
    records = []
    for (label, n), group in rows.groupby(["tuple", "n"], sort=False):
        ratio = group["ratio_to_optimal"]
        finite = ratio[np.isfinite(ratio)]
        asy = group[ASYMPTOTIC_COLUMN]
        both = np.isfinite(ratio) & np.isfinite(asy)
        agreement = ((ratio[both] <= 1.0) == (asy[both] <= 1.0)).mean() if both.any() else float("nan")
        records.append({
            "tuple": label,
            "n": int(n),
            "geo_mean_ratio": _geo_mean(ratio),
            "frac_ratio_lt_1": float((finite < 1.0).mean()) if not finite.empty else float("nan"),
            "geo_mean_asymptotic_ratio": _geo_mean(asy),
            "ordering_agreement": float(agreement),
            "skipped": int(group["skipped"].sum()),
        })
    summary = pd.DataFrame.from_records(records)
    order = {label: i for i, label in enumerate(labels)}
    return summary.sort_values(by=["n", "tuple"], key=lambda col: col.map(order) if col.name == "tuple" else col,
                               kind="stable").reset_index(drop=True)


@measure_execution_time
def run_study(cfg: StudyConfig, graph: Optional[Admg] = None) -> StudyResult:
    """
    Run the Monte Carlo comparison of every study tuple against the constructed optimal tuple

    Every model and data set draws from its own seed stream keyed by (base_seed, model, size,
    data set), so results do not depend on cfg.jobs.

    Args:
        cfg: Study configuration
        graph: Graph to use instead of loading cfg.graph

    Returns:
        Per (model, n, tuple) rows and the per (tuple, n) summary
    """
    g = graph if graph is not None else load_graph(cfg.graph)
    opt_tuple, tuples = _study_tuples(cfg, g)
    labels = [t.label for t in tuples]
    logger.info(f"Study on {cfg.graph}: {len(tuples)} estimators, {cfg.n_models} models, "
                f"{cfg.n_datasets} data sets, sizes {cfg.sample_sizes}, {cfg.jobs} worker(s)")

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as executor:
            per_model = list(executor.map(lambda m: _run_model(cfg, g, m, opt_tuple, tuples), range(cfg.n_models)))
    else:
        per_model = [_run_model(cfg, g, m, opt_tuple, tuples) for m in range(cfg.n_models)]

    rows = pd.DataFrame.from_records([row for model_rows in per_model for row in model_rows],
                                     columns=ROW_COLUMNS + [ASYMPTOTIC_COLUMN])
    total_skipped = int(rows["skipped"].sum())
    if total_skipped:
        logger.warning(f"{total_skipped} estimator evaluations were skipped for rank deficiency")
    return StudyResult(rows=rows, summary=summarize(rows, labels))
