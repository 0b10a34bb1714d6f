"""
Experiment Service.

Drives the comparison experiments of the case studies and writes their CSV
series. An experiment is a list of independent cells (one fit setup each);
cells run in order or on a process pool and are merged by cell key, so the
output does not depend on the worker count.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from app.casestudies import case1, two_tank, viscosity
from app.casestudies.truth import CaseTruth
from app.core.config import settings
from app.core.exceptions import ConfigError, UserError
from app.learning.baselines import LeafKind, fit_greedy_tree, fit_sparse
from app.learning.dataset import CSV_FLOAT_FORMAT, Dataset
from app.learning.formulation import HyperParams
from app.schemas.experiment import ExperimentConfig
from app.schemas.report import SYMBOLIC_TREE, MethodMetrics, MetricsReport
from app.services import metrics
from app.services.fit_service import FitResult, FitService

logger = logging.getLogger(__name__)

EXPERIMENTS = ("fig3", "error-map", "nb-sweep", "two-tank", "viscosity", "noise")

# Alternative names accepted wherever an experiment id is.
EXPERIMENT_ALIASES: Dict[str, str] = {"size-sweep": "fig3"}

EXPERIMENT_CASES: Dict[str, str] = {
    "fig3": "case1",
    "error-map": "case1",
    "nb-sweep": "case1",
    "two-tank": "two-tank",
    "viscosity": "viscosity",
    "noise": "viscosity",
}


def canonical_experiment(name: str) -> str:
    """Experiment id for a name or alias.

    Raises:
        ConfigError: Unknown experiment
    """
    name = EXPERIMENT_ALIASES.get(name, name)
    if name not in EXPERIMENTS:
        choices = ", ".join(EXPERIMENTS + tuple(EXPERIMENT_ALIASES))
        raise ConfigError(f"unknown experiment '{name}'; choose from {choices}")
    return name


# Expected test MAE ranking of the fig3 methods, best first.
FIG3_MAE_ORDER = (SYMBOLIC_TREE, "sparse", "tree-linear", "tree-constant")
MAE_TOL = 1e-9

# Columns that vary run to run and stay out of the CSV series.
VOLATILE_COLUMNS = ("wall_time_s",)


@dataclass(frozen=True)
class Cell:
    experiment: str
    key: Tuple[Tuple[str, Any], ...]
    config: ExperimentConfig

    @property
    def params(self) -> Dict[str, Any]:
        return dict(self.key)


@dataclass
class ExperimentResult:
    name: str
    case: str
    reports: List[MetricsReport]
    table: pd.DataFrame
    summary: pd.DataFrame
    flags: List[str] = field(default_factory=list)


# =============================================================================
# METHODS
# =============================================================================

def _finite(value: Optional[float]) -> Optional[float]:
    return value if value is not None and math.isfinite(value) else None


def _symbolic(
    config: ExperimentConfig,
    data: Dataset,
    hp: HyperParams,
    test: Optional[Dataset] = None,
    truth: Optional[CaseTruth] = None,
) -> Tuple[MethodMetrics, FitResult]:
    basis_branch, basis_leaf = config.bases()
    result = FitService().fit(
        data, basis_branch, basis_leaf, hp, config.solver,
        warm_start=config.experiment.warm_start,
        check_invariants=config.experiment.check_invariants,
    )
    m = MethodMetrics(
        method=SYMBOLIC_TREE,
        status=result.status.value,
        nodes=result.stats.nodes,
        wall_time_s=result.stats.wall_time_s,
        gap=_finite(result.stats.gap),
    )
    tree = result.tree
    if tree is None:
        return m, result
    m.equation = tree.to_text()
    m.invariants = result.invariants_ok
    m.train_mae = metrics.mae(tree.predict_many(data), data.y)
    if test is not None:
        m.test_mae = metrics.mae(tree.predict_many(test), test.y)
    if truth is not None:
        matching = metrics.match_leaves(tree, data, truth.regime(data))
        m.leaf_l2 = metrics.coeff_l2(metrics.leaf_coefficients(tree), truth.leaves, matching)
        m.form_preserved = metrics.form_preserved(tree, truth, matching)
        for n, regime in matching.items():
            for text, value in zip(basis_leaf.texts, tree.leaf(n)):
                m.coefficients.setdefault(f"regime{regime}:{text}", float(value))
        if tree.branches and 1 in tree.branches:
            a, b = metrics.oriented_root_split(tree, matching)
            m.split_l2 = metrics.split_l2(tree, truth, matching)
            m.threshold = b
            for text, value in zip(basis_branch.texts, a):
                m.coefficients[f"split:{text}"] = float(value)
    return m, result


def _baselines(
    config: ExperimentConfig, data: Dataset, test: Optional[Dataset] = None
) -> List[Tuple[MethodMetrics, Callable[[Dataset], np.ndarray]]]:
    """Fit every configured baseline; returns metrics plus a batch predictor."""
    _, basis_leaf = config.bases()
    out = []
    for name in config.experiment.baselines:
        start = time.perf_counter()
        if name == "sparse":
            model = fit_sparse(data, basis_leaf, config.solver)
            m = MethodMetrics(method=name, equation=model.to_text())
            m.coefficients = {text: float(v) for text, v in zip(basis_leaf.texts, model.coefficients)}
            predictor = model.predict_many
        else:
            kind = LeafKind.CONSTANT if name == "tree-constant" else LeafKind.LINEAR
            model = fit_greedy_tree(data, depth=config.hyperparams.depth, leaf_kind=kind)
            m = MethodMetrics(method=name, equation=model.to_text(), nodes=len(model.nodes))
            predictor = model.predict_many
        m.train_mae = metrics.mae(predictor(data), data.y)
        if test is not None:
            m.test_mae = metrics.mae(predictor(test), test.y)
        m.wall_time_s = time.perf_counter() - start
        out.append((m, predictor))
    return out


def _flag_status(report: MetricsReport) -> None:
    m = report.method(SYMBOLIC_TREE)
    if m is not None and m.status != "optimal":
        report.flags.append(f"{report.experiment} {report.cell}: symbolic tree ended with status {m.status}")
    if m is not None and m.invariants and not all(m.invariants.values()):
        failed = sorted(k for k, ok in m.invariants.items() if not ok)
        report.flags.append(f"{report.experiment} {report.cell}: invariants failed: {', '.join(failed)}")


# =============================================================================
# CELLS
# =============================================================================

def _case1_test(config: ExperimentConfig) -> Dataset:
    return case1.gen_case1(config.data.test_size, seed=config.data.test_seed)


def _cell_fig3(cell: Cell) -> MetricsReport:
    config, p = cell.config, cell.params
    data = case1.gen_case1(p["size"], seed=p["seed"], noise=config.data.noise)
    test = _case1_test(config)
    report = MetricsReport(experiment=cell.experiment, case="case1", cell=p)
    m, _ = _symbolic(config, data, config.hyperparams, test, case1.TRUTH)
    report.methods.append(m)
    report.methods.extend(m for m, _ in _baselines(config, data, test))
    return report


def _cell_nb_sweep(cell: Cell) -> MetricsReport:
    config, p = cell.config, cell.params
    data = case1.gen_case1(config.data.n, seed=config.data.seed, noise=config.data.noise)
    hp = config.hyperparams.model_copy(update={"n_branch": p["n_branch"]})
    m, _ = _symbolic(config, data, hp, _case1_test(config), case1.TRUTH)
    return MetricsReport(experiment=cell.experiment, case="case1", cell=p, methods=[m])


def _cell_viscosity(cell: Cell) -> MetricsReport:
    config, p = cell.config, cell.params
    data = viscosity.gen_viscosity(p["n"], sigma=config.data.noise, seed=config.data.seed)
    test = viscosity.gen_viscosity(config.data.test_size, seed=config.data.test_seed)
    report = MetricsReport(experiment=cell.experiment, case="viscosity", cell=p)
    m, _ = _symbolic(config, data, config.hyperparams, test, viscosity.TRUTH)
    report.methods.append(m)
    report.methods.extend(m for m, _ in _baselines(config, data, test))
    return report


def _cell_noise(cell: Cell) -> MetricsReport:
    config, p = cell.config, cell.params
    data = viscosity.gen_viscosity(config.data.n, sigma=p["sigma"], seed=p["seed"])
    hp = config.hyperparams
    if config.experiment.noise_n_leaf is not None:
        hp = hp.model_copy(update={"n_leaf": config.experiment.noise_n_leaf})
    m, _ = _symbolic(config, data, hp, truth=viscosity.TRUTH)
    return MetricsReport(experiment=cell.experiment, case="viscosity", cell=p, methods=[m])


def _cell_two_tank(cell: Cell) -> MetricsReport:
    config = cell.config
    data = two_tank.training_trajectory().dataset(config.data.target)
    reference = two_tank.validation_trajectory()
    report = MetricsReport(experiment=cell.experiment, case="two-tank", cell=cell.params)

    m, result = _symbolic(config, data, config.hyperparams, truth=two_tank.TRUTH)
    if result.tree is not None:
        m.rollout_rmse = _finite(metrics.rollout_rmse(metrics.tree_dh1_model(result.tree), reference))
    report.methods.append(m)

    for m, predictor in _baselines(config, data):
        if m.method == "sparse":
            def dh1(h1, h2, f1, f2, predictor=predictor):
                return float(predictor({"h1": [h1], "h2": [h2], "F1": [f1], "F2": [f2]})[0])
            try:
                m.rollout_rmse = _finite(metrics.rollout_rmse(dh1, reference))
            except UserError as e:
                report.flags.append(f"two-tank: sparse rollout failed: {e}")
        report.methods.append(m)
    return report


CELL_RUNNERS: Dict[str, Callable[[Cell], MetricsReport]] = {
    "fig3": _cell_fig3,
    "nb-sweep": _cell_nb_sweep,
    "two-tank": _cell_two_tank,
    "viscosity": _cell_viscosity,
    "noise": _cell_noise,
}


def run_cell(cell: Cell) -> MetricsReport:
    """Module-level entry point so cells can be shipped to worker processes."""
    start = time.perf_counter()
    report = CELL_RUNNERS[cell.experiment](cell)
    _flag_status(report)
    logger.info(f"Cell {cell.experiment} {cell.params} done in {time.perf_counter() - start:.2f}s")
    return report


# =============================================================================
# SERVICE
# =============================================================================

class ExperimentService:
    """
    Runs one experiment for a case configuration.

    Args:
        config: Case configuration (a preset or a loaded TOML file)
        workers: Process pool size; 1 runs cells in this process
    """

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None):
        self.config = config
        self.workers = workers or settings.EXPERIMENT_WORKERS

    @classmethod
    def for_experiment(
        cls,
        experiment: str,
        config: Optional[ExperimentConfig] = None,
        seed: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> "ExperimentService":
        """
        Service for an experiment, defaulting to its case preset.

        ``seed`` replaces the data seed and shifts the seed lists so that
        the whole run is reproducible from the one flag.

        Raises:
            ConfigError: Unknown experiment or a config for another case
        """
        experiment = canonical_experiment(experiment)
        case = EXPERIMENT_CASES[experiment]
        config = config or ExperimentConfig.preset(case)
        if config.data.case != case:
            raise ConfigError(f"experiment '{experiment}' runs on case '{case}', config is for '{config.data.case}'")
        if seed is not None:
            shift = seed - config.data.seed
            config = config.model_copy(update={
                "data": config.data.model_copy(update={"seed": seed}),
                "experiment": config.experiment.model_copy(
                    update={"seeds": [s + shift for s in config.experiment.seeds]}
                ),
            })
        return cls(config, workers)

    def cells(self, experiment: str) -> List[Cell]:
        experiment = EXPERIMENT_ALIASES.get(experiment, experiment)
        ex, data = self.config.experiment, self.config.data
        if experiment == "fig3":
            keys = [(("size", n), ("seed", s)) for n in ex.sizes for s in ex.seeds]
        elif experiment == "nb-sweep":
            keys = [(("n_branch", nb),) for nb in ex.nb_values]
        elif experiment == "viscosity":
            keys = [(("n", n),) for n in ex.viscosity_sizes]
        elif experiment == "noise":
            keys = [(("sigma", s), ("seed", data.seed + j)) for s in ex.noise_levels for j in range(ex.noise_seeds)]
        elif experiment == "two-tank":
            keys = [()]
        else:
            raise ConfigError(f"experiment '{experiment}' has no cells")
        return [Cell(experiment, key, self.config) for key in keys]

    def _run_cells(self, cells: List[Cell]) -> List[MetricsReport]:
        if self.workers > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(run_cell, cells))
        return [run_cell(cell) for cell in cells]

    def run(self, experiment: str) -> ExperimentResult:
        experiment = canonical_experiment(experiment)
        if experiment == "error-map":
            return self.run_error_map()
        cells = self.cells(experiment)
        logger.info(f"Running {experiment}: {len(cells)} cells on {self.workers} worker(s)")
        start = time.perf_counter()
        reports = self._run_cells(cells)
        table = _table(reports)
        summary, checks = SUMMARIES[experiment](table, reports)
        flags = [flag for report in reports for flag in report.flags] + checks
        for flag in flags:
            logger.warning(flag)
        logger.info(f"Finished {experiment} in {time.perf_counter() - start:.2f}s")
        return ExperimentResult(experiment, EXPERIMENT_CASES[experiment], reports, table, summary, flags)

    def run_fig3(self) -> ExperimentResult:
        return self.run("fig3")

    def run_nb_sweep(self) -> ExperimentResult:
        return self.run("nb-sweep")

    def run_two_tank(self) -> ExperimentResult:
        return self.run("two-tank")

    def run_viscosity(self) -> ExperimentResult:
        return self.run("viscosity")

    def run_noise(self) -> ExperimentResult:
        return self.run("noise")

    def run_error_map(self) -> ExperimentResult:
        """
        Absolute error of every method on a uniform grid of case 1, with the
        distance from the origin and the true and learned regimes.
        """
        config = self.config
        logger.info(f"Running error-map on a {config.experiment.grid_points}^2 grid")
        data = case1.gen_case1(config.data.n, seed=config.data.seed, noise=config.data.noise)
        points = case1.grid(config.experiment.grid_points)
        report = MetricsReport(experiment="error-map", case="case1", cell={"n": config.data.n})

        table = pd.DataFrame({
            "x1": points.column("x1"),
            "x2": points.column("x2"),
            "distance": np.hypot(points.column("x1"), points.column("x2")),
            "y_true": points.y,
            "true_regime": case1.regime(points.column("x1"), points.column("x2")),
        })
        m, result = _symbolic(config, data, config.hyperparams, points, case1.TRUTH)
        report.methods.append(m)
        if result.tree is not None:
            matching = metrics.match_leaves(result.tree, data, case1.TRUTH.regime(data))
            leaves = result.tree.predict_leaves_many(points)
            table["learned_regime"] = [matching[int(n)] for n in leaves]
            table[f"abs_error[{SYMBOLIC_TREE}]"] = np.abs(result.tree.predict_many(points) - points.y)
        for m, predictor in _baselines(config, data, points):
            report.methods.append(m)
            table[f"abs_error[{m.method}]"] = np.abs(predictor(points) - points.y)
        _flag_status(report)

        flags = list(report.flags) + _error_map_flags(table)
        for flag in flags:
            logger.warning(flag)
        return ExperimentResult("error-map", "case1", [report], table, _table([report]), flags)

    # =========================================================================
    # OUTPUT
    # =========================================================================

    @staticmethod
    def write(result: ExperimentResult, out_dir: Union[str, Path]) -> List[Path]:
        """Write ``<name>.csv`` and ``<name>_summary.csv``; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{result.name}.csv", out / f"{result.name}_summary.csv"]
        for frame, path in zip((result.table, result.summary), paths):
            frame.drop(columns=[c for c in VOLATILE_COLUMNS if c in frame.columns]).to_csv(
                path, index=False, float_format=CSV_FLOAT_FORMAT
            )
        logger.info(f"Wrote {', '.join(str(p) for p in paths)}")
        return paths


# =============================================================================
# SUMMARIES
# =============================================================================

def _table(reports: List[MetricsReport]) -> pd.DataFrame:
    return pd.DataFrame([row for report in reports for row in report.rows()])


def _by_method(table: pd.DataFrame, keys: List[str], column: str, how: str = "median") -> pd.DataFrame:
    grouped = table.groupby(keys + ["method"], sort=True)[column]
    return getattr(grouped, how)().reset_index()


def _summary_fig3(table: pd.DataFrame, reports: List[MetricsReport]) -> Tuple[pd.DataFrame, List[str]]:
    summary = _by_method(table, ["size"], "test_mae")
    flags = []
    for size, group in summary.groupby("size"):
        scores = group.set_index("method")["test_mae"]
        if SYMBOLIC_TREE not in scores or scores.isna().any():
            flags.append(f"fig3 size={size}: missing test MAE")
            continue
        ranked = [m for m in FIG3_MAE_ORDER if m in scores]
        for better, worse in zip(ranked, ranked[1:]):
            if not scores[better] < scores[worse]:
                flags.append(
                    f"fig3 size={size}: {better} MAE {scores[better]:.3g} is not below "
                    f"{worse} MAE {scores[worse]:.3g}"
                )
    ours = summary[summary["method"] == SYMBOLIC_TREE].sort_values("size")
    sizes, scores = ours["size"].tolist(), ours["test_mae"].tolist()
    for k in range(1, len(sizes)):
        if scores[k] > scores[k - 1] + MAE_TOL:
            flags.append(f"fig3: symbolic tree MAE grows from size {sizes[k - 1]} to {sizes[k]}")
    return summary, flags


def _summary_nb_sweep(table: pd.DataFrame, reports: List[MetricsReport]) -> Tuple[pd.DataFrame, List[str]]:
    summary = table[["n_branch", "method", "test_mae", "train_mae", "status", "nodes"]].sort_values("n_branch")
    flags = []
    scores = summary.dropna(subset=["test_mae"])
    if len(scores):
        best = int(scores.loc[scores["test_mae"].idxmin(), "n_branch"])
        if best != 2 and 2 in set(scores["n_branch"]):
            flags.append(f"nb-sweep: lowest test MAE at N_B={best}, expected N_B=2")
    return summary.reset_index(drop=True), flags


def _summary_two_tank(table: pd.DataFrame, reports: List[MetricsReport]) -> Tuple[pd.DataFrame, List[str]]:
    columns = [c for c in ("method", "rollout_rmse", "train_mae", "leaf_l2", "split_l2", "threshold") if c in table]
    summary = table[columns].reset_index(drop=True)
    flags = []
    report = reports[0]
    ours, sparse = report.method(SYMBOLIC_TREE), report.method("sparse")
    if ours is not None and sparse is not None:
        if ours.rollout_rmse is None or sparse.rollout_rmse is None:
            flags.append("two-tank: rollout RMSE missing")
        elif sparse.rollout_rmse < 100 * ours.rollout_rmse:
            flags.append(
                f"two-tank: sparse rollout RMSE {sparse.rollout_rmse:.3g} is less than 100x "
                f"the symbolic tree's {ours.rollout_rmse:.3g}"
            )
    return summary, flags


def _summary_viscosity(table: pd.DataFrame, reports: List[MetricsReport]) -> Tuple[pd.DataFrame, List[str]]:
    coef = sorted(c for c in table.columns if c.startswith("coef[regime") or c.startswith("coef[split"))
    columns = ["n", "method", "test_mae", "leaf_l2", "split_l2", "threshold"] + coef
    summary = table[table["method"] == SYMBOLIC_TREE][[c for c in columns if c in table]]
    return summary.reset_index(drop=True), []


def _summary_noise(table: pd.DataFrame, reports: List[MetricsReport]) -> Tuple[pd.DataFrame, List[str]]:
    grouped = table.groupby("sigma", sort=True)
    summary = pd.DataFrame({
        "leaf_l2_mean": grouped["leaf_l2"].mean(),
        "split_l2_mean": grouped["split_l2"].mean(),
        "form_preserved": grouped["form_preserved"].apply(lambda s: int(s.fillna(False).astype(bool).sum())),
        "seeds": grouped.size(),
    }).reset_index()
    flags = []
    if len(summary) > 1:
        low, high = summary.iloc[0], summary.iloc[-1]
        if high["leaf_l2_mean"] < low["leaf_l2_mean"]:
            flags.append(f"noise: leaf coefficient error at sigma={high['sigma']} is below sigma={low['sigma']}")
    for _, row in summary[summary["sigma"] <= 0.2].iterrows():
        if row["form_preserved"] < 0.8 * row["seeds"]:
            flags.append(
                f"noise: functional form kept in {int(row['form_preserved'])}/{int(row['seeds'])} seeds "
                f"at sigma={row['sigma']}"
            )
    return summary, flags


def _error_map_flags(table: pd.DataFrame, tol: float = 1e-6) -> List[str]:
    column = f"abs_error[{SYMBOLIC_TREE}]"
    if column not in table:
        return ["error-map: no symbolic tree"]
    flags = []
    agree = table["learned_regime"] == table["true_regime"]
    if (table.loc[agree, column] > tol).any():
        flags.append("error-map: symbolic tree error above tolerance where the regimes agree")
    if (~agree).any() and table.loc[table[column].idxmax(), "learned_regime"] == table.loc[table[column].idxmax(), "true_regime"]:
        flags.append("error-map: largest symbolic tree error is not on a misclassified point")
    return flags


SUMMARIES = {
    "fig3": _summary_fig3,
    "nb-sweep": _summary_nb_sweep,
    "two-tank": _summary_two_tank,
    "viscosity": _summary_viscosity,
    "noise": _summary_noise,
}
