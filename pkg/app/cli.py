"""
Command-line interface.

    python -m app generate --case viscosity --n 40 --seed 0 --out v.csv
    python -m app fit --data v.csv --config configs/viscosity.toml --out model.json
    python -m app predict --model model.json --data v.csv --out pred.csv
    python -m app export-mps --data v.csv --config configs/viscosity.toml --out v.mps
    python -m app eval --experiment fig3 --out results/
    python -m app serve --port 8000

Exit codes: 0 success, 1 user error (message on stderr), 2 internal error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from app.casestudies import case1, two_tank, viscosity
from app.core.config import settings
from app.core.exceptions import EmptyDatasetError, UserError
from app.core.logging_setup import configure_logging
from app.learning.dataset import Dataset
from app.learning.tree import SymbolicTree
from app.schemas.experiment import ExperimentConfig
from app.services.experiment_service import EXPERIMENT_ALIASES, EXPERIMENTS, ExperimentService
from app.services.fit_service import FitService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with the user-error code instead of argparse's 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USER, f"{self.prog}: error: {message}\n")


# =============================================================================
# COMMANDS
# =============================================================================

def _generate(args) -> int:
    if args.case == "two-tank":
        trajectory = two_tank.training_trajectory()
        trajectory.to_csv(args.out)
        print(f"wrote {len(trajectory)} samples to {args.out}")
        return EXIT_OK
    if args.case == "case1":
        data = case1.gen_case1(args.n, seed=args.seed, noise=args.noise)
    else:
        data = viscosity.gen_viscosity(args.n, sigma=args.noise, seed=args.seed)
    data.to_csv(args.out)
    print(f"wrote {data.n_rows} samples to {args.out}")
    return EXIT_OK


def _training_data(path: str, config: ExperimentConfig) -> Dataset:
    data = Dataset.read_csv(path, target=config.data.target).require_rows()
    if config.variables is not None:
        data = data.select(config.variables)
    return data


def _fit(args) -> int:
    config = ExperimentConfig.load(args.config)
    data = _training_data(args.data, config)
    basis_branch, basis_leaf = config.bases(data.feature_names)
    service = FitService()

    if args.solver == "export-only" or args.mps:
        mps_path = args.mps or str(Path(args.out).with_suffix(".mps"))
        Path(mps_path).write_text(service.export_mps(data, basis_branch, basis_leaf, config.hyperparams))
        print(f"wrote MPS model to {mps_path}")
        if args.solver == "export-only":
            return EXIT_OK

    result = service.fit(
        data, basis_branch, basis_leaf, config.hyperparams, config.solver,
        warm_start=config.experiment.warm_start,
        check_invariants=config.experiment.check_invariants,
    )
    print(f"status: {result.status.value}")
    if result.tree is None:
        print(f"no solution found ({result.status.value})", file=sys.stderr)
        return EXIT_USER
    result.tree.save(args.out)
    terms = result.solution.terms
    print(result.equation)
    print(f"objective: {result.solution.objective:.6g} (L_acc={terms.l_acc:.6g}, L_c={terms.l_c:g}, L_m={terms.l_m:.6g})")
    print(f"nodes: {result.stats.nodes}, gap: {result.stats.gap:.3g}")
    failed = [name for name, ok in result.invariants_ok.items() if not ok]
    if failed:
        print(f"warning: structural checks failed: {', '.join(failed)}", file=sys.stderr)
    return EXIT_OK


def _predict(args) -> int:
    tree = SymbolicTree.load(args.model)
    try:
        frame = pd.read_csv(args.data)
    except FileNotFoundError:
        raise UserError(f"data file not found: {args.data}") from None
    except pd.errors.EmptyDataError:
        raise EmptyDatasetError() from None
    if frame.empty:
        raise EmptyDatasetError()
    missing = [v for v in tree.variables if v not in frame.columns]
    if missing:
        raise UserError(f"data is missing variables {missing}")
    columns = {v: frame[v].to_numpy(dtype=float) for v in tree.variables}
    frame["prediction"] = tree.predict_many(columns)
    frame["leaf"] = tree.predict_leaves_many(columns)
    frame.to_csv(args.out, index=False, float_format="%.17g")
    print(f"wrote {len(frame)} predictions to {args.out}")
    return EXIT_OK


def _export_mps(args) -> int:
    config = ExperimentConfig.load(args.config)
    data = _training_data(args.data, config)
    basis_branch, basis_leaf = config.bases(data.feature_names)
    Path(args.out).write_text(FitService().export_mps(data, basis_branch, basis_leaf, config.hyperparams))
    print(f"wrote MPS model to {args.out}")
    return EXIT_OK


def _eval(args) -> int:
    config = ExperimentConfig.load(args.config) if args.config else None
    service = ExperimentService.for_experiment(args.experiment, config, seed=args.seed, workers=args.workers)
    result = service.run(args.experiment)
    for path in service.write(result, args.out):
        print(f"wrote {path}")
    for flag in result.flags:
        print(f"flag: {flag}", file=sys.stderr)
    return EXIT_OK


def _serve(args) -> int:
    import uvicorn

    uvicorn.run("app.main:app", host=args.host, port=args.port)
    return EXIT_OK


# =============================================================================
# PARSER
# =============================================================================

def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="symtree", description="Symbolic decision trees learned by exact MILP.")
    parser.add_argument("--debug", action="store_true", help="DEBUG logging (solver progress lines)")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = commands.add_parser("generate", help="Write a case-study dataset as CSV")
    p.add_argument("--case", required=True, choices=["case1", "two-tank", "viscosity"])
    p.add_argument("--n", type=int, default=60, help="Number of samples (ignored for two-tank)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise standard deviation")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_generate)

    p = commands.add_parser("fit", help="Learn a tree from a CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="TOML configuration")
    p.add_argument("--out", required=True, help="Model document (JSON)")
    p.add_argument("--solver", choices=["embedded", "export-only"], default="embedded")
    p.add_argument("--mps", help="Also write the MILP in MPS format")
    p.set_defaults(handler=_fit)

    p = commands.add_parser("predict", help="Evaluate a model document on a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_predict)

    p = commands.add_parser("export-mps", help="Write the fit MILP in MPS format")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_export_mps)

    p = commands.add_parser("eval", help="Run a comparison experiment")
    p.add_argument("--experiment", required=True, choices=EXPERIMENTS + tuple(EXPERIMENT_ALIASES))
    p.add_argument("--out", default=settings.OUTPUT_DIR)
    p.add_argument("--config", help="TOML configuration replacing the case preset")
    p.add_argument("--seed", type=int, help="Base seed for generated data")
    p.add_argument("--workers", type=int, help="Process pool size (default EXPERIMENT_WORKERS)")
    p.set_defaults(handler=_eval)

    p = commands.add_parser("serve", help="Run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=_serve)

    return parser


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(args.debug or settings.DEBUG, stream=sys.stderr)
    try:
        return args.handler(args)
    except UserError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except Exception as e:
        logger.exception(f"Internal error in '{args.command}': {e}")
        return EXIT_INTERNAL


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cli(argv))
