"""
Experiment Configuration.

TOML files with [data], [basis], [hyperparams], [solver] and [experiment]
sections. Expression values are strings in the expression grammar; they are
parsed against the case's variable names when the bases are requested.
"""
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from app.casestudies import case1, two_tank, viscosity
from app.core.exceptions import ConfigError, UserError
from app.learning.formulation import HyperParams
from app.solver.config import SolverConfig
from app.symbolic.basis import BasisRole, BasisSet

CaseId = Literal["case1", "two-tank", "viscosity", "custom"]
BaselineId = Literal["sparse", "tree-constant", "tree-linear"]

CASE_VARIABLES: Dict[str, Tuple[str, ...]] = {
    "case1": case1.VARIABLES,
    "two-tank": two_tank.VARIABLES,
    "viscosity": viscosity.VARIABLES,
}


class DataSection(BaseModel):
    case: CaseId = "case1"
    path: Optional[str] = Field(default=None, description="CSV file for custom data")
    target: str = "y"
    n: int = Field(default=60, ge=1, description="Generated training size")
    seed: int = 0
    noise: float = Field(default=0.0, ge=0, description="Gaussian noise standard deviation")
    test_size: int = Field(default=2000, ge=1)
    test_seed: int = 12345

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def check_source(self) -> "DataSection":
        if self.case == "custom" and not self.path:
            raise ValueError("custom data needs a path")
        return self


class BasisSection(BaseModel):
    branch: List[str] = Field(..., min_length=1, description="Split basis expressions")
    leaf: List[str] = Field(..., min_length=1, description="Leaf basis expressions")

    class Config:
        extra = "forbid"


class ExperimentSection(BaseModel):
    sizes: List[int] = Field(default_factory=lambda: [20, 40, 60])
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2])
    nb_values: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    noise_levels: List[float] = Field(default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.4])
    noise_seeds: int = Field(default=10, ge=1)
    noise_n_leaf: Optional[int] = Field(
        default=2, ge=1, description="Leaf basis functions per leaf in the noise sweep (None = unrestricted)"
    )
    viscosity_sizes: List[int] = Field(default_factory=lambda: [40, 100])
    grid_points: int = Field(default=10, ge=2)
    baselines: List[BaselineId] = Field(default_factory=lambda: ["sparse", "tree-constant", "tree-linear"])
    warm_start: bool = True
    check_invariants: bool = True

    class Config:
        extra = "forbid"


class ExperimentConfig(BaseModel):
    """One case setup: data source, bases, MILP hyperparameters, solver and experiment grid."""
    data: DataSection = Field(default_factory=DataSection)
    basis: BasisSection
    hyperparams: HyperParams = Field(default_factory=HyperParams)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    class Config:
        extra = "forbid"
        json_schema_extra = {
            "example": {
                "data": {"case": "viscosity", "n": 40, "seed": 0},
                "basis": {"branch": ["log10(M)", "M/1e6"], "leaf": ["1", "log10(M)", "M/1e6"]},
                "hyperparams": {"depth": 1, "big_m_mode": "global", "big_m": 100},
            }
        }

    @model_validator(mode="after")
    def check_expressions(self) -> "ExperimentConfig":
        variables = CASE_VARIABLES.get(self.data.case)
        if variables is not None:
            for section, texts in (("branch", self.basis.branch), ("leaf", self.basis.leaf)):
                for k, text in enumerate(texts):
                    try:
                        BasisSet.from_texts([text], variables, BasisRole.LEAF)
                    except UserError as e:
                        raise ValueError(f"basis.{section}[{k}]: {e}") from None
        return self

    @property
    def variables(self) -> Optional[Tuple[str, ...]]:
        return CASE_VARIABLES.get(self.data.case)

    def bases(self, variables: Optional[Tuple[str, ...]] = None) -> Tuple[BasisSet, BasisSet]:
        """Parse the basis texts; custom cases pass the dataset's feature names."""
        names = variables or self.variables
        if names is None:
            raise ConfigError("custom case bases need the dataset's variable names")
        return (
            BasisSet.from_texts(self.basis.branch, names, BasisRole.BRANCHING),
            BasisSet.from_texts(self.basis.leaf, names, BasisRole.LEAF),
        )

    # =========================================================================
    # LOADING
    # =========================================================================

    @classmethod
    def from_mapping(cls, document: Dict[str, Any], source: str = "config") -> "ExperimentConfig":
        try:
            config = cls.model_validate(document)
        except ValidationError as e:
            first = e.errors()[0]
            path = ".".join(str(part) for part in first["loc"]) or "document"
            raise ConfigError(f"{source}: {path}: {first['msg']}") from None
        if config.data.path is not None:
            resolved = Path(source).parent / config.data.path
            if not resolved.exists():
                raise ConfigError(f"{source}: data.path: file {config.data.path} does not exist")
            config.data.path = str(resolved)
        return config

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """
        Read and validate a TOML configuration file.

        Raises:
            ConfigError: Missing file, TOML syntax error or invalid field
        """
        path = Path(path)
        try:
            with path.open("rb") as f:
                document = tomllib.load(f)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        return cls.from_mapping(document, str(path))

    @classmethod
    def preset(cls, case: str) -> "ExperimentConfig":
        if case not in PRESETS:
            raise ConfigError(f"no preset for case '{case}'; choose from {sorted(PRESETS)}")
        return cls.from_mapping(PRESETS[case], f"preset {case}")


_DEFAULT_BOXES = {
    "a_lb": -100.0, "a_ub": 100.0, "b_lb": -100.0, "b_ub": 100.0,
    "c_lb": -1000.0, "c_ub": 1000.0, "y_lb": -1000.0, "y_ub": 1000.0,
    "big_m_mode": "global", "big_m": 100.0,
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "case1": {
        "data": {"case": "case1", "n": 60, "seed": 0},
        "basis": {"branch": list(case1.BASIS_BRANCH), "leaf": list(case1.BASIS_LEAF)},
        "hyperparams": {"depth": 1, "n_branch": 2, "lambda_c": 0.0, "lambda_m": 0.0, **_DEFAULT_BOXES},
        "solver": {"node_limit": 200000},
    },
    "two-tank": {
        "data": {"case": "two-tank", "target": "dh1"},
        "basis": {"branch": list(two_tank.BASIS_BRANCH), "leaf": list(two_tank.BASIS_LEAF)},
        "hyperparams": {"depth": 1, "n_branch": 1, "n_leaf": 2, **_DEFAULT_BOXES},
        "solver": {"node_limit": 200000},
        "experiment": {"baselines": ["sparse"]},
    },
    "viscosity": {
        "data": {"case": "viscosity", "n": 40, "seed": 0},
        "basis": {"branch": list(viscosity.BASIS_BRANCH), "leaf": list(viscosity.BASIS_LEAF)},
        "hyperparams": {"depth": 1, **_DEFAULT_BOXES},
        "solver": {"node_limit": 200000},
    },
}
