"""
Datasets.

N_d rows of named input features plus a scalar target. CSV files carry a
header with the feature names followed by the target column (``y`` by
default) and store numbers with 17 significant digits.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.core.exceptions import EmptyDatasetError, UserError

CSV_FLOAT_FORMAT = "%.17g"
TARGET_COLUMN = "y"


@dataclass(frozen=True)
class Dataset:
    feature_names: Tuple[str, ...]
    X: np.ndarray  # (n_rows, n_features)
    y: np.ndarray  # (n_rows,)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise UserError(
                f"feature matrix shape {X.shape} does not match {len(self.feature_names)} names"
            )
        if X.shape[0] != y.shape[0]:
            raise UserError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise UserError("duplicate feature names")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_rows(self) -> int:
        return int(self.X.shape[0])

    def __len__(self) -> int:
        return self.n_rows

    def columns(self) -> Dict[str, np.ndarray]:
        return {name: self.X[:, j] for j, name in enumerate(self.feature_names)}

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_names.index(name)]

    def row(self, i: int) -> Dict[str, float]:
        return {name: float(self.X[i, j]) for j, name in enumerate(self.feature_names)}

    def rows(self):
        for i in range(self.n_rows):
            yield self.row(i)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.feature_names, self.X[idx], self.y[idx])

    def select(self, names: Sequence[str]) -> "Dataset":
        """Keep only the named features, in the given order."""
        missing = [n for n in names if n not in self.feature_names]
        if missing:
            raise UserError(f"dataset is missing features {missing}")
        return Dataset(tuple(names), np.column_stack([self.column(n) for n in names]).reshape(self.n_rows, len(names)), self.y)

    def with_target(self, y: np.ndarray) -> "Dataset":
        return Dataset(self.feature_names, self.X, np.asarray(y, dtype=float))

    def require_rows(self) -> "Dataset":
        if self.n_rows == 0:
            raise EmptyDatasetError()
        return self

    # =========================================================================
    # CONVERSION
    # =========================================================================

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, target: str = TARGET_COLUMN) -> "Dataset":
        if target not in frame.columns:
            raise UserError(f"target column '{target}' missing; columns are {list(frame.columns)}")
        features = [str(c) for c in frame.columns if c != target]
        try:
            X = frame[features].to_numpy(dtype=float) if features else np.empty((len(frame), 0))
            y = frame[target].to_numpy(dtype=float)
        except ValueError as e:
            raise UserError(f"non-numeric value in dataset: {e}") from e
        return cls(tuple(features), X.reshape(len(frame), len(features)), y)

    @classmethod
    def from_rows(
        cls, rows: Sequence[Mapping[str, float]], target: str = TARGET_COLUMN,
        feature_names: Optional[Sequence[str]] = None,
    ) -> "Dataset":
        """Build from a list of name -> value mappings (API payloads)."""
        frame = pd.DataFrame(list(rows))
        if feature_names is not None:
            missing = [n for n in feature_names if n not in frame.columns]
            if missing and len(frame):
                raise UserError(f"rows are missing features {missing}")
            if not len(frame):
                frame = pd.DataFrame(columns=list(feature_names) + [target])
            elif target not in frame.columns:
                frame[target] = np.nan
            frame = frame[list(feature_names) + [target]]
        return cls.from_frame(frame, target)

    def to_frame(self, target: str = TARGET_COLUMN) -> pd.DataFrame:
        frame = pd.DataFrame(self.X, columns=list(self.feature_names))
        frame[target] = self.y
        return frame

    @classmethod
    def read_csv(cls, path: Union[str, Path], target: str = TARGET_COLUMN) -> "Dataset":
        try:
            frame = pd.read_csv(path)
        except FileNotFoundError:
            raise UserError(f"data file not found: {path}") from None
        except pd.errors.EmptyDataError:
            raise EmptyDatasetError() from None
        return cls.from_frame(frame, target)

    def to_csv(self, path: Union[str, Path], target: str = TARGET_COLUMN) -> None:
        self.to_frame(target).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
