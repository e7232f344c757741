"""Balanced panel data model, CSV ingestion and structural validation."""

import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from common.errors import (
    DuplicateCell,
    EmptyPanel,
    MalformedTable,
    MissingCell,
    MissingFile,
    NonFiniteValue,
    SchemaMismatch,
)

_REGRESSOR_PATTERN = re.compile(r"^x(\d+)$")

Source = Union[str, os.PathLike, IO[str], IO[bytes]]


class ViolationKind(Enum):
    SHAPE_MISMATCH = "ShapeMismatch"
    NON_FINITE_VALUE = "NonFiniteValue"
    DUPLICATE_ID = "DuplicateId"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    location: Tuple
    message: str


class PanelSchema:
    """
    Column names of a long-format panel table.
    When `regressors` is None the columns x1..xp are detected in order.
    """

    def __init__(
        self,
        unit: str = "unit",
        time: str = "time",
        y: str = "y",
        regressors: Optional[Sequence[str]] = None,
    ) -> None:
        self.unit = unit
        self.time = time
        self.y = y
        self.regressors = list(regressors) if regressors is not None else None

    def resolve_regressors(self, columns: Sequence[str]) -> List[str]:
        """Return the regressor column names for a header."""
        if self.regressors is not None:
            return list(self.regressors)
        found = {}
        for name in columns:
            match = _REGRESSOR_PATTERN.match(name)
            if match:
                found[int(match.group(1))] = name
        # x1..xp must be contiguous; a gap leaves the tail as extra columns
        names = []
        k = 1
        while k in found:
            names.append(found[k])
            k += 1
        return names or ["x1"]


@dataclass(frozen=True, eq=False)
class PanelData:
    """
    Balanced N x T panel: outcome y (N, T) and regressors x (N, T, p).
    Arrays are made read-only on construction so a panel can be shared.
    """

    y: np.ndarray
    x: np.ndarray
    unit_ids: Tuple[str, ...] = field(default=())
    time_ids: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float)
        x = np.array(self.x, dtype=float)
        if y.ndim != 2:
            raise ValueError(f"y must be an N x T matrix, got shape {y.shape}")
        if x.ndim == 2:
            x = x[:, :, np.newaxis]
        if x.ndim != 3 or x.shape[:2] != y.shape:
            raise ValueError(f"x must have shape {y.shape + ('p',)}, got {x.shape}")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        unit_ids = tuple(str(u) for u in self.unit_ids) or tuple(
            str(i) for i in range(y.shape[0])
        )
        time_ids = tuple(str(t) for t in self.time_ids) or tuple(
            str(t) for t in range(y.shape[1])
        )
        object.__setattr__(self, "unit_ids", unit_ids)
        object.__setattr__(self, "time_ids", time_ids)

    @property
    def n_units(self) -> int:
        return self.y.shape[0]

    @property
    def n_periods(self) -> int:
        return self.y.shape[1]

    @property
    def n_regressors(self) -> int:
        return self.x.shape[2]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PanelData):
            return NotImplemented
        return (
            self.unit_ids == other.unit_ids
            and self.time_ids == other.time_ids
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x, other.x)
        )

    def with_outcome(self, y: np.ndarray) -> "PanelData":
        """Return a panel sharing regressors and labels with a new outcome matrix."""
        return PanelData(y=y, x=self.x, unit_ids=self.unit_ids, time_ids=self.time_ids)


def _read_table(source: Source) -> pd.DataFrame:
    if isinstance(source, (str, os.PathLike)) and not os.path.isfile(source):
        raise MissingFile(os.fspath(source))
    try:
        table = pd.read_csv(source, sep=",", dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise MalformedTable("file is empty, expected a header row")
    except pd.errors.ParserError as e:
        raise MalformedTable(str(e).strip())
    except UnicodeDecodeError as e:
        raise MalformedTable(f"not valid UTF-8 at byte {e.start}")
    # pandas turns surplus leading fields into an index instead of failing
    if len(table) and not isinstance(table.index, pd.RangeIndex):
        raise MalformedTable("data rows have more fields than the header")
    return table


def load_panel(source: Source, schema: Optional[PanelSchema] = None) -> PanelData:
    """
    Load a long-format CSV (one row per unit-time cell) into a PanelData.
    Rows may arrive in any order; the result is sorted by (unit, time).
    """
    schema = schema or PanelSchema()
    table = _read_table(source)
    columns = list(table.columns)
    regressors = schema.resolve_regressors(columns)
    required = [schema.unit, schema.time, schema.y] + regressors
    missing = [name for name in required if name not in columns]
    extra = [name for name in columns if name not in required]
    if missing or extra:
        raise SchemaMismatch(missing, extra)
    if table.empty:
        raise EmptyPanel()

    numeric_columns = [schema.y] + regressors
    values = {
        name: pd.to_numeric(table[name].str.strip(), errors="coerce").to_numpy(dtype=float)
        for name in numeric_columns
    }
    finite = np.column_stack([np.isfinite(values[name]) for name in numeric_columns])
    if not finite.all():
        row, column = np.argwhere(~finite)[0]
        raise NonFiniteValue(int(row), numeric_columns[column])

    frame = pd.DataFrame(values)
    frame.insert(0, "_time", table[schema.time].to_numpy())
    frame.insert(0, "_unit", table[schema.unit].to_numpy())

    duplicated = frame.duplicated(subset=["_unit", "_time"], keep="first")
    if duplicated.any():
        row = frame[duplicated].iloc[0]
        raise DuplicateCell(row["_unit"], row["_time"])

    unit_ids = sorted(frame["_unit"].unique())
    time_ids = sorted(frame["_time"].unique())
    if len(frame) != len(unit_ids) * len(time_ids):
        present = set(zip(frame["_unit"], frame["_time"]))
        for unit in unit_ids:
            for time in time_ids:
                if (unit, time) not in present:
                    raise MissingCell(unit, time)

    frame = frame.sort_values(["_unit", "_time"], kind="mergesort").reset_index(drop=True)
    n_units, n_periods = len(unit_ids), len(time_ids)
    y = frame[schema.y].to_numpy().reshape(n_units, n_periods)
    x = frame[regressors].to_numpy().reshape(n_units, n_periods, len(regressors))
    return PanelData(y=y, x=x, unit_ids=tuple(unit_ids), time_ids=tuple(time_ids))


def save_panel(panel: PanelData, destination: Source) -> None:
    """Write a panel as long-format CSV with 17-significant-digit floats."""
    n_units, n_periods, n_regressors = panel.n_units, panel.n_periods, panel.n_regressors
    frame = pd.DataFrame(
        {
            "unit": np.repeat(np.array(panel.unit_ids, dtype=object), n_periods),
            "time": np.tile(np.array(panel.time_ids, dtype=object), n_units),
            "y": panel.y.reshape(-1),
        }
    )
    flat_x = panel.x.reshape(-1, n_regressors)
    for k in range(n_regressors):
        frame[f"x{k + 1}"] = flat_x[:, k]
    frame.to_csv(destination, index=False, float_format="%.17g", lineterminator="\n")


def validate(panel: PanelData) -> List[Violation]:
    """Return every invariant violation of a panel; empty when the panel is valid."""
    violations: List[Violation] = []
    n_units, n_periods = panel.n_units, panel.n_periods
    for name, size in (("n_units", n_units), ("n_periods", n_periods), ("n_regressors", panel.n_regressors)):
        if size == 0:
            violations.append(
                Violation(ViolationKind.SHAPE_MISMATCH, (name,), f"{name} must be positive, got 0")
            )
    if len(panel.unit_ids) != n_units:
        violations.append(
            Violation(
                ViolationKind.SHAPE_MISMATCH,
                ("unit_ids",),
                f"{len(panel.unit_ids)} unit ids for {n_units} units",
            )
        )
    if len(panel.time_ids) != n_periods:
        violations.append(
            Violation(
                ViolationKind.SHAPE_MISMATCH,
                ("time_ids",),
                f"{len(panel.time_ids)} time ids for {n_periods} periods",
            )
        )

    for i, t in np.argwhere(~np.isfinite(panel.y)):
        violations.append(
            Violation(ViolationKind.NON_FINITE_VALUE, (int(i), int(t)), "non-finite y")
        )
    for i, t, k in np.argwhere(~np.isfinite(panel.x)):
        violations.append(
            Violation(
                ViolationKind.NON_FINITE_VALUE, (int(i), int(t), int(k)), "non-finite x"
            )
        )

    for name, ids in (("unit_ids", panel.unit_ids), ("time_ids", panel.time_ids)):
        seen = set()
        for position, label in enumerate(ids):
            if label in seen:
                violations.append(
                    Violation(
                        ViolationKind.DUPLICATE_ID,
                        (name, position),
                        f"duplicate label '{label}'",
                    )
                )
            seen.add(label)
    return violations


def regressor_bound(panel: PanelData) -> float:
    """Return max |x_itk| over the whole regressor tensor."""
    if panel.x.size == 0:
        return 0.0
    return float(np.max(np.abs(panel.x)))


def within_rank(panel: PanelData) -> int:
    """Rank of the regressor moment matrix after removing unit means."""
    demeaned = panel.x - panel.x.mean(axis=1, keepdims=True)
    return int(np.linalg.matrix_rank(demeaned.reshape(-1, panel.n_regressors)))
