"""CSV ingestion and result serialization.

Datasets come in as plain comma-separated files with a header row and
numeric cells; anything non-numeric or non-finite is rejected with the
offending row and column named.  Results go out as JSON (one object
mirroring RunResult) or CSV (one row per estimate).  All numbers are
written as shortest round-trip decimals, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any

from .core import Dataset, IngestionError, InvalidArgumentError, LossSpec
from .models import ModelSpec, format_number
from .uncertainty import CI_METHODS, VARIANCE_METHODS, ImportanceEstimate

RESULT_FORMATS = ("json", "csv")
RESULT_CSV_HEADER = (
    "feature,formulation,importance,sem,ci_low,ci_high,level,n_samples,K,seed"
)


@dataclass(frozen=True)
class RunConfig:
    """Everything a full run depends on; echoed verbatim into results."""

    data_path: str
    target_column: str
    feature_columns: tuple[str, ...] | None = None
    model: ModelSpec = ModelSpec(kind="ols")
    loss: LossSpec = LossSpec(kind="squared")
    K: int = 30
    mode: str = "resample"
    formulation: str = "both"
    confidence_level: float = 0.95
    ci_method: str = "student_t"
    seed: int = 0
    variance: str = "mle"

    def __post_init__(self) -> None:
        if self.mode not in ("resample", "permute", "exact"):
            raise InvalidArgumentError(f"unknown table mode {self.mode!r}")
        if self.formulation not in ("rv", "fd", "both"):
            raise InvalidArgumentError(f"unknown formulation {self.formulation!r}")
        if self.ci_method not in CI_METHODS:
            raise InvalidArgumentError(f"unknown ci method {self.ci_method!r}")
        if self.variance not in VARIANCE_METHODS:
            raise InvalidArgumentError(f"unknown variance method {self.variance!r}")
        if not 0.0 < self.confidence_level < 1.0:
            raise InvalidArgumentError("confidence level must be in (0, 1)")
        if self.K < 1:
            raise InvalidArgumentError("K must be >= 1")
        if self.formulation in ("fd", "both") and self.K < 2 and self.mode != "exact":
            raise InvalidArgumentError(
                "the fd formulation needs K >= 2 (or mode=exact)"
            )
        if self.feature_columns is not None:
            object.__setattr__(
                self, "feature_columns", tuple(self.feature_columns)
            )


@dataclass(frozen=True)
class RunResult:
    """Baseline risk plus every feature's estimates, with full provenance."""

    baseline_risk: float
    estimates: tuple[ImportanceEstimate, ...]
    config_echo: RunConfig
    library_version: str
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(
            sorted(self.estimates, key=lambda e: (e.feature_index, e.formulation))
        )
        object.__setattr__(self, "estimates", ordered)


def read_csv_header(path: str | os.PathLike) -> list[str]:
    """The column names of a CSV file (first row)."""
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
    return [name.strip() for name in header]


def load_csv(
    path: str | os.PathLike,
    target_column: str,
    feature_columns: list[str] | tuple[str, ...] | None = None,
) -> Dataset:
    """Read a dataset from a headered CSV file.

    Selected cells must all parse as finite decimal numbers; the first bad
    cell is reported with its row number and column name.  Row order is
    preserved.
    """
    path = os.fspath(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [name.strip() for name in next(reader)]
        except StopIteration:
            raise IngestionError(f"{path}: empty file") from None
        if len(set(header)) != len(header):
            dupes = sorted({n for n in header if header.count(n) > 1})
            raise IngestionError(f"{path}: duplicate column names {dupes}")
        if target_column not in header:
            raise IngestionError(f"{path}: no column named {target_column!r}")

        if feature_columns is None:
            names = [n for n in header if n != target_column]
        else:
            names = list(feature_columns)
            for name in names:
                if name not in header:
                    raise IngestionError(f"{path}: no column named {name!r}")
            if target_column in names:
                raise IngestionError(
                    f"{path}: target column {target_column!r} listed as a feature"
                )
        if not names:
            raise IngestionError(f"{path}: no feature columns selected")

        col_of = {name: header.index(name) for name in names}
        target_col = header.index(target_column)

        feature_rows: list[list[float]] = []
        target_values: list[float] = []
        for row_number, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore blank lines
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}: row {row_number} has {len(row)} cells, expected {len(header)}"
                )
            feature_rows.append(
                [_parse_cell(path, row, row_number, name, col_of[name]) for name in names]
            )
            target_values.append(
                _parse_cell(path, row, row_number, target_column, target_col)
            )

    if len(feature_rows) < 2:
        raise IngestionError(f"{path}: need at least 2 data rows, got {len(feature_rows)}")
    return Dataset(
        features=feature_rows, target=target_values, feature_names=tuple(names)
    )


def _parse_cell(path: str, row: list[str], row_number: int, name: str, col: int) -> float:
    text = row[col].strip()
    try:
        value = float(text)
    except ValueError:
        raise IngestionError(
            f"{path}: row {row_number}, column {name!r}: cannot parse {text!r}"
        ) from None
    if not math.isfinite(value):
        raise IngestionError(
            f"{path}: row {row_number}, column {name!r}: non-finite value {text!r}"
        )
    return value


def write_dataset_csv(
    data: Dataset, target_column: str, destination: str | os.PathLike | IO[str]
) -> None:
    """Write a dataset back out as CSV (features first, target last)."""
    lines = [",".join([*data.feature_names, target_column])]
    for j in range(data.n_rows):
        cells = [format_number(v) for v in data.features[j]]
        cells.append(format_number(data.target[j]))
        lines.append(",".join(cells))
    write_text("\n".join(lines) + "\n", destination)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses/containers into JSON-ready values."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if isinstance(obj, float):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def result_to_json_text(result: RunResult) -> str:
    return json.dumps(to_jsonable(result), indent=2) + "\n"


def result_to_csv_text(result: RunResult) -> str:
    lines = [RESULT_CSV_HEADER]
    for e in result.estimates:
        lines.append(
            ",".join(
                [
                    e.feature_name,
                    e.formulation,
                    format_number(e.point),
                    format_number(e.sem),
                    format_number(e.ci_low),
                    format_number(e.ci_high),
                    format_number(e.confidence_level),
                    str(e.n_samples),
                    str(e.K),
                    str(e.seed),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_result(
    result: RunResult, format: str, destination: str | os.PathLike | IO[str]
) -> None:
    """Serialize a result to JSON or CSV.

    The text is rendered fully before anything is opened, and file writes
    go through a temp file and an atomic rename, so a failed run never
    leaves a partial output file behind.
    """
    if format not in RESULT_FORMATS:
        raise InvalidArgumentError(
            f"unknown result format {format!r}; expected one of {RESULT_FORMATS}"
        )
    text = result_to_json_text(result) if format == "json" else result_to_csv_text(result)
    write_text(text, destination)


def write_text(text: str, destination: str | os.PathLike | IO[str]) -> None:
    """Write text to a stream directly, or to a path atomically."""
    if hasattr(destination, "write"):
        destination.write(text)
        return
    path = Path(os.fspath(destination))
    fd, tmp_name = tempfile.mkstemp(
        dir=path.parent or Path("."), prefix=path.name, suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def read_result_json(path: str | os.PathLike) -> dict:
    """Parse a JSON result file back into a plain dictionary."""
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
