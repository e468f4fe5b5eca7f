"""CSV ingestion and the survey preprocessing steps.

Raw item responses arrive on a 1..5 scale; analysis needs them
dichotomised and needs a matching criterion, by default the
standardised sum of the raw responses.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import DataError

_MISSING_TOKENS = {"", "na", "nan", "null", "none", "n/a"}


@dataclass(frozen=True)
class ColumnSchema:
    """Names the columns a fit run needs from a CSV file.

    ``criterion_column="derive"`` asks for the standardised sum of the
    raw item responses instead of a file column.
    """

    item_columns: tuple[str, ...]
    criterion_column: str = "derive"
    group_column: str | None = None
    asymptote_covariates: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.item_columns:
            raise DataError("schema needs at least one item column")
        if len(set(self.item_columns)) != len(self.item_columns):
            raise DataError("item column names must be unique")

    def referenced_columns(self) -> list[str]:
        cols = list(self.item_columns)
        if self.criterion_column != "derive":
            cols.append(self.criterion_column)
        if self.group_column is not None:
            cols.append(self.group_column)
        cols.extend(self.asymptote_covariates)
        seen: list[str] = []
        for c in cols:
            if c not in seen:
                seen.append(c)
        return seen


def load_dataset(path, schema: ColumnSchema) -> pd.DataFrame:
    """Read a header-ed, comma-separated UTF-8 file.

    Referenced columns are converted to float64.  Rows with missing
    values in a referenced column are dropped with a row-numbered
    warning; a non-numeric cell is an error naming row and column.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        try:
            header = next(csv.reader(fh))
        except StopIteration:
            raise DataError("empty file") from None
    if len(header) != len(set(header)):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate header column(s): {', '.join(dupes)}")
    missing = [c for c in schema.referenced_columns() if c not in header]
    if missing:
        raise DataError(f"missing column(s): {', '.join(missing)}")

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    if frame.shape[0] == 0:
        raise DataError("file has a header but no data rows")

    drop_rows: set[int] = set()
    converted: dict[str, np.ndarray] = {}
    for col in schema.referenced_columns():
        raw = frame[col].to_numpy()
        values = np.empty(raw.shape[0], dtype=np.float64)
        for i, cell in enumerate(raw):
            text = cell.strip()
            if text.lower() in _MISSING_TOKENS:
                values[i] = np.nan
                drop_rows.add(i)
                continue
            try:
                values[i] = float(text)
            except ValueError:
                # +2: one for the header line, one for 1-based numbering.
                raise DataError(
                    f"row {i + 2}, column {col!r}: not numeric: {text!r}"
                ) from None
        converted[col] = values

    if drop_rows:
        lines = sorted(i + 2 for i in drop_rows)
        warnings.warn(
            f"dropped {len(drop_rows)} row(s) with missing values "
            f"(file line(s) {', '.join(map(str, lines))})",
            stacklevel=2,
        )
    keep = np.array([i not in drop_rows for i in range(frame.shape[0])])
    if not keep.any():
        raise DataError("every row has missing values in a referenced column")
    out = frame.loc[keep].reset_index(drop=True)
    for col, values in converted.items():
        out[col] = values[keep]
    return out


def dichotomise(responses, cut: int = 2) -> np.ndarray:
    """Map 1..5 responses to 0/1: response >= cut scores 1."""
    arr = np.asarray(responses)
    if not np.all(np.isfinite(arr)):
        raise DataError("responses contain missing values")
    if np.any(arr != np.round(arr)) or arr.min() < 1 or arr.max() > 5:
        raise DataError("responses must be integers in 1..5")
    return (arr >= cut).astype(np.int64)


def standardised_score(responses) -> np.ndarray:
    """Row sums of the raw responses, standardised to mean 0 and sd 1."""
    arr = np.asarray(responses, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("responses must be a respondents-by-items matrix")
    sums = arr.sum(axis=1)
    sd = float(np.std(sums, ddof=1)) if sums.shape[0] > 1 else 0.0
    if sd == 0.0:
        raise DataError("zero variance in the total score")
    return (sums - float(np.mean(sums))) / sd
