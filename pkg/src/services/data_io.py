"""
Data service: CSV loaders and writers, feature panels and JSON reports.
"""
import json
import logging
import math
import os
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from ..errors import CellParseError, DuplicateDateError, GroupMappingError, HeaderError
from .curve_core import QuotePanel
from .ufr_extract import UfrSeries

logger = logging.getLogger(__name__)

MACRO_GROUPS = (
    'Macro-prosperity', 'Output', 'Consumption', 'Price Index', 'Interest Rates',
    'Money and Credit', 'Investment', 'Real Estate', 'Tax', 'Trade',
    'Foreign Exchange Rate', 'Stock Market', 'Monetary Policy',
)
YIELD_GROUP = 'yields'
DATE_FORMAT = '%Y-%m-%d'
_MATURITY_COLUMN = re.compile(r'^y(\d+)$')


@dataclass
class FeaturePanel:
    """Dated named series with a group label per column."""

    data: pd.DataFrame
    groups: Dict[str, str]

    def __post_init__(self):
        known = set(MACRO_GROUPS) | {YIELD_GROUP}
        for column in self.data.columns:
            if column not in self.groups:
                raise GroupMappingError(f"Variable {column} has no group")
            if self.groups[column] not in known:
                raise GroupMappingError(f"Unknown group {self.groups[column]!r} for variable {column}")
        self.groups = {column: self.groups[column] for column in self.data.columns}

    @property
    def dates(self) -> pd.Index:
        return self.data.index

    def group_names(self) -> List[str]:
        """Groups present, in canonical order."""
        present = set(self.groups.values())
        return [g for g in (YIELD_GROUP,) + MACRO_GROUPS if g in present]

    def group_columns(self, group: str) -> List[str]:
        return [c for c in self.data.columns if self.groups[c] == group]


def _read_csv(path: str) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise HeaderError(f"Cannot read {path}: {e}") from e
    frame.columns = [c.strip() for c in frame.columns]
    return frame


def _parse_dates(frame: pd.DataFrame, path: str) -> pd.DatetimeIndex:
    if not len(frame.columns) or frame.columns[0] != 'date':
        raise HeaderError(f"{path}: first column must be 'date'")
    dates = []
    for row, raw in enumerate(frame['date'], start=2):
        try:
            dates.append(pd.to_datetime(raw.strip(), format=DATE_FORMAT))
        except (ValueError, TypeError) as e:
            raise CellParseError(f"{path}: line {row}: unparseable date {raw!r}") from e
    index = pd.DatetimeIndex(dates, name='date')
    duplicated = index[index.duplicated()]
    if len(duplicated):
        raise DuplicateDateError(f"{path}: duplicate date {duplicated[0].strftime(DATE_FORMAT)}")
    return index


def _parse_numbers(frame: pd.DataFrame, columns: List[str], path: str) -> np.ndarray:
    values = np.empty((len(frame), len(columns)))
    for j, column in enumerate(columns):
        for i, raw in enumerate(frame[column]):
            try:
                values[i, j] = float(raw)
            except ValueError as e:
                raise CellParseError(f"{path}: line {i + 2}, column {column}: unparseable value {raw!r}") from e
            if not math.isfinite(values[i, j]):
                raise CellParseError(f"{path}: line {i + 2}, column {column}: non-finite value {raw!r}")
    return values


def load_yields(path: str) -> QuotePanel:
    """
    Loads a yields CSV: date, then one column per maturity named y<years>.

    Args:
        path: CSV file path

    Returns:
        QuotePanel: Panel sorted by date

    Raises:
        HeaderError, CellParseError, DuplicateDateError
    """
    frame = _read_csv(path)
    dates = _parse_dates(frame, path)
    columns = list(frame.columns[1:])
    if not columns:
        raise HeaderError(f"{path}: no maturity columns")
    maturities = []
    for column in columns:
        match = _MATURITY_COLUMN.match(column)
        if not match:
            raise HeaderError(f"{path}: maturity column {column!r} must be named y<years>")
        maturities.append(float(match.group(1)))
    yields = pd.DataFrame(_parse_numbers(frame, columns, path), index=dates, columns=maturities)
    panel = QuotePanel(yields.sort_index().sort_index(axis=1))
    logger.info(f"Loaded {len(panel)} dates x {len(panel.grid)} maturities from {path}")
    return panel


def load_groups(path: str) -> Dict[str, str]:
    """Loads the variable,group mapping file."""
    frame = _read_csv(path)
    if list(frame.columns[:2]) != ['variable', 'group']:
        raise HeaderError(f"{path}: header must be 'variable,group'")
    mapping: Dict[str, str] = {}
    known = set(MACRO_GROUPS) | {YIELD_GROUP}
    for variable, group in zip(frame['variable'], frame['group']):
        variable, group = variable.strip(), group.strip()
        if group not in known:
            raise GroupMappingError(f"{path}: unknown group {group!r} for variable {variable}")
        mapping[variable] = group
    return mapping


def load_macro(path: str, groups: Dict[str, str]) -> FeaturePanel:
    """Loads a macro CSV (date + variables) and attaches the group map."""
    frame = _read_csv(path)
    dates = _parse_dates(frame, path)
    columns = list(frame.columns[1:])
    for column in columns:
        if column not in groups:
            raise GroupMappingError(f"Macro variable {column} is missing from the groups file")
    data = pd.DataFrame(_parse_numbers(frame, columns, path), index=dates, columns=columns).sort_index()
    logger.info(f"Loaded {len(columns)} macro variables over {len(data)} dates from {path}")
    return FeaturePanel(data, {c: groups[c] for c in columns})


def align(panel: QuotePanel, macro: Optional[FeaturePanel]) -> tuple:
    """Inner-joins a quote panel and a feature panel on dates."""
    if macro is None:
        return panel, None
    common = panel.dates.intersection(macro.dates)
    if common.empty:
        raise DuplicateDateError("Yields and macro files share no dates")
    return panel.subset(common), FeaturePanel(macro.data.loc[common], macro.groups)


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _maturity_label(maturity: float) -> str:
    if float(maturity) != int(maturity):
        raise HeaderError(f"Maturity {maturity} is not a whole number of years")
    return f"y{int(maturity)}"


def write_frame(frame: pd.DataFrame, path: str) -> str:
    """Writes a date-indexed frame as CSV with ISO dates."""
    _ensure_parent(path)
    out = frame.copy()
    if isinstance(out.index, pd.DatetimeIndex):
        out.index = out.index.strftime(DATE_FORMAT)
    out.index.name = out.index.name or 'date'
    out.to_csv(path, lineterminator='\n')
    return path


def write_yields(panel: QuotePanel, path: str) -> str:
    frame = panel.yields.copy()
    frame.columns = [_maturity_label(u) for u in frame.columns]
    frame.index.name = 'date'
    return write_frame(frame, path)


def write_macro(macro: FeaturePanel, path: str) -> str:
    frame = macro.data.copy()
    frame.index.name = 'date'
    return write_frame(frame, path)


def write_groups(groups: Dict[str, str], path: str) -> str:
    _ensure_parent(path)
    pd.DataFrame({'variable': list(groups), 'group': list(groups.values())}).to_csv(
        path, index=False, lineterminator='\n')
    return path


def write_ufr_series(series: UfrSeries, path: str) -> str:
    """Writes date, f_inf, ufr and, for ZJW, alpha."""
    return write_frame(series.to_frame(), path)


def load_ufr_series(path: str, method: str) -> UfrSeries:
    """Reads a file written by write_ufr_series; empty cells are missing values."""
    frame = _read_csv(path)
    dates = _parse_dates(frame, path)
    if 'f_inf' not in frame.columns:
        raise HeaderError(f"{path}: missing f_inf column")
    f_inf = pd.to_numeric(frame['f_inf'].replace('', np.nan), errors='raise').to_numpy(dtype=float)
    alpha = None
    if 'alpha' in frame.columns:
        alpha = pd.to_numeric(frame['alpha'].replace('', np.nan), errors='raise').to_numpy(dtype=float)
    return UfrSeries(dates, f_inf, method.upper(), alpha)


def format_number(value: Any) -> Any:
    """Rounds floats to 10 significant digits, recursing through containers."""
    if isinstance(value, dict):
        return {str(k): format_number(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [format_number(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if not math.isfinite(value) else float(f"{value:.10g}")
    return value


def write_json_report(report: Dict[str, Any], path: str) -> str:
    """Writes a JSON report with sorted keys and 10 significant digits."""
    _ensure_parent(path)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(format_number(report), handle, sort_keys=True, indent=2)
        handle.write('\n')
    return path
