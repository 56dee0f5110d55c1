"""Spearman rank correlation, log returns and correlation tables over dated series."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import stats as sps

from .exceptions import InsufficientDataError, SchemaError, UndefinedCorrelationError


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


def _pairs(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise SchemaError(f"series must be 1-d and aligned, got shapes {x.shape} and {y.shape}")
    keep = ~(np.isnan(x) | np.isnan(y))
    return x[keep], y[keep]


def spearman(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Spearman's rho and its two-sided p-value.

    Pairs with a missing value on either side are dropped.  Ties get average
    ranks; rho is the Pearson correlation of the ranks and the p-value uses
    the t approximation with ``n - 2`` degrees of freedom.
    """
    x, y = _pairs(x, y)
    n = len(x)
    if n < 3:
        raise InsufficientDataError(f"need at least 3 complete pairs, got {n}")
    rx = sps.rankdata(x) - (n + 1) / 2
    ry = sps.rankdata(y) - (n + 1) / 2
    sxx, syy = float(rx @ rx), float(ry @ ry)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("a series has zero rank variance")
    rho = float(rx @ ry) / math.sqrt(sxx * syy)
    rho = max(-1.0, min(1.0, rho))
    if abs(rho) == 1.0:
        return rho, 0.0
    t = rho * math.sqrt((n - 2) / (1 - rho * rho))
    p = float(2 * sps.t.sf(abs(t), n - 2))
    return rho, p


def log_returns(series):
    """``ln(v_t / v_{t-1})``; one value shorter than the input.

    Keeps the index (minus the first label) when given a pandas Series.
    Missing values propagate as NaN.
    """
    if isinstance(series, pd.Series):
        values = series.to_numpy(dtype=float)
    else:
        values = np.asarray(series, dtype=float)
    finite = values[~np.isnan(values)]
    if np.any(finite <= 0):
        raise SchemaError("log returns need strictly positive values")
    out = np.log(values[1:] / values[:-1])
    if isinstance(series, pd.Series):
        return pd.Series(out, index=series.index[1:], name=series.name)
    return out


@dataclass(frozen=True)
class CorrelationCell:
    x: str
    y: str
    n: int
    rho: float | None
    p_value: float | None
    note: str = ""

    @property
    def stars(self) -> str:
        return "" if self.p_value is None else significance_stars(self.p_value)

    @property
    def defined(self) -> bool:
        return self.rho is not None

    def label(self) -> str:
        return "undefined" if self.rho is None else f"{self.rho:.2f}{self.stars}"


@dataclass(frozen=True)
class CorrelationTable:
    columns: tuple[str, ...]
    cells: tuple[CorrelationCell, ...]
    log_returns: bool = False

    def cell(self, x: str, y: str) -> CorrelationCell:
        for c in self.cells:
            if (c.x, c.y) in ((x, y), (y, x)):
                return c
        raise KeyError((x, y))

    def to_frame(self) -> pd.DataFrame:
        """Lower-triangular matrix of ``rho`` plus stars, as in the usual table layout."""
        frame = pd.DataFrame("", index=list(self.columns), columns=list(self.columns))
        for c in self.cells:
            frame.loc[c.x, c.y] = c.label()
        return frame

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "n", "rho", "p_value", "stars", "note"])
        for c in self.cells:
            writer.writerow([c.x, c.y, c.n, "" if c.rho is None else repr(c.rho),
                             "" if c.p_value is None else repr(c.p_value), c.stars, c.note])
        return buf.getvalue()


def correlate_table(table: pd.DataFrame, pairs: Iterable[tuple[str, str]] | None = None,
                    use_log_returns: bool = False) -> CorrelationTable:
    """Pairwise Spearman over columns of ``table``.

    Without ``pairs`` every column is paired with itself and each earlier
    column.  Cells that cannot be computed carry a note instead of a number.
    """
    columns = list(table.columns)
    if pairs is None:
        pairs = [(columns[i], columns[j]) for i in range(len(columns)) for j in range(i + 1)]
    pairs = [tuple(p) for p in pairs]
    wanted = []
    for a, b in pairs:
        for name in (a, b):
            if name not in table.columns:
                raise SchemaError(f"no column named {name!r}", "table")
            if name not in wanted:
                wanted.append(name)
    data = table[wanted].apply(pd.to_numeric, errors="coerce")
    if use_log_returns:
        data = pd.DataFrame({c: log_returns(data[c]) for c in wanted})
    cells = []
    for a, b in pairs:
        x, y = data[a].to_numpy(dtype=float), data[b].to_numpy(dtype=float)
        n = int(np.sum(~(np.isnan(x) | np.isnan(y))))
        try:
            rho, p = spearman(x, y)
            cells.append(CorrelationCell(a, b, n, rho, p))
        except (InsufficientDataError, UndefinedCorrelationError) as exc:
            cells.append(CorrelationCell(a, b, n, None, None, str(exc)))
    return CorrelationTable(tuple(wanted), tuple(cells), use_log_returns)


def load_series(path_or_buffer) -> pd.DataFrame:
    """Read a series table: a ``date`` column plus numeric columns; blanks are missing."""
    frame = pd.read_csv(path_or_buffer)
    if "date" not in frame.columns:
        raise SchemaError("series table needs a 'date' column", "table")
    frame["date"] = pd.to_datetime(frame["date"], errors="raise")
    if frame["date"].duplicated().any():
        raise SchemaError("duplicate dates", "table.date")
    return frame.sort_values("date").set_index("date")
