"""Per-n summaries and log-log slope fits of sweep records."""

from dataclasses import dataclass

import numpy as np

__all__ = ["QUANTILE_METHOD", "ColumnSummary", "SlopeFit", "summarize", "fit_slope", "record_value"]

#: Quantiles use linear interpolation between order statistics
#: (``numpy.quantile(..., method="linear")``).
QUANTILE_METHOD = "linear"


@dataclass(frozen=True)
class ColumnSummary:
    median: float
    q05: float
    q95: float
    mean: float


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float


def record_value(rec, column):
    """Read ``column`` from a record given as a dataclass or a mapping."""
    if isinstance(rec, dict):
        return rec[column]
    return getattr(rec, column)


def _numeric_columns(rec):
    if isinstance(rec, dict):
        items = rec.items()
    else:
        items = ((k, getattr(rec, k)) for k in rec.__dataclass_fields__)
    return [k for k, v in items
            if k != "n" and isinstance(v, (int, float, np.floating, np.integer))
            and not isinstance(v, bool)]


def summarize(records, columns=None):
    """Median, 5% and 95% quantiles (and mean) of each column, per ``n``.

    Parameters
    ----------
    records : sequence of records
        Dataclass instances or mappings with an ``n`` entry.
    columns : sequence of str, optional
        Columns to summarize; default is every numeric field except ``n``.

    Returns
    -------
    dict
        ``{n: {column: ColumnSummary}}`` with ``n`` in increasing order.

    Raises
    ------
    ValueError
        If ``records`` is empty.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot summarize an empty set of records")
    if columns is None:
        columns = _numeric_columns(records[0])
    groups = {}
    for rec in records:
        groups.setdefault(int(record_value(rec, "n")), []).append(rec)
    out = {}
    for n in sorted(groups):
        out[n] = {}
        for col in columns:
            vals = np.array([float(record_value(rec, col)) for rec in groups[n]])
            q05, med, q95 = np.quantile(vals, [0.05, 0.5, 0.95], method=QUANTILE_METHOD)
            out[n][col] = ColumnSummary(float(med), float(q05), float(q95), float(np.mean(vals)))
    return out


def fit_slope(summary, column, statistic="median"):
    """Least-squares fit of ``log(statistic)`` against ``log(n)``.

    Parameters
    ----------
    summary : dict
        Output of :func:`summarize`.
    column : str
    statistic : {"median", "mean"}

    Returns
    -------
    SlopeFit

    Raises
    ------
    ValueError
        With fewer than three distinct ``n`` or a nonpositive statistic.
    """
    ns = np.array(sorted(summary), dtype=np.float64)
    if ns.size < 3:
        raise ValueError("a slope fit needs at least three distinct n")
    ys = np.array([getattr(summary[int(n)][column], statistic) for n in ns])
    if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise ValueError(f"{statistic} of {column!r} must be positive to fit a log-log slope")
    x = np.log(ns)
    y = np.log(ys)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    pred = design @ np.array([slope, intercept])
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), float(r2))
