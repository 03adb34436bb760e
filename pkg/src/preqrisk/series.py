"""Price ingestion, simple returns, empirical quantiles and power-tail fitting."""

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import InsufficientDataError, ParseError, ValidationError

DEFAULT_KAPPA_GRID = (1.05, 10.0, 0.01)
DEFAULT_TAIL_FRACTION = 0.05
MIN_TAIL_POINTS = 20


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


def _as_dates(dates):
    return np.asarray(dates, dtype="datetime64[D]")


@dataclass(frozen=True)
class PriceSeries:
    """Dated positive price levels, strictly increasing in date."""

    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        dates = _frozen(_as_dates(self.dates))
        prices = _frozen(self.prices, dtype=float)
        if dates.shape != prices.shape or dates.ndim != 1:
            raise ValidationError("dates and prices must be 1-d arrays of equal length")
        bad = np.flatnonzero(~(prices > 0))
        if bad.size:
            raise ValidationError(f"price at row {bad[0] + 1} is not positive: {prices[bad[0]]}")
        if dates.size > 1 and not np.all(dates[1:] > dates[:-1]):
            raise ValidationError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    def __len__(self):
        return int(self.prices.size)


@dataclass(frozen=True)
class ReturnSeries:
    """Dated simple returns; each return exceeds -1."""

    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = _frozen(_as_dates(self.dates))
        values = _frozen(self.values, dtype=float)
        if dates.shape != values.shape or values.ndim != 1:
            raise ValidationError("dates and values must be 1-d arrays of equal length")
        if not np.all(np.isfinite(values)):
            raise ValidationError("returns must be finite")
        if np.any(values <= -1.0):
            raise ValidationError("returns must exceed -1")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return int(self.values.size)

    @classmethod
    def synthetic(cls, values, start="2000-01-07"):
        """Attach weekly dates to a bare array of returns."""
        values = np.asarray(values, dtype=float)
        dates = np.datetime64(start, "D") + 7 * np.arange(values.size)
        return cls(dates, values)

    def to_dict(self):
        return {
            "observations": [
                {"date": str(d), "return": float(v)} for d, v in zip(self.dates, self.values)
            ]
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    def to_csv(self, out=None):
        buf = out if out is not None else io.StringIO()
        buf.write("date,return\n")
        for d, v in zip(self.dates, self.values):
            buf.write(f"{d},{float(v)!r}\n")
        if out is None:
            return buf.getvalue()


@dataclass(frozen=True)
class TailFit:
    side: str
    kappa: float
    c1: float
    c2: float
    sample_fraction: float

    @property
    def ratio(self):
        return self.c2 / self.c1

    def to_dict(self):
        return {
            "side": self.side,
            "kappa": self.kappa,
            "c1": self.c1,
            "c2": self.c2,
            "sample_fraction": self.sample_fraction,
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def _read_rows(source, delimiter):
    if isinstance(source, (str, Path)):
        with open(source, newline="") as fh:
            return list(csv.reader(fh, delimiter=delimiter))
    return list(csv.reader(source, delimiter=delimiter))


def load_prices(
    path: Union[str, Path, io.TextIOBase],
    date_column: str = "date",
    price_column: str = "price",
    delimiter: str = ",",
) -> PriceSeries:
    """Read a ``date,price`` CSV file with a header row.

    Rows are sorted by date. Blank lines are skipped. Line numbers in errors
    are 1-based physical lines of the file (the header is line 1).
    """
    rows = _read_rows(path, delimiter)
    if not rows:
        raise ParseError("empty file", line=1)
    header = [h.strip() for h in rows[0]]
    try:
        di = header.index(date_column)
        pi = header.index(price_column)
    except ValueError:
        raise ParseError(f"header must contain {date_column!r} and {price_column!r}", line=1)

    dates, prices, lines = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(di, pi):
            raise ParseError(f"expected at least {max(di, pi) + 1} columns, got {len(row)}", line=lineno)
        try:
            d = np.datetime64(row[di].strip(), "D")
        except ValueError:
            raise ParseError(f"unparseable date {row[di]!r}", line=lineno)
        try:
            p = float(row[pi])
        except ValueError:
            raise ParseError(f"unparseable price {row[pi]!r}", line=lineno)
        if not math.isfinite(p) or p <= 0:
            raise ValidationError(f"line {lineno}: price must be positive, got {row[pi].strip()}")
        dates.append(d)
        prices.append(p)
        lines.append(lineno)

    dates = np.array(dates, dtype="datetime64[D]")
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    dup = np.flatnonzero(dates[1:] == dates[:-1])
    if dup.size:
        a, b = sorted((lines[order[dup[0]]], lines[order[dup[0] + 1]]))
        raise ValidationError(f"duplicate date {dates[dup[0]]} on lines {a} and {b}")
    return PriceSeries(dates, np.asarray(prices)[order])


def returns(prices: PriceSeries) -> ReturnSeries:
    """Simple returns ``(S_k - S_{k-1}) / S_{k-1}`` dated at the later observation."""
    if len(prices) < 2:
        raise InsufficientDataError("at least two prices are needed to form a return")
    s = prices.prices
    return ReturnSeries(prices.dates[1:], (s[1:] - s[:-1]) / s[:-1])


def read_returns(source, delimiter: str = ",") -> ReturnSeries:
    """Read a ``date,return`` CSV such as :meth:`ReturnSeries.to_csv` writes."""
    rows = _read_rows(source, delimiter)
    if not rows or [h.strip() for h in rows[0][:2]] != ["date", "return"]:
        raise ParseError("expected header 'date,return'", line=1)
    dates, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            dates.append(np.datetime64(row[0].strip(), "D"))
            values.append(float(row[1]))
        except (ValueError, IndexError):
            raise ParseError(f"malformed row {row!r}", line=lineno)
    return ReturnSeries(np.array(dates, dtype="datetime64[D]"), np.array(values))


def _order_index(n, beta):
    # 1-based index ceil(beta * n); the epsilon absorbs products like 0.9 * 20
    # that land a hair above an integer in floating point.
    k = math.ceil(beta * n - 1e-9 * max(1.0, n))
    return min(max(k, 1), n)


def empirical_quantile(sample: Sequence[float], beta: float) -> float:
    """Lower quantile ``inf{y : F(y) >= beta}`` of the empirical distribution."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise InsufficientDataError("empirical quantile of an empty sample")
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    return float(x[_order_index(x.size, beta) - 1])


def _kappa_grid(spec):
    if spec is None:
        spec = DEFAULT_KAPPA_GRID
    if isinstance(spec, tuple) and len(spec) == 3:
        lo, hi, step = spec
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return lo + step * np.arange(n)
    grid = np.asarray(spec, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0):
        raise ValueError("kappa grid must be a non-empty list of positive values")
    return grid


def tail_fit(
    sample: Sequence[float],
    side: str = "left",
    fraction: float = DEFAULT_TAIL_FRACTION,
    kappa_grid=None,
) -> TailFit:
    """Fit a power tail ``c1 |x|^-k <= P(tail beyond x) <= c2 |x|^-k``.

    For every kappa on the grid the tightest envelope over the tail sample is
    taken, and the kappa with the smallest ``c2 / c1`` wins (first one on ties).
    The tail probability is ``#{X <= x} / n`` on the left and ``#{X >= x} / n``
    on the right. ``kappa_grid`` is either ``(start, stop, step)`` or an
    explicit sequence; the default is 1.05..10.00 in steps of 0.01.
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must lie in (0, 1), got {fraction}")
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    m = int(math.floor(fraction * n + 1e-9))
    if m < MIN_TAIL_POINTS:
        raise InsufficientDataError(
            f"tail fraction {fraction} of {n} points leaves {m} < {MIN_TAIL_POINTS} points"
        )
    if side == "left":
        tail = x[:m]
        prob = np.searchsorted(x, tail, side="right") / n
        if np.any(tail >= 0):
            raise ValidationError("left-tail points must be negative")
    else:
        tail = x[n - m:]
        prob = (n - np.searchsorted(x, tail, side="left")) / n
        if np.any(tail <= 0):
            raise ValidationError("right-tail points must be positive")

    grid = _kappa_grid(kappa_grid)
    log_p = np.log(prob)
    log_x = np.log(np.abs(tail))
    # log of F(x) |x|^kappa for every (kappa, point)
    log_c = log_p[None, :] + grid[:, None] * log_x[None, :]
    lo = log_c.min(axis=1)
    hi = log_c.max(axis=1)
    best = int(np.argmin(hi - lo))
    return TailFit(
        side=side,
        kappa=float(grid[best]),
        c1=float(np.exp(lo[best])),
        c2=float(np.exp(hi[best])),
        sample_fraction=float(fraction),
    )


def tail_envelope(sample, fit: TailFit):
    """Return ``(|x|, tail probability)`` arrays for the points ``fit`` covers."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    m = int(math.floor(fit.sample_fraction * n + 1e-9))
    if fit.side == "left":
        tail = x[:m]
        prob = np.searchsorted(x, tail, side="right") / n
    else:
        tail = x[n - m:]
        prob = (n - np.searchsorted(x, tail, side="left")) / n
    return np.abs(tail), prob
