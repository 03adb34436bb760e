"""Prequential calibration statistics for quantile and mean forecasts."""

import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import kstest

from .errors import ConfigurationError, InsufficientDataError, ModelError, ValidationError
from .predictors import MEAN, PredictionTrace

RELATIVE_FREQUENCY = "relative_frequency"
LIL = "lil"
MARTINGALE_RATIO = "martingale_ratio"
WINDOWED_FREQUENCY = "windowed_frequency"


@dataclass(frozen=True)
class CalibrationTrace:
    """A calibration statistic indexed by the number of forecasts ``n``.

    Relative frequencies are stored raw (in [0, 1]); ``centered`` is always
    False for the built-in statistics and exists so callers can record the
    other convention.
    """

    kind: str
    n: np.ndarray
    values: np.ndarray
    beta: Optional[float] = None
    centered: bool = False
    degenerate: bool = False

    def __post_init__(self):
        n = np.array(self.n, dtype=np.int64)
        v = np.array(self.values, dtype=float)
        if n.shape != v.shape:
            raise ValidationError("n and values must have equal length")
        if n.size > 1 and not np.all(np.diff(n) > 0):
            raise ValidationError("indices must be increasing")
        n.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return int(self.n.size)

    @property
    def terminal(self):
        return float(self.values[-1])

    def to_csv(self, out=None):
        buf = out if out is not None else io.StringIO()
        buf.write("n,statistic\n")
        for n, v in zip(self.n, self.values):
            buf.write(f"{n},{float(v)!r}\n")
        if out is None:
            return buf.getvalue()


def _quantile_trace(trace: PredictionTrace):
    if trace.target == MEAN:
        raise ConfigurationError("statistic needs a quantile-level trace")
    if len(trace) == 0:
        raise InsufficientDataError("empty trace")


def running_frequency(trace: PredictionTrace) -> CalibrationTrace:
    """Raw exceedance frequency ``(1/n) * sum_{k<=n} exceeded_k``."""
    _quantile_trace(trace)
    n = np.arange(1, len(trace) + 1)
    y = np.cumsum(trace.exceeded, dtype=np.int64) / n
    return CalibrationTrace(RELATIVE_FREQUENCY, n, y, trace.target)


def windowed_frequency(trace: PredictionTrace, window: int = 500) -> CalibrationTrace:
    """Exceedance frequency over the last ``window`` forecasts, indexed by the
    last forecast in each window."""
    _quantile_trace(trace)
    if not 1 <= window <= len(trace):
        raise InsufficientDataError(f"window {window} does not fit a trace of length {len(trace)}")
    c = np.concatenate([[0], np.cumsum(trace.exceeded, dtype=np.int64)])
    z = (c[window:] - c[:-window]) / window
    return CalibrationTrace(WINDOWED_FREQUENCY, np.arange(window, len(trace) + 1), z, trace.target)


def lil_statistic(trace: PredictionTrace, beta: Optional[float] = None) -> CalibrationTrace:
    """Iterated-logarithm normalized sum of ``1{not exceeded} - beta``.

    ``zeta(n) = sum Z_k / (sigma sqrt(2 n log log n))`` with
    ``sigma = sqrt(beta (1 - beta))``, emitted for ``n >= 3``.
    """
    _quantile_trace(trace)
    beta = trace.target if beta is None else float(beta)
    if not 0.0 < beta < 1.0:
        raise ConfigurationError(f"beta must lie in (0, 1), got {beta}")
    z = (1 - trace.exceeded.astype(float)) - beta
    s = np.cumsum(z)
    n = np.arange(1, len(trace) + 1, dtype=float)
    keep = n >= 3
    if not keep.any():
        raise InsufficientDataError("the iterated-logarithm statistic needs n >= 3")
    nn = n[keep]
    sigma = math.sqrt(beta * (1.0 - beta))
    zeta = s[keep] / (sigma * np.sqrt(2.0 * nn * np.log(np.log(nn))))
    return CalibrationTrace(LIL, nn.astype(np.int64), zeta, beta)


def realized_quadratic_variation(increments) -> np.ndarray:
    """Running ``Q_n = sum X_k^2`` of martingale increments."""
    x = np.asarray(increments, dtype=float)
    return np.cumsum(x * x)


def mean_calibration(
    trace: PredictionTrace,
    norming: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> CalibrationTrace:
    """Martingale ratio ``S_n / b_n`` for mean forecasts.

    ``S_n`` sums the centered increments ``X_k = Y_k - mu_k``. The default
    norming ``b_n`` is the realized quadratic variation of those increments;
    ``norming`` may supply any other sequence as a function of the increment
    array. Where ``b_n == 0`` the ratio is reported as 0 and the trace is
    flagged degenerate.
    """
    if trace.target != MEAN:
        raise ConfigurationError("mean calibration needs a mean-target trace")
    if len(trace) == 0:
        raise InsufficientDataError("empty trace")
    x = trace.realized - trace.prediction
    s = np.cumsum(x)
    b = realized_quadratic_variation(x) if norming is None else np.asarray(norming(x), dtype=float)
    if b.shape != s.shape:
        raise ValidationError("norming sequence must match the trace length")
    zero = b == 0
    ratio = np.divide(s, b, out=np.zeros_like(s), where=~zero)
    n = np.arange(1, len(trace) + 1)
    return CalibrationTrace(MARTINGALE_RATIO, n, ratio, None, degenerate=bool(zero.any()))


def summarize(cal: CalibrationTrace, from_n: Optional[int] = None):
    """Terminal value plus min/max of the statistic over ``n >= from_n``.

    For relative frequencies the Bernoulli standard deviation
    ``sqrt(p (1 - p) / from_n)`` at ``p = 1 - beta`` is attached, as in the
    usual calibration table layout.
    """
    if len(cal) == 0:
        raise InsufficientDataError("empty calibration trace")
    start = int(cal.n[0]) if from_n is None else int(from_n)
    sel = cal.values[cal.n >= start]
    if sel.size == 0:
        raise InsufficientDataError(f"no values at n >= {start}")
    out = {
        "kind": cal.kind,
        "from_n": start,
        "terminal": cal.terminal,
        "n": int(cal.n[-1]),
        "min": float(sel.min()),
        "max": float(sel.max()),
        "degenerate": cal.degenerate,
    }
    if cal.beta is not None:
        out["beta"] = cal.beta
        if cal.kind in (RELATIVE_FREQUENCY, WINDOWED_FREQUENCY):
            p = 1.0 - cal.beta
            out["bernoulli_sd"] = math.sqrt(p * (1 - p) / start)
    return out


def pit_transform(model_cdfs: Sequence[Callable[[float], float]], realized) -> np.ndarray:
    """``U_k = F_k(Y_k)`` for a sequence of conditional CDFs."""
    y = getattr(realized, "values", realized)
    y = np.asarray(y, dtype=float)
    if len(model_cdfs) != y.size:
        raise ValidationError(f"{len(model_cdfs)} CDFs for {y.size} observations")
    u = np.array([float(F(v)) for F, v in zip(model_cdfs, y)])
    bad = np.flatnonzero(~((u >= 0.0) & (u <= 1.0)))
    if bad.size:
        raise ModelError(f"CDF {bad[0]} returned {u[bad[0]]}, outside [0, 1]")
    return u


def ks_uniform_pvalue(u) -> float:
    """Kolmogorov-Smirnov p-value of ``u`` against U[0, 1]."""
    return float(kstest(np.asarray(u, dtype=float), "uniform").pvalue)
