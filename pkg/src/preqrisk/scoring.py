"""Consistent scoring functions and moving-window score comparison."""

import io
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import AlignmentError, InsufficientDataError, ParameterError
from .predictors import PredictionTrace

DEFAULT_WINDOW = 500


def identity(x):
    return x


def scaled_identity(beta):
    """``g(x) = x / (1 - beta)``, the choice that links the quantile score to CVaR."""
    return lambda x: np.asarray(x, dtype=float) / (1.0 - beta)


def _check_level(name, v):
    if not 0.0 < v < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {v}")


def quantile_score(x, y, beta: float, g: Callable = identity):
    """``(1{x >= y} - beta) (g(x) - g(y))`` for strictly increasing ``g``."""
    _check_level("beta", beta)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = ((x >= y).astype(float) - beta) * (np.asarray(g(x)) - np.asarray(g(y)))
    return float(s) if s.ndim == 0 else s


def ru_score(x, y, beta: float):
    """Rockafellar-Uryasev score ``x + (y - x) 1{y > x} / (1 - beta)``.

    Its expectation over ``Y ~ F`` is ``x + E[(Y - x)^+] / (1 - beta)``, which is
    minimized at the beta-quantile with minimum value CVaR.
    """
    _check_level("beta", beta)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = x + np.where(y > x, y - x, 0.0) / (1.0 - beta)
    return float(s) if s.ndim == 0 else s


def expectile_score(x, y, tau: float):
    _check_level("tau", tau)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.where(x < y, tau, 1.0 - tau)
    s = w * (y - x) ** 2
    return float(s) if s.ndim == 0 else s


def mean_score(x, y):
    s = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) ** 2
    return float(s) if s.ndim == 0 else s


@dataclass(frozen=True)
class ScoreSeries:
    k: np.ndarray
    scores: np.ndarray
    window: int
    window_averages: np.ndarray


def window_averages(scores, window: int) -> np.ndarray:
    """Mean of ``scores[j : j + window]`` for every admissible start ``j``."""
    s = np.asarray(scores, dtype=float)
    if not 1 <= window <= s.size:
        raise InsufficientDataError(f"window {window} does not fit {s.size} scores")
    c = np.concatenate([[0.0], np.cumsum(s)])
    return (c[window:] - c[:-window]) / window


def score_series(trace: PredictionTrace, beta: float, window: int = DEFAULT_WINDOW, score=None):
    score = score or (lambda x, y: ru_score(x, y, beta))
    s = np.asarray(score(trace.prediction, trace.realized), dtype=float)
    return ScoreSeries(trace.k, s, window, window_averages(s, window))


@dataclass(frozen=True)
class Comparison:
    a: ScoreSeries
    b: ScoreSeries
    preference: np.ndarray  # "A", "B" or "tie" per window

    @property
    def fraction_a(self):
        return float(np.mean(self.preference == "A"))

    def to_csv(self, out=None):
        buf = out if out is not None else io.StringIO()
        buf.write("j,xA,xB,preferred\n")
        for j, (xa, xb, p) in enumerate(
            zip(self.a.window_averages, self.b.window_averages, self.preference), start=1
        ):
            buf.write(f"{j},{float(xa)!r},{float(xb)!r},{p}\n")
        if out is None:
            return buf.getvalue()


def align(a: PredictionTrace, b: PredictionTrace):
    """Restrict two traces to their common steps; realized values must agree."""
    lo = max(a.k[0], b.k[0]) if len(a) and len(b) else 0
    hi = min(a.k[-1], b.k[-1]) if len(a) and len(b) else -1
    if hi < lo:
        raise AlignmentError("traces share no steps")
    sa = slice(lo - a.k[0], hi - a.k[0] + 1)
    sb = slice(lo - b.k[0], hi - b.k[0] + 1)
    if not np.array_equal(a.realized[sa], b.realized[sb]):
        raise AlignmentError("traces disagree on realized values at common steps")
    cut = lambda t, s: PredictionTrace(t.k[s], t.prediction[s], t.realized[s], t.target)
    return cut(a, sa), cut(b, sb)


def compare(
    trace_a: PredictionTrace,
    trace_b: PredictionTrace,
    beta: float,
    window: int = DEFAULT_WINDOW,
    score: Optional[Callable] = None,
) -> Comparison:
    """Moving-window average scores of two forecasters on the same data.

    The default score is :func:`ru_score`; ``A`` is preferred in window ``j``
    when its average is strictly lower.
    """
    a, b = align(trace_a, trace_b)
    sa = score_series(a, beta, window, score)
    sb = score_series(b, beta, window, score)
    pref = np.where(
        sa.window_averages < sb.window_averages,
        "A",
        np.where(sb.window_averages < sa.window_averages, "B", "tie"),
    )
    return Comparison(sa, sb, pref)
