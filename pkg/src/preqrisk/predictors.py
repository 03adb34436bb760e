"""One-step-ahead predictors and the traces they produce.

A predictor is driven online: ``predict()`` returns the forecast for the next
observation (or ``None`` while warming up) and ``update(y)`` reveals it. Step
``k`` is 1-based, so the prediction recorded at step ``k`` is made after
seeing ``Y_1 .. Y_{k-1}`` only.
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np

from . import rng as _rng
from .errors import (
    AlignmentError,
    ConfigurationError,
    InsufficientDataError,
    ParseError,
    ReproducibilityError,
    ValidationError,
)
from .series import ReturnSeries

MEAN = "mean"
DEFAULT_VARPHI = 1.2
DEFAULT_ALPHA = 0.97


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PredictionTrace:
    """Aligned predictions, realized values and strict exceedance flags."""

    k: np.ndarray
    prediction: np.ndarray
    realized: np.ndarray
    target: Union[float, str]
    exceeded: Optional[np.ndarray] = None

    def __post_init__(self):
        k = _frozen(self.k, np.int64)
        pred = _frozen(self.prediction, float)
        real = _frozen(self.realized, float)
        if not (k.shape == pred.shape == real.shape) or k.ndim != 1:
            raise ValidationError("trace columns must be 1-d and of equal length")
        if k.size > 1 and not np.all(np.diff(k) == 1):
            raise ValidationError("trace indices must be contiguous")
        flags = (real > pred).astype(np.int8)
        if self.exceeded is not None and not np.array_equal(np.asarray(self.exceeded), flags):
            raise ValidationError("exceeded flags disagree with realized > prediction")
        flags.flags.writeable = False
        target = self.target
        if target != MEAN:
            target = float(target)
            if not 0.0 <= target <= 1.0:
                raise ValidationError(f"quantile target must lie in [0, 1], got {target}")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "prediction", pred)
        object.__setattr__(self, "realized", real)
        object.__setattr__(self, "exceeded", flags)
        object.__setattr__(self, "target", target)

    def __len__(self):
        return int(self.k.size)

    @property
    def target_beta(self):
        return None if self.target == MEAN else self.target

    @classmethod
    def from_arrays(cls, prediction, realized, target, start=1):
        prediction = np.asarray(prediction, dtype=float)
        return cls(start + np.arange(prediction.size), prediction, realized, target)

    def to_csv(self, out=None):
        buf = out if out is not None else io.StringIO()
        buf.write("k,prediction,realized,exceeded\n")
        for k, p, r, e in zip(self.k, self.prediction, self.realized, self.exceeded):
            buf.write(f"{k},{float(p)!r},{float(r)!r},{e}\n")
        if out is None:
            return buf.getvalue()

    def to_dict(self):
        return {
            "target": self.target,
            "steps": [
                {"k": int(k), "prediction": float(p), "realized": float(r), "exceeded": int(e)}
                for k, p, r, e in zip(self.k, self.prediction, self.realized, self.exceeded)
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict())


def read_trace(source, target) -> PredictionTrace:
    """Parse ``k,prediction,realized,exceeded`` CSV (path or open text stream)."""
    if isinstance(source, str):
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    else:
        rows = list(csv.reader(source))
    if not rows or [h.strip() for h in rows[0]] != ["k", "prediction", "realized", "exceeded"]:
        raise ParseError("expected header 'k,prediction,realized,exceeded'", line=1)
    cols = [[], [], [], []]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            cols[0].append(int(row[0]))
            cols[1].append(float(row[1]))
            cols[2].append(float(row[2]))
            cols[3].append(int(row[3]))
        except (ValueError, IndexError):
            raise ParseError(f"malformed row {row!r}", line=lineno)
    return PredictionTrace(
        np.array(cols[0], dtype=np.int64), cols[1], cols[2], target, np.array(cols[3])
    )


class Predictor:
    """Base class. Subclasses implement ``predict`` and ``update``."""

    target: Union[float, str] = MEAN
    warmup = 0
    stochastic = False

    def reset(self):
        pass

    def predict(self) -> Optional[float]:
        raise NotImplementedError

    def update(self, y: float) -> None:
        raise NotImplementedError


class RollingQuantilePredictor(Predictor):
    """``rank``-th largest of the last ``window`` observations."""

    def __init__(self, window: int, rank_from_top: int, target: Optional[float] = None):
        if window < 1 or rank_from_top < 1:
            raise ConfigurationError("window and rank must be positive integers")
        if rank_from_top > window:
            raise ConfigurationError(f"rank {rank_from_top} exceeds window {window}")
        self.window = int(window)
        self.rank = int(rank_from_top)
        # nominal level implied by the order statistic unless given
        self.target = float(target) if target is not None else 1.0 - self.rank / self.window
        self.warmup = self.window
        self.reset()

    def reset(self):
        self._buf: List[float] = []

    def predict(self):
        if len(self._buf) < self.window:
            return None
        return float(np.partition(self._buf, self.window - self.rank)[self.window - self.rank])

    def update(self, y):
        self._buf.append(float(y))
        if len(self._buf) > self.window:
            del self._buf[0]


class RollingMeanPredictor(Predictor):
    def __init__(self, window: int):
        if window < 1:
            raise ConfigurationError("window must be a positive integer")
        self.window = int(window)
        self.warmup = self.window
        self.reset()

    def reset(self):
        self._buf: List[float] = []

    def predict(self):
        if len(self._buf) < self.window:
            return None
        return float(np.mean(self._buf))

    def update(self, y):
        self._buf.append(float(y))
        if len(self._buf) > self.window:
            del self._buf[0]


class ConstantPredictor(Predictor):
    def __init__(self, value: float, target: Union[float, str] = MEAN):
        self.value = float(value)
        self.target = target

    def predict(self):
        return self.value

    def update(self, y):
        pass


class OraclePredictor(Predictor):
    """Replays a precomputed forecast sequence, e.g. a model's true quantiles.

    ``values[k-1]`` is the forecast for step ``k``; it must be computable from
    information available before step ``k`` for the result to be a fair test.
    """

    def __init__(self, values, target: Union[float, str]):
        self.values = np.asarray(values, dtype=float)
        self.target = target
        self.reset()

    def reset(self):
        self._i = 0

    def predict(self):
        if self._i >= self.values.size:
            raise InsufficientDataError("oracle has no forecast for this step")
        return float(self.values[self._i])

    def update(self, y):
        self._i += 1


class AdaptivePredictor(Predictor):
    """Feedback correction of a base quantile predictor.

    The forecast is ``base + varphi * (ybar - (1 - target))`` where ``ybar`` is
    the running exceedance frequency of this predictor's own past forecasts
    (zero correction before the first of them is resolved).
    """

    def __init__(self, base: Predictor, varphi: float = DEFAULT_VARPHI, target: Optional[float] = None):
        if base.target == MEAN:
            raise ConfigurationError("adaptive correction needs a quantile base predictor")
        if varphi < 0:
            raise ConfigurationError("varphi must be non-negative")
        self.base = base
        self.varphi = float(varphi)
        self.target = float(target) if target is not None else base.target
        self.warmup = base.warmup
        self.stochastic = base.stochastic
        self.reset()

    @property
    def seed(self):
        return getattr(self.base, "seed", None)

    def reset(self):
        self.base.reset()
        self._hits = 0
        self._count = 0
        self._pending: Optional[float] = None

    @property
    def frequency(self):
        return self._hits / self._count if self._count else None

    def predict(self):
        q = self.base.predict()
        if q is None:
            self._pending = None
            return None
        correction = 0.0
        if self._count:
            correction = self.varphi * (self._hits / self._count - (1.0 - self.target))
        self._pending = q + correction
        return self._pending

    def update(self, y):
        if self._pending is not None:
            self._count += 1
            self._hits += int(y > self._pending)
            self._pending = None
        self.base.update(y)


class NonsensePredictor(Predictor):
    """Two-level randomized forecast: ``high`` w.p. ``beta``, else ``low``.

    Draw ``k`` comes from a fixed counter-based stream, so the forecast at a
    given step never depends on the data.
    """

    stochastic = True

    def __init__(self, low: float, high: float, beta: float, seed: Optional[int]):
        if not low < high:
            raise ConfigurationError(f"need low < high, got {low}, {high}")
        if not 0.0 <= beta <= 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1], got {beta}")
        self.low, self.high = float(low), float(high)
        self.target = float(beta)
        self.beta = float(beta)
        self.seed = seed
        self.reset()

    def reset(self):
        self._step = 0
        self._draws = np.empty(0)
        self._rng = None if self.seed is None else _rng.stream(self.seed, 0xB0)
        self._fallback = np.random.default_rng() if self.seed is None else None

    def _draw(self, i):
        if i >= self._draws.size:
            g = self._rng if self._rng is not None else self._fallback
            self._draws = np.concatenate([self._draws, g.random(max(1024, self._draws.size))])
        return self._draws[i]

    def predict(self):
        return self.high if self._draw(self._step) < self.beta else self.low

    def update(self, y):
        self._step += 1


def rolling_quantile_predictor(window: int, rank_from_top: int, target=None):
    return RollingQuantilePredictor(window, rank_from_top, target)


def adaptive_predictor(base: Predictor, varphi: float = DEFAULT_VARPHI, target=None):
    return AdaptivePredictor(base, varphi, target)


def nonsense_predictor(low: float, high: float, beta: float, seed: Optional[int]):
    return NonsensePredictor(low, high, beta, seed)


def default_rank(window: int, beta: float) -> int:
    """Order statistic from the top used for a ``beta`` forecast over ``window``
    points: the largest rank whose lower quantile is still at level ``beta``
    (2nd largest of 20 at 0.90, the largest at 0.95)."""
    return max(1, int(math.floor((1.0 - beta) * window + 1e-9)))


def _values(data):
    if isinstance(data, ReturnSeries):
        return data.values
    return np.asarray(data, dtype=float)


def run_predictor(p: Predictor, data) -> PredictionTrace:
    """Drive ``p`` over ``data``; warm-up steps are dropped from the trace."""
    y = _values(data)
    if y.size <= p.warmup:
        raise InsufficientDataError(f"{y.size} observations do not exceed warm-up of {p.warmup}")
    p.reset()
    ks, preds = [], []
    for i, v in enumerate(y):
        q = p.predict()
        if q is not None:
            ks.append(i + 1)
            preds.append(q)
        p.update(v)
    if not ks:
        raise InsufficientDataError("predictor produced no forecasts")
    ks = np.asarray(ks)
    return PredictionTrace(ks, preds, y[ks - 1], p.target)


def forecast(p: Predictor, history) -> Optional[float]:
    """Forecast for the step after ``history``."""
    p.reset()
    for v in _values(history):
        p.predict()
        p.update(v)
    return p.predict()


def direction(kind: str, n: int, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Built-in perturbation directions: ``ones`` or ``geometric`` (``alpha**(n-k)``)."""
    if kind == "ones":
        return np.ones(n)
    if kind == "geometric":
        return alpha ** (n - np.arange(1, n + 1, dtype=float))
    raise ValueError(f"unknown direction {kind!r}")


def sensitivity(p: Predictor, history, direction_vector, epsilon: Optional[float] = None) -> float:
    """Forward-difference directional derivative of the next forecast.

    ``epsilon`` defaults to 1e-6 times the inter-quartile range of ``history``
    (1e-6 if that range is zero).
    """
    if p.stochastic and getattr(p, "seed", None) is None:
        raise ReproducibilityError("a stochastic predictor needs a fixed seed for finite differences")
    h = _values(history)
    z = np.asarray(direction_vector, dtype=float)
    if z.shape != h.shape:
        raise AlignmentError("direction must have the same length as history")
    if epsilon is None:
        q75, q25 = np.percentile(h, [75, 25])
        epsilon = 1e-6 * (q75 - q25) if q75 > q25 else 1e-6
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = forecast(p, h)
    bumped = forecast(p, h + epsilon * z)
    if base is None or bumped is None:
        raise InsufficientDataError("history shorter than predictor warm-up")
    return (bumped - base) / epsilon


def parse_params(text: str):
    """``"a=1,b=x"`` -> ``{"a": "1", "b": "x"}``."""
    out = {}
    for part in filter(None, (s.strip() for s in text.split(","))):
        if "=" not in part:
            raise ConfigurationError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def make_predictor(spec: str, beta: Optional[float] = None, seed: Optional[int] = None) -> Predictor:
    """Build a predictor from ``name:key=value,...``.

    Names: ``rolling`` (window, rank), ``adaptive`` (window, rank, varphi),
    ``nonsense`` (low, high, seed), ``constant`` (value), ``rolling-mean``
    (window). ``rank`` defaults to the largest order statistic consistent with
    ``beta``.
    """
    name, _, rest = spec.partition(":")
    params = parse_params(rest)
    try:
        if name in ("rolling", "adaptive"):
            if beta is None and "rank" not in params:
                raise ConfigurationError(f"{name} predictor needs beta or rank")
            window = int(params.pop("window", 20))
            rank = int(params.pop("rank", default_rank(window, beta) if beta is not None else 1))
            base = RollingQuantilePredictor(window, rank, beta)
            if name == "rolling":
                p = base
            else:
                p = AdaptivePredictor(base, float(params.pop("varphi", DEFAULT_VARPHI)), beta)
        elif name == "nonsense":
            s = params.pop("seed", seed)
            if s is None:
                raise ConfigurationError("nonsense predictor needs a seed")
            p = NonsensePredictor(
                float(params.pop("low", -0.06)),
                float(params.pop("high", 0.06)),
                float(params.pop("beta", beta if beta is not None else 0.9)),
                int(s),
            )
        elif name == "constant":
            p = ConstantPredictor(float(params.pop("value")), beta if beta is not None else MEAN)
        elif name == "rolling-mean":
            p = RollingMeanPredictor(int(params.pop("window", 20)))
        else:
            raise ConfigurationError(f"unknown predictor {name!r}")
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"bad predictor spec {spec!r}: {exc}")
    if params:
        raise ConfigurationError(f"unknown parameters for {name}: {sorted(params)}")
    return p
