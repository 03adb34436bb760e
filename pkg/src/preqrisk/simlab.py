"""Synthetic data with known ground truth.

All generators draw from :func:`preqrisk.rng.stream`, so a seed reproduces a
sample bit for bit.
"""

import json
from dataclasses import dataclass
from functools import partial

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr, ndtri

from . import rng as _rng
from .dependence import theta_prime
from .errors import ParameterError, UnsupportedModelError
from .predictors import MEAN, PredictionTrace
from .series import ReturnSeries

MARKOV_STREAM = 1
SV_STREAM = 2
PARETO_STREAM = 3


@dataclass(frozen=True)
class MarkovSpec:
    beta: float
    theta: float
    length: int
    seed: int

    def __post_init__(self):
        theta_prime(self.theta, self.beta)  # validates beta, theta and theta'
        if self.length < 1:
            raise ParameterError("length must be positive")


def sample_markov(spec: MarkovSpec) -> np.ndarray:
    """Stationary two-state chain as a 0/1 ``int8`` array.

    ``x_0 ~ Bernoulli(beta)``; 0 -> 1 with probability ``theta`` and 1 -> 1
    with probability ``theta'``. Built run by run: runs of zeros are
    Geometric(theta) long and runs of ones Geometric(1 - theta').
    """
    g = _rng.stream(spec.seed, MARKOV_STREAM)
    state = int(g.random() < spec.beta)
    out = np.empty(spec.length, dtype=np.int8)
    leave0 = spec.theta
    leave1 = 1.0 - theta_prime(spec.theta, spec.beta)
    if (leave0, leave1)[state] == 0.0:
        out[:] = state
        return out

    def runs_of(p, size):
        # a state that is never left fills the rest of the sequence
        return np.full(size, spec.length) if p == 0.0 else g.geometric(p, size)

    pair_rate = 1.0 / (1.0 / leave0 + 1.0 / leave1) if leave0 and leave1 else 0.0
    order = np.array([state, 1 - state], dtype=np.int8)
    pos = 0
    while pos < spec.length:
        block = int((spec.length - pos) * pair_rate * 1.1) + 64
        runs = np.empty(2 * block, dtype=np.int64)
        first, second = (leave0, leave1) if state == 0 else (leave1, leave0)
        runs[0::2] = runs_of(first, block)
        runs[1::2] = runs_of(second, block)
        # an even number of runs, so the next block starts in `state` again
        filled = np.repeat(np.tile(order, block), np.minimum(runs, spec.length))
        take = min(filled.size, spec.length - pos)
        out[pos:pos + take] = filled[:take]
        pos += take
    return out


@dataclass(frozen=True)
class SVSpec:
    """Log-volatility AR(1): ``h_k = rho h_{k-1} + vol_of_vol eta_k``,
    ``sigma_k = scale exp(h_k)``, ``Y_k = sigma_k eps_k``."""

    length: int
    seed: int
    rho: float = 0.95
    vol_of_vol: float = 0.2
    scale: float = 0.02

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ParameterError(f"rho must lie in [0, 1), got {self.rho}")
        if self.vol_of_vol < 0 or self.scale <= 0:
            raise ParameterError("vol_of_vol must be >= 0 and scale > 0")
        if self.length < 1:
            raise ParameterError("length must be positive")


@dataclass(frozen=True)
class SVSample:
    returns: ReturnSeries
    sigma: np.ndarray

    @property
    def values(self):
        return self.returns.values

    @property
    def cond_mean(self):
        return np.zeros_like(self.sigma)

    @property
    def cond_var(self):
        return self.sigma ** 2

    def quantile(self, beta: float) -> np.ndarray:
        """True conditional beta-quantile at every step."""
        return self.sigma * float(ndtri(beta))

    def cdf_values(self, y=None) -> np.ndarray:
        y = self.values if y is None else np.asarray(y, dtype=float)
        return ndtr(y / self.sigma)

    def cdfs(self):
        return [partial(_normal_cdf, s) for s in self.sigma]

    def quantile_trace(self, beta: float) -> PredictionTrace:
        return PredictionTrace.from_arrays(self.quantile(beta), self.values, beta)

    def mean_trace(self) -> PredictionTrace:
        return PredictionTrace.from_arrays(self.cond_mean, self.values, MEAN)

    def oracle_dict(self, betas=(0.9, 0.95)):
        out = {"schema_version": 1, "model": "sv", "sigma": self.sigma.tolist(), "mean": self.cond_mean.tolist()}
        out["quantiles"] = {str(b): self.quantile(b).tolist() for b in betas}
        return out


def _normal_cdf(sigma, y):
    return float(ndtr(y / sigma))


def sv_paths(spec: SVSpec):
    """Raw ``(sigma, Y)`` arrays for ``spec``."""
    g = _rng.stream(spec.seed, SV_STREAM)
    eta = _rng.standard_normals(g, spec.length + 1)
    eps = _rng.standard_normals(g, spec.length)
    if spec.vol_of_vol == 0.0:
        h = np.zeros(spec.length)
    else:
        h0 = eta[0] * spec.vol_of_vol / np.sqrt(1.0 - spec.rho ** 2)
        h, _ = lfilter([1.0], [1.0, -spec.rho], spec.vol_of_vol * eta[1:], zi=[spec.rho * h0])
    sigma = spec.scale * np.exp(h)
    return sigma, sigma * eps


def sample_sv(spec: SVSpec) -> SVSample:
    sigma, y = sv_paths(spec)
    sigma.flags.writeable = False
    return SVSample(ReturnSeries.synthetic(y), sigma)


def sample_pareto(kappa: float, scale: float, n: int, seed: int) -> np.ndarray:
    """Exact Pareto: ``P[X > x] = (x / scale)^-kappa`` for ``x >= scale``."""
    if kappa <= 0 or scale <= 0:
        raise ParameterError("kappa and scale must be positive")
    u = _rng.uniforms(_rng.stream(seed, PARETO_STREAM, _rng.level_key(kappa)), n)
    return scale * u ** (-1.0 / kappa)


def pareto_quantile(tau, kappa: float, scale: float = 1.0):
    return scale * (1.0 - np.asarray(tau, dtype=float)) ** (-1.0 / kappa)


def pareto_cvar(beta: float, kappa: float, scale: float = 1.0) -> float:
    return kappa / (kappa - 1.0) * float(pareto_quantile(beta, kappa, scale))


@dataclass(frozen=True)
class IIDModel:
    """i.i.d. N(mu, sigma^2) observations with their conditional moments."""

    values: np.ndarray
    mu: float = 0.0
    sigma: float = 1.0

    @property
    def cond_mean(self):
        return np.full(self.values.size, self.mu)

    @property
    def cond_var(self):
        return np.full(self.values.size, self.sigma ** 2)


def sample_iid_normal(n: int, seed: int, mu: float = 0.0, sigma: float = 1.0) -> IIDModel:
    x = mu + sigma * _rng.standard_normals(_rng.stream(seed, SV_STREAM, 7), n)
    return IIDModel(x, mu, sigma)


def angle_bracket_trace(model, trace: PredictionTrace) -> np.ndarray:
    """Predictable quadratic variation ``sum E[X_k^2 | past]`` of ``Y_k - mu_k``.

    ``model`` must expose per-step ``cond_mean`` and ``cond_var`` arrays aligned
    with the data the trace was run on (trace step ``k`` uses entry ``k - 1``).
    """
    if not (hasattr(model, "cond_mean") and hasattr(model, "cond_var")):
        raise UnsupportedModelError("model provides no conditional second moments")
    idx = trace.k - 1
    m = np.asarray(model.cond_mean, dtype=float)[idx]
    v = np.asarray(model.cond_var, dtype=float)[idx]
    return np.cumsum(v + (m - trace.prediction) ** 2)


def oracle_json(sample: SVSample, betas=(0.9, 0.95)) -> str:
    return json.dumps(sample.oracle_dict(betas))
