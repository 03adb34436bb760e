"""Serial-dependence test for a binary indicator sequence.

The alternative is a stationary two-state Markov chain with
``P[a_k = 1] = beta`` and 0->1 transition probability ``theta``; the chain is
i.i.d. exactly when ``theta == beta``. Convention throughout: ``a_k = 1`` is
the event of probability ``beta`` (the realized value stayed at or below the
predicted quantile), so exceedance flags enter as ``1 - exceeded``.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from . import rng as _rng
from .errors import BoundaryError, InsufficientDataError, ParameterError

DEFAULT_REPS = 100_000
CHUNK = 10_000
TABLE_GAMMAS = (0.01, 0.05, 0.10, 0.50)
TABLE_LENGTHS = (250, 500, 1000)


@dataclass(frozen=True)
class PairCounts:
    """Counts of adjacent pairs 00 (n1), 11 (n2), 01 (n3) and 10 (n4)."""

    n1: int
    n2: int
    n3: int
    n4: int

    @property
    def n(self):
        return self.n1 + self.n2 + self.n3 + self.n4

    @property
    def nbar1(self):
        return self.n1 / self.n

    @property
    def nbar2(self):
        return self.n2 / self.n


@dataclass(frozen=True)
class DependenceResult:
    beta: float
    theta_hat: float
    interval: Tuple[float, float]
    gamma: float
    reject: bool
    one_sided: bool
    counts: Optional[PairCounts] = None
    swapped: bool = False

    def to_dict(self):
        d = {
            "beta": self.beta,
            "theta_hat": self.theta_hat,
            "interval": list(self.interval),
            "gamma": self.gamma,
            "reject": self.reject,
            "one_sided": self.one_sided,
            "swapped": self.swapped,
        }
        if self.counts is not None:
            c = self.counts
            d["counts"] = {"n1": c.n1, "n2": c.n2, "n3": c.n3, "n4": c.n4, "n": c.n}
        return d


def _binary(a):
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError("binary sequence must be one-dimensional")
    if a.dtype != bool:
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("binary sequence may only contain 0 and 1")
        a = a.astype(bool)
    return a


def pair_counts(a: Sequence[int]) -> PairCounts:
    a = _binary(a)
    if a.size < 2:
        raise InsufficientDataError("pair counts need a sequence of length >= 2")
    prev, nxt = a[:-1], a[1:]
    n2 = int(np.count_nonzero(prev & nxt))
    n3 = int(np.count_nonzero(~prev & nxt))
    n4 = int(np.count_nonzero(prev & ~nxt))
    n1 = a.size - 1 - n2 - n3 - n4
    return PairCounts(n1, n2, n3, n4)


def _f(beta):
    b = np.asarray(beta, dtype=float)
    if not np.all((0.5 <= b) & (b < 1.0)):
        raise ParameterError(f"beta must lie in [0.5, 1), got {beta}")
    return (1.0 - beta) / beta


def theta_prime(theta: float, beta: float) -> float:
    """1->1 transition probability that keeps the stationary law at ``beta``."""
    f = _f(beta)
    if not 0.0 <= theta <= 1.0:
        raise ParameterError(f"theta must lie in [0, 1], got {theta}")
    tp = 1.0 - f * theta
    if not 0.0 <= tp <= 1.0:
        raise ParameterError(f"theta' = {tp} outside [0, 1]")
    return tp


def log_likelihood(theta: float, counts: PairCounts, beta: float) -> float:
    """theta-dependent part of the log likelihood ratio against the i.i.d. model.

    ``n1 log(1-theta) + n2 log(1-theta f) + (n-n1-n2) log(theta)``; at
    ``theta`` in {0, 1} a zero count times ``log 0`` contributes nothing and a
    positive one gives ``-inf``.
    """
    f = _f(beta)
    if not 0.0 <= theta <= 1.0:
        raise ParameterError(f"theta must lie in [0, 1], got {theta}")
    rest = counts.n - counts.n1 - counts.n2
    total = 0.0
    for count, arg in ((counts.n1, 1.0 - theta), (counts.n2, 1.0 - theta * f), (rest, theta)):
        if count == 0:
            continue
        if arg <= 0.0:
            return -math.inf
        total += count * math.log(arg)
    return total


def discriminant(nbar1, nbar2, beta):
    """Scaled discriminant ``(f - c1)^2 + 4 f (c1 - c2)`` of the score quadratic."""
    f = _f(beta)
    nbar1 = np.asarray(nbar1, dtype=float)
    nbar2 = np.asarray(nbar2, dtype=float)
    c1 = 1.0 - f * nbar1 - nbar2
    c2 = 1.0 - nbar1 - nbar2
    return (f - c1) ** 2 + 4.0 * f * (c1 - c2)


def theta_hat(nbar1, nbar2, beta):
    """Closed-form maximum likelihood estimate of theta.

    The smaller root of ``f t^2 - (1 - nbar2 + f (1 - nbar1)) t + (1 - nbar1 - nbar2)``.
    Evaluated as ``2 c2 / (b + sqrt(D))``, which equals the textbook
    ``(b - sqrt(D)) / (2 f)`` but does not cancel catastrophically when ``f``
    is small. Accepts scalars or arrays.
    """
    f = _f(beta)
    n1 = np.asarray(nbar1, dtype=float)
    n2 = np.asarray(nbar2, dtype=float)
    if np.any(n1 < 0) or np.any(n2 < 0) or np.any(n1 + n2 > 1.0 + 1e-12):
        raise ParameterError("need nbar1, nbar2 >= 0 and nbar1 + nbar2 <= 1")
    c1 = 1.0 - f * n1 - n2
    c2 = np.maximum(1.0 - n1 - n2, 0.0)
    b = c1 + f
    d = np.maximum((f - c1) ** 2 + 4.0 * f * (c1 - c2), 0.0)
    est = np.clip(2.0 * c2 / (b + np.sqrt(d)), 0.0, 1.0)
    return float(est) if est.ndim == 0 else est


def theta_hat_counts(counts: PairCounts, beta: float) -> float:
    return theta_hat(counts.nbar1, counts.nbar2, beta)


def stationary_distribution(theta: float, beta: float) -> np.ndarray:
    """Limit frequencies of the pairs 00, 11, 01, 10."""
    if not 0.0 < theta < 1.0:
        raise BoundaryError(f"chain is not irreducible at theta = {theta}")
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    return np.array(
        [
            (1 - theta) * (1 - beta),
            beta - (1 - beta) * theta,
            theta * (1 - beta),
            theta * (1 - beta),
        ]
    )


def _null_chunk(beta, length, seed, chunk, size):
    g = _rng.stream(seed, _rng.level_key(beta), length, chunk)
    a = g.random((size, length)) < beta
    prev, nxt = a[:, :-1], a[:, 1:]
    n = length - 1
    n1 = np.count_nonzero(~prev & ~nxt, axis=1) / n
    n2 = np.count_nonzero(prev & nxt, axis=1) / n
    return theta_hat(n1, n2, beta)


@lru_cache(maxsize=64)
def _null_sample(beta, length, reps, seed, workers):
    sizes = [min(CHUNK, reps - s) for s in range(0, reps, CHUNK)]
    jobs = [(beta, length, seed, i, sz) for i, sz in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda j: _null_chunk(*j), jobs))
    else:
        parts = [_null_chunk(*j) for j in jobs]
    out = np.sort(np.concatenate(parts))
    out.flags.writeable = False
    return out


def null_theta_hat_sample(beta, length, reps=DEFAULT_REPS, seed=0, workers=1):
    """Sorted estimates from ``reps`` i.i.d. Bernoulli(beta) sequences.

    Replication chunks of 10,000 each get their own stream keyed by
    ``(seed, beta, length, chunk index)``, so the result does not depend on
    ``workers``.
    """
    _f(beta)
    if length < 2:
        raise InsufficientDataError("sequence length must be >= 2")
    if reps < 1:
        raise ParameterError("reps must be positive")
    return _null_sample(float(beta), int(length), int(reps), int(seed), int(workers))


def _lower_quantile(sorted_sample, p):
    n = sorted_sample.size
    k = math.ceil(p * n - 1e-9 * n)
    return float(sorted_sample[min(max(k, 1), n) - 1])


def ci_endpoints(
    beta: float,
    length: int,
    gamma: float,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    workers: int = 1,
    min_reps: int = 10_000,
) -> Tuple[float, float]:
    """Simulated ``(t1, t2)`` so that each of ``[0, t1)`` and ``(t2, 1]`` has
    null probability at most ``gamma / 2``."""
    if not 0.0 < gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0, 1), got {gamma}")
    if reps < min_reps:
        raise ParameterError(f"reps must be >= {min_reps}, got {reps}")
    sample = null_theta_hat_sample(beta, length, reps, seed, workers)
    return _lower_quantile(sample, gamma / 2.0), _lower_quantile(sample, 1.0 - gamma / 2.0)


def ci_table(
    beta: float,
    lengths=TABLE_LENGTHS,
    gammas=TABLE_GAMMAS,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    workers: int = 1,
):
    """Rows ``{gamma: {length: (t1, t2)}}``, one per significance level."""
    return {
        g: {L: ci_endpoints(beta, L, g, reps, seed, workers) for L in lengths} for g in gammas
    }


def indicators_from_flags(exceeded):
    """Map exceedance flags onto the ``a_k`` convention used here."""
    return 1 - np.asarray(exceeded, dtype=int)


def independence_test(
    a: Sequence[int],
    beta: float,
    gamma: float = 0.05,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    interval: Optional[Tuple[float, float]] = None,
    workers: int = 1,
) -> DependenceResult:
    """Test ``a`` for serial independence against stationary Markov alternatives.

    For ``beta < 0.5`` zeros and ones are interchanged first. ``interval`` may
    be supplied (e.g. read from a precomputed table) to skip the simulation.
    """
    a = _binary(a)
    swapped = False
    if beta < 0.5:
        a, beta, swapped = ~a, 1.0 - beta, True
    counts = pair_counts(a)
    est = theta_hat_counts(counts, beta)
    if interval is None:
        interval = ci_endpoints(beta, a.size, gamma, reps, seed, workers)
    t1, t2 = float(interval[0]), float(interval[1])
    return DependenceResult(
        beta=beta,
        theta_hat=est,
        interval=(t1, t2),
        gamma=gamma,
        reject=not (t1 <= est <= t2),
        one_sided=t2 >= 1.0,
        counts=counts,
        swapped=swapped,
    )
