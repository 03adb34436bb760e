"""VaR, CVaR, CMVaR and expectiles, empirical and power-tail extrapolated.

Losses are taken to be large positive values, so every measure here looks at
the right tail of whatever sample it is given. Negate returns first to read
the loss side of a return series.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InfiniteMeanError, InsufficientDataError, ParameterError
from .series import _order_index, empirical_quantile

QUAD_STEP = 1e-4
KAPPA_FLOOR = 1.0 + 1e-6


@dataclass(frozen=True)
class RiskEstimate:
    kind: str
    beta: float
    value: float
    assumptions: dict = field(default_factory=dict)

    def to_dict(self):
        return {"kind": self.kind, "beta": self.beta, "value": self.value, "assumptions": dict(self.assumptions)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _sorted(sample):
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise InsufficientDataError("empty sample")
    return x


def var_of(sample, beta: float) -> RiskEstimate:
    return RiskEstimate("var", float(beta), empirical_quantile(sample, beta))


def cvar_of(sample, beta: float) -> RiskEstimate:
    """Mean of the beta-tail distribution of the empirical law.

    The atom at ``q = VaR_beta`` is split: it keeps mass ``F(q) - beta`` and
    everything strictly above ``q`` keeps its own mass, all divided by
    ``1 - beta``.
    """
    if not 0.0 <= beta < 1.0:
        raise ParameterError(f"beta must lie in [0, 1), got {beta}")
    x = _sorted(sample)
    n = x.size
    q = float(x[_order_index(n, beta) - 1]) if beta > 0 else float(x[0])
    at_or_below = np.searchsorted(x, q, side="right")
    above = x[at_or_below:]
    value = (q * (at_or_below / n - beta) + above.sum() / n) / (1.0 - beta)
    return RiskEstimate("cvar", float(beta), float(value))


def cmvar(sample, beta: float) -> RiskEstimate:
    """Conditional median shortfall, i.e. VaR at level ``(1 + beta) / 2``."""
    eta = (1.0 + beta) / 2.0
    return RiskEstimate("cmvar", float(beta), empirical_quantile(sample, eta), {"eta": eta})


def psi(x, sample, beta: float):
    """Empirical ``x + E[(Y - x)^+] / (1 - beta)``; vectorized over ``x``."""
    if not 0.0 <= beta < 1.0:
        raise ParameterError(f"beta must lie in [0, 1), got {beta}")
    y = np.asarray(sample, dtype=float).ravel()
    xs = np.asarray(x, dtype=float)
    excess = np.maximum(y[None, :] - xs.reshape(-1, 1), 0.0).mean(axis=1)
    out = xs.reshape(-1) + excess / (1.0 - beta)
    return float(out[0]) if xs.ndim == 0 else out.reshape(xs.shape)


def expectile(sample, tau: float, tol: float = 1e-10) -> float:
    """Root of ``tau E[(Y-x)^+] = (1-tau) E[(x-Y)^+]`` by bisection on [min, max]."""
    if not 0.0 < tau < 1.0:
        raise ParameterError(f"tau must lie in (0, 1), got {tau}")
    y = _sorted(sample)
    lo, hi = float(y[0]), float(y[-1])
    if lo == hi:
        return lo

    def ident(x):
        return tau * np.maximum(y - x, 0.0).mean() - (1.0 - tau) * np.maximum(x - y, 0.0).mean()

    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if ident(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def expectile_estimate(sample, tau: float) -> RiskEstimate:
    return RiskEstimate("expectile", float(tau), expectile(sample, tau))


def _integrate(curve: Callable, a: float, b: float, step: float = QUAD_STEP) -> float:
    """Composite trapezoid of ``curve`` over [a, b] with spacing at most ``step``."""
    m = max(1, int(math.ceil((b - a) / step - 1e-9)))
    tau = np.linspace(a, b, m + 1)
    try:
        q = np.asarray(curve(tau), dtype=float)
        if q.shape != tau.shape:
            raise TypeError
    except (TypeError, ValueError):
        q = np.array([float(curve(t)) for t in tau])
    if np.any(np.diff(q) < -1e-12 * np.maximum(1.0, np.abs(q[1:]))):
        raise ParameterError("quantile curve must be nondecreasing")
    h = (b - a) / m
    return float(h * (q.sum() - 0.5 * (q[0] + q[-1])))


def cvar_power_tail(
    quantile_curve: Callable,
    q_eta: float,
    kappa: float,
    beta: float,
    eta: float,
) -> RiskEstimate:
    """CVaR when the law has an exact power tail of index ``kappa`` beyond ``q_eta``.

    ``(integral_beta^eta q_tau dtau + kappa / (kappa - 1) (1 - eta) q_eta) / (1 - beta)``.
    """
    if not 0.0 < beta <= eta < 1.0:
        raise ParameterError(f"need 0 < beta <= eta < 1, got beta={beta}, eta={eta}")
    if kappa <= KAPPA_FLOOR:
        raise InfiniteMeanError(f"tail index {kappa} <= 1: the tail has no finite mean")
    body = _integrate(quantile_curve, beta, eta) if eta > beta else 0.0
    if math.isinf(kappa):
        tail = (1.0 - eta) * q_eta
    else:
        tail = kappa / (kappa - 1.0) * (1.0 - eta) * q_eta
    return RiskEstimate(
        "cvar_power_tail",
        float(beta),
        (body + tail) / (1.0 - beta),
        {"kappa": float(kappa), "eta": float(eta), "q_eta": float(q_eta)},
    )


def cvar_truncated(quantile_curve: Callable, beta: float, eta: float) -> RiskEstimate:
    """Average quantile over [beta, eta]: ``integral_beta^eta q_tau dtau / (eta - beta)``."""
    if not eta > beta:
        raise ParameterError(f"need eta > beta, got beta={beta}, eta={eta}")
    if not (0.0 <= beta and eta <= 1.0):
        raise ParameterError("levels must lie in [0, 1]")
    value = _integrate(quantile_curve, beta, eta) / (eta - beta)
    return RiskEstimate("cvar_truncated", float(beta), value, {"eta": float(eta)})


def empirical_quantile_curve(sample) -> Callable:
    """Vectorized ``tau -> q_tau^-`` of a sample's empirical distribution."""
    x = _sorted(sample)
    n = x.size

    def curve(tau):
        t = np.asarray(tau, dtype=float)
        k = np.ceil(t * n - 1e-9 * n).astype(np.int64)
        return x[np.clip(k, 1, n) - 1]

    return curve


def implied_kappa(q_beta: float, q_eta: float, beta: float, eta: float) -> float:
    """Tail index implied by two quantiles assuming an exact power tail above ``q_beta``.

    ``log((1 - beta) / (1 - eta)) / log(q_eta / q_beta)``. Noisy in practice; no
    accuracy guarantee.
    """
    if not (0 < q_beta < q_eta) or not (0 < beta < eta < 1):
        raise ParameterError("need 0 < q_beta < q_eta and 0 < beta < eta < 1")
    return math.log((1 - beta) / (1 - eta)) / math.log(q_eta / q_beta)
