"""The four system utilities and their gradients in ``mu``.

Every utility is a function of the per-user SE vector only, so gradients
are assembled as ``sum_k dF/dSE_k * dSE_k/dmu``. :func:`se_partials` builds
the full Jacobian densely and serves as the readable reference;
:func:`value_and_gradient` contracts the weights first and costs
``O(K^2 M)`` with ``O(KM)`` memory.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import Coefficients, sinr_parts, spectral_efficiency

__all__ = [
    "Kind",
    "UtilityKind",
    "UnboundedGradientError",
    "default_tau",
    "smoothed_min",
    "softmin_weights",
    "utility_from_se",
    "se_partials",
    "evaluate",
    "gradient",
    "value_and_gradient",
    "Evaluation",
    "as_utility",
]


class Kind(str, enum.Enum):
    SEMAX = "SEmax"
    PFMAX = "PFmax"
    HRMAX = "HRmax"
    MRMAX = "MRmax"

    @classmethod
    def parse(cls, name) -> "Kind":
        if isinstance(name, cls):
            return name
        for k in cls:
            if k.value.lower() == str(name).strip().lower():
                return k
        raise ValueError(f"unknown utility kind {name!r}; expected one of "
                         + ", ".join(k.value for k in cls))


class UnboundedGradientError(ValueError):
    """A log/harmonic utility was differentiated at a zero-rate user with epsilon=0."""


def default_tau(K: int, gap: float = 0.01) -> float:
    """Smoothness giving a log-sum-exp gap ``log(K)/tau`` of at most ``gap`` nats."""
    return math.log(max(K, 2)) / gap


@dataclass(frozen=True)
class UtilityKind:
    """Which utility to maximize, plus its smoothing/regularization constants.

    ``tau=None`` means :func:`default_tau` for the problem's number of users.
    """

    kind: Kind = Kind.SEMAX
    tau: float | None = None
    epsilon: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")

    def tau_for(self, K: int) -> float:
        return default_tau(K) if self.tau is None else float(self.tau)

    @property
    def name(self) -> str:
        return self.kind.value


def as_utility(kind) -> UtilityKind:
    return kind if isinstance(kind, UtilityKind) else UtilityKind(Kind.parse(kind))


def smoothed_min(se, tau: float) -> float:
    """``-(1/tau) log(mean(exp(-tau se)))`` evaluated with a min shift.

    Written so that ``min(se) <= result <= min(se) + log(K)/tau`` holds in
    floating point, not just in exact arithmetic.
    """
    se = np.asarray(se, dtype=float)
    low = se.min()
    total = np.exp(-tau * (se - low)).sum()
    return float(low - (math.log(total) - math.log(se.size)) / tau)


def softmin_weights(se, tau: float) -> np.ndarray:
    se = np.asarray(se, dtype=float)
    w = np.exp(-tau * (se - se.min()))
    return w / w.sum()


def utility_from_se(kind, se, K: int | None = None):
    """Return ``(f, dF/dSE)`` for a per-user SE vector."""
    u = as_utility(kind)
    se = np.asarray(se, dtype=float)
    K = se.size if K is None else K
    if u.kind is Kind.SEMAX:
        return float(se.mean()), np.full(se.shape, 1.0 / K)
    if u.kind is Kind.MRMAX:
        tau = u.tau_for(K)
        return smoothed_min(se, tau), softmin_weights(se, tau)

    shifted = u.epsilon + se
    if np.any(shifted <= 0):
        if u.kind is Kind.PFMAX:
            raise UnboundedGradientError("PFmax with epsilon=0 at a zero-rate user")
        raise UnboundedGradientError("HRmax with epsilon=0 at a zero-rate user")
    inv = 1.0 / shifted
    if u.kind is Kind.PFMAX:
        return float(np.log(shifted).sum()), inv
    s = inv.sum()
    return float(K / s), K * inv**2 / s**2


def evaluate(kind, c: Coefficients, mu) -> float:
    u = as_utility(kind)
    se = spectral_efficiency(c, mu)
    if u.epsilon == 0 and u.kind in (Kind.PFMAX, Kind.HRMAX) and np.any(se <= 0):
        # limits exist even though the gradient does not
        return -math.inf if u.kind is Kind.PFMAX else 0.0
    return utility_from_se(u, se, c.K)[0]


def se_partials(c: Coefficients, mu) -> np.ndarray:
    """Full Jacobian ``J[k, i] = dSE_k / dmu[:, i]``, shape ``(K, K, M)``.

    Dense reference path; memory is ``K^2 M`` doubles.
    """
    mu = np.asarray(mu, dtype=float)
    K = c.K
    zd, nb, beta = c.zeta_d, c.nu_bar, c.beta
    S, b, q = sinr_parts(c, mu)
    total = 1.0 / (b + q + c.noise)
    interf = 1.0 / (q + c.noise)
    J = np.empty((K, K, c.M))
    for k in range(K):
        for i in range(K):
            dq = (2.0 * zd / c.N) * beta[:, k] * mu[:, i]
            if i == k:
                db = 2.0 * zd * nb[k, k] * S[k, k]
            else:
                db = 0.0
                dq = dq + 2.0 * zd * nb[i, k] * S[i, k]
            J[k, i] = c.prelog * ((db + dq) * total[k] - dq * interf[k])
    return J


def _contract(c: Coefficients, mu, S, b, q, g) -> np.ndarray:
    """``sum_k g[k] dSE_k/dmu`` without forming the Jacobian."""
    total = 1.0 / (b + q + c.noise)
    interf = 1.0 / (q + c.noise)
    own = c.prelog * g * total               # weight on d(signal)
    cross = c.prelog * g * (total - interf)  # weight on d(interference), <= 0
    # one gram factor sits in S, the other in nu_bar itself
    GS = c.pilot_gram * S
    W = GS * cross[None, :]
    W.reshape(-1)[:: c.K + 1] = np.diagonal(GS) * own
    two_zd = 2.0 * c.zeta_d
    grad = two_zd * c.coherent * (c.beta @ W.T)
    grad += (two_zd / c.N) * mu * (c.beta @ cross)[:, None]
    return grad


class Evaluation:
    """Objective value at one point, holding what the gradient needs later."""

    __slots__ = ("mu", "value", "_parts", "_weights", "_grad")

    def __init__(self, kind, c: Coefficients, mu):
        self.mu = np.asarray(mu, dtype=float)
        S, b, q = sinr_parts(c, self.mu)
        se = c.prelog * np.log1p(b / (q + c.noise))
        self.value, self._weights = utility_from_se(kind, se, c.K)
        self._parts = (S, b, q)
        self._grad = None

    def gradient(self, c: Coefficients) -> np.ndarray:
        if self._grad is None:
            self._grad = _contract(c, self.mu, *self._parts, self._weights)
        return self._grad


def value_and_gradient(kind, c: Coefficients, mu):
    """Return ``(f(mu), grad f(mu))`` with the gradient shaped like ``mu``."""
    ev = Evaluation(as_utility(kind), c, mu)
    return ev.value, ev.gradient(c)


def gradient(kind, c: Coefficients, mu) -> np.ndarray:
    return value_and_gradient(kind, c, mu)[1]
