"""SINR and spectral efficiency in power-control coordinates.

The optimization variable is ``mu`` with shape ``(M, K)``, where
``mu[m, k] = sqrt(eta[m, k] * nu[m, k])``. Row ``m`` is the power vector of
AP ``m``; column ``k`` is everything transmitted towards user ``k``.

The coherent-interference vectors factor as
``nu_bar[i, k][m] = gram[i, k] * sqrt(nu[m, i]) / beta[m, i] * beta[m, k]``,
so all inner products ``nu_bar[i, k] . mu[:, i]`` come out of a single
``(K, M) @ (M, K)`` product and the ``(K, K, M)`` tensor is never formed on
the hot path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

__all__ = [
    "InvalidScenarioError",
    "Coefficients",
    "build_coefficients",
    "inner_products",
    "sinr_parts",
    "sinr",
    "spectral_efficiency",
    "total_se",
]


class InvalidScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Coefficients:
    beta: np.ndarray          # (M, K); row m is the diagonal of D_bar_k squared, per user
    coherent: np.ndarray      # (M, K); sqrt(nu[m, i]) / beta[m, i]
    pilot_gram: np.ndarray    # (K, K)
    zeta_d: float
    N: int
    prelog: float

    def __post_init__(self):
        K = self.beta.shape[1]
        object.__setattr__(self, "noise", 1.0 / self.N**2)
        object.__setattr__(self, "_off_diagonal", 1.0 - np.eye(K))

    @property
    def M(self) -> int:
        return self.beta.shape[0]

    @property
    def K(self) -> int:
        return self.beta.shape[1]

    @property
    def sqrt_nu(self) -> np.ndarray:
        return self.coherent * self.beta

    @property
    def nu_bar(self) -> np.ndarray:
        """Dense ``(K, K, M)`` array with ``nu_bar[i, k]`` the M-vector for pair (i, k).

        Meant for inspection and small problems only.
        """
        return (self.pilot_gram[:, :, None]
                * self.coherent.T[:, None, :]
                * self.beta.T[None, :, :])

    @property
    def d_bar_sq(self) -> np.ndarray:
        """``(K, M)``; row k holds ``beta[:, k]``."""
        return self.beta.T


def build_coefficients(s: Scenario) -> Coefficients:
    beta = np.asarray(s.beta, dtype=float)
    nu = np.asarray(s.nu, dtype=float)
    if not np.all(beta > 0) or not np.all(np.isfinite(beta)):
        raise InvalidScenarioError("all large-scale gains must be positive and finite")
    if np.any(nu < 0):
        raise InvalidScenarioError("nu must be nonnegative")
    return Coefficients(
        beta=beta,
        coherent=np.sqrt(nu) / beta,
        pilot_gram=np.asarray(s.pilot_gram, dtype=float),
        zeta_d=float(s.zeta_d),
        N=int(s.N),
        prelog=float(s.prelog),
    )


def inner_products(c: Coefficients, mu) -> np.ndarray:
    """``S[i, k] = nu_bar[i, k] . mu[:, i]`` as a ``(K, K)`` array."""
    return c.pilot_gram * ((c.coherent * mu).T @ c.beta)


def sinr_parts(c: Coefficients, mu):
    """Return ``(S, b, q)``: inner products, signal terms and interference terms.

    ``b[k] = zeta_d S[k, k]^2`` and
    ``q[k] = zeta_d (sum_{i != k} S[i, k]^2 + (1/N) sum_m beta[m, k] ||mu[m]||^2)``,
    both before adding the ``1/N^2`` noise floor.
    """
    mu = np.asarray(mu, dtype=float)
    S = inner_products(c, mu)
    coherent = np.einsum("ik,ik->k", S, S * c._off_diagonal)
    row_power = np.einsum("mk,mk->m", mu, mu)
    q = c.zeta_d * (coherent + (row_power @ c.beta) / c.N)
    b = c.zeta_d * np.diagonal(S) ** 2
    return S, b, q


def sinr(c: Coefficients, mu) -> np.ndarray:
    _, b, q = sinr_parts(c, mu)
    return b / (q + c.noise)


def spectral_efficiency(c: Coefficients, mu) -> np.ndarray:
    """Per-user SE in nat/s/Hz."""
    _, b, q = sinr_parts(c, mu)
    return c.prelog * np.log1p(b / (q + c.noise))


def total_se(c: Coefficients, mu) -> float:
    return float(spectral_efficiency(c, mu).sum())
