"""Per-AP power budget set: ``mu >= 0`` and ``||mu[m]||^2 <= 1/N`` for each AP row."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["project", "is_feasible"]


def project(x, N: int) -> np.ndarray:
    """Euclidean projection of an ``(M, K)`` array onto the feasible set.

    Each row is clipped to the nonnegative orthant and then pulled back onto
    the ball of radius ``1/sqrt(N)`` if it lies outside. The two-step
    composition is exact for this particular intersection.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project non-finite entries")
    pos = np.maximum(x, 0.0)
    radius = math.sqrt(1.0 / N)
    r2 = radius * radius
    sq = np.einsum("...k,...k->...", pos, pos)
    outside = sq > r2
    scale = np.where(outside, radius / np.sqrt(np.where(outside, sq, 1.0)), 1.0)
    out = pos * scale[..., None]
    # rounding can leave a rescaled row an ulp outside the ball; shrink it
    # until it is inside, so projecting again is an exact no-op
    over = outside & (np.einsum("...k,...k->...", out, out) > r2)
    while np.any(over):
        scale = np.where(over, np.nextafter(scale, 0.0), scale)
        out = pos * scale[..., None]
        over = outside & (np.einsum("...k,...k->...", out, out) > r2)
    return out


def is_feasible(mu, N: int, tol: float = 1e-9) -> bool:
    mu = np.asarray(mu, dtype=float)
    if not np.all(np.isfinite(mu)) or np.any(mu < -tol):
        return False
    return bool(np.all(np.einsum("...k,...k->...", mu, mu) <= 1.0 / N + tol))
