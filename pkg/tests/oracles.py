"""Reference implementations kept deliberately naive and independent of the package."""

import math

import numpy as np


def dykstra_projection(x, N, tol=1e-15, max_iter=200_000):
    """Project each row of ``x`` onto {mu >= 0} intersect {||mu|| <= 1/sqrt(N)} by Dykstra's method.

    Only the two single-set projections are used, never their composition,
    so this does not assume the closed form it is meant to check.
    """
    x = np.asarray(x, dtype=float)
    r = 1.0 / np.sqrt(N)
    out = np.empty_like(x)
    for m, row in enumerate(x):
        y = row.copy()
        p = np.zeros_like(y)
        q = np.zeros_like(y)
        for _ in range(max_iter):
            a = np.maximum(y + p, 0.0)          # orthant
            p = y + p - a
            w = a + q
            nrm = np.linalg.norm(w)
            b = w if nrm <= r else w * (r / nrm)  # ball
            q = a + q - b
            if np.max(np.abs(b - y)) < tol and np.max(np.abs(a - b)) < tol:
                y = b
                break
            y = b
        out[m] = y
    return out


def eta_space_se(s, eta):
    """Per-user SE written directly in the original power coefficients ``eta``.

    Loops follow the textbook SINR for conjugate beamforming with
    ``N`` antennas per AP; nothing is shared with the package code.
    """
    M, K, N, zd = s.M, s.K, s.N, s.zeta_d
    eb = np.sqrt(eta)
    se = np.empty(K)
    for k in range(K):
        num = (sum(eb[m, k] * s.nu[m, k] for m in range(M))) ** 2
        coh = 0.0
        for i in range(K):
            if i == k:
                continue
            v = sum(s.pilot_gram[i, k] * s.nu[m, i] * s.beta[m, k] / s.beta[m, i] * eb[m, i]
                    for m in range(M))
            coh += v * v
        unc = sum(s.nu[m, i] * s.beta[m, k] * eta[m, i] for m in range(M) for i in range(K))
        gamma = zd * N**2 * num / (zd * N**2 * coh + zd * N * unc + 1.0)
        se[k] = s.prelog * math.log1p(gamma)
    return se
