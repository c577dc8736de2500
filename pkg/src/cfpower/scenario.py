"""Network drops and large-scale channel statistics.

A drop places APs and users uniformly on a ``D x D`` km square, draws
log-normal shadowing on top of the three-slope path loss, assigns uplink
pilots and computes the mean-square channel-estimate quality ``nu`` that
the power-control problems consume. Everything is stored in linear scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "RadioParams",
    "PathLossParams",
    "Scenario",
    "path_loss_db",
    "normalized_snrs",
    "assign_pilots",
    "channel_stats",
    "generate_drop",
    "save_scenario",
    "load_scenario",
]


@dataclass(frozen=True)
class RadioParams:
    bandwidth_hz: float = 20e6
    noise_density_dbm_per_hz: float = -174.0
    noise_figure_db: float = 9.0
    tx_power_dl_w: float = 1.0
    tx_power_pilot_w: float = 0.2
    T_p: int = 20
    T_c: int = 200

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.tx_power_dl_w <= 0 or self.tx_power_pilot_w <= 0:
            raise ValueError("transmit powers must be strictly positive")
        if self.T_p < 1 or self.T_c < 1:
            raise ValueError("T_p and T_c must be positive integers")
        if self.T_p >= self.T_c:
            raise ValueError(f"T_p ({self.T_p}) must be smaller than T_c ({self.T_c})")

    @property
    def prelog(self) -> float:
        return 1.0 - self.T_p / self.T_c


@dataclass(frozen=True)
class PathLossParams:
    L_db: float = 140.7
    d0_km: float = 0.01
    d1_km: float = 0.05
    sigma_sh_db: float = 8.0

    def __post_init__(self):
        if self.d0_km <= 0 or self.d1_km <= 0:
            raise ValueError("reference distances must be positive")
        if self.d0_km >= self.d1_km:
            raise ValueError("d0_km must be smaller than d1_km")
        if self.sigma_sh_db < 0:
            raise ValueError("sigma_sh_db must be nonnegative")


@dataclass(frozen=True, eq=False)
class Scenario:
    """One network drop.

    ``beta`` and ``nu`` are ``(M, K)`` arrays indexed ``[ap, user]``;
    ``pilot_gram[i, k]`` holds ``|psi_i^H psi_k|``.
    """

    M: int
    K: int
    N: int
    D_km: float
    beta: np.ndarray
    pilot_gram: np.ndarray
    nu: np.ndarray
    zeta_d: float
    zeta_p: float
    prelog: float
    seed: int | None = None
    T_p: int = 20
    T_c: int = 200
    ap_pos: np.ndarray | None = field(default=None, repr=False)
    ue_pos: np.ndarray | None = field(default=None, repr=False)
    pilot_index: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.beta.shape != (self.M, self.K) or self.nu.shape != (self.M, self.K):
            raise ValueError("beta and nu must have shape (M, K)")
        if self.pilot_gram.shape != (self.K, self.K):
            raise ValueError("pilot_gram must have shape (K, K)")
        if self.N < 1:
            raise ValueError("N must be a positive integer")


def path_loss_db(d_km, p: PathLossParams = PathLossParams()):
    """Three-slope path loss in dB (a negative number) at distance ``d_km``.

    Accepts scalars or arrays. Below ``d0`` the loss is flat, between ``d0``
    and ``d1`` it falls off with exponent 2 and beyond ``d1`` with exponent
    3.5; the branches meet continuously at both breakpoints.
    """
    d = np.asarray(d_km, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be strictly positive")
    far = -p.L_db - 35.0 * np.log10(d)
    mid = -p.L_db - 15.0 * math.log10(p.d1_km) - 20.0 * np.log10(d)
    near = -p.L_db - 15.0 * math.log10(p.d1_km) - 20.0 * math.log10(p.d0_km)
    out = np.where(d > p.d1_km, far, np.where(d > p.d0_km, mid, near))
    return float(out) if out.ndim == 0 else out


def noise_power_w(r: RadioParams) -> float:
    dbm = r.noise_density_dbm_per_hz + 10.0 * math.log10(r.bandwidth_hz) + r.noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


def normalized_snrs(r: RadioParams) -> tuple[float, float]:
    """Return ``(zeta_d, zeta_p)``: downlink and pilot powers over noise power."""
    noise = noise_power_w(r)
    return r.tx_power_dl_w / noise, r.tx_power_pilot_w / noise


def assign_pilots(K: int, T_p: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Assign ``T_p`` orthonormal pilots to ``K`` users.

    With ``K <= T_p`` user ``k`` simply gets pilot ``k``. Otherwise users are
    visited in random order and handed pilots round-robin, so every pilot is
    reused either ``floor(K/T_p)`` or ``ceil(K/T_p)`` times.

    Returns
    -------
    pilot_index : ndarray of int, shape (K,)
    pilot_gram : ndarray, shape (K, K)
        1 where two users share a pilot (including the diagonal), else 0.
    """
    if T_p < 1:
        raise ValueError("T_p must be at least 1")
    if K <= T_p:
        idx = np.arange(K)
    else:
        rng = np.random.default_rng(seed)
        order = rng.permutation(K)
        idx = np.empty(K, dtype=int)
        idx[order] = np.arange(K) % T_p
    gram = (idx[:, None] == idx[None, :]).astype(float)
    return idx, gram


def channel_stats(beta, pilot_gram, zeta_p: float, T_p: int) -> np.ndarray:
    """Mean square of the MMSE channel-estimate entries.

    ``nu[m, k] = zeta_p T_p beta[m, k]^2 / (1 + zeta_p T_p sum_i beta[m, i] gram[i, k]^2)``
    """
    beta = np.asarray(beta, dtype=float)
    gram = np.asarray(pilot_gram, dtype=float)
    if beta.shape[1] != gram.shape[0] or gram.shape[0] != gram.shape[1]:
        raise ValueError("beta is (M, K) and pilot_gram must be (K, K)")
    if np.any(beta < 0) or np.any(gram < 0):
        raise ValueError("beta and pilot_gram must be nonnegative")
    snr = zeta_p * T_p
    return snr * beta**2 / (1.0 + snr * (beta @ gram**2))


def generate_drop(
    M: int,
    K: int,
    N: int = 1,
    D_km: float = 1.0,
    radio: RadioParams = RadioParams(),
    pl: PathLossParams = PathLossParams(),
    seed: int = 0,
) -> Scenario:
    """Draw a reproducible network drop; the result depends only on the arguments."""
    if min(M, K, N) < 1 or not D_km > 0:
        raise ValueError("M, K, N and D_km must be positive")
    rng = np.random.default_rng(seed)
    ap_pos = rng.uniform(0.0, D_km, size=(M, 2))
    ue_pos = rng.uniform(0.0, D_km, size=(K, 2))
    dist = np.hypot(ap_pos[:, None, 0] - ue_pos[None, :, 0], ap_pos[:, None, 1] - ue_pos[None, :, 1])
    # co-located nodes fall in the flat branch anyway
    dist = np.maximum(dist, np.finfo(float).tiny)
    shadow = pl.sigma_sh_db * rng.standard_normal((M, K))
    beta = 10.0 ** ((path_loss_db(dist, pl) + shadow) / 10.0)

    pilot_index, gram = assign_pilots(K, radio.T_p, rng)
    zeta_d, zeta_p = normalized_snrs(radio)
    nu = channel_stats(beta, gram, zeta_p, radio.T_p)
    return Scenario(
        M=M, K=K, N=N, D_km=float(D_km), beta=beta, pilot_gram=gram, nu=nu,
        zeta_d=zeta_d, zeta_p=zeta_p, prelog=radio.prelog, seed=seed,
        T_p=radio.T_p, T_c=radio.T_c, ap_pos=ap_pos, ue_pos=ue_pos,
        pilot_index=pilot_index,
    )


# CSV bundle -----------------------------------------------------------------

_FMT = "%.17g"  # round-trips float64 exactly


def save_scenario(s: Scenario, directory) -> Path:
    """Write ``positions.csv``, ``beta.csv``, ``nu.csv``, ``pilot_gram.csv`` and ``meta.txt``."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "positions.csv", "w") as fh:
        fh.write("role,index,x_km,y_km\n")
        for role, pos in (("ap", s.ap_pos), ("user", s.ue_pos)):
            if pos is None:
                continue
            for i, (x, y) in enumerate(pos):
                fh.write(f"{role},{i},{float(x)!r},{float(y)!r}\n")
    np.savetxt(out / "beta.csv", s.beta, fmt=_FMT, delimiter=",")
    np.savetxt(out / "nu.csv", s.nu, fmt=_FMT, delimiter=",")
    np.savetxt(out / "pilot_gram.csv", s.pilot_gram, fmt=_FMT, delimiter=",")
    meta = {
        "M": s.M, "K": s.K, "N": s.N, "D_km": repr(s.D_km),
        "zeta_d": repr(s.zeta_d), "zeta_p": repr(s.zeta_p),
        "prelog": repr(s.prelog), "T_p": s.T_p, "T_c": s.T_c,
        "seed": "" if s.seed is None else s.seed,
    }
    if s.pilot_index is not None:
        meta["pilot_index"] = " ".join(str(int(i)) for i in s.pilot_index)
    (out / "meta.txt").write_text("".join(f"{k}={v}\n" for k, v in meta.items()))
    return out


def _read_matrix(path: Path, rows: int, cols: int) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=float, ndmin=2).reshape(rows, cols)


def load_scenario(directory) -> Scenario:
    src = Path(directory)
    meta = {}
    for line in (src / "meta.txt").read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    M, K = int(meta["M"]), int(meta["K"])
    ap_pos = ue_pos = None
    pos_file = src / "positions.csv"
    if pos_file.exists():
        aps, ues = [], []
        for line in pos_file.read_text().splitlines()[1:]:
            role, _, x, y = line.split(",")
            (aps if role == "ap" else ues).append((float(x), float(y)))
        ap_pos = np.array(aps).reshape(-1, 2) if aps else None
        ue_pos = np.array(ues).reshape(-1, 2) if ues else None
    pilot_index = None
    if meta.get("pilot_index"):
        pilot_index = np.array([int(v) for v in meta["pilot_index"].split()])
    return Scenario(
        M=M, K=K, N=int(meta["N"]), D_km=float(meta["D_km"]),
        beta=_read_matrix(src / "beta.csv", M, K),
        pilot_gram=_read_matrix(src / "pilot_gram.csv", K, K),
        nu=_read_matrix(src / "nu.csv", M, K),
        zeta_d=float(meta["zeta_d"]), zeta_p=float(meta["zeta_p"]),
        prelog=float(meta["prelog"]),
        seed=int(meta["seed"]) if meta.get("seed") else None,
        T_p=int(meta.get("T_p", 20)), T_c=int(meta.get("T_c", 200)),
        ap_pos=ap_pos, ue_pos=ue_pos, pilot_index=pilot_index,
    )
