"""Monotone accelerated projected gradient ascent and baseline allocations.

Two variants share one loop:

* ``FixedStep``: constant step ``alpha`` for both the extrapolated and the
  plain gradient candidates.
* ``LineSearch``: Barzilai-Borwein trial steps for each candidate followed by
  backtracking until a sufficient-ascent test passes.

Each iteration keeps whichever of the two candidates scores higher, which is
what makes the objective sequence nondecreasing.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .feasible_set import is_feasible, project
from .model import Coefficients, spectral_efficiency
from .objectives import Evaluation, UtilityKind, as_utility, value_and_gradient
from .scenario import Scenario

log = logging.getLogger(__name__)

__all__ = [
    "Variant",
    "SolverOptions",
    "SolverTrace",
    "next_t",
    "bb_step",
    "solve_apg",
    "solve_apg_ls",
    "solve",
    "epa_allocation",
    "select_aps",
    "estimate_lipschitz",
]


class Variant(str, enum.Enum):
    FIXED_STEP = "FixedStep"
    LINE_SEARCH = "LineSearch"

    @classmethod
    def parse(cls, name) -> "Variant":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        for v in cls:
            if v.value.lower() == key:
                return v
        aliases = {"fixed": cls.FIXED_STEP, "apg": cls.FIXED_STEP,
                   "ls": cls.LINE_SEARCH, "bb": cls.LINE_SEARCH}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown solver variant {name!r}")


@dataclass(frozen=True)
class SolverOptions:
    variant: Variant = Variant.LINE_SEARCH
    alpha0: float = 1.0
    delta: float = 1e-4
    rho: float = 0.5
    max_iter: int = 5000
    stop_window: int = 5
    stop_tol: float = 1e-3
    max_backtracks: int = 50
    alpha_min: float = 1e-12
    bb_rule: int = 1
    n_starts: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.stop_window < 1 or self.max_iter < 1 or self.max_backtracks < 0:
            raise ValueError("stop_window and max_iter must be >= 1, max_backtracks >= 0")
        if self.bb_rule not in (1, 2):
            raise ValueError("bb_rule must be 1 or 2")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")


@dataclass
class SolverTrace:
    """Record of one optimization run.

    ``objective_per_iter[0]`` is the value at the starting point; entry ``n``
    is the value after iteration ``n``. ``elapsed_s`` is cumulative wall time.
    """

    objective_per_iter: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    elapsed_s: list = field(default_factory=list)
    iterations: int = 0
    wall_time_s: float = 0.0
    converged: bool = False
    final_mu: np.ndarray | None = None
    per_user_se: np.ndarray | None = None

    @property
    def objective(self) -> float:
        return self.objective_per_iter[-1]

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iter,objective,alpha_y,alpha_mu,elapsed_s\n")
            steps = [(math.nan, math.nan)] + list(self.step_sizes)
            for n, (f, (ay, am), t) in enumerate(zip(self.objective_per_iter, steps, self.elapsed_s)):
                fh.write(f"{n},{float(f)!r},{float(ay)!r},{float(am)!r},{float(t)!r}\n")


def next_t(t: float) -> float:
    return 0.5 * (math.sqrt(4.0 * t * t + 1.0) + 1.0)


def bb_step(s, r, rule: int = 1, fallback: float = 1.0) -> float:
    """Barzilai-Borwein step ``<s,s>/<s,r>`` (rule 1) or ``<s,r>/<r,r>`` (rule 2).

    Falls back to ``fallback`` whenever the quotient is not a finite
    positive number.
    """
    s = np.ravel(s)
    r = np.ravel(r)
    sr = float(s @ r)
    if rule == 1:
        num, den = float(s @ s), sr
    elif rule == 2:
        num, den = sr, float(r @ r)
    else:
        raise ValueError("rule must be 1 or 2")
    if not den > 0:
        return fallback
    step = num / den
    return step if math.isfinite(step) and step > 0 else fallback


def _stalled(history, window: int, tol: float) -> bool:
    if len(history) <= window:
        return False
    tail = history[-window:]
    return max(tail) - min(tail) < tol


class _Problem:
    """Objective/gradient oracle bound to one instance, with optional AP mask."""

    def __init__(self, c: Coefficients, kind: UtilityKind, mask=None):
        self.c = c
        self.kind = as_utility(kind)
        self.mask = None if mask is None else np.asarray(mask, dtype=float)

    def at(self, x) -> Evaluation:
        return Evaluation(self.kind, self.c, x)

    def grad(self, ev: Evaluation) -> np.ndarray:
        g = ev.gradient(self.c)
        return g if self.mask is None else g * self.mask

    def project(self, x) -> np.ndarray:
        if self.mask is not None:
            x = x * self.mask
        return project(x, self.c.N)

    def step(self, base: Evaluation, alpha: float) -> Evaluation:
        return self.at(self.project(base.mu + alpha * self.grad(base)))


def _check_start(c: Coefficients, mu0) -> np.ndarray:
    mu0 = np.array(mu0, dtype=float)
    if mu0.shape != (c.M, c.K):
        raise ValueError(f"mu0 has shape {mu0.shape}, expected {(c.M, c.K)}")
    if not is_feasible(mu0, c.N):
        raise ValueError("mu0 is not feasible")
    return mu0


def _run(prob: _Problem, mu0, opts: SolverOptions, callback=None) -> SolverTrace:
    line_search = opts.variant is Variant.LINE_SEARCH
    start = time.perf_counter()
    trace = SolverTrace()

    cur = prob.at(mu0)          # mu^n
    prev = z = v = y_prev = cur  # mu^{n-1}, z^n, v^n, y^{n-1}
    t_prev = t = 1.0
    alpha = opts.alpha0

    trace.objective_per_iter.append(cur.value)
    trace.elapsed_s.append(time.perf_counter() - start)
    if callback is not None:
        callback(0, cur.mu, cur.value)

    for n in range(1, opts.max_iter + 1):
        w_z, w_mom = t_prev / t, (t_prev - 1.0) / t
        if z is cur and (w_mom == 0.0 or prev is cur):
            y = cur
        else:
            y = prob.at(cur.mu + w_z * (z.mu - cur.mu) + w_mom * (cur.mu - prev.mu))

        if line_search:
            # ascent on f is descent on -f, hence the reversed gradient differences
            a_y = bb_step(z.mu - y_prev.mu, prob.grad(y_prev) - prob.grad(z), opts.bb_rule, opts.alpha0)
            a_mu = bb_step(v.mu - prev.mu, prob.grad(prev) - prob.grad(v), opts.bb_rule, opts.alpha0)
            z_new, a_y = _backtrack(prob, y, a_y, opts)
            v_new, a_mu = _backtrack(prob, cur, a_mu, opts)
        else:
            z_new, v_new = prob.step(y, alpha), prob.step(cur, alpha)
            a_y = a_mu = alpha

        # keep the better candidate, but never fall below the current value
        best = cur
        f_v = -math.inf if v_new is None else v_new.value
        if f_v >= cur.value:
            best = v_new
        if z_new is not None and z_new.value >= f_v and z_new.value >= cur.value:
            best = z_new
        if best is cur and not line_search:
            alpha *= opts.rho
            log.debug("iteration %d: no ascent with fixed step, alpha -> %g", n, alpha)

        y_prev = y
        prev, cur = cur, best
        z = best if z_new is None else z_new
        v = best if v_new is None else v_new
        t_prev, t = t, next_t(t)

        trace.objective_per_iter.append(cur.value)
        trace.step_sizes.append((a_y, a_mu))
        trace.elapsed_s.append(time.perf_counter() - start)
        trace.iterations = n
        if callback is not None:
            callback(n, cur.mu, cur.value)
        if _stalled(trace.objective_per_iter, opts.stop_window, opts.stop_tol):
            trace.converged = True
            break

    trace.wall_time_s = time.perf_counter() - start
    trace.final_mu = cur.mu
    trace.per_user_se = spectral_efficiency(prob.c, cur.mu)
    return trace


def _backtrack(prob: _Problem, base: Evaluation, alpha: float, opts: SolverOptions):
    """Shrink ``alpha`` until ``f(cand) >= f(base) + delta ||cand - base||^2``.

    Returns ``(candidate, alpha)``; the candidate is ``None`` when even
    ``alpha_min`` would decrease the objective.
    """
    for _ in range(opts.max_backtracks + 1):
        cand = prob.step(base, alpha)
        gap = cand.mu - base.mu
        if cand.value >= base.value + opts.delta * float(np.vdot(gap, gap)):
            return cand, alpha
        alpha *= opts.rho
    alpha = opts.alpha_min
    cand = prob.step(base, alpha)
    if cand.value >= base.value:
        return cand, alpha
    return None, alpha


def solve_apg(c: Coefficients, kind: UtilityKind, opts: SolverOptions, mu0, mask=None,
              callback=None) -> SolverTrace:
    """Fixed-step monotone APG; ``opts.alpha0`` is the step size.

    ``callback(n, mu, value)``, if given, sees the start point and every iterate.
    """
    opts = replace(opts, variant=Variant.FIXED_STEP)
    return _run(_Problem(c, kind, mask), _masked_start(c, mu0, mask), opts, callback)


def solve_apg_ls(c: Coefficients, kind: UtilityKind, opts: SolverOptions, mu0, mask=None,
                 callback=None) -> SolverTrace:
    """Monotone APG with BB step sizes and backtracking."""
    opts = replace(opts, variant=Variant.LINE_SEARCH)
    return _run(_Problem(c, kind, mask), _masked_start(c, mu0, mask), opts, callback)


def _masked_start(c, mu0, mask):
    mu0 = _check_start(c, mu0)
    if mask is not None:
        mu0 = mu0 * np.asarray(mask, dtype=float)
    return mu0


def solve(s: Scenario, c: Coefficients, kind: UtilityKind, opts: SolverOptions = SolverOptions(),
          mu0=None, mask=None, seed: int = 0, callback=None) -> SolverTrace:
    """Solve from the EPA point, plus ``opts.n_starts - 1`` perturbed restarts.

    Returns the trace of the best run; ``callback`` is passed to every run.
    """
    run = solve_apg_ls if opts.variant is Variant.LINE_SEARCH else solve_apg
    if mu0 is None:
        mu0 = epa_allocation(s, mask)
    best = run(c, kind, opts, mu0, mask, callback)
    rng = np.random.default_rng(seed)
    for _ in range(opts.n_starts - 1):
        start = project(mu0 * rng.lognormal(0.0, 0.5, size=mu0.shape), c.N)
        trial = run(c, kind, opts, start, mask, callback)
        if trial.objective > best.objective:
            best = trial
    return best


def epa_allocation(s: Scenario, mask=None) -> np.ndarray:
    """Equal power allocation: every AP spends its full budget, ``eta[m,k] = 1/(N sum_i nu[m,i])``.

    APs whose (masked) ``nu`` row is all zero transmit nothing.
    """
    nu = np.asarray(s.nu, dtype=float)
    if mask is not None:
        nu = nu * np.asarray(mask, dtype=float)
    rows = nu.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.where(rows > 0, 1.0 / (s.N * rows), 0.0)
    return np.sqrt(eta * nu)


def select_aps(beta, per_user_count: int) -> np.ndarray:
    """For each user, mark the ``per_user_count`` APs with the largest gain."""
    beta = np.asarray(beta)
    M, K = beta.shape
    if not 1 <= per_user_count <= M:
        raise ValueError(f"per_user_count must be in [1, {M}]")
    mask = np.zeros((M, K), dtype=bool)
    top = np.argsort(-beta, axis=0, kind="stable")[:per_user_count]
    np.put_along_axis(mask, top, True, axis=0)
    return mask


def estimate_lipschitz(c: Coefficients, kind: UtilityKind, n_samples: int = 20, seed: int = 0) -> float:
    """Largest secant ratio ``||grad(x) - grad(y)|| / ||x - y||`` over random feasible pairs.

    A lower bound on the true constant; use with a safety factor.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_samples):
        x = project(rng.uniform(0.0, 1.0, (c.M, c.K)) * rng.uniform(0.0, 1.0), c.N)
        direction = rng.standard_normal((c.M, c.K))
        y = project(x + 1e-3 * direction / np.linalg.norm(direction), c.N)
        dx = np.linalg.norm(x - y)
        if dx == 0:
            continue
        gx = value_and_gradient(kind, c, x)[1]
        gy = value_and_gradient(kind, c, y)[1]
        best = max(best, float(np.linalg.norm(gx - gy) / dx))
    return best
