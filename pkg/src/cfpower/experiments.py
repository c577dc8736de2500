"""Config-driven experiment runner and timing benchmark.

Configs are INI files (``key = value`` under ``[section]`` headers)::

    [experiment]
    type = cdf
    n_drops = 30
    seed = 1
    kinds = SEmax, PFmax, HRmax, MRmax
    output_dir = out/cdf

    [scenario]
    M = 100
    K = 20

Unknown sections or keys are rejected. Sweep experiments take their sweep
values from list-valued keys (``densities``, ``D_values``, ``M_values``,
``K_values``, ``N_values``, ``per_user_counts``).
"""

from __future__ import annotations

import configparser
import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .feasible_set import is_feasible
from .model import build_coefficients, spectral_efficiency
from .objectives import Kind, UtilityKind
from .scenario import PathLossParams, RadioParams, generate_drop
from .solver import SolverOptions, Variant, epa_allocation, select_aps, solve, solve_apg

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
RESULTS_HEADER = "drop,seed,kind,user,se_bits_hz,min_se,total_se,iters,wall_s"
EXPERIMENTS = ("convergence", "ap_density_sweep", "cdf", "avg_se_vs_M",
               "ap_selection_sweep", "antennas_sweep", "timing")
EPA = "EPA"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "cdf"
    M: int = 100
    K: int = 20
    N: int = 1
    D_km: float = 1.0
    radio: RadioParams = field(default_factory=RadioParams)
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    kinds: tuple = ("SEmax", "PFmax", "HRmax", "MRmax")
    tau: float | None = None
    epsilon: float = 1e-6
    solver: SolverOptions = field(default_factory=SolverOptions)
    n_drops: int = 1
    seed: int = 0
    output_dir: str = "results"
    workers: int = 1
    record_wall_time: bool = False
    save_allocations: bool = False
    per_drop_cdf: bool = False
    densities: tuple = ()
    D_values: tuple = ()
    M_values: tuple = ()
    K_values: tuple = ()
    N_values: tuple = ()
    per_user_counts: tuple = ()
    bench_iters: int = 200
    bench_repeats: int = 5

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if self.n_drops < 1:
            raise ConfigError("n_drops must be >= 1")
        if min(self.M, self.K, self.N) < 1 or not self.D_km > 0:
            raise ConfigError("M, K, N and D_km must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        kinds = []
        for k in self.kinds:
            kinds.append(EPA if str(k).strip().upper() == EPA else Kind.parse(k).value)
        if not kinds:
            raise ConfigError("at least one utility kind is required")
        self.kinds = tuple(kinds)

    def utility(self, name: str) -> UtilityKind:
        return UtilityKind(Kind.parse(name), tau=self.tau, epsilon=self.epsilon)

    def describe(self) -> str:
        """Fully resolved config as ``key=value`` lines."""
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                for sub in dataclasses.fields(value):
                    v = getattr(value, sub.name)
                    lines.append(f"{f.name}.{sub.name}={getattr(v, 'value', v)}")
            elif isinstance(value, tuple):
                lines.append(f"{f.name}={','.join(str(v) for v in value)}")
            else:
                lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"


# config parsing ---------------------------------------------------------------

def _list(text, cast):
    return tuple(cast(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _bool(text) -> bool:
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _int(text) -> int:
    value = float(text)
    if value != int(value):
        raise ConfigError(f"not an integer: {text!r}")
    return int(value)


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none", "auto") else float(text)


_EXPERIMENT_KEYS = {
    "type": ("experiment", str), "n_drops": ("n_drops", _int), "seed": ("seed", _int),
    "output_dir": ("output_dir", str), "kinds": ("kinds", lambda t: _list(t, str)),
    "workers": ("workers", _int), "record_wall_time": ("record_wall_time", _bool),
    "save_allocations": ("save_allocations", _bool), "per_drop_cdf": ("per_drop_cdf", _bool),
    "bench_iters": ("bench_iters", _int), "bench_repeats": ("bench_repeats", _int),
}
_SCENARIO_KEYS = {
    "M": ("M", _int), "K": ("K", _int), "N": ("N", _int), "D_km": ("D_km", float),
    "densities": ("densities", lambda t: _list(t, float)),
    "D_values": ("D_values", lambda t: _list(t, float)),
    "M_values": ("M_values", lambda t: _list(t, _int)),
    "K_values": ("K_values", lambda t: _list(t, _int)),
    "N_values": ("N_values", lambda t: _list(t, _int)),
    "per_user_counts": ("per_user_counts", lambda t: _list(t, _int)),
}
_UTILITY_KEYS = {"tau": ("tau", _opt_float), "epsilon": ("epsilon", float)}


def _dataclass_section(cls, items: dict, section: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in items.items():
        if key not in fields:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        default = fields[key].default
        if isinstance(default, bool):
            kwargs[key] = _bool(raw)
        elif isinstance(default, int):
            kwargs[key] = _int(raw)
        elif isinstance(default, float):
            kwargs[key] = float(raw)
        else:
            kwargs[key] = raw.strip()
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case-sensitive (M vs m)
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return config_from_mapping({s: dict(parser[s]) for s in parser.sections()})


def config_from_mapping(sections: dict) -> ExperimentConfig:
    kwargs = {}
    tables = {"experiment": _EXPERIMENT_KEYS, "scenario": _SCENARIO_KEYS, "utility": _UTILITY_KEYS}
    for name, items in sections.items():
        if name in tables:
            for key, raw in items.items():
                if key not in tables[name]:
                    raise ConfigError(f"[{name}] unknown key {key!r}")
                attr, cast = tables[name][key]
                try:
                    kwargs[attr] = cast(raw)
                except ValueError as exc:
                    raise ConfigError(f"[{name}] {key}: {exc}") from exc
        elif name == "radio":
            kwargs["radio"] = _dataclass_section(RadioParams, items, name)
        elif name == "pathloss":
            kwargs["pathloss"] = _dataclass_section(PathLossParams, items, name)
        elif name == "solver":
            kwargs["solver"] = _dataclass_section(SolverOptions, items, name)
        else:
            raise ConfigError(f"unknown section [{name}]")
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# statistics ---------------------------------------------------------------------

def cdf_stats(samples) -> dict:
    """Median, 5th and 95th percentile and the empirical CDF of ``samples``.

    Percentiles interpolate linearly between order statistics. The CDF is
    returned as sorted values with cumulative fractions ``(i + 1) / n``.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if x.size == 0:
        raise ValueError("cdf_stats needs at least one sample")
    p5, median, p95 = np.percentile(x, [5.0, 50.0, 95.0])
    return {
        "median": float(median),
        "p5": float(p5),
        "p95": float(p95),
        "values": x,
        "fractions": np.arange(1, x.size + 1) / x.size,
    }


# sweep points -------------------------------------------------------------------

def sweep_points(cfg: ExperimentConfig) -> list:
    """Expand the config into ``(label, params)`` pairs, one per sweep point."""
    base = {"M": cfg.M, "K": cfg.K, "N": cfg.N, "D_km": cfg.D_km, "per_user_count": None}
    Ks = cfg.K_values or (cfg.K,)
    pts = []
    if cfg.experiment in ("convergence", "cdf"):
        return [("main", base)]
    if cfg.experiment == "ap_density_sweep":
        if not cfg.densities:
            raise ConfigError("ap_density_sweep needs [scenario] densities")
        for D in cfg.D_values or (cfg.D_km,):
            for K in Ks:
                for rho in cfg.densities:
                    M = max(1, int(round(rho * D * D)))
                    pts.append((f"D{D:g}_K{K}_density{rho:g}", dict(base, M=M, K=K, D_km=D)))
    elif cfg.experiment == "avg_se_vs_M":
        if not cfg.M_values:
            raise ConfigError("avg_se_vs_M needs [scenario] M_values")
        for K in Ks:
            for M in cfg.M_values:
                pts.append((f"K{K}_M{M}", dict(base, M=M, K=K)))
    elif cfg.experiment == "ap_selection_sweep":
        if not cfg.per_user_counts:
            raise ConfigError("ap_selection_sweep needs [scenario] per_user_counts")
        for K in Ks:
            for count in cfg.per_user_counts:
                if not 1 <= count <= cfg.M:
                    raise ConfigError(f"per_user_count {count} outside [1, M={cfg.M}]")
                pts.append((f"K{K}_sel{count}", dict(base, K=K, per_user_count=count)))
    elif cfg.experiment == "antennas_sweep":
        if not cfg.N_values:
            raise ConfigError("antennas_sweep needs [scenario] N_values")
        for M in cfg.M_values or (cfg.M,):
            for N in cfg.N_values:
                pts.append((f"M{M}_N{N}", dict(base, M=M, N=N)))
    return pts


# one drop -------------------------------------------------------------------------

def _run_drop(args):
    """Solve every configured kind on one drop; returns a list of per-kind records."""
    cfg, params, drop, seed, with_trace = args
    s = generate_drop(params["M"], params["K"], params["N"], params["D_km"],
                      cfg.radio, cfg.pathloss, seed)
    c = build_coefficients(s)
    mask = None
    if params["per_user_count"] is not None:
        mask = select_aps(s.beta, params["per_user_count"])
    records = []
    for name in cfg.kinds:
        if name == EPA:
            t0 = time.perf_counter()
            mu = epa_allocation(s, mask)
            wall, iters, trace = time.perf_counter() - t0, 0, None
        else:
            trace = solve(s, c, cfg.utility(name), cfg.solver, mask=mask, seed=seed)
            mu, wall, iters = trace.final_mu, trace.wall_time_s, trace.iterations
        se_bits = spectral_efficiency(c, mu) / LN2
        if not is_feasible(mu, s.N, 1e-9):
            raise RuntimeError(f"drop {drop} kind {name}: infeasible allocation")
        records.append({
            "drop": drop, "seed": seed, "kind": name, "se_bits": se_bits,
            "iters": iters, "wall_s": wall, "mu": mu,
            "trace": trace if with_trace else None,
        })
    return records


def _map(cfg: ExperimentConfig, fn, tasks):
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _write_results(path: Path, records, record_wall_time: bool) -> None:
    with open(path, "w") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for r in records:
            se = r["se_bits"]
            lo, tot = float(se.min()), float(se.sum())
            wall = repr(float(r["wall_s"])) if record_wall_time else ""
            for k, v in enumerate(se):
                fh.write(f"{r['drop']},{r['seed']},{r['kind']},{k},{float(v)!r},"
                         f"{float(lo)!r},{float(tot)!r},{r['iters']},{wall}\n")


def _write_timings(path: Path, records) -> None:
    with open(path, "w") as fh:
        fh.write("drop,kind,iters,wall_s\n")
        for r in records:
            fh.write(f"{r['drop']},{r['kind']},{r['iters']},{float(r['wall_s'])!r}\n")


def _run_point(cfg: ExperimentConfig, params: dict, out: Path, with_trace: bool):
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, params, d, cfg.seed + d, with_trace) for d in range(cfg.n_drops)]
    records = [r for batch in _map(cfg, _run_drop, tasks) for r in batch]
    _write_results(out / "results.csv", records, cfg.record_wall_time)
    _write_timings(out / "timings.csv", records)
    if cfg.save_allocations:
        alloc = out / "allocations"
        alloc.mkdir(exist_ok=True)
        for r in records:
            np.savetxt(alloc / f"drop{r['drop']}_{r['kind']}.csv", r["mu"], fmt="%.17g", delimiter=",")
    if with_trace:
        traces = out / "traces"
        traces.mkdir(exist_ok=True)
        for r in records:
            if r["trace"] is not None:
                r["trace"].to_csv(traces / f"drop{r['drop']}_{r['kind']}.csv")
    return records


def _summarize(records, kinds):
    rows = []
    for name in kinds:
        mine = [r for r in records if r["kind"] == name]
        rows.append({
            "kind": name,
            "mean_total_se": float(np.mean([r["se_bits"].sum() for r in mine])),
            "mean_min_se": float(np.mean([r["se_bits"].min() for r in mine])),
            "mean_avg_se": float(np.mean([r["se_bits"].mean() for r in mine])),
        })
    return rows


def run_experiment(cfg: ExperimentConfig) -> Path:
    """Run an experiment and write its report files; returns the output directory."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "meta.txt").write_text(cfg.describe())
    except OSError as exc:
        raise ConfigError(f"cannot write to output directory {out}: {exc}") from exc

    if cfg.experiment == "timing":
        rows, ratios, ok = timing_benchmark(
            K=cfg.K, M_values=cfg.M_values or (200, 400, 800, 1600), N=cfg.N, D_km=cfg.D_km,
            iters=cfg.bench_iters, repeats=cfg.bench_repeats, seed=cfg.seed,
            radio=cfg.radio, pathloss=cfg.pathloss)
        write_timing_table(out / "timing.csv", rows)
        if not ok:
            log.warning("per-iteration time ratios %s fall outside %s", ratios, RATIO_BAND)
        return out

    points = sweep_points(cfg)
    if len(points) == 1:
        records = _run_point(cfg, points[0][1], out, cfg.experiment == "convergence")
        if cfg.experiment == "cdf":
            _write_cdfs(out, records, cfg)
        return out

    with open(out / "summary.csv", "w") as fh:
        fh.write("point,M,K,N,D_km,per_user_count,kind,mean_total_se,mean_min_se,mean_avg_se,n_drops\n")
        for label, params in points:
            log.info("sweep point %s", label)
            records = _run_point(cfg, params, out / "points" / label, False)
            for row in _summarize(records, cfg.kinds):
                count = "" if params["per_user_count"] is None else params["per_user_count"]
                fh.write(f"{label},{params['M']},{params['K']},{params['N']},{float(params['D_km'])!r},"
                         f"{count},{row['kind']},{float(row['mean_total_se'])!r},{float(row['mean_min_se'])!r},"
                         f"{float(row['mean_avg_se'])!r},{cfg.n_drops}\n")
    return out


def _write_cdfs(out: Path, records, cfg: ExperimentConfig) -> None:
    with open(out / "cdf_summary.csv", "w") as fh:
        fh.write("kind,drop,median,p5,p95\n")
        for name in cfg.kinds:
            mine = [r for r in records if r["kind"] == name]
            pooled = cdf_stats(np.concatenate([r["se_bits"] for r in mine]))
            fh.write(f"{name},all,{float(pooled['median'])!r},{float(pooled['p5'])!r},{float(pooled['p95'])!r}\n")
            with open(out / f"cdf_{name}.csv", "w") as cf:
                cf.write("se_bits_hz,fraction\n")
                for v, p in zip(pooled["values"], pooled["fractions"]):
                    cf.write(f"{float(v)!r},{float(p)!r}\n")
            if cfg.per_drop_cdf:
                for r in mine:
                    st = cdf_stats(r["se_bits"])
                    fh.write(f"{name},{r['drop']},{float(st['median'])!r},{float(st['p5'])!r},{float(st['p95'])!r}\n")


# timing -----------------------------------------------------------------------------

RATIO_BAND = (1.5, 2.8)


def timing_benchmark(K: int = 40, M_values=(200, 400, 800, 1600), N: int = 1, D_km: float = 1.0,
                     iters: int = 200, repeats: int = 5, seed: int = 0, full_solve: bool = True,
                     radio: RadioParams = RadioParams(), pathloss: PathLossParams = PathLossParams()):
    """Per-iteration cost versus number of APs.

    Per-iteration time is the best of ``repeats`` runs of ``iters``
    fixed-step iterations (constant work per iteration, stopping disabled).
    With ``full_solve`` the wall time of a default line-search SEmax solve is
    reported as well.

    Returns ``(rows, ratios, ok)`` where ``ratios`` compares consecutive
    entries of ``M_values`` and ``ok`` says whether every ratio lies in
    :data:`RATIO_BAND`.
    """
    kind = UtilityKind(Kind.SEMAX)
    fixed = SolverOptions(variant=Variant.FIXED_STEP, alpha0=1e-3, max_iter=iters,
                          stop_window=iters + 1)
    rows = []
    for M in M_values:
        s = generate_drop(M, K, N, D_km, radio, pathloss, seed)
        c = build_coefficients(s)
        mu0 = epa_allocation(s)
        solve_apg(c, kind, fixed, mu0)  # warm-up
        per_iter = min(solve_apg(c, kind, fixed, mu0).wall_time_s / iters for _ in range(repeats))
        row = {"M": M, "K": K, "per_iter_s": per_iter}
        if full_solve:
            tr = solve(s, c, kind, SolverOptions())
            row.update(solve_s=tr.wall_time_s, solve_iters=tr.iterations)
        rows.append(row)
    ratios = [b["per_iter_s"] / a["per_iter_s"] for a, b in zip(rows, rows[1:])]
    ok = all(RATIO_BAND[0] <= r <= RATIO_BAND[1] for r in ratios)
    return rows, ratios, ok


def write_timing_table(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("M,K,per_iter_s,ratio_to_previous,solve_s,solve_iters\n")
        prev = None
        for r in rows:
            ratio = "" if prev is None else repr(float(r["per_iter_s"] / prev))
            solve_s = repr(float(r["solve_s"])) if "solve_s" in r else ""
            fh.write(f"{r['M']},{r['K']},{float(r['per_iter_s'])!r},{ratio},"
                     f"{solve_s},{r.get('solve_iters', '')}\n")
            prev = r["per_iter_s"]
