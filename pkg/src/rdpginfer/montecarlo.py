"""Seeded Monte Carlo power study: null calibration, alternative power
estimation, and the convergence of the learnt-curve test to the known-curve
test as the number of auxiliary vertices grows.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from . import curve as _curve
from . import inference as _inference
from . import rdpg as _rdpg
from .errors import ConnectivityError, ExperimentError

ARM_CODES = {"null": 0, "alternative": 1}
STAT_NAMES = ("Tk", "T1", "T1hat")


@dataclass(frozen=True)
class EmbedParams:
    """Guttman iteration controls for the learnt-curve statistic."""

    max_iters: int = 200
    tol: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 0.0 < self.tol < 1.0:
            raise ValueError(f"tol must lie in (0, 1), got {self.tol}")


def _freeze(spec):
    if isinstance(spec, (list, tuple)):
        return tuple(_freeze(x) for x in spec)
    return spec


@dataclass(frozen=True)
class PowerConfig:
    """Full description of one power experiment; reports are a pure function of it."""

    curve: object = "hardy-weinberg"       # registered name or coefficient lists
    s: int = 5                             # community size
    m: int = 1000                          # auxiliary vertex count
    tau0: float = 0.3                      # null curve parameter
    tau_star: float = 0.35                 # alternative curve parameter
    alpha: float = 0.05
    replicates: int = 1000                 # per arm
    radius: float = 1.0                    # localization radius
    community_sd: float = 0.0              # 0 = point mass, >0 = truncated normal on tau
    aux_density: str = "uniform"
    metric: object = "identity"            # "identity" or k x k rows
    base_seed: int = 0
    embed: EmbedParams = field(default_factory=EmbedParams)

    def __post_init__(self):
        object.__setattr__(self, "curve", _freeze(self.curve))
        object.__setattr__(self, "metric", _freeze(self.metric))
        if self.s < 1 or self.m < 1:
            raise ValueError(f"need s >= 1 and m >= 1, got s={self.s}, m={self.m}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        for name in ("tau0", "tau_star"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.community_sd < 0:
            raise ValueError(f"community_sd must be >= 0, got {self.community_sd}")
        if self.aux_density != "uniform":
            raise ValueError(f"only the uniform auxiliary density is supported, got {self.aux_density!r}")

    @property
    def n(self) -> int:
        return self.s + self.m


@lru_cache(maxsize=8)
def _resolved_curve(spec) -> _curve.ParametricCurve:
    spec_arg = list(list(c) for c in spec) if isinstance(spec, tuple) else spec
    crv = _curve.make_curve(spec_arg)
    if not _curve.validate_latent_support(crv):
        raise ValueError("curve is not a valid latent support: inner products leave [0, 1]")
    return crv


def _resolved_metric(spec):
    # dimension agreement is enforced where the statistics consume it
    if spec == "identity" or spec is None:
        return None
    return _inference.MetricMatrix(np.asarray(spec, dtype=float))


def _truncated_normal(rng: np.random.Generator, center: float, sd: float, size: int) -> np.ndarray:
    """Inverse-CDF truncated normal on [0, 1]; fixed draw count for determinism."""
    lo, hi = ndtr((0.0 - center) / sd), ndtr((1.0 - center) / sd)
    u = rng.random(size)
    return center + sd * ndtri(lo + u * (hi - lo))


@dataclass(frozen=True)
class ReplicateStats:
    """The statistic triple for one replicate; t_1hat is None when its graph
    was disconnected (recorded in ``failure``)."""

    t_k: float
    t_1: float
    t_1hat: float | None
    failure: str | None = None

    def get(self, name: str):
        return {"Tk": self.t_k, "T1": self.t_1, "T1hat": self.t_1hat}[name]


def replicate_outcomes(cfg: PowerConfig, arm: str, index: int,
                       compute: tuple = STAT_NAMES) -> dict:
    """Simulate one replicate and return the requested TestOutcome objects.

    The RNG stream derives from (base seed, arm, index), so replicates are
    independent, reproducible, and order-insensitive.  The adjacency draw
    does not depend on ``compute``.  A disconnected localization graph leaves
    "T1hat" as None and records the reason under "failure".
    """
    if arm not in ARM_CODES:
        raise ValueError(f"arm must be one of {sorted(ARM_CODES)}, got {arm!r}")
    rng = np.random.default_rng([cfg.base_seed, ARM_CODES[arm], index])
    crv = _resolved_curve(cfg.curve)
    k = crv.dimension
    metric = _resolved_metric(cfg.metric)

    center = cfg.tau0 if arm == "null" else cfg.tau_star
    if cfg.community_sd > 0:
        community_taus = _truncated_normal(rng, center, cfg.community_sd, cfg.s)
    else:
        community_taus = np.full(cfg.s, center)
    aux_taus = rng.uniform(0.0, 1.0, cfg.m)
    taus = np.concatenate([community_taus, aux_taus])

    lat = _rdpg.LatentMatrix(crv.evaluate(taus), cfg.s)
    adj = _rdpg.sample_adjacency(lat, rng)
    emb = _rdpg.ase(adj.matrix, k)
    W = _rdpg.procrustes_align(emb.points, lat.X)
    aligned = emb.points @ W.T
    p0 = crv.evaluate(cfg.tau0)

    out = {"Tk": None, "T1": None, "T1hat": None, "failure": None}
    if "Tk" in compute:
        out["Tk"] = _inference.t_unrestricted(aligned[:cfg.s], p0, metric)
    if "T1" in compute:
        out["T1"] = _inference.t_true_manifold(crv, aligned[:cfg.s], cfg.tau0, metric)
    if "T1hat" in compute:
        try:
            out["T1hat"] = _inference.t_learnt_manifold(
                p0, aligned, cfg.s, cfg.radius,
                max_iters=cfg.embed.max_iters, tol=cfg.embed.tol)
        except ConnectivityError as exc:
            out["failure"] = str(exc)
    return out


def replicate_statistics(cfg: PowerConfig, arm: str, index: int,
                         compute: tuple = STAT_NAMES) -> ReplicateStats:
    """Statistic values of one simulated replicate (see replicate_outcomes)."""
    out = replicate_outcomes(cfg, arm, index, compute)
    value = {n: (out[n].value if out[n] is not None else None) for n in STAT_NAMES}
    return ReplicateStats(t_k=value["Tk"], t_1=value["T1"], t_1hat=value["T1hat"],
                          failure=out["failure"])


@dataclass(frozen=True)
class CriticalValues:
    t_k: float
    t_1: float
    t_1hat: float | None

    def get(self, name: str):
        return {"Tk": self.t_k, "T1": self.t_1, "T1hat": self.t_1hat}[name]


def _order_statistic(values: np.ndarray, alpha: float) -> float:
    # ceil((1 - alpha) * B)-th smallest value
    B = len(values)
    rank = int(np.ceil((1.0 - alpha) * B))
    rank = min(max(rank, 1), B)
    return float(np.sort(values)[rank - 1])


def critical_values(null_samples, alpha: float) -> CriticalValues:
    """Per-statistic ceil((1-alpha) B)-th smallest null value.

    Failed replicates do not contribute to their statistic's sample.
    """
    stats = list(null_samples)
    if not stats:
        raise ValueError("need at least one null replicate")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    out = {}
    for name in STAT_NAMES:
        vals = np.array([r.get(name) for r in stats if r.get(name) is not None])
        out[name] = _order_statistic(vals, alpha) if vals.size else None
    if out["Tk"] is None or out["T1"] is None:
        raise ValueError("no valid null samples for Tk or T1")
    return CriticalValues(t_k=out["Tk"], t_1=out["T1"], t_1hat=out["T1hat"])


@dataclass(frozen=True)
class PowerEstimates:
    """Rejection fractions at the calibrated critical values; ``counts`` hold
    each statistic's denominator after excluding failed replicates."""

    t_k: float
    t_1: float
    t_1hat: float | None
    counts: dict

    def get(self, name: str):
        return {"Tk": self.t_k, "T1": self.t_1, "T1hat": self.t_1hat}[name]


def power_estimate(alt_samples, critical: CriticalValues) -> PowerEstimates:
    """Fraction of alternative replicates with statistic >= its critical value."""
    stats = list(alt_samples)
    if not stats:
        raise ValueError("need at least one alternative replicate")
    powers, counts = {}, {}
    for name in STAT_NAMES:
        crit = critical.get(name)
        vals = np.array([r.get(name) for r in stats if r.get(name) is not None])
        counts[name] = int(vals.size)
        if crit is None or vals.size == 0:
            powers[name] = None
        else:
            powers[name] = float(np.mean(vals >= crit))
    return PowerEstimates(t_k=powers["Tk"], t_1=powers["T1"], t_1hat=powers["T1hat"],
                          counts=counts)


@dataclass
class PowerReport:
    """Everything a power experiment produced, a pure function of its config."""

    config: PowerConfig
    critical: CriticalValues
    power: PowerEstimates
    null_stats: list
    alt_stats: list
    failures: list            # (arm, index, message)
    wall_clock: float = 0.0   # informational; excluded from serialized outputs

    def to_json_dict(self) -> dict:
        cfg = self.config
        return {
            "schema_version": 1,
            "config": {
                "curve": cfg.curve if isinstance(cfg.curve, str) else [list(c) for c in cfg.curve],
                "s": cfg.s, "m": cfg.m, "tau0": cfg.tau0, "tau_star": cfg.tau_star,
                "alpha": cfg.alpha, "replicates": cfg.replicates, "radius": cfg.radius,
                "community_sd": cfg.community_sd, "aux_density": cfg.aux_density,
                "metric": cfg.metric if isinstance(cfg.metric, str) else [list(r) for r in cfg.metric],
                "base_seed": cfg.base_seed,
                "embed": {"max_iters": cfg.embed.max_iters, "tol": cfg.embed.tol},
            },
            "critical_values": {n: self.critical.get(n) for n in STAT_NAMES},
            "power": {n: self.power.get(n) for n in STAT_NAMES},
            "denominators": dict(self.power.counts),
            "failures": [{"arm": a, "index": i, "message": msg} for a, i, msg in self.failures],
        }


def _replicate_task(args):
    cfg, arm, index = args
    return replicate_statistics(cfg, arm, index)


def _run_arm(cfg: PowerConfig, arm: str, n_jobs: int) -> list:
    tasks = [(cfg, arm, i) for i in range(cfg.replicates)]
    if n_jobs <= 1:
        return [_replicate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        chunk = max(1, cfg.replicates // (8 * n_jobs))
        return list(pool.map(_replicate_task, tasks, chunksize=chunk))


def run_power_experiment(cfg: PowerConfig, n_jobs: int = 1) -> PowerReport:
    """Calibrate critical values on B null replicates, estimate power on B
    alternative replicates, and assemble the report.

    Replicates run in parallel when n_jobs > 1; results are identical for any
    n_jobs.  More than 10% failed replicates aborts the experiment.
    """
    _resolved_curve(cfg.curve)  # fail fast on bad curve specs
    start = time.perf_counter()
    null_stats = _run_arm(cfg, "null", n_jobs)
    alt_stats = _run_arm(cfg, "alternative", n_jobs)
    failures = [(arm, i, r.failure)
                for arm, stats in (("null", null_stats), ("alternative", alt_stats))
                for i, r in enumerate(stats) if r.failure is not None]
    if len(failures) > 0.10 * 2 * cfg.replicates:
        raise ExperimentError(
            f"{len(failures)} of {2 * cfg.replicates} replicates failed "
            "(likely disconnected localization graphs); first failure: "
            f"{failures[0][2]}")
    critical = critical_values(null_stats, cfg.alpha)
    power = power_estimate(alt_stats, critical)
    return PowerReport(config=cfg, critical=critical, power=power,
                       null_stats=null_stats, alt_stats=alt_stats,
                       failures=failures, wall_clock=time.perf_counter() - start)


@dataclass(frozen=True)
class ConvergenceRow:
    m: int
    power_t_1: float
    power_t_1hat: float

    @property
    def gap(self) -> float:
        return abs(self.power_t_1hat - self.power_t_1)


def convergence_study(cfg: PowerConfig, m_values, n_jobs: int = 1) -> list[ConvergenceRow]:
    """Power gap |power(T1hat) - power(T1)| as the auxiliary count m grows."""
    ms = [int(m) for m in m_values]
    if not ms:
        raise ValueError("m_values must be non-empty")
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ValueError(f"m_values must be strictly increasing, got {ms}")
    rows = []
    for m in ms:
        report = run_power_experiment(replace(cfg, m=m), n_jobs=n_jobs)
        rows.append(ConvergenceRow(m=m, power_t_1=report.power.t_1,
                                   power_t_1hat=report.power.t_1hat))
    return rows


# -- serialization --------------------------------------------------------------

def write_replicates_csv(report: PowerReport, path) -> None:
    """Per-replicate statistics as CSV: arm,index,Tk,T1,T1hat,failed."""
    def fmt(v):
        return "" if v is None else repr(float(v))
    with open(path, "w") as fh:
        fh.write("arm,index,Tk,T1,T1hat,failed\n")
        for arm, stats in (("null", report.null_stats), ("alternative", report.alt_stats)):
            for i, r in enumerate(stats):
                failed = 1 if r.failure is not None else 0
                fh.write(f"{arm},{i},{fmt(r.t_k)},{fmt(r.t_1)},{fmt(r.t_1hat)},{failed}\n")


def write_convergence_csv(rows, path) -> None:
    """Convergence table as CSV: m,T1_power,T1hat_power,gap."""
    with open(path, "w") as fh:
        fh.write("m,T1_power,T1hat_power,gap\n")
        for row in rows:
            fh.write(f"{row.m},{repr(float(row.power_t_1))},"
                     f"{repr(float(row.power_t_1hat))},{repr(float(row.gap))}\n")
