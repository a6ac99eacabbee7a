"""The clock process and Monte Carlo estimation of two-time correlations.

The clock after k jumps is S(k) = sum_{i<=k} tau(J(i)) e_i with i.i.d.
mean-one exponentials e_i (the sum includes i = 0: the chain holds at
its starting vertex before the first jump). Rescaled time divides by
c_n and counts k in units of a_n. The two-time correlation
C_n(t, t+s) is the probability that the range of the rescaled clock
misses the open interval (t, t+s), estimated over environments and
chains with fully deterministic seed streams.
"""

from __future__ import annotations

import concurrent.futures as futures
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels, seeds
from .landscape import Landscape, LandscapeParams, classify_scale, sample_landscape

DEFAULT_STEP_CAP = 10 ** 9


class InsufficientHorizonError(RuntimeError):
    """The simulated path ends before the queried interval."""


class StepCapExceeded(RuntimeError):
    """The chain hit the step cap before reaching its horizon."""


@dataclass
class ClockPath:
    """A realized clock trajectory with its jump-chain skeleton.

    rescaled_values[k] is S(k)/c_n; vertices[k] (when recorded) is the
    vertex occupied during holding k. Values in raw time units are
    rescaled * exp(log_cn), which may overflow to inf in deep-beta
    regimes; the rescaled record never does.
    """

    a_n: float
    log_cn: float
    rescaled_values: np.ndarray
    vertices: Optional[np.ndarray] = None
    horizon: float = math.inf
    capped: bool = False
    seed_info: tuple = ()

    def __post_init__(self):
        if self.rescaled_values.size == 0:
            raise ValueError("empty clock path")
        if np.any(np.diff(self.rescaled_values) <= 0.0):
            raise ValueError("clock values must be strictly increasing")

    @property
    def n_holdings(self) -> int:
        return int(self.rescaled_values.size)

    @property
    def raw_values(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.rescaled_values * np.exp(np.float64(self.log_cn))

    def value_at_time(self, t: float) -> float:
        """S_n(t) = rescaled clock at step floor(a_n * t)."""
        k = int(math.floor(self.a_n * t))
        if k >= self.rescaled_values.size:
            raise InsufficientHorizonError(
                f"path records {self.rescaled_values.size} holdings, step {k} requested"
            )
        return float(self.rescaled_values[k])


def range_avoids(path: ClockPath, t: float, s: float) -> bool:
    """True iff no rescaled clock value lies in the open interval (t, t+s)."""
    if t < 0.0 or s < 0.0:
        raise ValueError("t and s must be nonnegative")
    if s == 0.0:
        return True
    values = path.rescaled_values
    if values[-1] <= t + s:
        raise InsufficientHorizonError(
            f"path ends at {values[-1]:.6g}, interval ({t:.6g}, {t + s:.6g}) not covered"
        )
    idx = int(np.searchsorted(values, t, side="right"))
    return bool(values[idx] >= t + s)


def _resolve_log_cn(landscape: Landscape, a_n, c_n, log_cn):
    if log_cn is not None and c_n is not None:
        raise ValueError("give c_n or log_cn, not both")
    if c_n is not None:
        if not c_n > 0:
            raise ValueError("c_n must be positive")
        log_cn = math.log(c_n)
    if log_cn is None:
        if landscape.scales is None:
            raise ValueError("synthetic landscape needs explicit c_n")
        log_cn = landscape.scales.log_rn
    if a_n is None:
        if landscape.scales is None:
            raise ValueError("synthetic landscape needs explicit a_n")
        a_n = landscape.scales.a_n
    if not a_n > 0:
        raise ValueError("a_n must be positive")
    return float(a_n), float(log_cn)


def _master_seed(landscape: Landscape) -> int:
    if landscape.params is not None:
        return landscape.params.master_seed
    return int(landscape.mix_seed)


def _starts(landscape: Landscape, init, n_chain: int, env: int) -> np.ndarray:
    rng = seeds.generator(_master_seed(landscape), seeds.INIT, env)
    if isinstance(init, (int, np.integer)):
        v = int(init)
        if not 0 <= v < (1 << landscape.n):
            raise ValueError("fixed initial vertex out of range")
        return np.full(n_chain, v, dtype=np.int64)
    if init == "uniform":
        return rng.integers(0, 1 << landscape.n, size=n_chain, dtype=np.int64)
    if init == "gibbs":
        return sample_gibbs_starts(landscape, n_chain, rng)
    raise ValueError(f"unknown init {init!r}")


def simulate_clock(
    landscape: Landscape,
    init="uniform",
    horizon: float = 1.0,
    a_n: Optional[float] = None,
    c_n: Optional[float] = None,
    log_cn: Optional[float] = None,
    chain: int = 0,
    env: int = 0,
    step_cap: int = DEFAULT_STEP_CAP,
    record_vertices: bool = False,
) -> ClockPath:
    """Run one chain until its rescaled clock exceeds the horizon.

    Accepts either a sampled Landscape or LandscapeParams (sampled at
    the given env in the latter case).
    """
    if isinstance(landscape, LandscapeParams):
        landscape = sample_landscape(landscape, env=env)
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    a_n, log_cn = _resolve_log_cn(landscape, a_n, c_n, log_cn)
    if landscape.log_tau is None:
        raise ValueError("simulate_clock needs a dense landscape (use the batch estimator above the cap)")
    env = landscape.env
    seed = seeds.kernel_seed(_master_seed(landscape), seeds.CHAIN, env, chain)
    start = _starts(landscape, init, n_chain=chain + 1, env=env)[chain]
    values, vertices, capped = _kernels.walk_path_dense(
        landscape.log_tau,
        landscape.n,
        log_cn,
        horizon,
        seed,
        start,
        np.int64(step_cap),
        record_vertices,
    )
    if capped:
        raise StepCapExceeded(
            f"chain exceeded {step_cap} holdings below horizon {horizon} "
            "(c_n is likely mismatched to the landscape scale)"
        )
    return ClockPath(
        a_n=a_n,
        log_cn=log_cn,
        rescaled_values=values,
        vertices=vertices if record_vertices else None,
        horizon=horizon,
        capped=bool(capped),
        seed_info=(_master_seed(landscape), env, chain),
    )


def gibbs_measure(landscape: Landscape) -> np.ndarray:
    """Boltzmann weights tau(x)/sum tau, computed by log-sum-exp."""
    if landscape.log_tau is None:
        raise ValueError("Gibbs measure needs a dense landscape")
    lt = landscape.log_tau
    w = np.exp(lt - lt.max())
    return w / w.sum()


def sample_gibbs_starts(landscape: Landscape, size: int, rng: np.random.Generator) -> np.ndarray:
    probs = gibbs_measure(landscape)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size)).astype(np.int64)


@dataclass
class CorrelationEstimate:
    t: float
    s: float
    p_hat: float
    ci_half_width: float
    n_env: int
    n_chain: int
    mode: str
    init: str
    env_estimates: Optional[np.ndarray] = None
    n_failed_env: int = 0
    master_seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("p_hat must be a probability")
        if self.ci_half_width < 0.0:
            raise ValueError("ci_half_width must be nonnegative")


def _wilson_half_width(p: float, n: int, z: float = 1.96) -> float:
    if n == 0:
        return 0.0
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    lo, hi = center - half, center + half
    return max(p - lo, hi - p)


def _ci95(p_hat: float, env_means: Optional[np.ndarray], n_total: int) -> float:
    # Cluster CI over environments when the dispersion is informative,
    # Wilson fallback for extreme p_hat where the normal width degenerates.
    successes = p_hat * n_total
    if successes < 5.0 or (n_total - successes) < 5.0:
        return _wilson_half_width(p_hat, n_total)
    if env_means is not None and env_means.size >= 2:
        se = float(np.std(env_means, ddof=1) / math.sqrt(env_means.size))
        if se > 0.0:
            return 1.96 * se
    return 1.96 * math.sqrt(p_hat * (1.0 - p_hat) / n_total)


@dataclass
class CorrelationGrid:
    """Batch result over a (t, rho) grid with per-environment detail."""

    t_grid: np.ndarray
    rho_grid: np.ndarray
    env_p: np.ndarray          # (n_env, nt, nrho)
    n_chain: int
    mode: str
    init: str
    master_seed: int
    failed_envs: list = field(default_factory=list)

    @property
    def p_hat(self) -> np.ndarray:
        return self.env_p.mean(axis=0)

    def estimate(self, i: int, j: int) -> CorrelationEstimate:
        t = float(self.t_grid[i])
        rho = float(self.rho_grid[j])
        env_means = self.env_p[:, i, j]
        p = float(env_means.mean())
        n_total = env_means.size * self.n_chain
        ci = _ci95(p, env_means if self.mode == "quenched" else None, n_total)
        return CorrelationEstimate(
            t=t,
            s=rho * t,
            p_hat=p,
            ci_half_width=ci,
            n_env=env_means.size,
            n_chain=self.n_chain,
            mode=self.mode,
            init=self.init if isinstance(self.init, str) else "fixed",
            env_estimates=env_means.copy(),
            n_failed_env=len(self.failed_envs),
            master_seed=self.master_seed,
        )


def _env_task(params, t_sorted, env, n_chain, init, log_cn, step_cap):
    land = sample_landscape(params, env=env)
    chain_seeds = seeds.kernel_seeds(params.master_seed, seeds.CHAIN, env, n_chain)
    starts = _starts(land, init, n_chain, env)
    if land.log_tau is not None:
        cross, steps, capped = _kernels.walk_crossings_dense(
            land.log_tau, params.n, log_cn, t_sorted, chain_seeds, starts, np.int64(step_cap)
        )
    else:
        cross, steps, capped = _kernels.walk_crossings_ondemand(
            land.mix_seed,
            params.n,
            -params.beta * math.sqrt(params.n),
            log_cn,
            t_sorted,
            chain_seeds,
            starts,
            np.int64(step_cap),
        )
    return cross, capped


def estimate_correlation_grid(
    landscape_params: LandscapeParams,
    t_grid: Sequence[float],
    rho_grid: Sequence[float],
    a_n: Optional[float] = None,
    c_n: Optional[float] = None,
    log_cn: Optional[float] = None,
    n_env: int = 20,
    n_chain: int = 500,
    mode: str = "quenched",
    init="uniform",
    step_cap: int = DEFAULT_STEP_CAP,
    threads: int = 1,
) -> CorrelationGrid:
    """Estimate P(range misses (t, t(1+rho))) over a full grid.

    One simulation per chain serves every grid cell: the kernel records
    the first clock value beyond each t, and avoidance of (t, t(1+rho))
    is the event that this value is at least t(1+rho). Common random
    numbers across cells (and across calls with different grids) come
    free from the per-(env, chain) seed streams.
    """
    if n_env < 1 or n_chain < 1:
        raise ValueError("n_env and n_chain must be positive")
    if mode not in ("quenched", "annealed"):
        raise ValueError(f"unknown mode {mode!r}")
    t_arr = np.asarray(sorted(set(float(t) for t in t_grid)))
    if t_arr.size == 0:
        raise ValueError("empty time grid")
    if np.any(t_arr < 0.0):
        raise ValueError("t must be nonnegative")
    rho_arr = np.asarray([float(r) for r in rho_grid])
    if np.any(rho_arr <= 0.0):
        raise ValueError("rho must be positive")

    probe = sample_landscape_probe(landscape_params)
    a_n, log_cn = _resolve_log_cn(probe, a_n, c_n, log_cn)

    if mode == "annealed":
        return _annealed_grid(
            landscape_params, t_arr, rho_arr, a_n, log_cn, n_env, n_chain, init, step_cap
        )

    env_p = np.full((n_env, t_arr.size, rho_arr.size), np.nan)
    failed: list[int] = []

    def run_env(env: int):
        return env, _env_task(
            landscape_params, t_arr, env, n_chain, init, log_cn, step_cap
        )

    results = {}
    if threads > 1:
        with futures.ThreadPoolExecutor(max_workers=threads) as pool:
            for env, res in pool.map(run_env, range(n_env)):
                results[env] = res
    else:
        for env in range(n_env):
            results[env] = run_env(env)[1]

    for env in sorted(results):
        cross, capped = results[env]
        if capped.any():
            failed.append(env)
            continue
        for i, t in enumerate(t_arr):
            thresholds = t * (1.0 + rho_arr)
            env_p[env, i, :] = (cross[:, i][:, None] >= thresholds[None, :]).mean(axis=0)

    live = ~np.isnan(env_p[:, 0, 0])
    if not live.any():
        raise StepCapExceeded("every environment hit the step cap")
    grid = CorrelationGrid(
        t_grid=t_arr,
        rho_grid=rho_arr,
        env_p=env_p[live],
        n_chain=n_chain,
        mode=mode,
        init=init,
        master_seed=landscape_params.master_seed,
        failed_envs=failed,
    )
    return grid


def sample_landscape_probe(params: LandscapeParams) -> Landscape:
    """Scale carrier without touching vertex storage (for defaulting a_n, c_n)."""
    s = params.scales()
    return Landscape(
        n=params.n,
        mix_seed=np.uint64(1),
        storage_mode="on_demand",
        log_tau=None,
        params=params,
        scales=s,
    )


def _annealed_grid(params, t_arr, rho_arr, a_n, log_cn, n_env, n_chain, init, step_cap):
    """Fresh environment per replica, batched through the on-demand kernel."""
    if init == "gibbs":
        raise ValueError("annealed mode supports uniform or fixed starts only")
    n_rep = n_env * n_chain
    mix = np.empty(n_rep, dtype=np.uint64)
    chain_seeds = np.empty(n_rep, dtype=np.uint64)
    for r in range(n_rep):
        mix[r] = seeds.kernel_seed(params.master_seed, seeds.LANDSCAPE, r)
        chain_seeds[r] = seeds.kernel_seed(params.master_seed, seeds.CHAIN, r, 0)
    rng = seeds.generator(params.master_seed, seeds.INIT)
    if isinstance(init, (int, np.integer)):
        starts = np.full(n_rep, int(init), dtype=np.int64)
    else:
        starts = rng.integers(0, 1 << params.n, size=n_rep, dtype=np.int64)
    cross, steps, capped = _kernels.walk_crossings_annealed(
        mix,
        params.n,
        -params.beta * math.sqrt(params.n),
        log_cn,
        t_arr,
        chain_seeds,
        starts,
        np.int64(step_cap),
    )
    if capped.any():
        raise StepCapExceeded(f"{int(capped.sum())} annealed replicas hit the step cap")
    # group replicas into pseudo-environments so the grid shape is uniform
    env_p = np.empty((n_env, t_arr.size, rho_arr.size))
    for env in range(n_env):
        block = cross[env * n_chain : (env + 1) * n_chain]
        for i, t in enumerate(t_arr):
            thresholds = t * (1.0 + rho_arr)
            env_p[env, i, :] = (block[:, i][:, None] >= thresholds[None, :]).mean(axis=0)
    return CorrelationGrid(
        t_grid=t_arr,
        rho_grid=rho_arr,
        env_p=env_p,
        n_chain=n_chain,
        mode="annealed",
        init=init if isinstance(init, str) else "fixed",
        master_seed=params.master_seed,
    )


def estimate_correlation(
    landscape_params: LandscapeParams,
    t: float,
    rho: float,
    a_n: Optional[float] = None,
    c_n: Optional[float] = None,
    log_cn: Optional[float] = None,
    n_env: int = 20,
    n_chain: int = 500,
    mode: str = "quenched",
    init="uniform",
    step_cap: int = DEFAULT_STEP_CAP,
    threads: int = 1,
) -> CorrelationEstimate:
    """Monte Carlo estimate of C_n(t, t + rho*t); see estimate_correlation_grid."""
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if t == 0.0:
        # interval (0, 0) is empty: avoidance is certain
        return CorrelationEstimate(
            t=0.0, s=0.0, p_hat=1.0, ci_half_width=0.0,
            n_env=n_env, n_chain=n_chain, mode=mode,
            init=init if isinstance(init, str) else "fixed",
            master_seed=landscape_params.master_seed,
        )
    grid = estimate_correlation_grid(
        landscape_params,
        [t],
        [rho],
        a_n=a_n,
        c_n=c_n,
        log_cn=log_cn,
        n_env=n_env,
        n_chain=n_chain,
        mode=mode,
        init=init,
        step_cap=step_cap,
        threads=threads,
    )
    return grid.estimate(0, 0)


def stationary_start_correlation(
    landscape_params: LandscapeParams,
    t: float,
    s: float,
    a_n: Optional[float] = None,
    c_n: Optional[float] = None,
    log_cn: Optional[float] = None,
    n_env: int = 20,
    n_chain: int = 200,
    step_cap: int = DEFAULT_STEP_CAP,
    threads: int = 1,
) -> CorrelationEstimate:
    """C_n(t, t+s) from Gibbs-distributed starts at extreme scales.

    Returns per-environment estimates (env_estimates) for distributional
    comparison against the stationary limit object.
    """
    if s < 0.0 or t < 0.0:
        raise ValueError("t and s must be nonnegative")
    if s > t and t > 0.0:
        raise ValueError("crossover regime expects s <= t (or t = 0)")
    kind = classify_scale(landscape_params).kind
    if kind != "Extreme":
        raise ValueError(f"stationary start analysis expects an extreme scale, got {kind}")
    if s == 0.0:
        env_est = np.ones(n_env)
        return CorrelationEstimate(
            t=t, s=0.0, p_hat=1.0, ci_half_width=0.0, n_env=n_env, n_chain=n_chain,
            mode="quenched", init="gibbs", env_estimates=env_est,
            master_seed=landscape_params.master_seed,
        )
    if t == 0.0:
        raise ValueError("t must be positive when s > 0 (the interval anchor)")
    grid = estimate_correlation_grid(
        landscape_params,
        [t],
        [s / t],
        a_n=a_n,
        c_n=c_n,
        log_cn=log_cn,
        n_env=n_env,
        n_chain=n_chain,
        mode="quenched",
        init="gibbs",
        step_cap=step_cap,
        threads=threads,
    )
    est = grid.estimate(0, 0)
    est.s = s
    return est


def sample_skeleton(
    n: int, n_steps: int, master_seed: int, env: int = 0, chain: int = 0, start: Optional[int] = None
) -> np.ndarray:
    """Jump-chain skeleton J(0..n_steps) on its own seed stream."""
    seed = seeds.kernel_seed(master_seed, seeds.SKELETON, env, chain)
    if start is None:
        rng = seeds.generator(master_seed, seeds.INIT, env, chain)
        start = int(rng.integers(0, 1 << n))
    return _kernels.walk_skeleton(n, n_steps, seed, np.int64(start))
