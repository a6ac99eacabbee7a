"""Limit objects for the rescaled clock: arcsine law, Levy tails, marks.

Three limiting jump-intensity tails arise depending on how the
observation scale grows: nu_short (a unit tail: the clock becomes
deterministic), nu_int(u) = Gamma(1+alpha) u^{-alpha} (a stable
subordinator), and the random tail nu_ext(u) = eps' sum_k e^{-u/gamma_k}
driven by the marks gamma_k = Gamma_k^{-1/alpha} of a Poisson random
measure with mean measure mu(x, inf) = x^{-alpha}. The generalized
arcsine law Asl_alpha gives the limiting range-avoidance probability,
and simulate_subordinator / overshoot_correlation verify that
conclusion on sampled paths (small jumps below a cutoff are replaced
by their compensating drift).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import betainc, gammaincc

from . import _kernels, seeds
from .clock_dynamics import ClockPath, CorrelationEstimate, _ci95, range_avoids
from .gaussians import tail_inverse_log
from .landscape import CapacityError, LandscapeParams

LEPAGE_CAP = 26
DEFAULT_MARK_COUNT = 100_000


def nu_short(u):
    """Short-scale limiting tail: identically one."""
    return np.ones_like(np.asarray(u, dtype=float)) if np.ndim(u) else 1.0


def nu_int(u, alpha: float):
    """Intermediate-scale limiting tail Gamma(1+alpha) u^{-alpha}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    u = np.asarray(u, dtype=float) if np.ndim(u) else float(u)
    return math.gamma(1.0 + alpha) * u ** (-alpha)


def asl_cdf(alpha: float, u):
    """Generalized arcsine distribution function of parameter alpha.

    Asl_alpha(u) = (sin(alpha pi)/pi) int_0^u (1-x)^{-alpha} x^{alpha-1} dx,
    the regularized incomplete beta ratio with parameters (alpha, 1-alpha).
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0.0) or np.any(u_arr > 1.0):
        raise ValueError("u must lie in [0,1]")
    vals = betainc(alpha, 1.0 - alpha, u_arr)
    return float(vals) if np.ndim(u) == 0 else vals


def asl_table(alpha: float, u_grid) -> np.ndarray:
    """Two-column (u, Asl_alpha(u)) table for export."""
    u_arr = np.asarray(u_grid, dtype=float)
    return np.column_stack([u_arr, asl_cdf(alpha, u_arr)])


@dataclass(frozen=True)
class PrmMarks:
    """Decreasing marks gamma_k = Gamma_k^{-1/alpha} of the limiting PRM."""

    gamma: np.ndarray
    alpha: float
    Gamma_tail: float
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0,1)")
        if self.gamma.size < 1:
            raise ValueError("need at least one mark")
        if np.any(np.diff(self.gamma) >= 0.0):
            raise ValueError("marks must be strictly decreasing")
        if self.Gamma_tail <= 0.0:
            raise ValueError("Gamma_tail must be positive")

    @property
    def count(self) -> int:
        return int(self.gamma.size)

    @property
    def gamma_min(self) -> float:
        return float(self.gamma[-1])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("k,gamma\n")
            for k, g in enumerate(self.gamma, start=1):
                fh.write(f"{k},{float(g)!r}\n")


def sample_prm_marks(alpha: float, count: int,
                     rng: Union[int, np.random.Generator]) -> PrmMarks:
    """Marks from partial sums of unit exponentials: gamma_k = Gamma_k^{-1/alpha}."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    if count < 1:
        raise ValueError("count must be positive")
    seed = None
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = seeds.generator(seed, seeds.PRM)
    big_gamma = np.cumsum(rng.standard_exponential(count))
    gamma = big_gamma ** (-1.0 / alpha)
    return PrmMarks(gamma=gamma, alpha=alpha, Gamma_tail=float(big_gamma[-1]), seed=seed)


def _mu_tail_sum(marks: PrmMarks, u: float) -> float:
    """Mean of the missing mark sum E sum_{gamma < gamma_K} e^{-u/gamma}.

    Equals Gamma(1+alpha) u^{-alpha} Q(alpha, u/gamma_K) with Q the
    regularized upper incomplete gamma function.
    """
    a = marks.alpha
    return math.gamma(1.0 + a) * u ** (-a) * float(gammaincc(a, u / marks.gamma_min))


def nu_ext(marks: PrmMarks, eps_prime: float, u: float, _warn: bool = True) -> float:
    """Extreme-scale Levy tail eps' sum_k e^{-u/gamma_k}, truncation-corrected."""
    if u <= 0.0:
        raise ValueError("u must be positive")
    if eps_prime <= 0.0:
        raise ValueError("eps_prime must be positive")
    with np.errstate(under="ignore"):
        mark_sum = float(np.exp(-u / marks.gamma).sum())
    tail = _mu_tail_sum(marks, u)
    total = eps_prime * (mark_sum + tail)
    if _warn and tail > 1e-6 * (mark_sum + tail) and mark_sum + tail > 0.0:
        warnings.warn(
            f"nu_ext truncation correction is {tail / (mark_sum + tail):.2e} "
            f"of the value at u={u:g}; increase the mark count",
            RuntimeWarning,
            stacklevel=2,
        )
    return total


def integrated_nu_ext(marks: PrmMarks, eps_prime: float, delta: float) -> float:
    """int_0^delta nu_ext(u, inf) du with matched truncation accounting.

    Per mark the integral is gamma (1 - e^{-delta/gamma}); the missing
    small-mark mass contributes alpha/(1-alpha) gamma_K^{1-alpha} up to
    a factor (1 - O(e^{-delta/gamma_K})).
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    a = marks.alpha
    g = marks.gamma
    with np.errstate(under="ignore"):
        mark_part = float((g * (-np.expm1(-delta / g))).sum())
    gk = marks.gamma_min
    if delta / gk >= 30.0:
        tail_part = a / (1.0 - a) * gk ** (1.0 - a)
    else:
        tail_part, _ = quad(
            lambda x: -math.expm1(-delta / x) * a * x ** (-a), 0.0, gk, limit=200
        )
    return eps_prime * (mark_part + tail_part)


def c_sta(marks: PrmMarks, s: float, eps_prime: float = 1.0) -> float:
    """Stationary two-time correlation sum_k (gamma_k / sum gamma) e^{-s/gamma_k}.

    Equals the normalized integrated Levy tail
    int_s^inf nu_ext du / int_0^inf nu_ext du; eps_prime cancels and is
    accepted only for interface symmetry.
    """
    if s < 0.0:
        raise ValueError("s must be nonnegative")
    a = marks.alpha
    g = marks.gamma
    gk = marks.gamma_min
    tail_den = a / (1.0 - a) * gk ** (1.0 - a)
    den = float(g.sum()) + tail_den
    if s == 0.0:
        return 1.0
    with np.errstate(under="ignore"):
        num = float((g * np.exp(-s / g)).sum())
    z = s / gk
    if z < 50.0:
        tail_num, _ = quad(
            lambda x: math.exp(-s / x) * a * x ** (-a), 0.0, gk, limit=200
        )
        num += tail_num
    return num / den


def lepage_total(marks: PrmMarks) -> float:
    """sum gamma_k plus the analytic small-mark remainder (finite for alpha < 1)."""
    a = marks.alpha
    return float(marks.gamma.sum()) + a / (1.0 - a) * marks.gamma_min ** (1.0 - a)


@dataclass(frozen=True)
class LepageSample:
    """An ordered rescaled landscape built from exponential partial sums."""

    log_gamma: np.ndarray          # decreasing: log gamma_n(x^{(k)})
    vertices: np.ndarray           # vertex receiving the k-th largest value
    params: LandscapeParams

    def __post_init__(self):
        if np.any(np.diff(self.log_gamma) > 0.0):
            raise ValueError("ordered values must be nonincreasing")
        if self.vertices.size != self.log_gamma.size:
            raise ValueError("labelling size mismatch")

    @property
    def gamma(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_gamma)


def lepage_landscape(params: LandscapeParams, env: int = 0) -> LepageSample:
    """Ordered landscape gamma_n(x^{(k)}) = r_n^{-1} G_n^{-1}(Gamma_k / Gamma_{N+1}).

    G_n is the holding-parameter tail, inverted through the log-tail
    machinery; the labelling onto vertices is a seeded uniform
    permutation on its own stream.
    """
    n = params.n
    if n > LEPAGE_CAP:
        raise CapacityError(f"ordered construction capped at n={LEPAGE_CAP}")
    scales = params.scales()
    size = 1 << n
    rng = seeds.generator(params.master_seed, seeds.PRM, env)
    big_gamma = np.cumsum(rng.standard_exponential(size + 1))
    q = big_gamma[:-1] / big_gamma[-1]
    bsn = params.beta * math.sqrt(n)
    log_gamma = bsn * (tail_inverse_log(np.log(q)) - scales.Bbar_n)
    perm_rng = seeds.generator(params.master_seed, seeds.PERMUTATION, env)
    vertices = perm_rng.permutation(size).astype(np.int64)
    return LepageSample(log_gamma=log_gamma, vertices=vertices, params=params)


@dataclass(frozen=True)
class SubordinatorSpec:
    """A driftless increasing Levy process given by its jump tail.

    kind "stable": nu(u, inf) = Gamma(1+alpha) u^{-alpha}.
    kind "extreme": nu(u, inf) = eps' sum_k e^{-u/gamma_k} (+ truncation
    correction), marks fixed per spec instance (quenched environment).
    """

    kind: str
    alpha: float
    marks: Optional[PrmMarks] = None
    eps_prime: float = 1.0

    def __post_init__(self):
        if self.kind not in ("stable", "extreme"):
            raise ValueError(f"unknown subordinator kind {self.kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0,1)")
        if self.kind == "extreme":
            if self.marks is None:
                raise ValueError("extreme kind needs marks")
            if self.marks.alpha != self.alpha:
                raise ValueError("marks index must match spec alpha")

    @classmethod
    def stable(cls, alpha: float) -> "SubordinatorSpec":
        return cls(kind="stable", alpha=alpha)

    @classmethod
    def extreme(cls, marks: PrmMarks, eps_prime: float) -> "SubordinatorSpec":
        return cls(kind="extreme", alpha=marks.alpha, marks=marks, eps_prime=eps_prime)

    def nu_tail(self, u: float) -> float:
        if u <= 0.0:
            raise ValueError("u must be positive (the tail diverges at 0)")
        if self.kind == "stable":
            return math.gamma(1.0 + self.alpha) * u ** (-self.alpha)
        return nu_ext(self.marks, self.eps_prime, u, _warn=False)

    def tail_inverse(self, w: float) -> float:
        """u with nu(u, inf) = w."""
        if w <= 0.0:
            raise ValueError("w must be positive")
        if self.kind == "stable":
            return (math.gamma(1.0 + self.alpha) / w) ** (1.0 / self.alpha)
        lo, hi = 1e-12, 1.0
        while self.nu_tail(hi) > w:
            hi *= 8.0
            if hi > 1e30:
                raise RuntimeError("tail inverse bracket failed (w too small)")
        while self.nu_tail(lo) < w:
            lo /= 8.0
            if lo < 1e-300:
                raise RuntimeError("tail inverse bracket failed (w too large)")
        return brentq(lambda x: self.nu_tail(x) - w, lo, hi, xtol=1e-300, rtol=1e-14)

    def integrated_tail(self, delta: float) -> float:
        """int_0^delta nu(u, inf) du (finite for alpha < 1)."""
        if delta <= 0.0:
            raise ValueError("delta must be positive")
        if self.kind == "stable":
            return math.gamma(1.0 + self.alpha) * delta ** (1.0 - self.alpha) / (1.0 - self.alpha)
        return integrated_nu_ext(self.marks, self.eps_prime, delta)

    def drift_rate(self, delta_cut: float) -> float:
        """Compensation for removed small jumps: int_0^delta u dnu(u)."""
        return self.integrated_tail(delta_cut) - delta_cut * self.nu_tail(delta_cut)

    def _inverse_table(self, delta_cut: float, points: int = 4096):
        """(log w ascending, log u descending) table for vectorized inversion."""
        w_hi = self.nu_tail(delta_cut)
        u_hi = self.tail_inverse(w_hi * 1e-14)
        u_grid = np.geomspace(delta_cut, u_hi, points)
        if self.kind == "stable":
            w_grid = math.gamma(1.0 + self.alpha) * u_grid ** (-self.alpha)
        else:
            g = np.sort(self.marks.gamma)  # ascending
            w_grid = np.empty(points)
            for i, u in enumerate(u_grid):
                # terms with gamma <= u/45 are below e^-45; keep the rest
                k0 = np.searchsorted(g, u / 45.0)
                k0 = min(k0, g.size - 8) if g.size > 8 else 0
                with np.errstate(under="ignore"):
                    w_grid[i] = self.eps_prime * float(np.exp(-u / g[k0:]).sum())
                w_grid[i] += self.eps_prime * _mu_tail_sum(self.marks, float(u))
        log_w = np.log(w_grid[::-1]).copy()   # ascending in w
        log_u = np.log(u_grid[::-1]).copy()   # descending in u
        return log_w, log_u


@dataclass
class SubordinatorPath:
    """Jumps >= delta_cut on [0, horizon] plus compensating linear drift."""

    times: np.ndarray
    sizes: np.ndarray
    drift_rate: float
    horizon: float
    delta_cut: float
    alpha: float

    def __post_init__(self):
        if np.any(np.diff(self.times) < 0.0):
            raise ValueError("jump times must be sorted")
        if np.any(self.sizes < self.delta_cut * (1.0 - 1e-12)):
            raise ValueError("jump sizes must be at least the cutoff")

    def value(self, t: float) -> float:
        """S(t) = drift t + sum of jumps up to and including time t."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError("t outside the simulated window")
        k = np.searchsorted(self.times, t, side="right")
        return self.drift_rate * t + float(self.sizes[:k].sum())

    def levels(self):
        """Pre-jump and post-jump values (M_k, P_k) at each jump."""
        before = np.cumsum(self.sizes) - self.sizes
        m = self.drift_rate * self.times + before
        return m, m + self.sizes

    def range_avoids(self, t: float, s: float) -> bool:
        """Whether the closure of the path range misses (t, t+s).

        Delegates to the clock-path predicate on the achieved levels;
        a drift segment covering the whole interval contributes an
        interior witness point so the discrete predicate stays exact.
        """
        if t < 0.0 or s < 0.0:
            raise ValueError("t and s must be nonnegative")
        if s == 0.0:
            return True
        m, p = self.levels()
        final = self.drift_rate * self.horizon + float(self.sizes.sum())
        seg_lo = np.concatenate([[0.0], p])     # drift segments start after each jump
        seg_hi = np.concatenate([m, [final]])
        pieces = [seg_lo, seg_hi]
        if np.any((seg_lo <= t) & (seg_hi >= t + s)):
            pieces.append(np.array([t + 0.5 * s]))
        arr = np.unique(np.concatenate(pieces))
        shim = ClockPath(a_n=1.0, log_cn=0.0, rescaled_values=arr)
        return range_avoids(shim, t, s)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("time,size\n")
            for t, x in zip(self.times, self.sizes):
                fh.write(f"{float(t)!r},{float(x)!r}\n")


def default_delta_cut(scale: float) -> float:
    """Cutoff four decades below the reference scale (interval or horizon)."""
    if scale <= 0.0:
        raise ValueError("scale must be positive")
    return 1e-4 * scale


def simulate_subordinator(spec: SubordinatorSpec, horizon: float,
                          delta_cut: Optional[float] = None,
                          rng: Union[int, np.random.Generator, None] = None,
                          drift: bool = True) -> SubordinatorPath:
    """Sample the Poisson jump set above the cutoff, plus compensating drift."""
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = seeds.generator(0 if rng is None else int(rng), seeds.SUBORDINATOR)
    if delta_cut is None:
        delta_cut = default_delta_cut(spec.tail_inverse(1.0 / horizon))
    if delta_cut <= 0.0:
        raise ValueError("delta_cut must be positive (the Levy tail diverges at 0)")
    lam = horizon * spec.nu_tail(delta_cut)
    count = int(rng.poisson(lam))
    times = np.sort(rng.random(count)) * horizon
    w = spec.nu_tail(delta_cut) * rng.random(count)
    if spec.kind == "stable":
        sizes = (math.gamma(1.0 + spec.alpha) / w) ** (1.0 / spec.alpha)
    else:
        sizes = np.array([spec.tail_inverse(float(x)) for x in w])
    d = spec.drift_rate(delta_cut) if drift else 0.0
    return SubordinatorPath(times=times, sizes=sizes, drift_rate=d,
                            horizon=horizon, delta_cut=delta_cut, alpha=spec.alpha)


def overshoot_correlation(spec: SubordinatorSpec, t: float, rho: float,
                          replicas: int,
                          rng: Union[int, np.random.Generator] = 0,
                          delta_cut: Optional[float] = None,
                          drift: bool = True,
                          block_jump_target: float = 64.0) -> CorrelationEstimate:
    """P(range of the subordinator misses (t, t(1+rho))) by blockwise MC.

    Each replica advances in horizon blocks until its level passes t:
    a jump straddling both endpoints decides avoidance, a continuous
    (drift) crossing decides non-avoidance. Levy increments over
    disjoint blocks are independent, so no upfront horizon is needed.
    """
    if t <= 0.0 or rho <= 0.0:
        raise ValueError("t and rho must be positive")
    if replicas < 1:
        raise ValueError("need at least one replica")
    s = rho * t
    if delta_cut is None:
        delta_cut = default_delta_cut(t + s)
    nu_delta = spec.nu_tail(delta_cut)
    t_block = block_jump_target / nu_delta
    d = spec.drift_rate(delta_cut) if drift else 0.0

    if isinstance(rng, (int, np.integer)):
        kseeds = seeds.kernel_seeds(int(rng), seeds.SUBORDINATOR, 0, replicas)
    else:
        kseeds = rng.integers(1, np.iinfo(np.uint64).max, size=replicas, dtype=np.uint64)

    if spec.kind == "stable":
        alpha_flag = spec.alpha
        c_flag = math.gamma(1.0 + spec.alpha)
        log_w = np.zeros(2)
        log_u = np.zeros(2)
    else:
        alpha_flag = 0.0
        c_flag = 0.0
        log_w, log_u = spec._inverse_table(delta_cut)

    flags = _kernels.subordinator_avoidance(
        t, s, t_block, block_jump_target, nu_delta, d,
        alpha_flag, c_flag, log_w, log_u, kseeds, np.int64(100_000)
    )
    if np.any(flags < 0):
        raise RuntimeError("replicas failed to reach the interval within the block cap")
    p = float(flags.mean())
    ci = _ci95(p, None, replicas)
    return CorrelationEstimate(
        t=t, s=s, p_hat=p, ci_half_width=ci, n_env=1, n_chain=replicas,
        mode="subordinator", init="levy",
        master_seed=int(rng) if isinstance(rng, (int, np.integer)) else None,
    )
