"""The REM landscape and its scale machinery.

A landscape is the quenched field tau(x) = exp(-beta*sqrt(n)*H(x)) of
i.i.d. standard Gaussian energies on the n-cube. Observation scales are
parametrized by r_n > 1 through b_n * P(tau >= r_n) = 1; all derived
quantities (b_n, m_n, the tail exponent alpha_n, the tail functions
h_n and its inverse g_n) live here.

tau spans exp(+-beta*sqrt(n)*max|H|), far beyond float range in the
regimes of interest, so every stored or derived quantity is kept in
log-space; exponentiation happens only inside guarded expressions of
the form exp(-u/gamma).
"""

from __future__ import annotations

import functools
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import optimize

from . import _kernels, seeds
from .gaussians import log_gaussian_tail, tail_inverse_log

LOG2 = math.log(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

DENSE_CAP = 30
ON_DEMAND_CAP = 48

# finite-n surrogates for the asymptotic scale taxonomy
SHORT_THRESHOLD = 0.05      # short iff m_n/n <= this
EXTREME_THRESHOLD = 0.5     # extreme iff 2^{m_n}/2^n >= this


class CapacityError(ValueError):
    """Requested dimension exceeds the storage caps."""


@dataclass(frozen=True)
class ScaleSpec:
    """Space scale given as one of: explicit r_n (stored as log), a target
    epsilon for m_n = ceil(eps*n), or an explicit integer m_n."""

    log_rn: Optional[float] = None
    epsilon: Optional[float] = None
    m_n: Optional[int] = None

    def __post_init__(self):
        given = sum(v is not None for v in (self.log_rn, self.epsilon, self.m_n))
        if given != 1:
            raise ValueError("give exactly one of log_rn / epsilon / m_n")
        if self.epsilon is not None and not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must be in (0, 1]")
        if self.log_rn is not None and self.log_rn <= 0.0:
            raise ValueError("explicit r_n must exceed 1")
        if self.m_n is not None and self.m_n < 1:
            raise ValueError("m_n must be a positive integer")

    @classmethod
    def from_rn(cls, r_n: float) -> "ScaleSpec":
        if r_n <= 1.0:
            raise ValueError("explicit r_n must exceed 1")
        return cls(log_rn=math.log(r_n))

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "ScaleSpec":
        return cls(epsilon=epsilon)

    @classmethod
    def from_mn(cls, m_n: int) -> "ScaleSpec":
        return cls(m_n=int(m_n))


@dataclass(frozen=True)
class LandscapeParams:
    n: int
    beta: float
    scale: ScaleSpec
    master_seed: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not self.beta > 0.0:
            raise ValueError("beta must be positive (beta = 0 degenerates the landscape)")

    def scales(self) -> "Scales":
        return compute_scales(self.n, self.beta, self.scale)


@dataclass(frozen=True)
class Scales:
    """Derived scale quantities for one (n, beta, scale) triple."""

    n: int
    beta: float
    log_rn: float       # log r_n
    log_bn: float       # log b_n
    m_n: float          # log2 b_n
    Bbar_n: float       # log r_n / (beta sqrt n), the tail quantile of 1/b_n
    B_n: float          # root of b_n phi(B)/B = 1
    A_n: float          # 1/B_n
    alpha_n: float      # B_n / (beta sqrt n)

    @property
    def b_n(self) -> float:
        return math.exp(self.log_bn)

    @property
    def r_n(self) -> float:
        """r_n in linear units; inf when beyond float range."""
        return math.exp(self.log_rn) if self.log_rn < 709.0 else math.inf

    @property
    def a_n(self) -> float:
        """Default jump-chain time scale paired with r_n (a_n = b_n)."""
        return self.b_n


def hall_surrogate(b_n: float) -> float:
    """Closed-form approximation of B_n, used to bracket the solver."""
    lb = math.log(b_n)
    if lb <= 1.0:
        raise ValueError("surrogate needs log b_n > 1")
    s = math.sqrt(2.0 * lb)
    return s - 0.5 * (math.log(lb) + math.log(4.0 * math.pi)) / s


def solve_Bn(b_n: float, tol: float = 1e-12):
    """Solve b_n * phi(B)/B = 1 for B > 0; returns (B_n, A_n).

    The residual log(b_n) - B^2/2 - log(sqrt(2 pi)) - log B is strictly
    decreasing on (0, inf) with full range, so the root exists and is
    unique for every b_n > 0 (the two-branch worry for the equivalent
    form B = b_n*phi(B) resolves to the larger root automatically).
    Bracketing starts from the Hall surrogate when available.
    """
    if not b_n > 0.0:
        raise ValueError("b_n must be positive")
    logb = math.log(b_n)

    def residual(B):
        return logb - 0.5 * B * B - LOG_SQRT_2PI - math.log(B)

    if logb > 1.0:
        bhat = hall_surrogate(b_n)
        lo = max(bhat - 5.0 / bhat, 1e-12)
        hi = bhat + 5.0 / bhat
    else:
        lo, hi = 1e-12, 1.0
    while residual(lo) < 0.0:
        lo /= 2.0
        if lo < 1e-300:
            raise ValueError("b_n below solvable range")
    while residual(hi) > 0.0:
        hi *= 2.0
    B = optimize.brentq(residual, lo, hi, xtol=1e-300, rtol=8.9e-16)
    # residual is machine-exact at the brentq root; tol kept as contract guard
    if abs(residual(B)) > tol * max(1.0, abs(logb)):
        raise RuntimeError("B_n solver did not reach tolerance")
    return B, 1.0 / B


@functools.lru_cache(maxsize=1024)
def compute_scales(n: int, beta: float, scale: ScaleSpec) -> Scales:
    # pure in hashable frozen inputs; cached because tail evaluations
    # (h_n, g_n) re-derive the scales on every call, including inside
    # quadrature loops
    bsn = beta * math.sqrt(n)
    if scale.log_rn is not None:
        log_rn = float(scale.log_rn)
        Bbar = log_rn / bsn
        log_bn = -log_gaussian_tail(Bbar)
    else:
        m = int(scale.m_n) if scale.m_n is not None else math.ceil(scale.epsilon * n)
        log_bn = m * LOG2
        Bbar = float(tail_inverse_log(-log_bn))
        log_rn = bsn * Bbar
    B_n, A_n = solve_Bn(math.exp(log_bn))
    return Scales(
        n=n,
        beta=beta,
        log_rn=log_rn,
        log_bn=log_bn,
        m_n=log_bn / LOG2,
        Bbar_n=Bbar,
        B_n=B_n,
        A_n=A_n,
        alpha_n=B_n / bsn,
    )


def validate_scale_identity(scales: Scales, rtol: float = 1e-10) -> float:
    """Check b_n * G(r_n) = 1; returns the relative defect."""
    log_defect = scales.log_bn + log_gaussian_tail(scales.Bbar_n)
    defect = abs(math.expm1(log_defect))
    if defect > rtol:
        raise ValueError(f"scale identity violated: relative defect {defect:.3e}")
    return defect


def beta_critical(epsilon: float = 1.0) -> float:
    """beta_c(eps) = sqrt(2 eps log 2)."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    return math.sqrt(2.0 * epsilon * LOG2)


@dataclass(frozen=True)
class ScaleClass:
    kind: str                       # Short | Intermediate | Extreme
    epsilon: float                  # m_n / n
    m_n: float
    alpha_n: float
    alpha_eps: float                # beta_c(eps) / beta
    epsilon_prime: Optional[float]  # 2^{m_n}/2^n, Extreme only


def classify_scale(
    params: LandscapeParams,
    short_threshold: float = SHORT_THRESHOLD,
    extreme_threshold: float = EXTREME_THRESHOLD,
) -> ScaleClass:
    s = params.scales()
    validate_scale_identity(s)
    eps = s.m_n / params.n
    eps_prime = 2.0 ** (s.m_n - params.n)
    if eps_prime >= extreme_threshold:
        kind = "Extreme"
    elif eps <= short_threshold:
        kind = "Short"
    else:
        kind = "Intermediate"
    alpha_eps = beta_critical(min(eps, 1.0)) / params.beta if eps > 0 else 0.0
    return ScaleClass(
        kind=kind,
        epsilon=eps,
        m_n=s.m_n,
        alpha_n=s.alpha_n,
        alpha_eps=alpha_eps,
        epsilon_prime=eps_prime if kind == "Extreme" else None,
    )


def derive_rn_from_epsilon(n: int, beta: float, epsilon: float) -> float:
    """r_n for the dyadic scale m_n = ceil(eps*n); inf when log r_n > 709."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError("epsilon must be in (0, 1]")
    s = compute_scales(n, beta, ScaleSpec.from_epsilon(epsilon))
    validate_scale_identity(s)
    return s.r_n


def h_n(v, params: LandscapeParams):
    """h_n(v) = b_n * G(r_n v), the rescaled tail function; h_n(1) = 1."""
    s = params.scales()
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0.0):
        raise ValueError("h_n requires v > 0")
    bsn = params.beta * math.sqrt(params.n)
    out = np.exp(s.log_bn + log_gaussian_tail(s.Bbar_n + np.log(v) / bsn))
    return float(out) if out.ndim == 0 else out


def g_n(u, params: LandscapeParams):
    """Inverse of h_n: g_n(u) = r_n^{-1} G^{-1}(u/b_n); 0 for u >= b_n."""
    s = params.scales()
    u = np.asarray(u, dtype=float)
    scalar = u.ndim == 0
    u = np.atleast_1d(u).astype(float)
    if np.any(u <= 0.0):
        raise ValueError("g_n requires u > 0")
    bsn = params.beta * math.sqrt(params.n)
    out = np.zeros_like(u)
    live = np.log(u) < s.log_bn
    if np.any(live):
        z = tail_inverse_log(np.log(u[live]) - s.log_bn)
        out[live] = np.exp(bsn * (z - s.Bbar_n))
    return float(out[0]) if scalar else out


# --------------------------------------------------------------- realization

@dataclass
class Landscape:
    """A realized environment: log tau over the n-cube.

    storage_mode 'dense' holds the full 2^n array; 'on_demand'
    regenerates any vertex from the (seed, vertex) hash, bit-identical
    to the dense table. params/scales may be absent for synthetic
    instances built by tests.
    """

    n: int
    mix_seed: np.uint64
    storage_mode: str
    log_tau: Optional[np.ndarray] = None
    params: Optional[LandscapeParams] = None
    scales: Optional[Scales] = None
    env: int = 0

    @property
    def minus_beta_sqrt_n(self) -> float:
        if self.params is None:
            raise ValueError("synthetic landscape has no params")
        return -self.params.beta * math.sqrt(self.n)

    def log_tau_at(self, vertices) -> np.ndarray:
        v = np.atleast_1d(np.asarray(vertices, dtype=np.int64))
        if self.log_tau is not None:
            return self.log_tau[v]
        return _kernels.log_tau_at(self.mix_seed, v, self.minus_beta_sqrt_n)

    def log_gamma(self, vertices) -> np.ndarray:
        """log of tau/r_n for the given vertices."""
        if self.scales is None:
            raise ValueError("landscape has no scale information")
        return self.log_tau_at(vertices) - self.scales.log_rn

    def exp_neg_u_over_gamma(self, u: float) -> np.ndarray:
        """exp(-u/gamma(x)) over all vertices (dense only).

        The guarded form: log gamma large positive gives 1, large
        negative underflows cleanly to 0.
        """
        if self.log_tau is None:
            raise CapacityError("dense evaluation requested on an on-demand landscape")
        if self.scales is None:
            raise ValueError("landscape has no scale information")
        log_gamma = self.log_tau - self.scales.log_rn
        with np.errstate(over="ignore"):
            inv_gamma = np.exp(-log_gamma)
        return np.exp(-u * inv_gamma)


def sample_landscape(params: LandscapeParams, env: int = 0, storage: str = "auto") -> Landscape:
    """Draw the environment for (params, env) under the landscape seed stream."""
    s = params.scales()
    validate_scale_identity(s)
    if storage == "auto":
        storage = "dense" if params.n <= DENSE_CAP else "on_demand"
    if storage not in ("dense", "on_demand"):
        raise ValueError(f"unknown storage mode {storage!r}")
    cap = DENSE_CAP if storage == "dense" else ON_DEMAND_CAP
    if params.n > cap:
        raise CapacityError(f"n={params.n} exceeds the {storage} cap of {cap}")
    mix_seed = seeds.kernel_seed(params.master_seed, seeds.LANDSCAPE, env)
    log_tau = None
    if storage == "dense":
        log_tau = _kernels.fill_log_tau(mix_seed, params.n, -params.beta * math.sqrt(params.n))
    return Landscape(
        n=params.n,
        mix_seed=mix_seed,
        storage_mode=storage,
        log_tau=log_tau,
        params=params,
        scales=s,
        env=env,
    )


def constant_landscape(n: int, log_tau_value: float = 0.0) -> Landscape:
    """Degenerate tau = const environment; testing hook (beta = 0 analogue)."""
    return Landscape(
        n=n,
        mix_seed=np.uint64(1),
        storage_mode="dense",
        log_tau=np.full(1 << n, float(log_tau_value)),
    )


# ------------------------------------------------------------------- blob io

_BLOB_MAGIC = b"REMLSCP1"


def export_landscape(landscape: Landscape, path: str | Path) -> Path:
    """Binary blob (header + 8-byte log tau payload) and a JSON sidecar.

    The header stores log r_n rather than r_n: r_n overflows float64 in
    large-beta regimes while its log never does.
    """
    if landscape.log_tau is None:
        raise CapacityError("only dense landscapes can be exported")
    if landscape.params is None or landscape.scales is None:
        raise ValueError("synthetic landscapes carry no parameters to export")
    path = Path(path)
    p, s = landscape.params, landscape.scales
    header = _BLOB_MAGIC + struct.pack("<iddQ", p.n, p.beta, s.log_rn, int(landscape.mix_seed))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(landscape.log_tau, dtype="<f8").tobytes())
    cls = classify_scale(p)
    sidecar = {
        "schema_version": 1,
        "n": p.n,
        "beta": p.beta,
        "master_seed": p.master_seed,
        "env": landscape.env,
        "log_r_n": s.log_rn,
        "r_n": s.r_n if math.isfinite(s.r_n) else None,
        "b_n": s.b_n,
        "m_n": s.m_n,
        "Bbar_n": s.Bbar_n,
        "B_n": s.B_n,
        "alpha_n": s.alpha_n,
        "kind": cls.kind,
        "epsilon": cls.epsilon,
        "epsilon_prime": cls.epsilon_prime,
    }
    sidecar_path = path.with_suffix(path.suffix + ".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2))
    return sidecar_path


def import_landscape(path: str | Path) -> Landscape:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(_BLOB_MAGIC))
        if magic != _BLOB_MAGIC:
            raise ValueError(f"{path}: not a landscape blob")
        n, beta, log_rn, mix_seed = struct.unpack("<iddQ", fh.read(4 + 8 + 8 + 8))
        payload = np.frombuffer(fh.read(), dtype="<f8")
    if payload.size != 1 << n:
        raise ValueError(f"{path}: payload has {payload.size} entries, expected {1 << n}")
    master_seed, env = int(mix_seed), 0
    sidecar_path = path.with_suffix(path.suffix + ".json")
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        master_seed = int(sidecar.get("master_seed", master_seed))
        env = int(sidecar.get("env", 0))
    params = LandscapeParams(
        n=n, beta=beta, scale=ScaleSpec(log_rn=log_rn), master_seed=master_seed
    )
    return Landscape(
        n=n,
        mix_seed=np.uint64(mix_seed),
        storage_mode="dense",
        log_tau=payload.astype(np.float64),
        params=params,
        scales=params.scales(),
        env=env,
    )
