"""Compiled inner loops.

Everything performance-critical sits here: counter-based landscape
generation, the hypercube walk with its clock accumulation, and the
trap-model analogue. The RNG is an inline xorshift64* stream per chain;
landscape values come from a splitmix64 hash of (seed, vertex) fed
through a normal quantile, so dense tables and on-demand evaluation are
bit-identical by construction.

RNG consumption order per step is a contract shared by the batch and
path-recording kernels (they must stay interchangeable): one draw for
the holding exponential, then one or more draws for the rejection-
sampled flip index.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange, uint64

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(inline="always")
def _splitmix(seed, v):
    z = seed + (uint64(v) + uint64(1)) * uint64(0x9E3779B97F4A7C15)
    z ^= z >> uint64(30)
    z *= uint64(0xBF58476D1CE4E5B9)
    z ^= z >> uint64(27)
    z *= uint64(0x94D049BB133111EB)
    z ^= z >> uint64(31)
    return z


@njit(inline="always")
def _xorshift(state):
    x = state[0]
    x ^= x >> uint64(12)
    x ^= x << uint64(25)
    x ^= x >> uint64(27)
    state[0] = x
    return x * uint64(0x2545F4914F6CDD1D)


@njit(inline="always")
def _u01(z):
    # open-interval uniform: never 0 or 1, safe under log
    return (np.float64(z >> uint64(11)) + 0.5) * (2.0 ** -53)


@njit(inline="always")
def _norm_quantile(p):
    """Inverse standard normal CDF.

    Abramowitz-Stegun 26.2.23 start (4.5e-4 absolute) polished by two
    Halley iterations on ndtr(x) - p; agrees with scipy.special.ndtri
    to a few ulp across (0, 1).
    """
    if p > 0.5:
        q = 1.0 - p
        sgn = -1.0
    else:
        q = p
        sgn = 1.0
    t = math.sqrt(-2.0 * math.log(q))
    x = -(t - (2.515517 + t * (0.802853 + t * 0.010328))
          / (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308))))
    for _ in range(2):
        f = 0.5 * math.erfc(-x / _SQRT2) - q
        fp = math.exp(-0.5 * x * x) * _INV_SQRT_2PI
        d = f / fp
        x = x - d / (1.0 + 0.5 * x * d)
    return sgn * x


@njit(inline="always")
def _site_log_tau(mix_seed, v, minus_beta_sqrt_n):
    return minus_beta_sqrt_n * _norm_quantile(_u01(_splitmix(mix_seed, v)))


@njit(cache=True, parallel=True)
def fill_log_tau(mix_seed, n, minus_beta_sqrt_n):
    """Dense table of log tau over all 2^n vertices."""
    size = 1 << n
    out = np.empty(size)
    for v in prange(size):
        out[v] = _site_log_tau(uint64(mix_seed), uint64(v), minus_beta_sqrt_n)
    return out


@njit(cache=True)
def log_tau_at(mix_seed, vertices, minus_beta_sqrt_n):
    """On-demand log tau for an array of vertex indices."""
    out = np.empty(vertices.size)
    for i in range(vertices.size):
        out[i] = _site_log_tau(uint64(mix_seed), uint64(vertices[i]), minus_beta_sqrt_n)
    return out


@njit(inline="always")
def _flip_mask(n):
    nbits = 1
    while (1 << nbits) < n:
        nbits += 1
    return uint64((1 << nbits) - 1)


@njit(cache=True, nogil=True)
def walk_crossings_dense(log_tau, n, log_cn, t_grid, seeds, starts, cap):
    """Batch of chains on a dense landscape, recording clock crossings.

    cross[c, i] is the first rescaled clock value strictly above
    t_grid[i] (t_grid must be increasing). steps[c] counts holding
    draws; capped[c] marks chains that hit the step cap before the last
    grid point.
    """
    n_chain = seeds.shape[0]
    nt = t_grid.shape[0]
    cross = np.zeros((n_chain, nt))
    steps = np.zeros(n_chain, dtype=np.int64)
    capped = np.zeros(n_chain, dtype=np.bool_)
    mask = _flip_mask(n)
    for c in range(n_chain):
        state = np.empty(1, dtype=np.uint64)
        state[0] = seeds[c]
        v = starts[c]
        clock = 0.0
        it = np.int64(0)
        k = 0
        while k < nt and it < cap:
            e = -math.log(_u01(_xorshift(state)))
            clock += math.exp(log_tau[v] - log_cn) * e
            while k < nt and clock > t_grid[k]:
                cross[c, k] = clock
                k += 1
            while True:
                f = _xorshift(state) & mask
                if f < uint64(n):
                    break
            v = v ^ (np.int64(1) << np.int64(f))
            it += 1
        steps[c] = it
        capped[c] = k < nt
    return cross, steps, capped


@njit(cache=True, nogil=True)
def walk_crossings_ondemand(mix_seed, n, minus_beta_sqrt_n, log_cn, t_grid, seeds, starts, cap):
    """Same contract as walk_crossings_dense with on-the-fly landscape values."""
    n_chain = seeds.shape[0]
    nt = t_grid.shape[0]
    cross = np.zeros((n_chain, nt))
    steps = np.zeros(n_chain, dtype=np.int64)
    capped = np.zeros(n_chain, dtype=np.bool_)
    mask = _flip_mask(n)
    for c in range(n_chain):
        state = np.empty(1, dtype=np.uint64)
        state[0] = seeds[c]
        v = starts[c]
        clock = 0.0
        it = np.int64(0)
        k = 0
        while k < nt and it < cap:
            e = -math.log(_u01(_xorshift(state)))
            lt = _site_log_tau(uint64(mix_seed), uint64(v), minus_beta_sqrt_n)
            clock += math.exp(lt - log_cn) * e
            while k < nt and clock > t_grid[k]:
                cross[c, k] = clock
                k += 1
            while True:
                f = _xorshift(state) & mask
                if f < uint64(n):
                    break
            v = v ^ (np.int64(1) << np.int64(f))
            it += 1
        steps[c] = it
        capped[c] = k < nt
    return cross, steps, capped


@njit(cache=True, nogil=True)
def walk_crossings_annealed(mix_seeds, n, minus_beta_sqrt_n, log_cn, t_grid, seeds, starts, cap):
    """Annealed batch: replica c runs in its own environment mix_seeds[c]."""
    n_chain = seeds.shape[0]
    nt = t_grid.shape[0]
    cross = np.zeros((n_chain, nt))
    steps = np.zeros(n_chain, dtype=np.int64)
    capped = np.zeros(n_chain, dtype=np.bool_)
    mask = _flip_mask(n)
    for c in range(n_chain):
        state = np.empty(1, dtype=np.uint64)
        state[0] = seeds[c]
        mix = uint64(mix_seeds[c])
        v = starts[c]
        clock = 0.0
        it = np.int64(0)
        k = 0
        while k < nt and it < cap:
            e = -math.log(_u01(_xorshift(state)))
            lt = _site_log_tau(mix, uint64(v), minus_beta_sqrt_n)
            clock += math.exp(lt - log_cn) * e
            while k < nt and clock > t_grid[k]:
                cross[c, k] = clock
                k += 1
            while True:
                f = _xorshift(state) & mask
                if f < uint64(n):
                    break
            v = v ^ (np.int64(1) << np.int64(f))
            it += 1
        steps[c] = it
        capped[c] = k < nt
    return cross, steps, capped


@njit(cache=True, nogil=True)
def walk_path_dense(log_tau, n, log_cn, horizon, seed, start, cap, record_vertices):
    """Single chain with a full jump record, RNG-compatible with the batch kernel.

    Returns (values, vertices, capped): values[k] is the rescaled clock
    after holding k, vertices[k] the vertex occupied during holding k
    (present only when record_vertices).
    """
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    mask = _flip_mask(n)
    cap_i = min(cap, np.int64(2 ** 62))
    buf = np.empty(1024)
    vbuf = np.empty(1024 if record_vertices else 0, dtype=np.int64)
    v = start
    clock = 0.0
    it = np.int64(0)
    while True:
        e = -math.log(_u01(_xorshift(state)))
        clock += math.exp(log_tau[v] - log_cn) * e
        if it >= buf.shape[0]:
            nbuf = np.empty(buf.shape[0] * 2)
            nbuf[: buf.shape[0]] = buf
            buf = nbuf
            if record_vertices:
                nv = np.empty(vbuf.shape[0] * 2, dtype=np.int64)
                nv[: vbuf.shape[0]] = vbuf
                vbuf = nv
        buf[it] = clock
        if record_vertices:
            vbuf[it] = v
        it += 1
        if clock > horizon or it >= cap_i:
            break
        while True:
            f = _xorshift(state) & mask
            if f < uint64(n):
                break
        v = v ^ (np.int64(1) << np.int64(f))
    return buf[:it].copy(), vbuf[: it if record_vertices else 0].copy(), clock <= horizon


@njit(cache=True, nogil=True)
def walk_skeleton(n, n_steps, seed, start):
    """Jump-chain skeleton J(0..n_steps) without clock accounting."""
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    mask = _flip_mask(n)
    out = np.empty(n_steps + 1, dtype=np.int64)
    v = start
    out[0] = v
    for j in range(1, n_steps + 1):
        while True:
            f = _xorshift(state) & mask
            if f < uint64(n):
                break
        v = v ^ (np.int64(1) << np.int64(f))
        out[j] = v
    return out


@njit(cache=True, nogil=True)
def trap_crossings(log_tau_p, log_cn, t_grid, seeds, cap):
    """Batch of complete-graph trap chains, same crossing contract.

    The jump chain is uniform over the other n_states - 1 states; the
    initial state is uniform over all states, drawn from the chain
    stream.
    """
    n_states = log_tau_p.shape[0]
    n_chain = seeds.shape[0]
    nt = t_grid.shape[0]
    cross = np.zeros((n_chain, nt))
    steps = np.zeros(n_chain, dtype=np.int64)
    capped = np.zeros(n_chain, dtype=np.bool_)
    for c in range(n_chain):
        state = np.empty(1, dtype=np.uint64)
        state[0] = seeds[c]
        v = np.int64(_xorshift(state) % uint64(n_states))
        clock = 0.0
        it = np.int64(0)
        k = 0
        while k < nt and it < cap:
            e = -math.log(_u01(_xorshift(state)))
            clock += math.exp(log_tau_p[v] - log_cn) * e
            while k < nt and clock > t_grid[k]:
                cross[c, k] = clock
                k += 1
            while True:
                w = np.int64(_xorshift(state) % uint64(n_states))
                if w != v:
                    break
            v = w
            it += 1
        steps[c] = it
        capped[c] = k < nt
    return cross, steps, capped


@njit(cache=True, nogil=True)
def trap_path(log_tau_p, log_cn, horizon, seed, cap):
    """Single trap chain with a full record, RNG-compatible with trap_crossings."""
    n_states = log_tau_p.shape[0]
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    cap_i = min(cap, np.int64(2 ** 62))
    buf = np.empty(1024)
    vbuf = np.empty(1024, dtype=np.int64)
    v = np.int64(_xorshift(state) % uint64(n_states))
    clock = 0.0
    it = np.int64(0)
    while True:
        e = -math.log(_u01(_xorshift(state)))
        clock += math.exp(log_tau_p[v] - log_cn) * e
        if it >= buf.shape[0]:
            nbuf = np.empty(buf.shape[0] * 2)
            nbuf[: buf.shape[0]] = buf
            buf = nbuf
            nv = np.empty(vbuf.shape[0] * 2, dtype=np.int64)
            nv[: vbuf.shape[0]] = vbuf
            vbuf = nv
        buf[it] = clock
        vbuf[it] = v
        it += 1
        if clock > horizon or it >= cap_i:
            break
        while True:
            w = np.int64(_xorshift(state) % uint64(n_states))
            if w != v:
                break
        v = w
    return buf[:it].copy(), vbuf[:it].copy(), clock <= horizon

@njit(inline="always")
def _interp_loglog(logw, log_w_tab, log_u_tab):
    # log_w_tab ascending, log_u_tab the matching (descending) levels;
    # clamps outside the table
    m = log_w_tab.shape[0]
    if logw <= log_w_tab[0]:
        return log_u_tab[0]
    if logw >= log_w_tab[m - 1]:
        return log_u_tab[m - 1]
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if log_w_tab[mid] <= logw:
            lo = mid
        else:
            hi = mid
    f = (logw - log_w_tab[lo]) / (log_w_tab[hi] - log_w_tab[lo])
    return log_u_tab[lo] + f * (log_u_tab[hi] - log_u_tab[lo])


@njit(cache=True, nogil=True)
def subordinator_avoidance(t, s, t_block, lam, nu_delta, drift_rate,
                           stable_alpha, stable_c, log_w_tab, log_u_tab,
                           seeds, max_blocks):
    """Blockwise range-avoidance decisions for a drift + Poisson-jump path.

    Each replica advances in independent horizon blocks of length
    t_block carrying lam expected jumps. Within a block the post-jump
    levels are nondecreasing, so the first jump whose post-level
    exceeds t decides: a continuous (pre-level already past t) crossing
    means not avoided, a straddle of [t, t+s] means avoided. Jump sizes
    come from inverse-tail sampling: closed-form power law when
    stable_alpha > 0, log-log table interpolation otherwise.

    Returns int8 flags: 1 avoided, 0 not avoided, -1 undecided (block
    cap hit; callers must treat that as an error).
    """
    nrep = seeds.shape[0]
    out = np.empty(nrep, dtype=np.int8)
    state = np.empty(1, dtype=np.uint64)
    for r in range(nrep):
        state[0] = seeds[r]
        level = 0.0
        decision = np.int8(-1)
        for _ in range(max_blocks):
            n_jump = 0
            acc = -math.log(_u01(_xorshift(state)))
            while acc < lam:
                n_jump += 1
                acc += -math.log(_u01(_xorshift(state)))
            ts = np.empty(n_jump)
            for i in range(n_jump):
                ts[i] = _u01(_xorshift(state)) * t_block
            ts.sort()
            csum = 0.0
            done = False
            for k in range(n_jump):
                w = nu_delta * _u01(_xorshift(state))
                if stable_alpha > 0.0:
                    xi = (stable_c / w) ** (1.0 / stable_alpha)
                else:
                    xi = math.exp(_interp_loglog(math.log(w), log_w_tab, log_u_tab))
                m_level = level + drift_rate * ts[k] + csum
                p_level = m_level + xi
                if p_level > t:
                    if m_level > t:
                        decision = np.int8(0)
                    elif p_level >= t + s:
                        decision = np.int8(1)
                    else:
                        decision = np.int8(0)
                    done = True
                    break
                csum += xi
            if done:
                break
            end_level = level + drift_rate * t_block + csum
            if end_level > t:
                decision = np.int8(0)
                break
            level = end_level
        out[r] = decision
    return out
