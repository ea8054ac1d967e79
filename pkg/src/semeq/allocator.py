"""Per-slot resource allocation: closed-form continuous solvers and the discrete
(N, q) search over users.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lyapunov import INFEASIBLE, QueueState, SlotDecision, gamma_from_costs
from .phy import ComputeConfig, RadioConfig, max_rate, slot_costs

log = logging.getLogger(__name__)

LN2 = math.log(2.0)


def lambert_w0(x: float, tol: float = 1e-14, max_iter: int = 50) -> float:
    """Principal branch of the Lambert W function on x >= 0 by Halley iteration."""
    if x < 0 or math.isnan(x):
        raise ValueError(f"lambert_w0 is defined here for x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    w = math.log1p(x)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= step
        if abs(step) <= tol * (1.0 + abs(w)):
            break
    return w


def lambert_w0_array(x: np.ndarray, tol: float = 1e-14, max_iter: int = 50) -> np.ndarray:
    """Elementwise ``lambert_w0`` for finite non-negative arrays."""
    shape = np.shape(x)
    x = np.asarray(x, dtype=float).ravel()
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise ValueError("lambert_w0_array needs finite x >= 0")
    w = np.log1p(x)
    active = x > 0
    for _ in range(max_iter):
        if not active.any():
            break
        wa, xa = w[active], x[active]
        ew = np.exp(wa)
        f = wa * ew - xa
        step = f / (ew * (wa + 1.0) - (wa + 2.0) * f / (2.0 * (wa + 1.0)))
        w[active] = wa - step
        done = np.abs(step) <= tol * (1.0 + np.abs(w[active]))
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return w.reshape(shape)


def clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def ue_cpu_freq(Z: float, cycles: float, kappa: float, V: float, f_min: float, f_max: float) -> float:
    """Minimizer of Z*C/f + V*kappa*f^3 on [f_min, f_max]."""
    return clamp((Z * cycles / (3.0 * kappa * V)) ** 0.25, f_min, f_max)


def meh_cpu_freq(Z: float, cycles_total: float, kappa: float, V: float, f_min: float, f_max: float) -> float:
    return ue_cpu_freq(Z, cycles_total, kappa, V, f_min, f_max)


def bandwidth_split(N: Sequence[int], q: Sequence[int], alpha: float, beta: float, B: float, b_min: float) -> list[float]:
    """Split B proportionally to N^alpha * q^beta, lifting any share below b_min.

    Lifted users are pinned at ``b_min``; the rest of the band is re-split
    proportionally among the others until no share falls below the floor.
    """
    K = len(N)
    if K < 1:
        raise ValueError("bandwidth split needs at least one user")
    if B < K * b_min * (1 - 1e-12):
        raise ValueError(f"infeasible split: B={B} < K*B_min={K * b_min}")
    w = [float(n) ** alpha * float(b) ** beta for n, b in zip(N, q)]
    pinned: set[int] = set()
    while True:
        free = [k for k in range(K) if k not in pinned]
        budget = B - b_min * len(pinned)
        total = sum(w[k] for k in free)
        share = {k: budget * w[k] / total for k in free}
        low = [k for k in free if share[k] < b_min]
        if not low:
            return [b_min if k in pinned else share[k] for k in range(K)]
        pinned.update(low)


def optimal_rate(Z, N, q, h2, B, V, n0, r_min, r_max) -> float | None:
    """Rate minimizing Z*N*q/R + V*(B*N0/h2)*(2^(R/B) - 1), clipped to [r_min, r_max].

    Returns ``None`` when the rate window is empty.
    """
    if r_max < r_min:
        return None
    arg = math.sqrt(Z * N * q * h2 * LN2 / (V * n0)) / (2.0 * B)
    return clamp((2.0 * B / LN2) * lambert_w0(arg), r_min, r_max)


@dataclass
class AllocatorParams:
    V: float
    alpha: float = 1.0
    beta: float = 1.0
    b_min: float | None = None  # defaults to B / (10 K)

    def floor(self, B: float, K: int) -> float:
        return B / (10 * K) if self.b_min is None else self.b_min


def solve_continuous(state: QueueState, N, q, h2, params: AllocatorParams, radio: RadioConfig,
                     compute: ComputeConfig, best_effort: bool = False) -> SlotDecision | None:
    """Closed-form CPU frequencies, bandwidth and rates for fixed discrete choices.

    Returns ``None`` if some user's rate window is empty, unless ``best_effort``
    is set, in which case that user transmits at its maximum rate.
    """
    K = len(N)
    V, Z = params.V, state.Z
    srv = compute.server
    f_c = tuple(ue_cpu_freq(Z, u.cycles(n), u.kappa, V, u.f_min, u.f_max) for u, n in zip(compute.users, N))
    f_r = meh_cpu_freq(Z, sum(srv.cycles(n) for n in N), srv.kappa, V, srv.f_min, srv.f_max)
    B = bandwidth_split(N, q, params.alpha, params.beta, radio.bandwidth, params.floor(radio.bandwidth, K))
    R = []
    for n, b, bk, h in zip(N, q, B, h2):
        r_max = max_rate(bk, radio.p_max, h, radio.n0)
        r = optimal_rate(Z, n, b, h, bk, V, radio.n0, radio.r_min, r_max)
        if r is None:
            if not best_effort:
                return None
            r = r_max
        R.append(r)
    return SlotDecision(tuple(N), tuple(q), f_c, tuple(B), tuple(R), f_r)


def evaluate(state, N, q, h2, table, params, radio, compute):
    """(Gamma, decision) of a full discrete assignment; Gamma is INFEASIBLE if no decision exists."""
    dec = solve_continuous(state, N, q, h2, params, radio, compute)
    if dec is None:
        return INFEASIBLE, None
    costs = slot_costs(dec.N, dec.q, dec.f_c, dec.B, dec.R, dec.f_r, h2, radio, compute)
    G = [table.lookup(k, n, b) for k, (n, b) in enumerate(zip(N, q))]
    return gamma_from_costs(state, costs, G, params.V), dec


def candidates(N_set, Q_set):
    return [(n, b) for n in sorted(N_set) for b in sorted(Q_set)]


def batch_gamma(state, N: np.ndarray, q: np.ndarray, h2, table, params, radio, compute) -> np.ndarray:
    """Gamma for C joint assignments at once; ``N`` and ``q`` have shape (C, K).

    Numerically the same computation as ``evaluate`` (to rounding), vectorized
    over candidates. Infeasible rows get ``INFEASIBLE``.
    """
    N = np.asarray(N, dtype=float)
    q = np.asarray(q, dtype=float)
    C, K = N.shape
    V, Z = params.V, state.Z
    users, srv = compute.users, compute.server
    kappa = np.array([u.kappa for u in users])
    fmin = np.array([u.f_min for u in users])
    fmax = np.array([u.f_max for u in users])
    cyc = np.array([[u.c0 for u in users]]) + np.array([[u.c1 for u in users]]) * N
    f_c = np.minimum(np.maximum((Z * cyc / (3.0 * kappa * V)) ** 0.25, fmin), fmax)
    cyc_r = (srv.r0 + srv.pred) * K + srv.r1 * N.sum(axis=1)
    f_r = np.minimum(np.maximum((Z * cyc_r / (3.0 * srv.kappa * V)) ** 0.25, srv.f_min), srv.f_max)

    B_tot = radio.bandwidth
    b_min = params.floor(B_tot, K)
    w = N ** params.alpha * q ** params.beta
    pinned = np.zeros((C, K), dtype=bool)
    for _ in range(K + 1):
        budget = B_tot - b_min * pinned.sum(axis=1, keepdims=True)
        share = budget * w / np.where(pinned, 0.0, w).sum(axis=1, keepdims=True)
        low = ~pinned & (share < b_min)
        if not low.any():
            break
        pinned |= low
    B = np.where(pinned, b_min, share)

    h = np.asarray(h2, dtype=float)
    n0 = radio.n0
    r_max = B * np.log2(1 + radio.p_max * h / (B * n0))
    arg = np.sqrt(Z * N * q * h * LN2 / (V * n0)) / (2.0 * B)
    R = np.minimum(np.maximum((2.0 * B / LN2) * lambert_w0_array(arg), radio.r_min), r_max)
    feasible = (r_max >= radio.r_min).all(axis=1)

    L_tx = cyc / f_c + N * q / R
    L_r = cyc_r / f_r
    p_u = (B * n0 / h) * np.expm1((R / B) * LN2)
    p_c = kappa * f_c**3
    p_r = srv.kappa * f_r**3
    ni = np.array([[table._pos["N"][int(n)] for n in row] for row in N])
    qi = np.array([[table._pos["q"][int(b)] for b in row] for row in q])
    G = table.grid[np.arange(K)[None, :], ni, qi]
    Qk = np.asarray(state.Q)
    gamma = (Z * L_tx - Qk * G + V * (p_u + p_c)).sum(axis=1) + V * p_r + Z * L_r
    return np.where(feasible, gamma, INFEASIBLE)


def greedy_select(state, h2, table, N_set, Q_set, params, radio, compute, init=None):
    """One pass over users; each user keeps the candidate with the lowest Gamma.

    Other users' (N, q) stay frozen at their current incumbents while user k
    is scanned. ``init`` gives the starting choices (previous slot), defaulting
    to the smallest N and q. Returns ``(decision, gamma)``.
    """
    K = state.n_users
    cand = np.array(candidates(N_set, Q_set))
    N = list(init[0]) if init else [min(N_set)] * K
    q = list(init[1]) if init else [min(Q_set)] * K
    for k in range(K):
        Nm = np.tile(np.array(N, dtype=float), (len(cand), 1))
        qm = np.tile(np.array(q, dtype=float), (len(cand), 1))
        Nm[:, k], qm[:, k] = cand[:, 0], cand[:, 1]
        g = batch_gamma(state, Nm, qm, h2, table, params, radio, compute)
        # argmin returns the first minimum, i.e. the earliest candidate under strict improvement
        i = int(np.argmin(g))
        if not np.isfinite(g[i]):
            log.warning("no feasible (N, q) for user %d; keeping previous choice", k)
            continue
        N[k], q[k] = int(cand[i, 0]), int(cand[i, 1])
    best_gamma, best_dec = evaluate(state, N, q, h2, table, params, radio, compute)
    if best_dec is None:
        best_dec = solve_continuous(state, N, q, h2, params, radio, compute, best_effort=True)
    return best_dec, best_gamma


class SearchTooLarge(ValueError):
    pass


def exhaustive_select(state, h2, table, N_set, Q_set, params, radio, compute, limit: int = 10**6):
    """Global minimizer of Gamma over all joint (N, q) assignments."""
    K = state.n_users
    cand = candidates(N_set, Q_set)
    if len(cand) ** K > limit:
        raise SearchTooLarge(f"{len(cand)}^{K} assignments exceed the limit {limit}")
    best_gamma, best_dec = INFEASIBLE, None
    for combo in itertools.product(cand, repeat=K):
        N = [c[0] for c in combo]
        q = [c[1] for c in combo]
        g, dec = evaluate(state, N, q, h2, table, params, radio, compute)
        if g < best_gamma:
            best_gamma, best_dec = g, dec
    return best_dec, best_gamma
