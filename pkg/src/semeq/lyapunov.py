"""Virtual queues, Lyapunov function, drift-plus-penalty cost and the per-slot
drift bound check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .phy import ComputeConfig, RadioConfig, SlotCosts, max_rate, slot_costs

INFEASIBLE = math.inf
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class QueueState:
    Z: float
    Q: tuple
    eps_z: float
    eps_q: float
    L_bar: float
    G_bar: tuple

    def __post_init__(self):
        object.__setattr__(self, "Q", tuple(float(v) for v in self.Q))
        object.__setattr__(self, "G_bar", tuple(float(v) for v in self.G_bar))
        if len(self.Q) != len(self.G_bar):
            raise ValueError("need one accuracy target per accuracy queue")
        if self.eps_z <= 0 or self.eps_q <= 0:
            raise ValueError("queue step sizes must be positive")
        if self.Z < 0 or any(v < 0 for v in self.Q):
            raise ValueError("queues must be non-negative")

    @classmethod
    def initial(cls, n_users: int, eps_z: float, eps_q: float, L_bar: float, G_bar) -> "QueueState":
        G_bar = tuple(G_bar) if isinstance(G_bar, Sequence) else (float(G_bar),) * n_users
        return cls(0.0, (0.0,) * n_users, eps_z, eps_q, L_bar, G_bar)

    @property
    def n_users(self) -> int:
        return len(self.Q)


@dataclass(frozen=True)
class SlotDecision:
    N: tuple
    q: tuple
    f_c: tuple
    B: tuple
    R: tuple
    f_r: float

    @property
    def n_users(self) -> int:
        return len(self.N)


@dataclass(frozen=True)
class SlotRecord:
    t: int
    h2: tuple
    decision: SlotDecision
    costs: SlotCosts
    G: tuple
    before: QueueState
    after: QueueState
    gamma: float


def update_queues(state: QueueState, L: float, G: Sequence[float]) -> QueueState:
    Z = max(0.0, state.Z + state.eps_z * (L - state.L_bar))
    Q = tuple(max(0.0, qk + state.eps_q * (gb - g)) for qk, gb, g in zip(state.Q, state.G_bar, G))
    return replace(state, Z=Z, Q=Q)


def lyapunov_value(state: QueueState) -> float:
    return 0.5 * (state.Z**2 + sum(v * v for v in state.Q))


def is_feasible(decision: SlotDecision, h2, radio: RadioConfig, compute: ComputeConfig, b_min: float) -> bool:
    """Instantaneous constraints: CPU bounds, bandwidth partition, rate window."""
    srv = compute.server
    if not srv.f_min - _FEAS_TOL <= decision.f_r <= srv.f_max * (1 + _FEAS_TOL):
        return False
    if abs(sum(decision.B) - radio.bandwidth) > 1e-6 * radio.bandwidth:
        return False
    for u, f, b, r, h in zip(compute.users, decision.f_c, decision.B, decision.R, h2):
        if not u.f_min - _FEAS_TOL <= f <= u.f_max * (1 + _FEAS_TOL):
            return False
        if b < b_min * (1 - 1e-9):
            return False
        r_max = max_rate(b, radio.p_max, h, radio.n0)
        if not radio.r_min * (1 - 1e-12) <= r <= r_max * (1 + 1e-12):
            return False
    return True


def gamma_from_costs(state: QueueState, costs: SlotCosts, G: Sequence[float], V: float) -> float:
    per_user = sum(
        state.Z * l_tx - qk * g + V * (pu + pc)
        for l_tx, qk, g, pu, pc in zip(costs.L_tx, state.Q, G, costs.p_u, costs.p_c)
    )
    return per_user + V * costs.p_r + state.Z * costs.L_r


def dpp_cost(
    state: QueueState,
    decision: SlotDecision,
    h2,
    table,
    V: float,
    radio: RadioConfig,
    compute: ComputeConfig,
    b_min: float,
) -> float:
    """Per-slot drift-plus-penalty objective; ``INFEASIBLE`` outside the constraint set."""
    try:
        G = [table.lookup(k, n, b) for k, (n, b) in enumerate(zip(decision.N, decision.q))]
    except KeyError:
        return INFEASIBLE
    if not is_feasible(decision, h2, radio, compute, b_min):
        return INFEASIBLE
    costs = slot_costs(decision.N, decision.q, decision.f_c, decision.B, decision.R, decision.f_r, h2, radio, compute)
    return gamma_from_costs(state, costs, G, V)


def xi_constant(eps_z, eps_q, L_max, L_bar, G_bar, G_max=1.0, L_min=None, G_min=None) -> float:
    """Constant of the drift bound.

    With only ``L_max`` and ``G_max`` this is
    ``1/2 eps_z^2 (L_max - L_bar)^2 + 1/2 sum_k eps_q^2 (G_bar_k - G_max)^2``.
    Passing ``L_min`` / ``G_min`` widens each squared deviation to the worst of
    both range ends, which the bound needs whenever a realized value can fall
    further below its target than the maximum lies above it.
    """
    G_bar = list(G_bar)
    g_max = list(G_max) if isinstance(G_max, Sequence) else [G_max] * len(G_bar)
    dz = (L_max - L_bar) ** 2
    if L_min is not None:
        dz = max(dz, (L_bar - L_min) ** 2)
    total = 0.5 * eps_z**2 * dz
    g_min = None if G_min is None else (list(G_min) if isinstance(G_min, Sequence) else [G_min] * len(G_bar))
    for k, gb in enumerate(G_bar):
        dq = (gb - g_max[k]) ** 2
        if g_min is not None:
            dq = max(dq, (gb - g_min[k]) ** 2)
        total += 0.5 * eps_q**2 * dq
    return total


class InconsistentRecord(ValueError):
    pass


def bound_terms(record: SlotRecord, xi: float) -> tuple[float, float]:
    """(lhs, rhs) of the realized per-slot drift-plus-penalty bound.

    lhs = 1/2 (Z'^2 - Z^2) + 1/2 sum (Q_k'^2 - Q_k^2) + V p
    rhs = xi + eps_z Z (L_r + sum_k L_tx_k - L_bar) + sum_k eps_q Q_k (G_bar_k - G_k) + V p

    Queue values are taken before the update. The penalty ``V p`` appears on
    both sides and is left out of the returned pair so the comparison is not
    swamped by it.
    """
    s, s2, c = record.before, record.after, record.costs
    expected = update_queues(s, c.L, record.G)
    if abs(expected.Z - s2.Z) > 1e-9 * max(1.0, s2.Z) or any(
        abs(a - b) > 1e-9 * max(1.0, b) for a, b in zip(expected.Q, s2.Q)
    ):
        raise InconsistentRecord(f"slot {record.t}: queue snapshot does not follow from realized metrics")
    lhs = 0.5 * (s2.Z**2 - s.Z**2) + 0.5 * sum(b * b - a * a for a, b in zip(s.Q, s2.Q))
    rhs = (
        xi
        + s.eps_z * s.Z * (c.L_r + sum(c.L_tx) - s.L_bar)
        + sum(s.eps_q * qk * (gb - g) for qk, gb, g in zip(s.Q, s.G_bar, record.G))
    )
    return lhs, rhs


def verify_appendix_bound(record: SlotRecord, V: float, xi: float, slack: float = 1e-9) -> bool:
    lhs, rhs = bound_terms(record, xi)
    return lhs <= rhs + slack
