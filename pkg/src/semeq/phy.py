"""Radio and compute cost models for the multi-user uplink.

Units: Hz, W, W/Hz, seconds, bits, CPU cycles. Fading is block Rayleigh:
constant within a slot, i.i.d. across slots and users.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

BOLTZMANN = 1.380649e-23


@dataclass
class RadioConfig:
    bandwidth: float = 500e3
    temperature: float = 290.0
    carrier_ghz: float = 3.5
    distance_km: float = 0.1
    p_max: float = 0.15
    r_min: float = 1e3
    # explicit noise density overrides k_B * T when set
    noise_density: float | None = None

    @property
    def n0(self) -> float:
        return self.noise_density if self.noise_density is not None else BOLTZMANN * self.temperature

    def __post_init__(self):
        for name in ("bandwidth", "temperature", "carrier_ghz", "distance_km", "p_max", "r_min"):
            if getattr(self, name) <= 0:
                raise ValueError(f"RadioConfig.{name} must be positive")


@dataclass
class UserCompute:
    kappa: float = 1e-28
    f_min: float = 1e8
    f_max: float = 3.5e9
    # C_tx(N) = c0 + c1 * N cycles (encoder + analysis operator)
    c0: float = 3.0e7
    c1: float = 1.0e4

    def cycles(self, N: int) -> float:
        return self.c0 + self.c1 * N


@dataclass
class ServerCompute:
    kappa: float = 1e-28
    f_min: float = 1e8
    f_max: float = 4.0e9
    # C_rx(N) = r0 + r1 * N (reconstruction) + pred (downstream head)
    r0: float = 1.0e6
    r1: float = 1.0e4
    pred: float = 2.0e6

    def cycles(self, N: int) -> float:
        return self.r0 + self.r1 * N + self.pred


@dataclass
class ComputeConfig:
    users: list[UserCompute] = field(default_factory=lambda: [UserCompute()])
    server: ServerCompute = field(default_factory=ServerCompute)

    def __post_init__(self):
        for u in [*self.users, self.server]:
            if u.kappa <= 0 or not 0 <= u.f_min < u.f_max:
                raise ValueError("compute config needs kappa > 0 and 0 <= f_min < f_max")


def path_loss_db(d_km: float, f_ghz: float) -> float:
    if d_km <= 0 or f_ghz <= 0:
        raise ValueError("distance and carrier frequency must be positive")
    return 20 * math.log10(d_km) + 20 * math.log10(f_ghz) + 92.45


def path_gain(cfg: RadioConfig) -> float:
    return 10 ** (-path_loss_db(cfg.distance_km, cfg.carrier_ghz) / 10)


def sample_channel(cfg: RadioConfig, n_users: int, rng: np.random.Generator) -> np.ndarray:
    """Per-user power gains |h_k|^2: unit-mean exponential fading times path gain."""
    return rng.exponential(1.0, size=n_users) * path_gain(cfg)


def cpu_power(kappa: float, f: float) -> float:
    return kappa * f**3


def tx_power(B: float, n0: float, h2: float, R: float) -> float:
    """Transmit power achieving rate R over bandwidth B (Shannon inversion)."""
    if B <= 0 or R < 0:
        raise ValueError("need B > 0 and R >= 0")
    try:
        return (B * n0 / h2) * math.expm1((R / B) * math.log(2))
    except OverflowError:
        raise OverflowError(f"rate/bandwidth ratio {R / B:.3g} too large for transmit power") from None


def max_rate(B: float, p_max: float, h2: float, n0: float) -> float:
    return B * math.log2(1 + p_max * h2 / (B * n0))


@dataclass(frozen=True)
class SlotCosts:
    L_c: tuple
    L_u: tuple
    L_tx: tuple
    L_r: float
    L: float
    p_c: tuple
    p_u: tuple
    p_r: float
    p: float


def latencies(N, q, f_c, R, f_r, cycles_tx, cycles_rx):
    """Per-user (L_c, L_u, L_tx), server L_r and total latency max_k L_tx + L_r."""
    L_c = [c / f for c, f in zip(cycles_tx, f_c)]
    L_u = [n * b / r for n, b, r in zip(N, q, R)]
    L_tx = [a + b for a, b in zip(L_c, L_u)]
    L_r = sum(cycles_rx) / f_r
    return L_c, L_u, L_tx, L_r, max(L_tx) + L_r


def slot_costs(N, q, f_c, B, R, f_r, h2, radio: RadioConfig, compute: ComputeConfig) -> SlotCosts:
    users = compute.users
    cyc_tx = [u.cycles(n) for u, n in zip(users, N)]
    cyc_rx = [compute.server.cycles(n) for n in N]
    L_c, L_u, L_tx, L_r, L = latencies(N, q, f_c, R, f_r, cyc_tx, cyc_rx)
    p_c = [cpu_power(u.kappa, f) for u, f in zip(users, f_c)]
    p_u = [tx_power(b, radio.n0, h, r) for b, h, r in zip(B, h2, R)]
    p_r = cpu_power(compute.server.kappa, f_r)
    p = p_r + sum(a + b for a, b in zip(p_u, p_c))
    return SlotCosts(tuple(L_c), tuple(L_u), tuple(L_tx), L_r, L, tuple(p_c), tuple(p_u), p_r, p)
