"""Shared fixtures data for the tests."""
import numpy as np

from semeq.lyapunov import QueueState
from semeq.phy import ComputeConfig, RadioConfig, ServerCompute, UserCompute, sample_channel
from semeq.world import AccuracyTable


def analytic_table(n_users=3, N_set=(32, 64, 128, 512), Q_set=(2, 4, 8, 32)):
    """Smooth saturating accuracy surface, cheap stand-in for a measured table."""
    N = np.array(N_set, float)[:, None]
    q = np.array(Q_set, float)[None, :]
    base = 1 - np.exp(-N * np.minimum(q, 8) / 600)
    grid = np.stack([0.05 + 0.9 * base ** (1 + 0.2 * k) for k in range(n_users)])
    return AccuracyTable(list(N_set), list(Q_set), grid)


def compute_for(K):
    return ComputeConfig(
        [UserCompute(f_min=3e8, c0=1e7 * (1 + k % 3), c1=2e4) for k in range(K)],
        ServerCompute(f_min=3e8, r0=5e5, r1=1e4, pred=1e6),
    )


def random_state(rng, K, L_bar=0.04, G_bar=0.7, eps_z=0.1, eps_q=1.0):
    Z = float(rng.choice([0.0, rng.uniform(0, 0.5), rng.uniform(0, 5)]))
    Q = rng.uniform(0, 2, K) * (rng.random(K) < 0.7)
    return QueueState(Z, tuple(Q), eps_z, eps_q, L_bar, (G_bar,) * K)


def random_channel(rng, K, radio=None):
    return tuple(sample_channel(radio or RadioConfig(), K, rng))
