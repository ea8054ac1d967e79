"""Semantic channel equalizers, anchor selection and coefficient quantization.

Three equalizers share one shape: a pre-equalizer (rows applied at the
transmitter, ``c = F x``) and a post-equalizer (rows combined at the receiver,
``y_hat = sum_n c_n g_n``).

* ``PFE`` whitens both anchor matrices into Parseval frames.
* ``FE`` transmits raw relative coordinates and inverts them with the
  Moore-Penrose pseudoinverse of the receiver anchors.
* ``UPE`` is the supervised baseline: truncated SVD factors of the orthogonal
  Procrustes solution computed from paired pilots.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from sklearn.cluster import KMeans

from .frames import AnalysisOperator, FrameError, analysis, synthesis, whiten_to_parseval

log = logging.getLogger(__name__)

Method = Literal["PFE", "FE", "UPE"]
FLOAT_BITS = 32


def l2_normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.where(norms > 0, norms, 1.0)


@dataclass(frozen=True, eq=False)
class EqualizerPair:
    method: str
    tx_op: AnalysisOperator
    rx_op: AnalysisOperator
    n_coeffs: int
    n_anchors: int = 0

    def __post_init__(self):
        if self.n_anchors == 0:
            object.__setattr__(self, "n_anchors", self.n_coeffs)

    def pre(self, x) -> np.ndarray:
        """Semantic code of (a batch of) TX latents; inputs are l2-normalized first."""
        return analysis(self.tx_op, l2_normalize(x))

    def post(self, c) -> np.ndarray:
        return synthesis(self.rx_op, c)

    def __call__(self, x) -> np.ndarray:
        return self.post(self.pre(x))


def _check_pair(a_tx: np.ndarray, a_rx: np.ndarray):
    a_tx = np.atleast_2d(np.asarray(a_tx, dtype=float))
    a_rx = np.atleast_2d(np.asarray(a_rx, dtype=float))
    if a_tx.shape[0] != a_rx.shape[0]:
        raise ValueError(f"anchor count mismatch: tx has {a_tx.shape[0]}, rx has {a_rx.shape[0]}")
    return a_tx, a_rx


def build_pfe(anchors_tx, anchors_rx) -> EqualizerPair:
    a_tx, a_rx = _check_pair(anchors_tx, anchors_rx)
    F = whiten_to_parseval(l2_normalize(a_tx))
    G = whiten_to_parseval(l2_normalize(a_rx))
    return EqualizerPair("PFE", F, G, a_tx.shape[0])


def build_fe(anchors_tx, anchors_rx) -> EqualizerPair:
    a_tx, a_rx = _check_pair(anchors_tx, anchors_rx)
    a_tx, a_rx = l2_normalize(a_tx), l2_normalize(a_rx)
    if not np.any(a_tx) or not np.any(a_rx):
        raise FrameError("anchor matrix has rank zero")
    # y_hat = A_rx^+ c; stored row-wise as (A_rx^+)^T so that post() is c @ rows
    recon = np.linalg.pinv(a_rx).T
    return EqualizerPair("FE", AnalysisOperator(a_tx), AnalysisOperator(recon), a_tx.shape[0])


def procrustes(pilots_tx, pilots_rx) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """SVD factors of ``K^T H``; ``U @ V^T`` minimizes ``||H - K P||_F`` over semi-orthogonal P."""
    K, H = _check_pair(pilots_tx, pilots_rx)
    U, s, Vt = np.linalg.svd(K.T @ H, full_matrices=False)
    return U, s, Vt.T


def build_upe(pilots_tx, pilots_rx, n_keep: int | None = None) -> EqualizerPair:
    K, H = _check_pair(pilots_tx, pilots_rx)
    U, _, V = procrustes(K, H)
    limit = min(K.shape[1], H.shape[1], K.shape[0])
    n_keep = limit if n_keep is None else n_keep
    if not 1 <= n_keep <= limit:
        raise ValueError(f"n_keep={n_keep} outside [1, {limit}]")
    tx = AnalysisOperator(U[:, :n_keep].T, whitened=True, rank=n_keep)
    rx = AnalysisOperator(V[:, :n_keep].T, whitened=True, rank=n_keep)
    return EqualizerPair("UPE", tx, rx, n_keep, K.shape[0])


def build_equalizer(method: str, anchors_tx, anchors_rx) -> EqualizerPair:
    if method == "PFE":
        return build_pfe(anchors_tx, anchors_rx)
    if method == "FE":
        return build_fe(anchors_tx, anchors_rx)
    if method == "UPE":
        a_tx, a_rx = _check_pair(anchors_tx, anchors_rx)
        n_keep = min(a_tx.shape[0], a_tx.shape[1], a_rx.shape[1])
        return build_upe(l2_normalize(a_tx), l2_normalize(a_rx), n_keep)
    raise ValueError(f"unknown equalizer method {method!r}")


# ---------------------------------------------------------------------------
# anchors


@dataclass(frozen=True)
class AnchorSpec:
    strategy: Literal["prototypical", "uniform"] = "prototypical"
    N: int = 32
    M: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.N < 1 or self.M < 1:
            raise ValueError(f"anchor spec needs N >= 1 and M >= 1, got N={self.N}, M={self.M}")


def kmeans_labels(embeddings: np.ndarray, n_clusters: int, seed: int) -> np.ndarray:
    km = KMeans(n_clusters=n_clusters, init="k-means++", n_init=1, max_iter=100, tol=1e-6, random_state=seed)
    return km.fit_predict(np.asarray(embeddings, dtype=float))


def anchors_from_support(embeddings, support_sets: Sequence[Sequence[int]]) -> np.ndarray:
    X = np.asarray(embeddings, dtype=float)
    return np.stack([X[np.asarray(s, dtype=int)].mean(axis=0) for s in support_sets])


def prototypical_anchors(embeddings, spec: AnchorSpec, support_sets=None):
    """Cluster-mean anchor prototypes.

    Clusters the embeddings into ``spec.N`` groups with k-means, draws ``spec.M``
    members of each cluster without replacement and averages them. A given
    ``support_sets`` skips the clustering and drawing entirely, which is how the
    receiver side reuses the transmitter's draws.

    Returns ``(support_sets, anchors)``.
    """
    X = np.asarray(embeddings, dtype=float)
    if support_sets is None:
        if spec.N > X.shape[0]:
            raise ValueError(f"N={spec.N} anchors requested from {X.shape[0]} samples")
        labels = kmeans_labels(X, spec.N, spec.seed)
        rng = np.random.default_rng(spec.seed)
        support_sets = []
        for i in range(spec.N):
            members = np.flatnonzero(labels == i)
            m = spec.M
            if members.size < m:
                log.info("cluster %d has %d members < M=%d; shrinking", i, members.size, m)
                m = members.size
            support_sets.append(np.sort(rng.choice(members, size=m, replace=False)))
    return support_sets, anchors_from_support(X, support_sets)


def uniform_support(n_samples: int, N: int, seed: int) -> np.ndarray:
    if N > n_samples:
        raise ValueError(f"N={N} anchors requested from {n_samples} samples")
    return np.random.default_rng(seed).choice(n_samples, size=N, replace=False)


def uniform_anchors(embeddings, N: int, seed: int) -> np.ndarray:
    X = np.asarray(embeddings, dtype=float)
    return X[uniform_support(X.shape[0], N, seed)]


# ---------------------------------------------------------------------------
# quantization


@dataclass(frozen=True)
class SemanticCode:
    coeffs: np.ndarray
    q: int = FLOAT_BITS
    source_user: int = 0


def step_size(q: int) -> float:
    return 2.0 / (2**q - 1)


def quantize_array(c, q: int) -> np.ndarray:
    """Map coefficients onto the ``2**q`` evenly spaced levels of [-1, 1].

    Nearest level, ties go to the lower level. Values outside [-1, 1] are
    clamped first.
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    c = np.asarray(c, dtype=float)
    outside = np.abs(c) > 1.0 + 1e-9
    if np.any(outside):
        log.warning("clamping %d coefficients outside [-1, 1]", int(outside.sum()))
    c = np.clip(c, -1.0, 1.0)
    m = float(2**q - 1)
    idx = np.ceil((c + 1.0) * (m / 2.0) - 0.5)
    idx = np.clip(idx, 0.0, m)
    # (2i - M)/M keeps the grid exactly symmetric about zero
    return (2.0 * idx - m) / m


def quantize(code: SemanticCode, q: int) -> SemanticCode:
    return SemanticCode(quantize_array(code.coeffs, q), q, code.source_user)


def dequantize(code: SemanticCode) -> np.ndarray:
    return np.asarray(code.coeffs, dtype=float)


def compression_factor(N: int, q: int, n_abs: int) -> float:
    return (N * q) / (n_abs * FLOAT_BITS)
