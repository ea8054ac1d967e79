"""Synthetic paired latent spaces, EMB1 embedding files, nearest-centroid decoding
and the accuracy tables consumed by the resource allocator.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .equalize import (
    AnchorSpec,
    EqualizerPair,
    anchors_from_support,
    build_equalizer,
    l2_normalize,
    prototypical_anchors,
    quantize_array,
    uniform_support,
)

EMB1_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    pass


@dataclass(eq=False)
class LatentWorld:
    tx: np.ndarray
    rx: np.ndarray
    labels: np.ndarray
    n_classes: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    # ground-truth relation rx ~ scale * Q @ tx + noise, or None for external data
    Q: np.ndarray | None = None
    scale: float = 1.0
    noise: float = 0.0

    def __post_init__(self):
        if self.tx.shape[0] != self.rx.shape[0] or self.tx.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"sample counts differ: tx={self.tx.shape[0]} rx={self.rx.shape[0]} labels={self.labels.shape[0]}"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels outside [0, n_classes)")
        if len(self.val_idx) == 0:
            raise ValueError("validation split is empty")

    @property
    def external(self) -> bool:
        return self.Q is None

    @property
    def dim_tx(self) -> int:
        return self.tx.shape[1]

    @property
    def dim_rx(self) -> int:
        return self.rx.shape[1]


def random_semi_orthogonal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed matrix with orthonormal columns (rows >= cols) or rows."""
    n, m = max(rows, cols), min(rows, cols)
    Z = rng.standard_normal((n, m))
    Qm, R = np.linalg.qr(Z)
    Qm = Qm * np.sign(np.diag(R))
    return Qm if rows >= cols else Qm.T


def _split(n: int, val_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_val = max(1, int(round(val_fraction * n)))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _class_samples(dim, n_classes, n_samples, spread, rng):
    centroids = l2_normalize(rng.standard_normal((n_classes, dim)))
    labels = np.arange(n_samples) % n_classes
    rng.shuffle(labels)
    # spread is the expected norm of the isotropic perturbation
    x = centroids[labels] + spread * rng.standard_normal((n_samples, dim)) / np.sqrt(dim)
    return l2_normalize(x), labels


def generate_world(
    d: int,
    p: int,
    n_classes: int,
    n_samples: int,
    cluster_spread: float = 0.5,
    noise: float = 0.0,
    scale: float = 1.0,
    seed: int = 0,
    transform: np.ndarray | None = None,
    val_fraction: float = 0.5,
) -> LatentWorld:
    """Paired TX/RX latents with planted classes.

    TX samples are unit-norm perturbations of ``n_classes`` random unit
    centroids. RX samples are ``scale * Q @ tx`` plus isotropic noise of
    expected norm ``noise``, renormalized. ``Q`` is a random semi-orthogonal
    ``p x d`` matrix unless ``transform`` is given.
    """
    if n_classes < 2 or n_samples < 10 * n_classes or d < 1 or p < 1:
        raise ValueError(f"invalid world shape: d={d} p={p} T={n_classes} n={n_samples}")
    if scale <= 0 or noise < 0 or cluster_spread < 0:
        raise ValueError("scale must be positive; noise and spread non-negative")
    rng = np.random.default_rng(seed)
    tx, labels = _class_samples(d, n_classes, n_samples, cluster_spread, rng)
    Q = random_semi_orthogonal(p, d, rng) if transform is None else np.asarray(transform, dtype=float)
    if Q.shape != (p, d):
        raise ValueError(f"transform must have shape {(p, d)}, got {Q.shape}")
    rx = scale * tx @ Q.T
    if noise > 0:
        rx = rx + noise * rng.standard_normal(rx.shape) / np.sqrt(p)
    if noise > 0 or scale != 1.0 or p < d:
        # an isometric noiseless map already yields unit rows; skip to keep them exact
        rx = l2_normalize(rx)
    train, val = _split(n_samples, val_fraction, rng)
    return LatentWorld(tx, rx, labels, n_classes, train, val, Q, scale, noise)


def generate_shared_worlds(
    user_dims: Sequence[int],
    p: int,
    n_classes: int,
    n_samples: int,
    cluster_spread: float = 0.5,
    noises: Sequence[float] | float = 0.0,
    seed: int = 0,
    val_fraction: float = 0.5,
) -> list[LatentWorld]:
    """One world per user, all sharing the same receiver latents, labels and splits.

    The receiver set is drawn once; user ``k`` observes ``Q_k^T rx`` plus noise,
    so that ``rx ~ Q_k tx_k`` (exactly when ``d_k >= p`` and the noise is zero).
    """
    if np.isscalar(noises):
        noises = [float(noises)] * len(user_dims)
    if len(noises) != len(user_dims):
        raise ValueError("need one noise level per user")
    rng = np.random.default_rng(seed)
    rx, labels = _class_samples(p, n_classes, n_samples, cluster_spread, rng)
    train, val = _split(n_samples, val_fraction, rng)
    worlds = []
    for d, sigma in zip(user_dims, noises):
        Q = random_semi_orthogonal(p, d, rng)
        tx = rx @ Q
        if sigma > 0:
            tx = tx + sigma * rng.standard_normal(tx.shape) / np.sqrt(d)
        worlds.append(LatentWorld(l2_normalize(tx), rx, labels, n_classes, train, val, Q, 1.0, sigma))
    return worlds


# ---------------------------------------------------------------------------
# EMB1 files


def write_emb1(path, matrix) -> None:
    m = np.ascontiguousarray(np.atleast_2d(matrix), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(EMB1_MAGIC, m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def read_emb1(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: header needs {_HEADER.size} bytes, file has {len(raw)}")
    magic, count, dim = _HEADER.unpack_from(raw)
    if magic != EMB1_MAGIC:
        raise FormatError(f"{path}: magic {magic!r} != {EMB1_MAGIC!r}")
    expected = _HEADER.size + 4 * count * dim
    if len(raw) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for count={count} dim={dim}, got {len(raw)}")
    return np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim).copy()


def write_labels(path, labels) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for y in np.asarray(labels, dtype=int):
            w.writerow([int(y)])


def read_labels(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([int(r[0]) for r in rows], dtype=int)
    except ValueError as exc:
        raise FormatError(f"{path}: labels must be integers ({exc})") from None


def ingest_embeddings(path_tx, path_rx, path_labels, val_fraction: float = 0.5, seed: int = 0) -> LatentWorld:
    tx = read_emb1(path_tx).astype(float)
    rx = read_emb1(path_rx).astype(float)
    labels = read_labels(path_labels)
    if not (tx.shape[0] == rx.shape[0] == labels.shape[0]):
        raise FormatError(
            f"count mismatch: tx has {tx.shape[0]} rows, rx has {rx.shape[0]}, labels has {labels.shape[0]}"
        )
    if labels.size and labels.min() < 0:
        raise FormatError("labels must be non-negative")
    train, val = _split(tx.shape[0], val_fraction, np.random.default_rng(seed))
    return LatentWorld(tx, rx, labels, int(labels.max()) + 1, train, val)


# ---------------------------------------------------------------------------
# decoder and accuracy


@dataclass(frozen=True, eq=False)
class CentroidDecoder:
    centroids: np.ndarray

    def predict(self, y) -> np.ndarray:
        # argmax picks the lowest class index on ties
        return np.argmax(np.atleast_2d(y) @ self.centroids.T, axis=1)


def train_centroid_decoder(world: LatentWorld, split: str = "train", side: str = "rx") -> CentroidDecoder:
    idx = world.train_idx if split == "train" else world.val_idx
    if len(idx) == 0:
        raise ValueError(f"{split} split is empty")
    X = (world.rx if side == "rx" else world.tx)[idx]
    y = world.labels[idx]
    missing = sorted(set(range(world.n_classes)) - set(y.tolist()))
    if missing:
        raise ValueError(f"classes missing from {split} split: {missing[:10]}")
    sums = np.zeros((world.n_classes, X.shape[1]))
    np.add.at(sums, y, X)
    return CentroidDecoder(l2_normalize(sums))


def baseline_accuracy(world: LatentWorld, decoder: CentroidDecoder) -> float:
    v = world.val_idx
    return float(np.mean(decoder.predict(world.rx[v]) == world.labels[v]))


def evaluate_accuracy(world: LatentWorld, decoder: CentroidDecoder, eq: EqualizerPair, N: int, q: int) -> float:
    """Validation accuracy of decode(post(quantize(pre(x), q))) against the labels."""
    if eq.n_anchors != N:
        raise ValueError(f"equalizer built with {eq.n_anchors} anchors, asked to evaluate N={N}")
    v = world.val_idx
    c = quantize_array(eq.pre(world.tx[v]), q)
    pred = decoder.predict(eq.post(c))
    return float(np.mean(pred == world.labels[v]))


def support_for(world: LatentWorld, N: int, strategy: str, M: int, seed: int, side: str = "rx"):
    """Anchor support sets as indices into the world's samples (train split only)."""
    train = np.asarray(world.train_idx)
    pool = world.rx if side == "rx" else world.tx
    if strategy == "prototypical":
        sets, _ = prototypical_anchors(pool[train], AnchorSpec("prototypical", N, M, seed))
        return [train[s] for s in sets]
    if strategy == "uniform":
        return [train[[i]] for i in uniform_support(train.size, N, seed)]
    raise ValueError(f"unknown anchor strategy {strategy!r}")


def equalizer_for(world: LatentWorld, support_sets, method: str) -> EqualizerPair:
    a_tx = anchors_from_support(world.tx, support_sets)
    a_rx = anchors_from_support(world.rx, support_sets)
    return build_equalizer(method, a_tx, a_rx)


@dataclass(eq=False)
class AccuracyTable:
    N_set: list[int]
    Q_set: list[int]
    grid: np.ndarray  # users x |N_set| x |Q_set|
    method: str = "PFE"
    _pos: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.shape[1:] != (len(self.N_set), len(self.Q_set)):
            raise ValueError(f"grid shape {self.grid.shape} does not match sets")
        if np.any((self.grid < 0) | (self.grid > 1)):
            raise ValueError("accuracies must lie in [0, 1]")
        self._pos = {
            "N": {n: i for i, n in enumerate(self.N_set)},
            "q": {q: j for j, q in enumerate(self.Q_set)},
        }

    @property
    def n_users(self) -> int:
        return self.grid.shape[0]

    def lookup(self, k: int, N: int, q: int) -> float:
        return float(self.grid[k, self._pos["N"][N], self._pos["q"][q]])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user", "N", "q", "accuracy"])
            for k in range(self.n_users):
                for i, n in enumerate(self.N_set):
                    for j, q in enumerate(self.Q_set):
                        w.writerow([k, n, q, repr(float(self.grid[k, i, j]))])

    @classmethod
    def from_csv(cls, path, method: str = "PFE") -> "AccuracyTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(rows[0]) != {"user", "N", "q", "accuracy"}:
            raise FormatError(f"{path}: expected header user,N,q,accuracy")
        users = sorted({int(r["user"]) for r in rows})
        N_set = sorted({int(r["N"]) for r in rows})
        Q_set = sorted({int(r["q"]) for r in rows})
        grid = np.full((len(users), len(N_set), len(Q_set)), np.nan)
        for r in rows:
            grid[users.index(int(r["user"])), N_set.index(int(r["N"])), Q_set.index(int(r["q"]))] = float(r["accuracy"])
        if np.isnan(grid).any():
            raise FormatError(f"{path}: table does not cover the full N x q grid")
        return cls(N_set, Q_set, grid, method)


def build_accuracy_table(
    worlds: Sequence[LatentWorld],
    decoder: CentroidDecoder,
    method: str,
    N_set: Sequence[int],
    Q_set: Sequence[int],
    strategy: str = "prototypical",
    M: int = 4,
    seed: int = 0,
) -> AccuracyTable:
    """Accuracy of every user over the N x q grid, one equalizer per (user, N).

    Support sets are drawn once per N from the first world's receiver latents
    and shared by all users, who see the same data samples.
    """
    N_set, Q_set = sorted(N_set), sorted(Q_set)
    grid = np.zeros((len(worlds), len(N_set), len(Q_set)))
    for i, N in enumerate(N_set):
        support = support_for(worlds[0], N, strategy, M, seed + i)
        for k, w in enumerate(worlds):
            eq = equalizer_for(w, support, method)
            for j, q in enumerate(Q_set):
                grid[k, i, j] = evaluate_accuracy(w, decoder, eq, N, q)
    return AccuracyTable(list(N_set), list(Q_set), grid, method)
