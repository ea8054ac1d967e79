"""Finite-dimensional real frames: bounds, frame operator, Parseval whitening.

Frame vectors are stored as the rows of an ``N x d`` matrix, so the analysis
operator is the matrix itself and synthesis is its transpose.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class FrameError(ValueError):
    """Invalid frame input (non-finite entries, zero rank, shape mismatch)."""


@dataclass(frozen=True)
class FrameBounds:
    A: float
    B: float


@dataclass(frozen=True, eq=False)
class AnalysisOperator:
    matrix: np.ndarray
    whitened: bool = False
    rank: int = -1

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim == 1:
            m = m[None, :]
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise FrameError(f"frame matrix must be 2-D and non-empty, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise FrameError("frame matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.rank < 0:
            object.__setattr__(self, "rank", numerical_rank(m))

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def _as_operator(F) -> AnalysisOperator:
    return F if isinstance(F, AnalysisOperator) else AnalysisOperator(F)


def _rank_cutoff(s: np.ndarray, shape) -> float:
    # eigenvalue cutoff max(N,d)*eps*lambda_max, expressed on singular values
    if s.size == 0 or s[0] == 0.0:
        return np.inf
    lam_max = s[0] ** 2
    return np.sqrt(max(shape) * np.finfo(float).eps * lam_max)


def numerical_rank(m: np.ndarray) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > _rank_cutoff(s, m.shape))) if s.size else 0


def frame_bounds(F) -> FrameBounds:
    """Optimal frame bounds: extreme squared singular values over all d directions.

    A is zero when the vectors do not span the ambient space.
    """
    F = _as_operator(F)
    s = np.linalg.svd(F.matrix, compute_uv=False)
    sq = s**2
    A = float(sq[-1]) if F.rows >= F.dim else 0.0
    if F.rank < F.dim:
        A = 0.0
    return FrameBounds(A=A, B=float(sq[0]))


def frame_operator(F) -> np.ndarray:
    F = _as_operator(F)
    S = F.matrix.T @ F.matrix
    return 0.5 * (S + S.T)


def whiten_to_parseval(F) -> AnalysisOperator:
    """Return ``F S^{+1/2}``, a Parseval frame for the span of the rows of ``F``.

    Computed through the thin SVD ``F = U diag(s) V^T``: the whitened matrix is
    ``U_r V_r^T`` on the retained singular directions. If the rows span R^d
    this gives ``F~^T F~ = I``; otherwise ``F~^T F~`` is the orthogonal
    projector onto the row space.
    """
    F = _as_operator(F)
    U, s, Vt = np.linalg.svd(F.matrix, full_matrices=False)
    r = int(np.sum(s > _rank_cutoff(s, F.matrix.shape)))
    if r == 0:
        raise FrameError("cannot whiten a rank-zero frame")
    W = U[:, :r] @ Vt[:r, :]
    return AnalysisOperator(W, whitened=True, rank=r)


def analysis(F, x) -> np.ndarray:
    """Frame coefficients ``<x, f_n>``. ``x`` may be a vector or a batch of row vectors."""
    F = _as_operator(F)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != F.dim:
        raise FrameError(f"vector dimension {x.shape[-1]} does not match frame dimension {F.dim}")
    return x @ F.matrix.T


def synthesis(G, c) -> np.ndarray:
    """Reconstruct ``sum_n c_n g_n``. ``c`` may be a vector or a batch of coefficient rows."""
    G = _as_operator(G)
    c = np.asarray(c, dtype=float)
    if c.shape[-1] != G.rows:
        raise FrameError(f"coefficient length {c.shape[-1]} does not match frame size {G.rows}")
    return c @ G.matrix


def condition_number(F) -> float:
    """Largest over smallest nonzero singular value."""
    F = _as_operator(F)
    s = np.linalg.svd(F.matrix, compute_uv=False)
    nz = s[s > _rank_cutoff(s, F.matrix.shape)]
    if nz.size == 0:
        raise FrameError("condition number undefined for a rank-zero frame")
    return float(nz[0] / nz[-1])
