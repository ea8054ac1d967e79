import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semeq.frames import (
    AnalysisOperator,
    FrameError,
    analysis,
    condition_number,
    frame_bounds,
    frame_operator,
    synthesis,
    whiten_to_parseval,
)

from oracles import dots_loops, matmul_loops, qr_projector

MERCEDES = np.array([[0.0, 1.0], [-math.sqrt(3) / 2, -0.5], [math.sqrt(3) / 2, -0.5]])


def test_bounds_identity_and_diagonal():
    b = frame_bounds(np.eye(2))
    assert (b.A, b.B) == pytest.approx((1.0, 1.0))
    b = frame_bounds(np.diag([1.0, 2.0]))
    assert (b.A, b.B) == pytest.approx((1.0, 4.0))


def test_bounds_match_svd_oracle():
    F = np.random.default_rng(0).standard_normal((5, 3))
    s = np.linalg.svd(F, compute_uv=False)
    b = frame_bounds(F)
    assert abs(b.A - s[-1] ** 2) <= 1e-10 and abs(b.B - s[0] ** 2) <= 1e-10


def test_bounds_zero_lower_for_rank_deficient():
    assert frame_bounds(np.array([[1.0, 0.0, 0.0]])).A == 0.0


def test_frame_operator_examples():
    assert np.array_equal(frame_operator(np.eye(2)), np.eye(2))
    assert np.array_equal(frame_operator(np.array([[1.0, 0.0]])), np.diag([1.0, 0.0]))
    F = np.random.default_rng(1).standard_normal((4, 3))
    assert np.abs(frame_operator(F) - matmul_loops(F.T, F)).max() <= 1e-12


def test_whiten_scaled_identity():
    W = whiten_to_parseval(2 * np.eye(2))
    assert np.allclose(W.matrix, np.eye(2), atol=1e-15)
    assert W.whitened and W.rank == 2


def test_whiten_mercedes_benz():
    W = whiten_to_parseval(MERCEDES)
    assert np.abs(W.matrix - math.sqrt(2 / 3) * MERCEDES).max() <= 1e-10
    assert np.abs(W.matrix.T @ W.matrix - np.eye(2)).max() <= 1e-10
    b = frame_bounds(MERCEDES)
    assert (b.A, b.B) == pytest.approx((1.5, 1.5))


def test_whiten_single_row_is_projector():
    W = whiten_to_parseval(np.array([[3.0, 0.0]]))
    assert np.allclose(W.matrix, [[1.0, 0.0]])
    S = W.matrix.T @ W.matrix
    assert np.allclose(S, np.diag([1.0, 0.0])) and np.allclose(S @ S, S)


def test_whiten_rejects_zero_and_nonfinite():
    with pytest.raises(FrameError):
        whiten_to_parseval(np.zeros((3, 2)))
    with pytest.raises(FrameError):
        AnalysisOperator(np.array([[np.nan, 1.0]]))


def test_analysis_examples():
    assert np.array_equal(analysis(np.eye(2), [1.0, 0.0]), [1.0, 0.0])
    W = whiten_to_parseval(MERCEDES)
    assert np.allclose(analysis(W, [0.0, 1.0]), math.sqrt(2 / 3) * np.array([1, -0.5, -0.5]), atol=1e-12)
    rng = np.random.default_rng(2)
    F, x = rng.standard_normal((7, 5)), rng.standard_normal(5)
    assert np.abs(analysis(F, x) - dots_loops(F, x)).max() <= 1e-12


def test_dimension_mismatch():
    with pytest.raises(FrameError):
        analysis(np.eye(3), [1.0, 2.0])
    with pytest.raises(FrameError):
        synthesis(np.eye(3), [1.0, 2.0])


def test_synthesis_examples():
    assert np.array_equal(synthesis(np.eye(2), [1.0, 0.0]), [1.0, 0.0])
    rng = np.random.default_rng(3)
    F = rng.standard_normal((3, 6))
    W = whiten_to_parseval(F)
    x = rng.standard_normal(6)
    assert np.abs(synthesis(W, analysis(W, x)) - qr_projector(F) @ x).max() <= 1e-9


def test_condition_number_examples():
    assert condition_number(np.diag([1.0, 3.0])) == pytest.approx(3.0)
    F = np.random.default_rng(4).standard_normal((6, 4))
    s = np.linalg.svd(F, compute_uv=False)
    assert abs(condition_number(F) - s[0] / s[-1]) <= 1e-9
    assert abs(condition_number(whiten_to_parseval(F)) - 1) <= 1e-8


frames = st.tuples(st.integers(1, 64), st.integers(1, 256), st.integers(0, 2**31 - 1))


@settings(max_examples=60, deadline=None)
@given(frames)
def test_whitening_properties(shape):
    d, N, seed = shape
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((N, d)) * rng.uniform(0.1, 10, size=(N, 1))
    W = whiten_to_parseval(F)
    x = rng.standard_normal(d)
    if N >= d:
        assert np.abs(W.matrix.T @ W.matrix - np.eye(d)).max() <= 1e-10
        assert np.abs(synthesis(W, analysis(W, x)) - x).max() <= 1e-9
        b = frame_bounds(W)
        assert abs(b.A - 1) <= 1e-8 and abs(b.B - 1) <= 1e-8
    else:
        P = W.matrix.T @ W.matrix
        assert np.abs(P - P.T).max() <= 1e-10
        assert np.abs(P @ P - P).max() <= 1e-9
        assert np.abs(W.matrix @ W.matrix.T - np.eye(N)).max() <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_bounds_ordered(N, d, seed):
    b = frame_bounds(np.random.default_rng(seed).standard_normal((N, d)))
    assert 0 <= b.A <= b.B
