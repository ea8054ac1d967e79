import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semeq.equalize import (
    AnchorSpec,
    SemanticCode,
    build_equalizer,
    build_fe,
    build_pfe,
    build_upe,
    compression_factor,
    dequantize,
    l2_normalize,
    procrustes,
    prototypical_anchors,
    quantize,
    quantize_array,
    step_size,
    uniform_anchors,
)
from semeq.frames import FrameError

from oracles import qr_projector, random_orthogonal


def ill_conditioned(N, d, cond, rng):
    U, _ = np.linalg.qr(rng.standard_normal((N, d)))
    V = random_orthogonal(d, rng)
    return U @ np.diag(np.geomspace(1, 1 / cond, d)) @ V.T


# ---- equalizers


def test_pfe_same_space_round_trip():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((20, 8))
    eq = build_pfe(A, A)
    x = l2_normalize(rng.standard_normal((50, 8)))
    assert np.abs(eq(x) - x).max() <= 1e-9


def test_pfe_recovers_orthogonal_map():
    rng = np.random.default_rng(1)
    d = 10
    Q = random_orthogonal(d, rng)
    A = rng.standard_normal((30, d))
    eq = build_pfe(A, A @ Q.T)
    x = l2_normalize(rng.standard_normal((40, d)))
    assert np.abs(eq(x) - x @ Q.T).max() <= 1e-8


def test_pfe_undercomplete_projects():
    rng = np.random.default_rng(2)
    d, N = 12, 5
    Q = random_orthogonal(d, rng)
    A = rng.standard_normal((N, d))
    eq = build_pfe(A, A @ Q.T)
    x = l2_normalize(rng.standard_normal(d))
    expected = Q @ (qr_projector(A) @ x)
    assert np.abs(eq(x) - expected).max() <= 1e-8


def test_fe_equals_pfe_for_orthonormal_anchors():
    rng = np.random.default_rng(3)
    A = random_orthogonal(6, rng)
    x = l2_normalize(rng.standard_normal((10, 6)))
    assert np.abs(build_fe(A, A)(x) - build_pfe(A, A)(x)).max() <= 1e-9


def test_fe_rank_deficient_min_norm():
    rng = np.random.default_rng(4)
    A = l2_normalize(rng.standard_normal((3, 6)))
    A = np.vstack([A, A[0]])  # repeated anchor, rank 3 in R^6
    eq = build_fe(A, A)
    c = rng.standard_normal(4)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > 1e-10
    oracle = Vt[keep].T @ ((U[:, keep].T @ c) / s[keep])
    assert np.abs(eq.post(c) - oracle).max() <= 1e-8


def test_fe_amplifies_noise_on_ill_conditioned_anchors():
    rng = np.random.default_rng(5)
    d = 8
    A = ill_conditioned(16, d, 1e6, rng)
    pfe, fe = build_pfe(A, A), build_fe(A, A)
    x = l2_normalize(rng.standard_normal((200, d)))
    err = {}
    for name, eq in (("pfe", pfe), ("fe", fe)):
        c = eq.pre(x) + 1e-3 * rng.standard_normal((200, eq.n_coeffs))
        err[name] = np.mean((eq.post(c) - x) ** 2)
    assert err["fe"] > err["pfe"]


def test_pair_requires_matching_anchor_count():
    with pytest.raises(ValueError):
        build_pfe(np.eye(3), np.eye(4)[:2])
    with pytest.raises(FrameError):
        build_fe(np.zeros((3, 2)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        build_equalizer("XYZ", np.eye(2), np.eye(2))


def test_upe_identity_and_planted_rotation():
    rng = np.random.default_rng(6)
    K = rng.standard_normal((50, 7))
    U, _, V = procrustes(K, K)
    assert np.abs(U @ V.T - np.eye(7)).max() <= 1e-9
    Q = random_orthogonal(7, rng)
    U, _, V = procrustes(K, K @ Q)
    assert np.abs(U @ V.T - Q).max() <= 1e-8


def test_upe_beats_random_rotations():
    rng = np.random.default_rng(7)
    K, H = rng.standard_normal((40, 5)), rng.standard_normal((40, 5))
    U, _, V = procrustes(K, H)
    best = np.linalg.norm(H - K @ U @ V.T)
    for _ in range(100):
        assert best <= np.linalg.norm(H - K @ random_orthogonal(5, rng)) + 1e-12


def test_upe_operators_are_partial_isometries():
    rng = np.random.default_rng(8)
    eq = build_upe(rng.standard_normal((30, 9)), rng.standard_normal((30, 6)), n_keep=4)
    for op in (eq.tx_op, eq.rx_op):
        assert np.abs(op.matrix @ op.matrix.T - np.eye(4)).max() <= 1e-9
    assert eq.n_coeffs == 4 and eq.n_anchors == 30
    with pytest.raises(ValueError):
        build_upe(np.eye(3), np.eye(3), n_keep=4)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31 - 1))
def test_equalized_codes_within_unit_interval(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((rng.integers(1, 3 * d), d))
    x = rng.standard_normal((20, d))
    for method in ("PFE", "UPE"):
        eq = build_equalizer(method, A, A)
        assert np.all(np.abs(eq.pre(x)) <= 1 + 1e-12)


# ---- anchors


def test_prototypes_equal_centroids_when_taking_whole_clusters():
    rng = np.random.default_rng(9)
    centers = np.array([[10.0, 0, 0], [0, 10.0, 0], [0, 0, 10.0]])
    X = np.vstack([c + 0.1 * rng.standard_normal((20, 3)) for c in centers])
    sets, anchors = prototypical_anchors(X, AnchorSpec("prototypical", 3, 20, seed=0))
    truth = sorted(X[i * 20:(i + 1) * 20].mean(axis=0).tolist() for i in range(3))
    assert np.abs(np.array(sorted(anchors.tolist())) - np.array(truth)).max() <= 1e-9
    assert sorted(len(s) for s in sets) == [20, 20, 20]


def test_prototypes_single_member_and_given_support():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((60, 4))
    sets, anchors = prototypical_anchors(X, AnchorSpec("prototypical", 5, 1, seed=3))
    for s, a in zip(sets, anchors):
        assert len(s) == 1 and np.array_equal(a, X[s[0]])
    Y = rng.standard_normal((60, 2))
    sets2, anchors2 = prototypical_anchors(Y, AnchorSpec("prototypical", 5, 1), support_sets=sets)
    assert sets2 is sets and np.array_equal(anchors2, Y[[s[0] for s in sets]])


def test_small_cluster_shrinks_m(caplog):
    X = np.vstack([np.zeros((2, 2)), np.full((30, 2), 5.0) + np.random.default_rng(0).standard_normal((30, 2))])
    sets, _ = prototypical_anchors(X, AnchorSpec("prototypical", 2, 10, seed=0))
    assert sorted(len(s) for s in sets) == [2, 10]
    with pytest.raises(ValueError):
        prototypical_anchors(X, AnchorSpec("prototypical", 100, 1))
    with pytest.raises(ValueError):
        AnchorSpec("prototypical", 0, 1)


def test_prototypes_approach_centroids_with_more_samples():
    # averaging more cluster members moves each anchor toward its true cluster center
    errs = {M: [] for M in (1, 4, 16)}
    for seed in range(20):
        rng = np.random.default_rng(seed)
        centers = 10 * rng.standard_normal((10, 6))
        X = np.vstack([c + rng.standard_normal((60, 6)) for c in centers])
        for M in errs:
            _, anchors = prototypical_anchors(X, AnchorSpec("prototypical", 8, M, seed=seed))
            nearest = np.linalg.norm(anchors[:, None] - centers[None], axis=2).min(axis=1)
            errs[M].append(nearest.mean())
    means = [np.mean(errs[M]) for M in (1, 4, 16)]
    assert means[0] > means[1] > means[2]


def test_uniform_anchors():
    X = np.arange(40.0).reshape(20, 2)
    assert sorted(uniform_anchors(X, 20, seed=1)[:, 0].tolist()) == sorted(X[:, 0].tolist())
    assert np.array_equal(uniform_anchors(X, 5, 7), uniform_anchors(X, 5, 7))
    Y = np.random.default_rng(0).standard_normal((1000, 3))
    assert not np.array_equal(uniform_anchors(Y, 10, 1), uniform_anchors(Y, 10, 2))
    with pytest.raises(ValueError):
        uniform_anchors(X, 21, 0)


# ---- quantization


def test_quantizer_two_bits():
    assert step_size(2) == pytest.approx(2 / 3)
    levels = quantize_array(np.linspace(-1, 1, 101), 2)
    assert np.allclose(sorted(set(levels.round(12))), [-1, -1 / 3, 1 / 3, 1])
    assert quantize_array(np.array([0.4]), 2)[0] == pytest.approx(1 / 3)


def test_quantizer_fine_grid_error():
    c = np.random.default_rng(0).uniform(-1, 1, 10000)
    assert np.abs(quantize_array(c, 32) - c).max() <= 2.4e-10


def test_quantizer_fixed_points_and_clamp(caplog):
    lv = -1 + np.arange(8) * step_size(3)
    assert np.allclose(quantize_array(lv, 3), lv, atol=1e-15)
    out = quantize_array(np.array([1.7, -3.0]), 3)
    assert np.array_equal(out, [1.0, -1.0])
    assert "clamping" in caplog.text
    with pytest.raises(ValueError):
        quantize_array(np.zeros(2), 0)


def test_semantic_code_round_trip():
    code = SemanticCode(np.array([0.1, -0.9]), source_user=2)
    qc = quantize(code, 4)
    assert qc.q == 4 and qc.source_user == 2
    assert np.array_equal(dequantize(qc), qc.coeffs)


def test_compression_factor_examples():
    assert compression_factor(384, 32, 384) == 1.0
    assert compression_factor(128, 8, 768) == pytest.approx(0.041667, abs=1e-6)
    assert compression_factor(32, 2, 384) == pytest.approx(0.0052083, abs=1e-7)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=50), st.integers(1, 16))
def test_quantizer_properties(values, q):
    c = np.array(values)
    out = quantize_array(c, q)
    delta = step_size(q)
    assert np.all(np.abs(out - c) <= delta / 2 + 1e-12)
    idx = (out + 1) / delta
    assert np.allclose(idx, np.round(idx), atol=1e-6)
    assert np.array_equal(quantize_array(out, q), out)
