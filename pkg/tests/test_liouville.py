import numpy as np
import pytest
from scipy.linalg import expm

from memfac.errors import DimensionError, ValidationError
from memfac.liouville import (
    LiouvilleSpace,
    LiouvilleVector,
    OperatorBasis,
    SuperOperator,
    devectorize,
    embed_composite,
    env_injection_matrix,
    env_trace_matrix,
    liouvillian,
    partial_trace_env,
    sandwich_superop,
    trace_vector,
    vectorize,
)

SM = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e|
SP = SM.conj().T


def random_matrix(rng, dim):
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def random_density(rng, dim):
    a = random_matrix(rng, dim)
    rho = a @ a.conj().T
    return rho / np.trace(rho)


# ---------------------------------------------------------------------------
# vectorization convention


def test_vectorize_basis_projector():
    ket0 = np.zeros((2, 2), dtype=complex)
    ket0[0, 0] = 1.0
    assert np.array_equal(vectorize(ket0), np.array([1, 0, 0, 0], dtype=complex))


def test_vectorize_identity():
    assert np.array_equal(vectorize(np.eye(2)), np.array([1, 0, 0, 1], dtype=complex))


def test_round_trip_all_dims():
    rng = np.random.default_rng(7)
    for dim in range(1, 9):
        m = random_matrix(rng, dim)
        assert np.array_equal(devectorize(vectorize(m)), m)


def test_basis_elements_vectorize_to_unit_vectors():
    for dim in (2, 3, 5):
        basis = OperatorBasis(dim)
        assert len(basis) == dim * dim
        for k in range(len(basis)):
            v = vectorize(basis.element(k))
            expected = np.zeros(dim * dim)
            expected[k] = 1.0
            assert np.array_equal(v, expected)


def test_basis_spans_matrices():
    rng = np.random.default_rng(3)
    basis = OperatorBasis(3)
    m = random_matrix(rng, 3)
    rebuilt = sum(m[k % 3, k // 3] * basis.element(k) for k in range(9))
    assert np.allclose(rebuilt, m, atol=1e-15)


def test_trace_vector_is_trace():
    rng = np.random.default_rng(11)
    m = random_matrix(rng, 4)
    assert np.isclose(trace_vector(4) @ vectorize(m), np.trace(m))


def test_vectorize_rejects_nonsquare():
    with pytest.raises(DimensionError):
        vectorize(np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        devectorize(np.zeros(5))


# ---------------------------------------------------------------------------
# sandwich superoperator


def test_sandwich_identity_is_identity():
    s = sandwich_superop(np.eye(2))
    assert np.allclose(s.matrix, np.eye(4))


def test_sandwich_lowers_excited_state():
    rho_e = np.diag([0.0, 1.0]).astype(complex)
    out = devectorize(sandwich_superop(SM, SM).matrix @ vectorize(rho_e))
    assert np.allclose(out, np.diag([1.0, 0.0]))


def test_sandwich_matches_dense_oracle():
    rng = np.random.default_rng(5)
    a, b, rho = (random_matrix(rng, 3) for _ in range(3))
    out = devectorize(sandwich_superop(a, b).matrix @ vectorize(rho))
    assert np.allclose(out, a @ rho @ b.conj().T, atol=1e-13)


def test_sandwich_bilinear():
    rng = np.random.default_rng(6)
    a1, a2, b = (random_matrix(rng, 2) for _ in range(3))
    lhs = sandwich_superop(2.0 * a1 + 3.0 * a2, b).matrix
    rhs = 2.0 * sandwich_superop(a1, b).matrix + 3.0 * sandwich_superop(a2, b).matrix
    assert np.allclose(lhs, rhs, atol=1e-13)
    # and antilinear-free in A, linear in conj(B)
    lhs_b = sandwich_superop(a1, 2.0 * b).matrix
    assert np.allclose(lhs_b, 2.0 * sandwich_superop(a1, b).matrix, atol=1e-13)


def test_sandwich_dimension_mismatch():
    with pytest.raises(DimensionError):
        sandwich_superop(np.eye(2), np.eye(3))


# ---------------------------------------------------------------------------
# Liouvillian


def test_liouvillian_zero():
    lv = liouvillian(np.zeros((2, 2)))
    assert np.allclose(lv.matrix, 0.0)


def test_liouvillian_amplitude_damping_analytic():
    gamma = 0.37
    lv = liouvillian(np.zeros((2, 2)), [(gamma, SM)])
    for t in (0.0, 0.5, 2.0, 7.3):
        prop = expm(lv.matrix * t)
        rho_t = devectorize(prop @ vectorize(np.diag([0.0, 1.0])))
        decay = np.exp(-gamma * t)
        expected = np.diag([1.0 - decay, decay])
        assert np.allclose(rho_t, expected, atol=1e-12)
        # coherence decays at gamma/2
        coh_t = devectorize(prop @ vectorize(SP))
        assert np.allclose(coh_t, SP * np.exp(-gamma * t / 2.0), atol=1e-12)


def test_trace_functional_is_left_null_vector():
    rng = np.random.default_rng(9)
    h = random_matrix(rng, 3)
    h = h + h.conj().T
    terms = [(0.3, random_matrix(rng, 3)), (1.2, random_matrix(rng, 3))]
    lv = liouvillian(h, terms)
    assert np.linalg.norm(trace_vector(3) @ lv.matrix) < 1e-12
    # trace preservation of the generator on random states
    for _ in range(100):
        rho = random_density(rng, 3)
        assert abs(trace_vector(3) @ (lv.matrix @ vectorize(rho))) < 1e-12


def test_liouvillian_rejects_bad_input():
    with pytest.raises(ValidationError):
        liouvillian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        liouvillian(np.zeros((2, 2)), [(-0.1, SM)])


# ---------------------------------------------------------------------------
# composite embedding and partial trace


def test_partial_trace_of_product_state():
    rng = np.random.default_rng(13)
    rho_s = random_density(rng, 2)
    rho_e = random_density(rng, 3)
    space = LiouvilleSpace(2, 3)
    v = vectorize(embed_composite(rho_s, rho_e))
    assert np.allclose(partial_trace_env(v, space), vectorize(rho_s), atol=1e-14)


def test_partial_trace_identity_scaling():
    space = LiouvilleSpace(2, 3)
    v = vectorize(embed_composite(np.eye(2), np.eye(3)))
    assert np.allclose(partial_trace_env(v, space), 3.0 * vectorize(np.eye(2)), atol=1e-14)


def test_partial_trace_matches_index_contraction():
    rng = np.random.default_rng(17)
    d, de = 2, 4
    space = LiouvilleSpace(d, de)
    rho = random_density(rng, d * de)
    reduced = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            for e in range(de):
                reduced[i, j] += rho[i * de + e, j * de + e]
    assert np.allclose(
        partial_trace_env(vectorize(rho), space), vectorize(reduced), atol=1e-14
    )


def test_partial_trace_linear_and_commutes_with_system_superops():
    rng = np.random.default_rng(19)
    d, de = 2, 3
    space = LiouvilleSpace(d, de)
    v1 = rng.normal(size=space.size) + 1j * rng.normal(size=space.size)
    v2 = rng.normal(size=space.size) + 1j * rng.normal(size=space.size)
    lhs = partial_trace_env(2.0 * v1 - 1j * v2, space)
    rhs = 2.0 * partial_trace_env(v1, space) - 1j * partial_trace_env(v2, space)
    assert np.allclose(lhs, rhs, atol=1e-13)
    # Tr_E{(S (x) 1) v} = S Tr_E{v} for a system-only sandwich
    a, b = random_matrix(rng, d), random_matrix(rng, d)
    s_sys = sandwich_superop(a, b).matrix
    s_comp = sandwich_superop(
        embed_composite(a, np.eye(de)), embed_composite(b, np.eye(de))
    ).matrix
    assert np.allclose(
        partial_trace_env(s_comp @ v1, space),
        s_sys @ partial_trace_env(v1, space),
        atol=1e-12,
    )


def test_injection_and_trace_matrices_are_inverse_on_products():
    rng = np.random.default_rng(23)
    d, de = 2, 3
    rho_e = random_density(rng, de)
    j = env_injection_matrix(rho_e, d)
    t = env_trace_matrix(d, de)
    rho_s = random_density(rng, d)
    v = j @ vectorize(rho_s)
    assert np.allclose(v, vectorize(embed_composite(rho_s, rho_e)), atol=1e-14)
    assert np.allclose(t @ v, vectorize(rho_s), atol=1e-14)


def test_space_tag_mismatch_raises():
    space = LiouvilleSpace(2, 3)
    tagged = LiouvilleVector(np.zeros(4), LiouvilleSpace(2))
    with pytest.raises(DimensionError):
        partial_trace_env(tagged, space)
    s1 = SuperOperator(np.eye(4), LiouvilleSpace(2))
    s2 = SuperOperator(np.eye(36), space)
    with pytest.raises(DimensionError):
        _ = s1 @ s2


def test_superop_composition_preserves_space():
    rng = np.random.default_rng(29)
    space = LiouvilleSpace(2)
    s1 = SuperOperator(random_matrix(rng, 4), space)
    s2 = SuperOperator(random_matrix(rng, 4), space)
    s3 = SuperOperator(random_matrix(rng, 4), space)
    left = (s1 @ s2) @ s3
    right = s1 @ (s2 @ s3)
    assert left.space == space
    assert np.allclose(left.matrix, right.matrix, atol=1e-12)
