import numpy as np
import pytest

from mtot.tensor import (
    contract,
    fold,
    fold_general,
    frobenius_norm,
    kronecker,
    leading_left_vectors,
    mode_product,
    multi_mode_product,
    tucker,
    unfold,
    unfold_general,
)


def oracle_unfold(t, mode):
    """Scalar-loop unfolding: remaining modes ascending, lowest varying fastest."""
    rest = [k for k in range(t.ndim) if k != mode]
    out = np.zeros((t.shape[mode], int(np.prod([t.shape[k] for k in rest]))))
    for idx in np.ndindex(*t.shape):
        col, stride = 0, 1
        for k in rest:
            col += idx[k] * stride
            stride *= t.shape[k]
        out[idx[mode], col] = t[idx]
    return out


def oracle_unfold_general(t, rows, cols):
    p = int(np.prod([t.shape[k] for k in rows]))
    q = int(np.prod([t.shape[k] for k in cols]))
    out = np.zeros((p, q))
    for idx in np.ndindex(*t.shape):
        r, stride = 0, 1
        for k in rows:
            r += idx[k] * stride
            stride *= t.shape[k]
        c, stride = 0, 1
        for k in cols:
            c += idx[k] * stride
            stride *= t.shape[k]
        out[r, c] = t[idx]
    return out


def test_unfold_matrix_modes():
    m = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(unfold(m, 0), m)
    assert np.array_equal(unfold(m, 1), m.T)


def test_unfold_against_index_oracle():
    t = np.arange(1.0, 9.0).reshape(2, 2, 2)
    for mode in range(3):
        assert np.array_equal(unfold(t, mode), oracle_unfold(t, mode))


def test_unfold_mode_out_of_range():
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 2)), 2)


def test_fold_inverts_unfold_bit_identical():
    rng = np.random.default_rng(0)
    t = rng.standard_normal((3, 4, 2, 5))
    for mode in range(4):
        assert np.array_equal(fold(unfold(t, mode), mode, t.shape), t)


def test_fold_zero_and_known_values():
    assert np.array_equal(fold(np.zeros((3, 8)), 0, (3, 4, 2)), np.zeros((3, 4, 2)))
    t = np.arange(1.0, 9.0).reshape(2, 2, 2)
    assert np.array_equal(fold(oracle_unfold(t, 0), 0, (2, 2, 2)), t)


def test_fold_dimension_mismatch():
    with pytest.raises(ValueError):
        fold(np.zeros((3, 7)), 0, (3, 4, 2))


def test_unfold_general_matrix_identity():
    m = np.arange(6.0).reshape(2, 3)
    assert np.array_equal(unfold_general(m, (0,), (1,)), m)


def test_unfold_general_empty_side_rejected():
    with pytest.raises(ValueError):
        unfold_general(np.zeros((2, 3)), (0, 1), ())


def test_unfold_general_against_index_oracle():
    rng = np.random.default_rng(1)
    t = rng.standard_normal((2, 3, 2))
    got = unfold_general(t, (0, 1), (2,))
    assert got.shape == (6, 2)
    assert np.array_equal(got, oracle_unfold_general(t, (0, 1), (2,)))
    got = unfold_general(t, (2, 0), (1,))
    assert np.array_equal(got, oracle_unfold_general(t, (2, 0), (1,)))


def test_fold_general_inverts():
    rng = np.random.default_rng(2)
    t = rng.standard_normal((2, 4, 3, 2))
    for rows, cols in [((0,), (1, 2, 3)), ((2, 0), (3, 1)), ((1, 2), (0, 3))]:
        m = unfold_general(t, rows, cols)
        assert np.array_equal(fold_general(m, rows, cols, t.shape), t)


def test_mode_product_identity_and_sums():
    rng = np.random.default_rng(3)
    t = rng.standard_normal((2, 3, 2))
    assert np.array_equal(mode_product(t, np.eye(3), 1), t)
    ones = np.ones((1, 3))
    assert np.allclose(mode_product(t, ones, 1)[:, 0, :], t.sum(axis=1))


def test_mode_product_against_unfold_oracle():
    rng = np.random.default_rng(4)
    t = rng.standard_normal((2, 3, 2))
    a = rng.standard_normal((4, 3))
    expected = fold(a @ unfold(t, 1), 1, (2, 4, 2))
    assert np.allclose(mode_product(t, a, 1), expected, atol=1e-14)


def test_mode_product_shape_mismatch():
    with pytest.raises(ValueError):
        mode_product(np.zeros((2, 3)), np.zeros((4, 2)), 1)


def test_kronecker_cases():
    b = np.arange(4.0).reshape(2, 2)
    assert np.array_equal(kronecker(np.array([[1.0]]), b), b)
    assert np.array_equal(kronecker(np.eye(2), np.eye(3)), np.eye(6))
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    blocks = np.block([[1 * flip, 2 * flip], [3 * flip, 4 * flip]])
    assert np.array_equal(kronecker(a, flip), blocks)


def test_contract_cases():
    rng = np.random.default_rng(5)
    b = rng.standard_normal((2, 3, 4))
    assert np.array_equal(contract(np.zeros((2, 3)), b, 2), np.zeros(4))
    x = rng.standard_normal((2, 3))
    self_contraction = contract(x, x[..., None], 2)
    assert np.allclose(self_contraction, (x**2).sum())


def test_contract_matches_matricized_form():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2, 3))
    b = rng.standard_normal((2, 3, 4))
    vec = unfold_general(x, (0,), (1,)).reshape(-1, order="F")
    expected = vec @ unfold_general(b, (0, 1), (2,))
    got = contract(x, b, 2)
    assert np.allclose(got, expected, rtol=1e-12)


def test_contract_matricized_randomized_sizes():
    rng = np.random.default_rng(60)
    for _ in range(25):
        l = int(rng.integers(1, 4))
        trailing = int(rng.integers(1, 3))
        shape_x = tuple(int(rng.integers(2, 9)) for _ in range(l))
        shape_b = shape_x + tuple(int(rng.integers(2, 9)) for _ in range(trailing))
        if np.prod(shape_b) > 10_000:
            continue
        x = rng.standard_normal(shape_x)
        b = rng.standard_normal(shape_b)
        lead = tuple(range(l))
        tail = tuple(range(l, l + trailing))
        vec = x.ravel(order="F")
        expected = (vec @ unfold_general(b, lead, tail)).reshape(
            shape_b[l:], order="F")
        got = contract(x, b, l)
        assert np.allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_contract_shape_errors():
    with pytest.raises(ValueError):
        contract(np.zeros((2, 3)), np.zeros((3, 2, 4)), 2)
    with pytest.raises(ValueError):
        contract(np.zeros((2, 3)), np.zeros((2, 3)), 2)


def test_frobenius_norm():
    assert frobenius_norm(np.zeros((3, 3))) == 0.0
    assert frobenius_norm(np.array([3.0])) == 3.0
    assert np.isclose(frobenius_norm(np.array([1.0, 2.0, 3.0, 4.0])), np.sqrt(30.0))


def test_frobenius_norm_matches_every_unfolding():
    rng = np.random.default_rng(7)
    t = rng.standard_normal((3, 4, 5))
    for mode in range(3):
        assert np.isclose(frobenius_norm(t), np.linalg.norm(unfold(t, mode)), rtol=1e-12)


def test_tucker_full_rank_reconstructs():
    rng = np.random.default_rng(8)
    t = rng.standard_normal((4, 3, 5))
    core, factors = tucker(t, (4, 3, 5))
    rec = multi_mode_product(core, factors)
    assert np.linalg.norm(rec - t) <= 1e-10 * np.linalg.norm(t)


def test_tucker_rank_one_separable_exact():
    a, b, c = np.array([1.0, -2.0]), np.array([0.5, 1.0, 2.0]), np.array([3.0, 1.0])
    t = np.einsum("i,j,k->ijk", a, b, c)
    core, factors = tucker(t, (1, 1, 1))
    rec = multi_mode_product(core, factors)
    assert np.linalg.norm(rec - t) <= 1e-10 * np.linalg.norm(t)


def test_tucker_truncation_matches_gram_projection_oracle():
    # independent oracle: per-mode projectors from eigh of the row Gram matrix
    rng = np.random.default_rng(9)
    t = rng.standard_normal((5, 4, 3))
    ranks = (2, 2, 2)
    core, factors = tucker(t, ranks)
    rec = multi_mode_product(core, factors)

    proj = t.copy()
    for mode, r in enumerate(ranks):
        flat = unfold(t, mode)
        w, v = np.linalg.eigh(flat @ flat.T)
        basis = v[:, ::-1][:, :r]
        proj = mode_product(proj, basis @ basis.T, mode)
    assert np.isclose(np.linalg.norm(rec - t), np.linalg.norm(proj - t), rtol=1e-8)


def test_tucker_factor_orthonormality():
    rng = np.random.default_rng(10)
    t = rng.standard_normal((6, 5, 4))
    _, factors = tucker(t, (3, 2, 2))
    for f in factors:
        assert np.linalg.norm(f.T @ f - np.eye(f.shape[1])) <= 1e-10


def test_tucker_rank_validation():
    with pytest.raises(ValueError):
        tucker(np.zeros((2, 2)), (3, 1))
    with pytest.raises(ValueError):
        tucker(np.zeros((2, 2)), (0, 1))


def test_multi_mode_product_trivial_cases():
    rng = np.random.default_rng(11)
    core = rng.standard_normal((2, 3, 4))
    assert np.array_equal(multi_mode_product(core, []), core)
    eyes = [np.eye(2), np.eye(3), np.eye(4)]
    assert np.array_equal(multi_mode_product(core, eyes), core)


def test_multi_mode_product_duplicate_modes_rejected():
    with pytest.raises(ValueError):
        multi_mode_product(np.zeros((2, 2)), [np.eye(2), np.eye(2)], modes=[0, 0])


def test_kronecker_identity_both_groupings():
    # tensor-product chain vs explicit Kronecker matricized form
    rng = np.random.default_rng(12)
    core = rng.standard_normal((2, 2, 2))
    u, v, w = rng.standard_normal((3, 2)), rng.standard_normal((4, 2)), rng.standard_normal((5, 2))
    t = multi_mode_product(core, [u, v, w])
    lhs = unfold_general(t, (0, 1), (2,))
    rhs = kronecker(v, u) @ unfold_general(core, (0, 1), (2,)) @ w.T
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)
    lhs2 = unfold_general(t, (0,), (1, 2))
    rhs2 = u @ unfold_general(core, (0,), (1, 2)) @ kronecker(w, v).T
    assert np.linalg.norm(lhs2 - rhs2) <= 1e-10 * np.linalg.norm(rhs2)


def test_leading_left_vectors_sign_convention():
    rng = np.random.default_rng(13)
    m = rng.standard_normal((6, 10))
    u = leading_left_vectors(m, 3)
    for k in range(3):
        assert u[np.argmax(np.abs(u[:, k])), k] > 0


def test_leading_left_vectors_completion():
    u = leading_left_vectors(np.ones((4, 1)), 3)
    assert u.shape == (4, 3)
    assert np.allclose(u.T @ u, np.eye(3), atol=1e-12)
