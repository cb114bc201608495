import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from constangle.algebra import (
    ETA,
    I,
    J,
    K,
    ONE,
    ComplexQuaternion,
    SpinElement,
    conj_bar,
    conj_hat,
    embed_vector,
    h_form,
    minkowski_dot,
    mixed_product,
    project_vector,
    qinv,
    qmul,
    quat_mul,
    random_spin,
    spin_act,
    spin_from_lorentz,
    vector_cross,
    wedge_to_bivector,
)
from constangle.errors import NotAVector, NotImaginary, NotInSpin, SingularQuaternion

# Basis product table: (a, b) -> (sign, c) with e_a e_b = sign e_c, indices 0=1, 1=I, 2=J, 3=K.
TABLE = {
    (0, 0): (1, 0), (0, 1): (1, 1), (0, 2): (1, 2), (0, 3): (1, 3),
    (1, 0): (1, 1), (1, 1): (-1, 0), (1, 2): (1, 3), (1, 3): (-1, 2),
    (2, 0): (1, 2), (2, 1): (-1, 3), (2, 2): (-1, 0), (2, 3): (1, 1),
    (3, 0): (1, 3), (3, 1): (1, 2), (3, 2): (-1, 1), (3, 3): (-1, 0),
}


def table_mul(a, b):
    out = np.zeros(4, dtype=complex)
    for (i, j), (s, k) in TABLE.items():
        out[k] += s * a[i] * b[j]
    return out


def rand_q(rng, n=None):
    shape = (4,) if n is None else (n, 4)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def rand_imag(rng):
    q = rand_q(rng)
    q[0] = 0
    return q


def rotation_matrix(theta):
    """Rotation by theta in the (e2, e3) plane."""
    L = np.eye(4)
    L[2, 2] = L[3, 3] = math.cos(theta)
    L[3, 2] = math.sin(theta)
    L[2, 3] = -math.sin(theta)
    return L


def boost_matrix(phi):
    """Boost of rapidity phi in the (e0, e1) plane."""
    L = np.eye(4)
    L[0, 0] = L[1, 1] = math.cosh(phi)
    L[0, 1] = L[1, 0] = math.sinh(phi)
    return L


def action_matrix(q):
    return np.stack([spin_act(q, e) for e in np.eye(4)], axis=1)


complex_coeff = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)
quaternions = st.lists(complex_coeff, min_size=4, max_size=4).map(lambda c: np.array(c, dtype=complex))


# --- multiplication ---------------------------------------------------------

def test_ij_is_k():
    assert (I * J).allclose(K)
    assert (J * I).allclose(-K)


def test_squares_are_minus_one():
    for u in (I, J, K):
        assert (u * u).allclose(-ONE)


def test_unit_is_neutral(rng):
    xi = ComplexQuaternion.from_array(rand_q(rng))
    assert (ONE * xi).allclose(xi)
    assert (xi * ONE).allclose(xi)


def test_product_of_one_plus_i_and_one_plus_j():
    got = quat_mul(ONE + I, ONE + J)
    expected = table_mul(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0]))
    assert got.allclose(expected)
    assert got.allclose(ONE + I + J + K)


@given(quaternions, quaternions)
def test_qmul_matches_lookup_table(a, b):
    assert np.allclose(qmul(a, b), table_mul(a, b), atol=1e-12)


@given(quaternions, quaternions, quaternions)
def test_associative(a, b, c):
    assert np.allclose(qmul(qmul(a, b), c), qmul(a, qmul(b, c)), atol=1e-9)


@given(quaternions, quaternions, complex_coeff)
def test_complex_bilinear(a, b, lam):
    assert np.allclose(qmul(lam * a, b), lam * qmul(a, b), atol=1e-9)
    assert np.allclose(qmul(a, lam * b), lam * qmul(a, b), atol=1e-9)


def test_qmul_broadcasts(rng):
    a, b = rand_q(rng, 7), rand_q(rng, 7)
    out = qmul(a, b)
    for k in range(7):
        assert np.allclose(out[k], table_mul(a[k], b[k]))


# --- H-form and conjugations ----------------------------------------------------

def test_h_form_basics():
    assert h_form(I, I) == 1
    assert h_form(ONE, I) == 0


def test_h_of_embedded_vector_is_minkowski_norm(rng):
    for _ in range(100):
        x = rng.normal(size=4)
        xi = embed_vector(x)
        expected = -x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2
        assert abs(h_form(xi, xi) - expected) < 1e-12
        assert abs(minkowski_dot(x, x) - x @ ETA @ x) < 1e-12


def test_h_multiplicative_on_common_factor(rng):
    for _ in range(200):
        a, b, c = rand_q(rng), rand_q(rng), rand_q(rng)
        lhs = h_form(qmul(a, c), qmul(b, c))
        rhs = h_form(a, b) * h_form(c, c)
        assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))


def test_conjugations():
    assert conj_hat(1j * ONE + I).allclose(-1j * ONE + I)
    assert conj_bar(ONE + I + J).allclose(ONE - I - J)


@given(quaternions)
def test_conjugations_are_involutions(a):
    assert np.allclose(conj_hat(conj_hat(a)).coeffs, a)
    assert np.allclose(conj_bar(conj_bar(a)).coeffs, a)


def test_bar_is_anti_automorphism(rng):
    for _ in range(50):
        a, b = rand_q(rng), rand_q(rng)
        lhs = conj_bar(qmul(a, b)).coeffs
        rhs = table_mul(conj_bar(b).coeffs, conj_bar(a).coeffs)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_inverse(rng):
    a = rand_q(rng)
    assert np.allclose(qmul(a, qinv(a)), [1, 0, 0, 0], atol=1e-10)
    assert (ComplexQuaternion.from_array(a).inverse() * ComplexQuaternion.from_array(a)).allclose(ONE, 1e-10)


def test_inverse_of_null_quaternion_fails():
    with pytest.raises(SingularQuaternion):
        qinv(np.array([1, 1j, 0, 0]))


# --- vectors ---------------------------------------------------------------

def test_embed_basis():
    assert embed_vector([1, 0, 0, 0]).allclose(1j * ONE)
    assert embed_vector([0, 1, 0, 0]).allclose(I)


def test_project_round_trip(rng):
    for _ in range(50):
        x = rng.normal(size=4)
        assert np.allclose(project_vector(embed_vector(x)), x, atol=1e-14)


def test_project_rejects_non_vectors():
    with pytest.raises(NotAVector):
        project_vector(ONE)
    with pytest.raises(NotAVector):
        project_vector(1j * I)


# --- spin action -----------------------------------------------------------

def test_identity_spin_acts_trivially(rng):
    x = rng.normal(size=4)
    assert np.allclose(spin_act(SpinElement(ONE), x), x)


@pytest.mark.parametrize("theta", [0.3, 1.2, -2.5])
def test_rotation_matches_matrix_oracle(theta):
    q = SpinElement(math.cos(theta / 2) * ONE + math.sin(theta / 2) * I)
    M = action_matrix(q)
    assert np.allclose(M, rotation_matrix(theta), atol=1e-12)
    assert np.allclose(spin_act(q, [0, 0, 1, 0]), [0, 0, math.cos(theta), math.sin(theta)], atol=1e-12)
    assert np.allclose(M.T @ ETA @ M, ETA, atol=1e-12)


@pytest.mark.parametrize("phi", [0.4, -1.1, 2.0])
def test_boost_matches_matrix_oracle(phi):
    q = SpinElement(math.cosh(phi / 2) * ONE + 1j * math.sinh(phi / 2) * I)
    M = action_matrix(q)
    L = boost_matrix(phi)
    assert np.allclose(M, L, atol=1e-12) or np.allclose(M, np.linalg.inv(L), atol=1e-12)
    assert np.allclose(M.T @ ETA @ M, ETA, atol=1e-12)
    assert np.allclose(q.matrix(), M, atol=1e-12)


def test_spin_action_requires_unit(rng):
    with pytest.raises(NotInSpin):
        SpinElement(2 * ONE)
    with pytest.raises(NotInSpin):
        spin_act(2 * ONE, [1, 0, 0, 0])


def test_random_spin_properties(rng):
    for _ in range(200):
        q = random_spin(rng)
        M = q.matrix()
        assert abs(h_form(q.q, q.q) - 1) < 1e-12
        assert np.allclose(M.T @ ETA @ M, ETA, atol=1e-12)
        assert np.linalg.det(M) > 0 and M[0, 0] >= 1 - 1e-12
        assert np.array_equal(M, (-q).matrix())


def test_spin_from_lorentz_recovers_boost():
    q = spin_from_lorentz(boost_matrix(0.8) @ rotation_matrix(0.5))
    assert np.allclose(q.matrix(), boost_matrix(0.8) @ rotation_matrix(0.5), atol=1e-10)


# --- products on Im H^C ----------------------------------------------------------

def test_vector_cross():
    assert vector_cross(I, J).allclose(K)
    xi = ComplexQuaternion(0, 1 + 2j, -0.5, 3j)
    assert vector_cross(xi, xi).allclose(0 * ONE)


def test_mixed_product_volume():
    assert abs(mixed_product(I, J, K) - 1) < 1e-15


def test_mixed_product_alternating_and_trilinear(rng):
    a, b, c = rand_imag(rng), rand_imag(rng), rand_imag(rng)
    m = mixed_product(a, b, c)
    assert abs(mixed_product(b, a, c) + m) < 1e-12
    assert abs(mixed_product(a, c, b) + m) < 1e-12
    assert abs(mixed_product(b, c, a) - m) < 1e-12
    lam = 0.3 - 1.7j
    assert abs(mixed_product(lam * a, b, c) - lam * m) < 1e-12


def test_products_reject_real_parts():
    with pytest.raises(NotImaginary):
        vector_cross(ONE + I, J)
    with pytest.raises(NotImaginary):
        mixed_product(I, J, ONE)


# --- bivectors -------------------------------------------------------------

def test_wedge_basis():
    e = np.eye(4)
    assert wedge_to_bivector(e[2], e[3]).allclose(I)
    assert wedge_to_bivector(e[3], e[1]).allclose(J)
    assert wedge_to_bivector(e[1], e[2]).allclose(K)
    assert wedge_to_bivector(e[2], e[2]).allclose(0 * ONE)


def test_wedge_gram_identity(rng):
    for _ in range(100):
        u, v = rng.normal(size=4), rng.normal(size=4)
        w = wedge_to_bivector(u, v)
        gram = minkowski_dot(u, u) * minkowski_dot(v, v) - minkowski_dot(u, v) ** 2
        assert abs(h_form(w, w) - gram) < 1e-12 * max(1.0, abs(gram))
        assert wedge_to_bivector(v, u).allclose(-w)
