"""Complexified quaternions, the H-form and the spin action on Minkowski space.

A complex quaternion ``q0 + q1 I + q2 J + q3 K`` is stored as a complex
array of length 4. The array-level helpers (``qmul``, ``hform``, ``embed``,
``wedge``...) broadcast over leading axes so grids of quaternions can be
processed without Python loops; ``ComplexQuaternion`` wraps a single value.

Minkowski vectors are plain real arrays ``(x0, x1, x2, x3)`` with metric
``-x0 y0 + x1 y1 + x2 y2 + x3 y3``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotAVector, NotImaginary, NotInSpin, SingularQuaternion

ALGEBRA_TOL = 1e-12
INVERSE_TOL = 1e-10

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])
_BAR_SIGN = np.array([1.0, -1.0, -1.0, -1.0])


# --------------------------------------------------------------------------
# Array-level kernels
# --------------------------------------------------------------------------

def qmul(a, b) -> np.ndarray:
    """Hamilton product of complex quaternion arrays of shape (..., 4)."""
    a = np.asarray(a)
    b = np.asarray(b)
    a0, a1, a2, a3 = (a[..., k] for k in range(4))
    b0, b1, b2, b3 = (b[..., k] for k in range(4))
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def hform(a, b) -> np.ndarray:
    """C-bilinear form sum_k a_k b_k (no conjugation)."""
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def hat(a) -> np.ndarray:
    """Complex conjugation of the four coefficients."""
    return np.conj(np.asarray(a, dtype=complex))


def bar(a) -> np.ndarray:
    """Quaternion conjugation: negate the I, J, K coefficients."""
    return np.asarray(a, dtype=complex) * _BAR_SIGN


def qinv(a) -> np.ndarray:
    """Inverse bar(a) / H(a, a); raises if H(a, a) is numerically zero."""
    a = np.asarray(a, dtype=complex)
    n = hform(a, a)
    if np.any(np.abs(n) < ALGEBRA_TOL):
        raise SingularQuaternion("H(q, q) vanishes; quaternion is not invertible")
    return bar(a) / np.asarray(n)[..., None]


def embed(x) -> np.ndarray:
    """Map Minkowski vectors (..., 4) to complex quaternions i x0 + x1 I + x2 J + x3 K."""
    x = np.asarray(x, dtype=float)
    out = x.astype(complex)
    out[..., 0] = 1j * x[..., 0]
    return out


def project(xi, tol: float = ALGEBRA_TOL) -> np.ndarray:
    """Inverse of ``embed``; raises NotAVector when xi != -hat(bar(xi))."""
    xi = np.asarray(xi, dtype=complex)
    defect = xi + hat(bar(xi))
    scale = max(1.0, float(np.max(np.abs(xi), initial=0.0)))
    if np.max(np.abs(defect), initial=0.0) > tol * scale:
        raise NotAVector("complex quaternion does not represent a Minkowski vector")
    out = xi.real.copy()
    out[..., 0] = xi[..., 0].imag
    return out


def mdot(x, y) -> np.ndarray:
    """Minkowski inner product with signature (-, +, +, +)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return -x[..., 0] * y[..., 0] + np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def wedge(u, v) -> np.ndarray:
    """Bivector u ^ v as an element of Im H^C, broadcasting over leading axes.

    Uses (U hat(V) - V hat(U)) / 2 with U, V the embedded vectors, which
    sends e2^e3 -> I, e3^e1 -> J, e1^e2 -> K and e0^e1 -> i I.
    """
    U = embed(u)
    V = embed(v)
    return 0.5 * (qmul(U, hat(V)) - qmul(V, hat(U)))


def spin_matrix(q) -> np.ndarray:
    """4x4 real matrix of x -> q x hat(q)^-1 (no Spin check)."""
    q = np.asarray(q, dtype=complex)
    left = q
    right = qinv(hat(q))
    cols = [project(qmul(qmul(left, embed(e)), right), tol=1e-8) for e in np.eye(4)]
    return np.stack(cols, axis=-1)


# --------------------------------------------------------------------------
# Value types
# --------------------------------------------------------------------------

class ComplexQuaternion:
    """Immutable complex quaternion q0 + q1 I + q2 J + q3 K."""

    __slots__ = ("_c",)
    __array_ufunc__ = None  # make numpy scalars defer to our operators

    def __init__(self, q0=0.0, q1=0.0, q2=0.0, q3=0.0):
        c = np.array([q0, q1, q2, q3], dtype=complex)
        c.setflags(write=False)
        self._c = c

    @classmethod
    def from_array(cls, arr) -> "ComplexQuaternion":
        arr = np.asarray(arr, dtype=complex).reshape(4)
        return cls(*arr)

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    q0 = property(lambda self: complex(self._c[0]))
    q1 = property(lambda self: complex(self._c[1]))
    q2 = property(lambda self: complex(self._c[2]))
    q3 = property(lambda self: complex(self._c[3]))

    def __array__(self, dtype=None, copy=None):
        return np.array(self._c, dtype=dtype)

    def __add__(self, other):
        if isinstance(other, ComplexQuaternion):
            return ComplexQuaternion.from_array(self._c + other._c)
        if np.isscalar(other):
            return ComplexQuaternion.from_array(self._c + np.array([other, 0, 0, 0]))
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return ComplexQuaternion.from_array(-self._c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, ComplexQuaternion):
            return ComplexQuaternion.from_array(qmul(self._c, other._c))
        if np.isscalar(other):
            return ComplexQuaternion.from_array(self._c * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other):
            return ComplexQuaternion.from_array(self._c * other)
        return NotImplemented

    def __truediv__(self, other):
        if np.isscalar(other):
            return ComplexQuaternion.from_array(self._c / other)
        return NotImplemented

    def hat(self) -> "ComplexQuaternion":
        return ComplexQuaternion.from_array(hat(self._c))

    def bar(self) -> "ComplexQuaternion":
        return ComplexQuaternion.from_array(bar(self._c))

    def inverse(self) -> "ComplexQuaternion":
        return ComplexQuaternion.from_array(qinv(self._c))

    def allclose(self, other, atol: float = ALGEBRA_TOL) -> bool:
        return bool(np.allclose(self._c, np.asarray(other, dtype=complex), rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        parts = ", ".join(f"{complex(v):.6g}" for v in self._c)
        return f"ComplexQuaternion({parts})"


ONE = ComplexQuaternion(1, 0, 0, 0)
I = ComplexQuaternion(0, 1, 0, 0)
J = ComplexQuaternion(0, 0, 1, 0)
K = ComplexQuaternion(0, 0, 0, 1)


def _arr(q) -> np.ndarray:
    if isinstance(q, ComplexQuaternion):
        return q.coeffs
    if isinstance(q, SpinElement):
        return q.q.coeffs
    return np.asarray(q, dtype=complex)


@dataclass(frozen=True)
class SpinElement:
    """Unit complex quaternion, H(q, q) = 1, acting on Minkowski space."""

    q: ComplexQuaternion

    def __post_init__(self):
        n = h_form(self.q, self.q)
        if abs(n - 1.0) > INVERSE_TOL:
            raise NotInSpin(f"H(q, q) = {n:.3g}, expected 1")

    def matrix(self) -> np.ndarray:
        return spin_matrix(self.q.coeffs)

    def __mul__(self, other: "SpinElement") -> "SpinElement":
        return SpinElement(self.q * other.q)

    def __neg__(self) -> "SpinElement":
        return SpinElement(-self.q)


# --------------------------------------------------------------------------
# Scalar-level operations
# --------------------------------------------------------------------------

def quat_mul(a, b) -> ComplexQuaternion:
    return ComplexQuaternion.from_array(qmul(_arr(a), _arr(b)))


def h_form(a, b) -> complex:
    return complex(hform(_arr(a), _arr(b)))


def conj_hat(a) -> ComplexQuaternion:
    return ComplexQuaternion.from_array(hat(_arr(a)))


def conj_bar(a) -> ComplexQuaternion:
    return ComplexQuaternion.from_array(bar(_arr(a)))


def embed_vector(x) -> ComplexQuaternion:
    return ComplexQuaternion.from_array(embed(np.asarray(x, dtype=float).reshape(4)))


def project_vector(xi, tol: float = 1e-10) -> np.ndarray:
    return project(_arr(xi), tol=tol)


def spin_act(q, x) -> np.ndarray:
    """Lorentz action Phi(q) x = q xi hat(q)^-1 with xi the embedded vector."""
    qa = _arr(q)
    n = complex(hform(qa, qa))
    if abs(n - 1.0) > INVERSE_TOL:
        raise NotInSpin(f"H(q, q) = {n:.3g}, expected 1")
    xi = embed(x)
    return project(qmul(qmul(qa, xi), qinv(hat(qa))), tol=1e-8)


def random_spin(rng: np.random.Generator) -> SpinElement:
    """Random element of Spin(1,3) from 8 Gaussians normalised by sqrt(H(q, q))."""
    while True:
        v = rng.standard_normal(8)
        q = v[:4] + 1j * v[4:]
        n = complex(hform(q, q))
        if abs(n) >= 1e-6:
            return SpinElement(ComplexQuaternion.from_array(q / np.sqrt(n)))


def _require_imaginary(*qs) -> None:
    for q in qs:
        if abs(_arr(q)[0]) > ALGEBRA_TOL:
            raise NotImaginary("argument has a non-zero real (1-) coefficient")


def vector_cross(a, b) -> ComplexQuaternion:
    """Vectorial product (a b - b a) / 2 on Im H^C."""
    _require_imaginary(a, b)
    A, B = _arr(a), _arr(b)
    return ComplexQuaternion.from_array(0.5 * (qmul(A, B) - qmul(B, A)))


def mixed_product(a, b, c) -> complex:
    """Complex volume [a, b, c] = H(a x b, c) on Im H^C."""
    _require_imaginary(c)
    return h_form(vector_cross(a, b), c)


def wedge_to_bivector(u, v) -> ComplexQuaternion:
    return ComplexQuaternion.from_array(
        wedge(np.asarray(u, dtype=float).reshape(4), np.asarray(v, dtype=float).reshape(4))
    )


def minkowski_dot(x, y) -> float:
    return float(mdot(x, y))


def spin_from_lorentz(L) -> SpinElement:
    """Lift a proper orthochronous Lorentz matrix to one of its two Spin preimages.

    Solves the real-linear system q xi_k = embed(L e_k) hat(q) for the 8 real
    coefficients of q, then normalises so that H(q, q) = 1.
    """
    L = np.asarray(L, dtype=float)
    rows = []
    basis = np.eye(8)
    for k in range(4):
        xi = embed(np.eye(4)[k])
        eta = embed(L[:, k])
        cols = []
        for b in basis:
            q = b[:4] + 1j * b[4:]
            r = qmul(q, xi) - qmul(eta, hat(q))
            cols.append(np.concatenate([r.real, r.imag]))
        rows.append(np.stack(cols, axis=1))
    A = np.concatenate(rows, axis=0)
    _, s, vt = np.linalg.svd(A)
    v = vt[-1]
    q = v[:4] + 1j * v[4:]
    n = complex(hform(q, q))
    if s[-1] > 1e-8 * max(1.0, s[0]) or abs(n.imag) > 1e-8 * abs(n) or n.real <= 0:
        raise NotInSpin("matrix is not a proper orthochronous Lorentz transform")
    return SpinElement(ComplexQuaternion.from_array(q / np.sqrt(n.real)))
