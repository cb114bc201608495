"""Oriented spacelike planes of Minkowski space and the complex angle between them.

An oriented spacelike plane is represented by an orthonormal basis and its
unit simple bivector in Im H^C; the set of such bivectors is the complex
sphere Z1^2 + Z2^2 + Z3^2 = 1. The complex angle psi = psi1 + i psi2 is
defined through H(p, q) = cos psi.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .algebra import ComplexQuaternion, hform, mdot, spin_act, wedge
from .errors import AngleDegenerate, DegeneratePlane, NotSpacelike

PLANE_TOL = 1e-10
NULL_BRANCH_TOL = 1e-8
RANK_TOL = 1e-10
IMAG_SNAP = 1e-14


# --------------------------------------------------------------------------
# Complex angles
# --------------------------------------------------------------------------

def complex_arccos(z: complex) -> complex:
    """Principal arccos via -i log(z + i sqrt(1 - z^2))."""
    z = complex(z)
    return -1j * cmath.log(z + 1j * cmath.sqrt(1 - z * z))


def normalize_angle(psi: complex) -> tuple[float, float]:
    """Representative of {+-psi + 2 pi k} with psi2 >= 0 and psi1 in (-pi, pi].

    |psi2| below IMAG_SNAP is rounding noise of the arccos and is set to 0,
    so that real angles land in [0, pi].
    """
    psi = complex(psi)
    if abs(psi.imag) < IMAG_SNAP:
        psi = complex(psi.real, 0.0)
    if psi.imag < 0 or (psi.imag == 0 and math.remainder(psi.real, 2 * math.pi) < 0):
        psi = -psi
    psi1 = math.remainder(psi.real, 2 * math.pi)
    if psi1 <= -math.pi:
        psi1 += 2 * math.pi
    psi2 = psi.imag
    if psi2 == 0.0:
        psi1 = abs(psi1)
    return psi1 + 0.0, psi2 + 0.0


@dataclass(frozen=True)
class ComplexAngle:
    """Normalised complex angle psi = psi1 + i psi2."""

    psi1: float
    psi2: float

    def __post_init__(self):
        p1, p2 = normalize_angle(complex(self.psi1, self.psi2))
        object.__setattr__(self, "psi1", p1)
        object.__setattr__(self, "psi2", p2)

    @classmethod
    def from_complex(cls, psi: complex) -> "ComplexAngle":
        return cls(complex(psi).real, complex(psi).imag)

    @classmethod
    def from_cos(cls, c: complex) -> "ComplexAngle":
        return cls.from_complex(complex_arccos(c))

    @property
    def value(self) -> complex:
        return complex(self.psi1, self.psi2)

    def __complex__(self) -> complex:
        return self.value

    @property
    def cos(self) -> complex:
        return cmath.cos(self.value)

    @property
    def sin(self) -> complex:
        return cmath.sin(self.value)

    @property
    def constants(self) -> tuple[float, float]:
        """(c1, c2) = -(sin 2 psi1, sinh 2 psi2) / (sin^2 psi1 + sinh^2 psi2)."""
        d = math.sin(self.psi1) ** 2 + math.sinh(self.psi2) ** 2
        if d < 1e-14:
            raise AngleDegenerate("psi is 0 mod pi; c1, c2 are undefined")
        return -math.sin(2 * self.psi1) / d, -math.sinh(2 * self.psi2) / d

    @property
    def c1(self) -> float:
        return self.constants[0]

    @property
    def c2(self) -> float:
        return self.constants[1]

    def is_real(self, tol: float = PLANE_TOL) -> bool:
        return abs(self.psi2) <= tol

    def is_imaginary(self, tol: float = PLANE_TOL) -> bool:
        r = math.remainder(self.psi1, math.pi)
        return abs(r) <= tol

    def __str__(self) -> str:
        sign = "+" if self.psi2 >= 0 else "-"
        return f"{self.psi1:.12g}{sign}{abs(self.psi2):.12g}i"


AngleLike = Union[ComplexAngle, complex, float]


def as_angle(psi: AngleLike) -> ComplexAngle:
    if isinstance(psi, ComplexAngle):
        return psi
    return ComplexAngle.from_complex(complex(psi))


# --------------------------------------------------------------------------
# Planes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OrientedPlane:
    """Spacelike plane with an oriented Minkowski-orthonormal basis (u1, u2)."""

    u1: np.ndarray
    u2: np.ndarray
    bivector: ComplexQuaternion = field(compare=False)

    @property
    def basis(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u1, self.u2

    def project(self, x) -> np.ndarray:
        """Minkowski-orthogonal projection onto the plane (broadcasts)."""
        x = np.asarray(x, dtype=float)
        a = mdot(x, self.u1)[..., None]
        b = mdot(x, self.u2)[..., None]
        return a * self.u1 + b * self.u2

    def reject(self, x) -> np.ndarray:
        """Component of x orthogonal to the plane."""
        x = np.asarray(x, dtype=float)
        return x - self.project(x)

    def rotate90(self, x) -> np.ndarray:
        """Rotate the in-plane part of x by +90 degrees (u1 -> u2)."""
        x = np.asarray(x, dtype=float)
        a = mdot(x, self.u1)[..., None]
        b = mdot(x, self.u2)[..., None]
        return a * self.u2 - b * self.u1

    def normal_basis(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal basis (n_time, n_space) of the normal plane.

        n_time is future oriented and (n_time, n_space, u1, u2) is positively
        oriented.
        """
        n_time, n_space = normal_frame(self.u1[None], self.u2[None])
        return n_time[0], n_space[0]

    def transformed(self, q) -> "OrientedPlane":
        return plane_from_frame(spin_act(q, self.u1), spin_act(q, self.u2))

    def __neg__(self) -> "OrientedPlane":
        return plane_from_frame(self.u2, self.u1)


def plane_from_frame(u1, u2) -> OrientedPlane:
    """Gram-Schmidt (u1, u2) in the Minkowski metric; orientation is kept."""
    u1 = np.asarray(u1, dtype=float).reshape(4)
    u2 = np.asarray(u2, dtype=float).reshape(4)
    a = float(mdot(u1, u1))
    b = float(mdot(u1, u2))
    c = float(mdot(u2, u2))
    gram = a * c - b * b
    if abs(gram) <= 1e-12:
        raise DegeneratePlane(f"Gram determinant {gram:.3g} is degenerate")
    if a <= 0 or gram < 0:
        raise NotSpacelike("span is not spacelike")
    e1 = u1 / math.sqrt(a)
    w = u2 - float(mdot(u2, e1)) * e1
    e2 = w / math.sqrt(float(mdot(w, w)))
    e1.setflags(write=False)
    e2.setflags(write=False)
    biv = ComplexQuaternion.from_array(wedge(e1, e2))
    return OrientedPlane(e1, e2, biv)


E = np.eye(4)
E1_PLANE = plane_from_frame(E[2], E[3])
E2_PLANE = plane_from_frame(E[3], E[1])
E3_PLANE = plane_from_frame(E[1], E[2])


def normal_frame(t1, t2) -> tuple[np.ndarray, np.ndarray]:
    """Normal frames (N2, N1) for orthonormal spacelike tangent pairs (..., 4).

    Gram-Schmidt on the standard basis projected onto the normal plane,
    picking the best-conditioned candidates. N2 is timelike and future
    oriented; det[N2, N1, t1, t2] > 0.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    shape = t1.shape[:-1]
    # projections of e0..e3 onto the normal plane: (..., 4 candidates, 4)
    eye = np.broadcast_to(np.eye(4), shape + (4, 4))
    a = mdot(eye, t1[..., None, :])[..., None]
    b = mdot(eye, t2[..., None, :])[..., None]
    P = eye - a * t1[..., None, :] - b * t2[..., None, :]
    n = mdot(P, P)
    k1 = np.argmax(np.abs(n), axis=-1)
    v1 = np.take_along_axis(P, k1[..., None, None], axis=-2)[..., 0, :]
    n1 = np.take_along_axis(n, k1[..., None], axis=-1)[..., 0]
    W = P - (mdot(P, v1[..., None, :]) / n1[..., None])[..., None] * v1[..., None, :]
    m = mdot(W, W)
    k2 = np.argmax(np.abs(m), axis=-1)
    v2 = np.take_along_axis(W, k2[..., None, None], axis=-2)[..., 0, :]
    m2 = np.take_along_axis(m, k2[..., None], axis=-1)[..., 0]
    if np.any(np.abs(n1) < PLANE_TOL) or np.any(np.abs(m2) < PLANE_TOL):
        from .errors import DegenerateNormalFrame

        raise DegenerateNormalFrame("normal plane Gram matrix is singular")
    v1 = v1 / np.sqrt(np.abs(n1))[..., None]
    v2 = v2 / np.sqrt(np.abs(m2))[..., None]
    first_timelike = (n1 < 0)[..., None]
    N2 = np.where(first_timelike, v1, v2)
    N1 = np.where(first_timelike, v2, v1)
    N2 = np.where((N2[..., 0] < 0)[..., None], -N2, N2)
    det = np.linalg.det(np.stack([N2, N1, t1, t2], axis=-2))
    N1 = np.where((det < 0)[..., None], -N1, N1)
    return N2, N1


# --------------------------------------------------------------------------
# Angle operations
# --------------------------------------------------------------------------

def plane_cos(p: OrientedPlane, q: OrientedPlane) -> complex:
    return complex(hform(p.bivector.coeffs, q.bivector.coeffs))


def complex_angle(p: OrientedPlane, q: OrientedPlane) -> ComplexAngle:
    """Normalised psi with cos psi = H(p, q)."""
    return ComplexAngle.from_cos(plane_cos(p, q))


class CircleDecomposition(NamedTuple):
    psi: ComplexAngle
    V: ComplexQuaternion


class NullDecomposition(NamedTuple):
    sign: int
    xi: ComplexQuaternion


def decompose_angle(p: OrientedPlane, q: OrientedPlane):
    """Write q = cos psi p + sin psi V, or q = sign p + xi with xi null."""
    P = p.bivector.coeffs
    Q = q.bivector.coeffs
    psi = complex_angle(p, q)
    s = psi.sin
    if abs(s) < NULL_BRANCH_TOL:
        sign = 1 if plane_cos(p, q).real >= 0 else -1
        return NullDecomposition(sign, ComplexQuaternion.from_array(Q - sign * P))
    V = (Q - psi.cos * P) / s
    return CircleDecomposition(psi, ComplexQuaternion.from_array(V))


class RelativePosition(enum.Enum):
    GENERIC = "Generic"
    SPACELIKE_HYPERPLANE = "SpacelikeHyperplane"
    TIMELIKE_HYPERPLANE = "TimelikeHyperplane"
    NULL_HYPERPLANE = "NullHyperplane"
    COINCIDENT = "Coincident"
    ANTI_COINCIDENT = "AntiCoincident"


def classify_position(p: OrientedPlane, q: OrientedPlane, tol: float = PLANE_TOL) -> RelativePosition:
    """Relative position from cos psi: Im cos psi = -sin psi1 sinh psi2."""
    c = plane_cos(p, q)
    P = p.bivector.coeffs
    Q = q.bivector.coeffs
    if abs(cmath.sqrt(1 - c * c)) < NULL_BRANCH_TOL:
        if np.max(np.abs(Q - P)) < tol:
            return RelativePosition.COINCIDENT
        if np.max(np.abs(Q + P)) < tol:
            return RelativePosition.ANTI_COINCIDENT
        return RelativePosition.NULL_HYPERPLANE
    if abs(c.imag) < tol:
        if abs(c.real) < 1:
            return RelativePosition.SPACELIKE_HYPERPLANE
        return RelativePosition.TIMELIKE_HYPERPLANE
    return RelativePosition.GENERIC


class ProjectionAngles(NamedTuple):
    psi1: float
    psi2: float
    rank: int

    @property
    def value(self) -> complex:
        return complex(self.psi1, self.psi2)


def _det4(a, b, c, d) -> float:
    return float(np.linalg.det(np.stack([a, b, c, d])))


def projection_angles(p: OrientedPlane, q: OrientedPlane) -> ProjectionAngles:
    """Principal angles of (p, q) from the orthogonal projections of q onto p and p-perp.

    The symmetric form u -> |pi(u)|^2 on q is diagonalised. Its largest value
    equals cosh^2 psi2 (the projection onto p-perp of that direction is then
    timelike), and psi1 is read off the orthogonal direction of q compared
    with the plane p.
    """
    v1, v2 = p.u1, p.u2
    w1, w2 = q.u1, q.u2
    M = np.array([[mdot(w1, v1), mdot(w1, v2)], [mdot(w2, v1), mdot(w2, v2)]])
    lam, vecs = np.linalg.eigh(M @ M.T)
    a, b = vecs[:, 1]
    u = a * w1 + b * w2
    u_perp = -b * w1 + a * w2  # (u, u_perp) has the orientation of q

    pi_perp = np.stack([p.reject(w1), p.reject(w2)])
    s = np.linalg.svd(pi_perp, compute_uv=False)
    rank = int(np.sum(s > RANK_TOL))

    lmax = float(lam[1])
    if lmax - 1.0 > PLANE_TOL:
        tp = p.reject(u)
        if tp[0] < 0:
            u, u_perp = -u, -u_perp
            tp = -tp
        psi2 = math.acosh(math.sqrt(lmax))
        e0 = tp / math.sinh(psi2)
        e2 = p.project(u) / math.cosh(psi2)
        e3 = p.rotate90(e2)
        n_time, n_space = p.normal_basis()
        # unit spacelike vector of p-perp orthogonal to e0
        e1 = n_space + float(mdot(n_space, e0)) * e0
        e1 = e1 / math.sqrt(float(mdot(e1, e1)))
        if _det4(e0, e1, e2, e3) < 0:
            e1 = -e1
        sin1 = -float(mdot(u_perp, e1))
        cos1 = float(mdot(u_perp, e3))
        psi1 = math.atan2(sin1, cos1)
        p1, p2 = normalize_angle(complex(psi1, psi2))
        return ProjectionAngles(p1, p2, rank)

    v = p.project(u)
    nv = math.sqrt(max(float(mdot(v, v)), 0.0))
    if nv < PLANE_TOL:
        return ProjectionAngles(math.pi / 2, 0.0, rank)
    v_perp = p.rotate90(v / nv)
    c = float(np.clip(mdot(u_perp, v_perp), -1.0, 1.0))
    return ProjectionAngles(math.acos(c), 0.0, rank)
