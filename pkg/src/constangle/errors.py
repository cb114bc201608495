"""Exception types shared across the package."""

from __future__ import annotations


class ConstAngleError(Exception):
    """Base class for all package errors."""


class NotAVector(ConstAngleError, ValueError):
    """A complex quaternion does not represent a Minkowski vector."""


class NotInSpin(ConstAngleError, ValueError):
    """A complex quaternion is not a unit for the H-form."""


class NotImaginary(ConstAngleError, ValueError):
    """A complex quaternion has a non-negligible real (1-) coefficient."""


class SingularQuaternion(ConstAngleError, ZeroDivisionError):
    """Inverse requested for a quaternion with H(q, q) ~ 0."""


class DegeneratePlane(ConstAngleError, ValueError):
    """Two vectors do not span a spacelike 2-plane."""


class NotSpacelike(DegeneratePlane):
    """The span of two vectors is not spacelike."""


class DegenerateNormalFrame(ConstAngleError, ValueError):
    """The normal plane of a surface sample is singular."""


class AngleDegenerate(ConstAngleError, ValueError):
    """The complex angle is too close to 0 mod pi for the requested formula."""


class WrongAngleClass(ConstAngleError, ValueError):
    """The complex angle is neither real nor purely imaginary."""


class NonMonotoneCurve(ConstAngleError, ValueError):
    """A Cauchy curve is not strictly monotone in both coordinates."""


class ClosureFailure(ConstAngleError, RuntimeError):
    """The 1-form mu T1 dx + nu T2 dy is not closed on the grid."""


class BadSpecParameters(ConstAngleError, ValueError):
    """A family specification has invalid parameters."""


class PotentialsInconsistent(ConstAngleError, ValueError):
    """A potential pair violates the coordinate-form system."""
