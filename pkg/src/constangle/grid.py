"""Sampled immersions on rectangular parameter grids."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

FRAME_NAMES = ("T1", "T2", "N1", "N2")


def grid_axis(lo: float, hi: float, h: float) -> np.ndarray:
    """Uniform nodes from lo to hi (inclusive) with spacing as close to h as possible."""
    if h <= 0 or hi <= lo:
        raise ValueError("need lo < hi and a positive spacing")
    n = int(round((hi - lo) / h))
    n = max(n, 1)
    return lo + h * np.arange(n + 1)


@dataclass
class ImmersionGrid:
    """Samples F[i, j] = F(x0 + i hx, y0 + j hy) of a parametrised surface.

    ``points`` has shape (nx, ny, 4). Optional arrays (same leading shape):
    analytic frames, the metric coefficients mu and nu, and a boolean mask of
    retained nodes.
    """

    x0: float
    y0: float
    hx: float
    hy: float
    points: np.ndarray
    frames: Optional[dict] = None
    mu: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    psi: Optional[complex] = None
    family: Optional[str] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 3 or self.points.shape[2] != 4:
            raise ValueError("points must have shape (nx, ny, 4)")
        if self.frames is not None:
            self.frames = {k: np.asarray(v, dtype=float) for k, v in self.frames.items()}

    @property
    def nx(self) -> int:
        return self.points.shape[0]

    @property
    def ny(self) -> int:
        return self.points.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def retained(self) -> np.ndarray:
        if self.mask is None:
            return np.ones((self.nx, self.ny), dtype=bool)
        return np.asarray(self.mask, dtype=bool)

    def with_points(self, points) -> "ImmersionGrid":
        return replace(self, points=np.asarray(points, dtype=float))


def sample_immersion(
    f: Callable, domain, hx: float, hy: Optional[float] = None
) -> ImmersionGrid:
    """Sample f(x, y) -> 4-vector on [x0, x1] x [y0, y1].

    ``f`` is first called with meshgrid arrays; it may return either an
    (nx, ny, 4) array or four arrays of shape (nx, ny). Scalar-only callables
    fall back to a per-node loop.
    """
    hy = hx if hy is None else hy
    (xa, xb), (ya, yb) = domain
    xs = grid_axis(xa, xb, hx)
    ys = grid_axis(ya, yb, hy)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = None
    try:
        out = f(X, Y)
        arr = np.asarray([np.broadcast_to(c, X.shape) for c in out]) if not isinstance(out, np.ndarray) else out
        arr = np.asarray(arr, dtype=float)
        if arr.shape == (4,) + X.shape:
            pts = np.moveaxis(arr, 0, -1)
        elif arr.shape == X.shape + (4,):
            pts = arr
    except (TypeError, ValueError):
        pts = None
    if pts is None:
        pts = np.array([[np.asarray(f(x, y), dtype=float) for y in ys] for x in xs])
    return ImmersionGrid(float(xs[0]), float(ys[0]), float(hx), float(hy), pts.copy())
