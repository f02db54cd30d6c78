"""Quadrature over unions of rectangles and convergence-order fitting."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InsufficientData, NonFiniteIntegrand, NotConvergedWarning, ValidationError

Rect = tuple[float, float, float, float]

_CHUNK = 1 << 16


@dataclass(frozen=True)
class Region2D:
    """Union of axis-aligned rectangles ``(xmin, xmax, ymin, ymax)``."""

    rects: tuple[Rect, ...]

    def __init__(self, rects):
        rects = tuple(tuple(float(v) for v in r) for r in rects)
        for r in rects:
            if len(r) != 4:
                raise ValidationError(f"rectangle needs 4 numbers, got {r}")
            if not (r[1] > r[0] and r[3] > r[2]):
                raise ValidationError(f"rectangle {r} has non-positive width or height")
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                a, b = rects[i], rects[j]
                if min(a[1], b[1]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[2], b[2]):
                    raise ValidationError(f"rectangles {a} and {b} overlap")
        object.__setattr__(self, "rects", rects)

    @property
    def area(self) -> float:
        return sum((r[1] - r[0]) * (r[3] - r[2]) for r in self.rects)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=bool)
        for x0, x1, y0, y1 in self.rects:
            out |= (z.real >= x0) & (z.real <= x1) & (z.imag >= y0) & (z.imag <= y1)
        return out

    def distance(self, z) -> np.ndarray:
        """Euclidean distance from each point to the region (0 inside)."""
        z = np.asarray(z, dtype=complex)
        d = np.full(z.shape, np.inf)
        for x0, x1, y0, y1 in self.rects:
            dx = np.maximum(np.maximum(x0 - z.real, z.real - x1), 0.0)
            dy = np.maximum(np.maximum(y0 - z.imag, z.imag - y1), 0.0)
            d = np.minimum(d, np.hypot(dx, dy))
        return d

    def bounds(self) -> Rect:
        r = np.array(self.rects)
        return (r[:, 0].min(), r[:, 1].max(), r[:, 2].min(), r[:, 3].max())

    def mirrored(self) -> "Region2D":
        """Reflection of the region across the real axis."""
        return Region2D([(x0, x1, -y1, -y0) for x0, x1, y0, y1 in self.rects])

    def union(self, other: "Region2D") -> "Region2D":
        return Region2D(self.rects + other.rects)

    def split(self) -> tuple["Region2D", "Region2D"]:
        """Split every rectangle vertically in half; return (left parts, right parts)."""
        left, right = [], []
        for x0, x1, y0, y1 in self.rects:
            xm = 0.5 * (x0 + x1)
            left.append((x0, xm, y0, y1))
            right.append((xm, x1, y0, y1))
        return Region2D(left), Region2D(right)

    def to_json(self) -> list:
        return [list(r) for r in self.rects]


@dataclass(frozen=True)
class QuadSpec:
    points_per_axis: int = 16
    refinement_levels: int = 6
    rel_tol: float = 1e-9
    abs_tol: float = 1e-15

    def __post_init__(self):
        if int(self.points_per_axis) < 2:
            raise ValidationError("points_per_axis must be >= 2")
        if int(self.refinement_levels) < 0:
            raise ValidationError("refinement_levels must be >= 0")
        if not self.rel_tol > 0:
            raise ValidationError("rel_tol must be positive")
        if not self.abs_tol >= 0:
            raise ValidationError("abs_tol must be non-negative")


class QuadResult(NamedTuple):
    value: complex
    converged: bool
    level: int
    n_nodes: int
    error_estimate: float


@lru_cache(maxsize=None)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def tensor_nodes(region: Region2D, points_per_axis: int, level: int):
    """Composite Gauss–Legendre nodes and weights on ``region``.

    Each rectangle is split into ``2**level`` cells per axis.
    """
    x, w = _gauss(points_per_axis)
    m = 2 ** level
    t = (np.arange(m)[:, None] + 0.5 * (x[None, :] + 1.0)).ravel() / m
    wt = np.tile(w, m) / (2.0 * m)
    zs, ws = [], []
    for x0, x1, y0, y1 in region.rects:
        xs = x0 + (x1 - x0) * t
        ys = y0 + (y1 - y0) * t
        zz = xs[None, :] + 1j * ys[:, None]
        ww = (wt[None, :] * wt[:, None]) * ((x1 - x0) * (y1 - y0))
        zs.append(zz.ravel())
        ws.append(ww.ravel())
    return np.concatenate(zs), np.concatenate(ws)


def _integrate(f, z, w):
    total = None
    total_abs = None
    for s in range(0, z.size, _CHUNK):
        zc = z[s:s + _CHUNK]
        vals = np.asarray(f(zc), dtype=complex)
        if vals.ndim == 0 or vals.shape[0] != zc.size:
            vals = np.broadcast_to(vals, zc.shape + vals.shape[1:] if vals.ndim else zc.shape)
        if not np.all(np.isfinite(vals)):
            bad = zc[~np.all(np.isfinite(vals.reshape(zc.size, -1)), axis=1)][0]
            raise NonFiniteIntegrand(f"integrand is not finite at node {bad}")
        ws = w[s:s + _CHUNK]
        part = np.tensordot(ws, vals, axes=(0, 0))
        part_abs = np.tensordot(ws, np.abs(vals), axes=(0, 0))
        total = part if total is None else total + part
        total_abs = part_abs if total_abs is None else total_abs + part_abs
    return total, total_abs


def quad2d(f: Callable[[np.ndarray], np.ndarray], region: Region2D, spec: QuadSpec | None = None,
           full_output: bool = False):
    """Integrate a vectorised complex integrand over ``region`` (area measure).

    ``f`` maps a 1-D array of nodes to values whose first axis runs over the
    nodes (extra axes give a vector-valued integral).  Uniform dyadic
    refinement of a composite tensor Gauss–Legendre rule continues until two
    successive levels agree to ``spec.rel_tol`` relative to the integral of
    ``|f|`` (or to ``spec.abs_tol`` outright, which matters for integrands
    that vanish up to rounding).  If the level budget runs out a :class:`NotConvergedWarning` is
    issued and the finest value is returned anyway.
    """
    spec = spec or QuadSpec()
    prev = None
    err = np.inf
    for level in range(spec.refinement_levels + 1):
        z, w = tensor_nodes(region, spec.points_per_axis, level)
        val, scale = _integrate(f, z, w)
        if prev is not None:
            diff = np.abs(val - prev)
            err = float(np.max(diff))
            if np.all(diff <= np.maximum(spec.rel_tol * scale, spec.abs_tol)):
                return _result(val, True, level, z.size, err, full_output)
        prev = val
    warnings.warn(f"quad2d: tolerance {spec.rel_tol} not met after {spec.refinement_levels} "
                  f"refinements (estimate {err:.3e})", NotConvergedWarning, stacklevel=2)
    return _result(val, False, spec.refinement_levels, z.size, err, full_output)


def _result(val, converged, level, n, err, full_output):
    val = val.item() if np.ndim(val) == 0 else val
    res = QuadResult(val, converged, level, n, err)
    return res if full_output else val


def midpoint2d(f, region: Region2D, n: int, chunk_rows: int = 64) -> complex:
    """Brute-force midpoint rule with ``n`` x ``n`` cells per rectangle."""
    total = 0j
    for x0, x1, y0, y1 in region.rects:
        hx, hy = (x1 - x0) / n, (y1 - y0) / n
        xs = x0 + hx * (np.arange(n) + 0.5)
        ys = y0 + hy * (np.arange(n) + 0.5)
        for s in range(0, n, chunk_rows):
            zz = xs[None, :] + 1j * ys[s:s + chunk_rows, None]
            total += np.sum(np.asarray(f(zz), dtype=complex)) * hx * hy
    return total


def convergence_slope(pairs: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log e`` against ``log h``."""
    if len(pairs) < 3:
        raise InsufficientData(f"need at least 3 (h, e) pairs, got {len(pairs)}")
    h = np.array([p[0] for p in pairs], dtype=float)
    e = np.array([p[1] for p in pairs], dtype=float)
    if np.any(h <= 0) or np.any(e < 0):
        raise ValidationError("steps must be positive and errors non-negative")
    if np.any(np.diff(h) >= 0):
        raise ValidationError("steps must be strictly decreasing")
    e = np.maximum(e, np.finfo(float).eps)
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def richardson(values: Sequence[complex], ratio: float = 2.0, orders: Sequence[float] | None = None):
    """Richardson extrapolation of a sequence computed at steps h, h/ratio, ...

    ``orders`` lists the error exponents to eliminate (default 1, 2, ...).
    Returns the extrapolated limit.
    """
    table = [np.asarray(v, dtype=complex) for v in values]
    if orders is None:
        orders = range(1, len(table))
    for p in list(orders)[: len(table) - 1]:
        k = ratio ** p
        table = [(k * table[i + 1] - table[i]) / (k - 1.0) for i in range(len(table) - 1)]
    out = table[-1]
    return out.item() if out.ndim == 0 else out
