"""Unzipping: driving functions of chords and uniformizing maps of Jordan curves.

Chords are unzipped with vertical-slit steps: the image ``w`` of the next
vertex is sent to the real line by ``z -> Re w + sqrt((z - Re w)^2 + (Im w)^2)``,
which is hydrodynamically normalised, so the driving value is ``Re w`` and the
capacity grows by ``(Im w)^2 / 4``.

Jordan curves use the geodesic variant (each step sends the hyperbolic
geodesic from the current tip through the next vertex to the real line), which
produces C^1 boundary curves and hence finite Dirichlet integrals of ``N f``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import conformal_maps as cm
from .errors import (CapacityStall, NormalizationFailure, NotSimple, SegmentTooLong,
                     ValidationError)
from .loewner_chain import ChordSample, DrivingFunction, TraceBundle, points_from_csv, points_to_csv


# --------------------------------------------------------------------------- simplicity
def _segments_cross(p, q, r, s):
    """Proper-or-touching intersection test for segment arrays pq and rs."""
    def orient(a, b, c):
        u, w = b - a, c - a
        v = (u.conjugate() * w).imag
        # rounding in the differences scales with the coordinates themselves
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.abs(c))
        tol = 1e-12 * np.abs(u) * np.abs(w) + 1e-14 * scale * (np.abs(u) + np.abs(w))
        return np.where(np.abs(v) <= tol, 0.0, np.sign(v))
    def within(a, b, c):
        # c, already known to be on the line ab, lies between a and b
        ab = b - a
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((c - a) * ab.conjugate()).real / np.abs(ab) ** 2
        return (t >= 0.0) & (t <= 1.0)

    d1, d2 = orient(r, s, p), orient(r, s, q)
    d3, d4 = orient(p, q, r), orient(p, q, s)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)
    # a vanishing orientation is a touch only if the endpoint sits on the other
    # segment; this also covers overlapping collinear pairs
    touch = (((d1 == 0) & within(r, s, p)) | ((d2 == 0) & within(r, s, q))
             | ((d3 == 0) & within(p, q, r)) | ((d4 == 0) & within(p, q, s)))
    return proper | touch


def self_intersections(points, closed: bool = False, block: int = 512):
    """Index pairs ``(i, j)`` of non-adjacent polyline segments that intersect."""
    p = np.asarray(points, dtype=complex)
    a = p if not closed else np.concatenate([p, p[:1]])
    n = a.size - 1
    hits = []
    for s in range(0, n, block):
        i = np.arange(s, min(s + block, n))[:, None]
        j = np.arange(n)[None, :]
        mask = j > i + 1
        if closed:
            mask &= ~((i == 0) & (j == n - 1))
        if not np.any(mask):
            continue
        cross = _segments_cross(a[i], a[i + 1], a[j], a[j + 1]) & mask
        for ii, jj in zip(*np.nonzero(cross)):
            hits.append((int(i[ii, 0]), int(jj)))
    return hits


def check_simple(points, closed: bool = False):
    hits = self_intersections(points, closed)
    if hits:
        idx = sorted({k for h in hits[:10] for k in h})
        raise NotSimple(f"polyline is not simple: segments {hits[:5]} intersect", idx)


# --------------------------------------------------------------------------- chords
def extract_driving(chord: ChordSample, check: bool = True) -> TraceBundle:
    """Driving function and capacities of a chord by vertical-slit unzipping.

    Node ``k`` (k >= 1) corresponds to vertex ``k - 1`` of the chord; node 0 is
    the origin with ``(a, lambda) = (0, 0)``.
    """
    pts = np.asarray(chord.points, dtype=complex)
    if check:
        check_simple(np.concatenate([[0j], pts]))
    n = pts.size
    w = pts.copy()
    xs = np.empty(n)
    hs = np.empty(n)
    for k in range(n):
        tip = w[k]
        if not tip.imag > 0:
            raise SegmentTooLong(f"vertex {k} left the upper half-plane during unzipping "
                                 f"(image {tip}); refine the sampling")
        x, h = tip.real, tip.imag
        xs[k], hs[k] = x, h
        u = w[k + 1:] - x
        w[k + 1:] = x + u * np.sqrt(1.0 + (h * h) / (u * u))
    a = np.cumsum(hs * hs) / 4.0
    if np.any(np.diff(a) <= 0):
        k = int(np.flatnonzero(np.diff(a) <= 0)[0])
        raise CapacityStall(f"capacity does not increase at vertex {k + 1}")
    drv = DrivingFunction(np.concatenate([[0.0], a]), np.concatenate([[0.0], xs]))
    return TraceBundle(drv, chord, xs, hs, np.arange(-1, n))


def driver_in_capacity_time(driver: DrivingFunction, n: int | None = None) -> DrivingFunction:
    """Resample ``(a_k, lambda_k)`` on a uniform capacity grid (monotone cubic)."""
    from scipy.interpolate import PchipInterpolator
    a = driver.a
    n = len(driver) if n is None else n
    grid = np.linspace(a[0], a[-1], n)
    lam = PchipInterpolator(a, driver.lam)(grid)
    return DrivingFunction(grid, lam)


# --------------------------------------------------------------------------- Jordan curves
@dataclass(frozen=True)
class JordanCurveSample:
    """Closed polyline (last point joins the first) with an interior base point."""

    points: np.ndarray
    interior_basepoint: complex = 0j

    def __init__(self, points, interior_basepoint=None, validate: bool = True):
        p = np.asarray(points, dtype=complex).ravel()
        if p.size > 1 and p[0] == p[-1]:
            p = p[:-1]
        if p.size < 3:
            raise ValidationError("a Jordan curve sample needs at least 3 points")
        if interior_basepoint is None:
            interior_basepoint = _interior_guess(p)
        b = complex(interior_basepoint)
        if validate:
            check_simple(p, closed=True)
            if winding_number(p, b) % 2 == 0:
                raise ValidationError(f"base point {b} is not inside the curve")
        if winding_number(p, b) < 0:
            p = p[::-1].copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "interior_basepoint", b)

    def __len__(self):
        return self.points.size

    @property
    def diameter(self) -> float:
        p = self.points
        return float(np.max(np.abs(p[:, None] - p[None, :]))) if p.size < 4000 else \
            float(2 * np.max(np.abs(p - p.mean())))

    def distance(self, z) -> np.ndarray:
        return polyline_distance(self.points, z, closed=True)

    def to_csv(self) -> str:
        return points_to_csv(self.points)

    @classmethod
    def from_csv(cls, text: str, interior_basepoint=None) -> "JordanCurveSample":
        return cls(points_from_csv(text), interior_basepoint)


def winding_number(points, z) -> int:
    p = np.asarray(points, dtype=complex) - z
    ang = np.angle(np.roll(p, -1) / p)
    return int(round(ang.sum() / (2 * np.pi)))


def _interior_guess(p):
    c = p.mean()
    if winding_number(p, c) != 0:
        return c
    raise ValidationError("centroid is outside the curve; give interior_basepoint explicitly")


def polyline_distance(points, z, closed: bool = False, block: int = 4096):
    """Distance from each ``z`` to the polyline."""
    p = np.asarray(points, dtype=complex)
    if closed:
        p = np.concatenate([p, p[:1]])
    a, b = p[:-1], p[1:]
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    flat = z.ravel()
    out = np.empty(flat.size)
    d = b - a
    dd = np.abs(d) ** 2
    for s in range(0, flat.size, block):
        zz = flat[s:s + block, None]
        t = np.clip(((zz - a) * d.conjugate()).real / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
        out[s:s + block] = np.min(np.abs(zz - (a + t * d)), axis=1)
    return out.reshape(z.shape)


def geodesic_step(w: complex):
    """Maps sending the geodesic of H from 0 through ``w`` onto the real line.

    ``z -> z / (1 - z/b)`` straightens the geodesic to the imaginary axis, and
    the slit map of height ``|w|^2 / Im w`` unzips it, with ``w -> 0``.
    """
    x, y = w.real, w.imag
    r2 = x * x + y * y
    return [cm.mobius(1.0, 0.0, -x / r2, 1.0), cm.vertical_slit(r2 / y)]


@dataclass
class JordanMaps:
    """Interior and exterior uniformizing maps as chains.

    ``f_inv_chain`` sends Omega onto D with the base point to 0;
    ``g_inv_chain`` sends Omega* onto D* with infinity fixed.
    ``f_chain`` / ``g_chain`` are the exact elementwise inverses.
    """

    curve: JordanCurveSample
    zip_chain: cm.ConformalChain
    f_inv_chain: cm.ConformalChain
    g_inv_chain: cm.ConformalChain
    interior_side: int
    f_prime_0: complex
    g_prime_inf: float
    boundary_error: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def f_chain(self) -> cm.ConformalChain:
        return self.f_inv_chain.inverse()

    @property
    def g_chain(self) -> cm.ConformalChain:
        return self.g_inv_chain.inverse()

    def to_json(self) -> dict:
        return {"f_inv": self.f_inv_chain.to_json(), "g_inv": self.g_inv_chain.to_json(),
                "f_prime_0": [self.f_prime_0.real, self.f_prime_0.imag],
                "g_prime_inf": self.g_prime_inf, "boundary_error": self.boundary_error}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@np.errstate(divide="ignore", invalid="ignore")
def zip_jordan(points) -> tuple[cm.ConformalChain, np.ndarray]:
    """Geodesic zipper for a closed polyline ``z_0, ..., z_{n-1}``.

    Returns a chain ``Phi`` mapping the complement of the curve onto C minus R
    (each complementary component onto a half-plane) and the images of the
    vertices (all real up to rounding).
    """
    z = np.asarray(points, dtype=complex)
    n = z.size
    z0, z1, zl = z[0], z[1], z[-1]
    # Moebius T: z1 -> 0, z0 -> inf, zl -> negative real axis; the circle through
    # (zl, z0, z1) goes to R and the arc z0 -> z1 to R+.
    t_last = (zl - z1) / (zl - z0)
    rot = -np.conj(t_last) / abs(t_last)
    maps = [cm.mobius(rot, -rot * z1, 1.0, -z0), cm.sqrt_map()]
    w = cm.ConformalChain(maps)(z[2:], check=False)
    zeta = None  # image of z0, starts at infinity
    for k in range(n - 2):
        tip = w[k]
        if not tip.imag > 0:
            raise SegmentTooLong(f"vertex {k + 2} left the upper half-plane during unzipping")
        step = geodesic_step(tip)
        maps.extend(step)
        rest = w[k + 1:]
        for m in step:
            rest = m(rest, check=False)
        w[k + 1:] = rest
        w[k] = 0.0
        mob, slit = step
        if zeta is None:
            # z / (1 + c z) sends infinity to 1/c; c = 0 keeps it at infinity
            c = mob.params[2].real
            zeta = 1.0 / c if c != 0 else None
        else:
            zeta = mob(zeta, check=False).real
        if zeta is not None:
            zeta = float(slit(zeta, check=False).real)
    # remaining edge z_{n-1} -> z_0 is taken as the geodesic from 0 to zeta:
    # send zeta to infinity (edge -> iR+) and square it onto R-
    maps.append(cm.mobius(1.0, 0.0, 0.0 if zeta is None else -1.0 / zeta, 1.0))
    maps.append(cm.square())
    chain = cm.ConformalChain(maps, "C minus curve")
    return chain, chain(z[1:-1], check=False) if n > 3 else np.array([])


def _to_disk(p, side):
    """Moebius from the half-plane ``side`` (+1 upper, -1 lower) onto D with p -> 0."""
    return cm.mobius(1.0, -p, 1.0, -np.conj(p))


def _to_exterior_disk(p):
    """Moebius from the half-plane containing ``p`` onto D* with p -> infinity."""
    return cm.mobius(1.0, -np.conj(p), 1.0, -p)


def jordan_maps(curve: JordanCurveSample, boundary_tol: float | None = None,
                check_boundary: bool = True) -> JordanMaps:
    """Interior/exterior uniformizing maps of a sampled Jordan curve."""
    phi, _ = zip_jordan(curve.points)
    b = curve.interior_basepoint
    p = complex(phi(b, check=False))
    # infinity: first map sends it to sqrt(rot)
    first = phi.maps[0]
    rot = first.params[0]
    q = complex(cm.ConformalChain(phi.maps[1:])(rot, check=False))
    if not (np.isfinite(p) and np.isfinite(q)) or p.imag == 0 or q.imag == 0:
        raise NormalizationFailure("base point or infinity landed on the real line")
    if np.sign(p.imag) == np.sign(q.imag):
        raise NormalizationFailure("interior and exterior mapped to the same half-plane")
    side = int(np.sign(p.imag))
    f_inv = phi.then(_to_disk(p, side))
    m_ext = _to_exterior_disk(q)
    g_inv_raw = phi.then(m_ext)
    # g^{-1}(z) ~ z / c at infinity; rotate so that c = g'(inf) > 0
    c_inv = _derivative_at_infinity(g_inv_raw, phi, rot, q, m_ext)
    g_inv = g_inv_raw.then(cm.mobius(abs(c_inv) / c_inv, 0.0, 0.0, 1.0))
    g_prime_inf = 1.0 / abs(c_inv)
    _, d1 = cm.eval_jet(f_inv, b)[:2]
    f_prime_0 = complex(1.0 / d1)
    maps = JordanMaps(curve, phi, f_inv, g_inv, side, f_prime_0, g_prime_inf)
    if check_boundary:
        maps.boundary_error = boundary_error(maps)
        tol = 1e-3 * curve.diameter if boundary_tol is None else boundary_tol
        maps.meta["boundary_tol"] = tol
        if not maps.boundary_error <= tol:
            raise NormalizationFailure(f"boundary error {maps.boundary_error:.3e} exceeds {tol:.3e}")
    return maps


def _derivative_at_infinity(g_inv, phi, rot, q, m_ext):
    """lim_{z->inf} g^{-1}(z)/z, from the Laurent data of the first Moebius map.

    Near infinity T(z) = rot (z - z1)/(z - z0) = rot + rot (z0 - z1)/z + O(z^-2),
    so g^{-1} = M o Psi o sqrt o T with Psi the rest of the chain.
    """
    a, b_, c, d = phi.maps[0].params
    # T(z) = (a z + b)/(z + d), dT/d(1/z) at 1/z = 0 equals b - a d
    dT = b_ - a * d
    inner = cm.ConformalChain(phi.maps[1:])
    w, d1 = cm.eval_jet(inner, rot)[:2]
    # m_ext(v) = (v - conj q)/(v - q); near v = q: m_ext ~ (q - conj q)/(v - q)
    # so g^{-1}(z) ~ (q - conj q) / (d1 * dT / z) = z (q - conj q)/(d1 dT)
    return (q - np.conj(q)) / (d1 * dT)


def boundary_error(maps: JordanMaps, n: int = 256) -> float:
    """Max distance from f(e^{i theta}) and g(e^{i theta}) (slightly inside) to the curve."""
    theta = 2 * np.pi * (np.arange(n) + 0.5) / n
    r = 1.0 - 1e-9
    pts_f = maps.f_chain(r * np.exp(1j * theta), check=False)
    pts_g = maps.g_chain(np.exp(1j * theta) / r, check=False)
    d = maps.curve.distance(np.concatenate([pts_f, pts_g]))
    return float(np.max(d))


def mobius_normalize(points, grid: int = 41, window=None):
    """Pick z0 maximising the distance to the sample and return ``(A-image, z0)``
    for ``A(w) = 1/(w - z0)``.

    Candidates lie on a ``grid`` x ``grid`` lattice over ``window``
    ``(xmin, xmax, ymin, ymax)``, by default the bounding box of the finite
    points enlarged by a quarter of its size.
    """
    p = np.asarray(points, dtype=complex)
    finite = p[np.isfinite(p)]
    if window is None:
        lo = finite.real.min(), finite.imag.min()
        hi = finite.real.max(), finite.imag.max()
        span = max(hi[0] - lo[0], hi[1] - lo[1], 1.0)
        window = (lo[0] - 0.25 * span, hi[0] + 0.25 * span, lo[1] - 0.25 * span, hi[1] + 0.25 * span)
    xs = np.linspace(window[0], window[1], grid)
    ys = np.linspace(window[2], window[3], grid)
    cand = (xs[None, :] + 1j * ys[:, None]).ravel()
    d = polyline_distance(finite, cand)
    z0 = cand[int(np.argmax(d))]
    return 1.0 / (p - z0), z0
