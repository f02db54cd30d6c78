"""Infinitesimal Beltrami differentials and first-order quasiconformal deformations."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import conformal_maps as cm
from .errors import ClearanceViolated, LeftHalfPlane, SupportHit, ValidationError
from .numerics import QuadSpec, Region2D, quad2d

AMBIENTS = ("half-plane", "sphere")

# Velocity quadrature is smooth once ζ is off the support; a slightly
# looser default than quad2d's keeps large point batches cheap.
VELOCITY_QUAD = QuadSpec(points_per_axis=16, refinement_levels=5, rel_tol=1e-11)


def _value_from_spec(spec: dict) -> Callable:
    if "constant" in spec:
        c = complex(*spec["constant"]) if isinstance(spec["constant"], (list, tuple)) \
            else complex(spec["constant"])
        return lambda z: np.full(np.shape(z), c, dtype=complex)
    if "poly" in spec:
        terms = [(int(j), int(k), complex(re, im)) for j, k, re, im in spec["poly"]]

        def value(z):
            z = np.asarray(z, dtype=complex)
            out = np.zeros(z.shape, dtype=complex)
            for j, k, c in terms:
                out += c * z ** j * np.conj(z) ** k
            return out
        return value
    raise ValidationError(f"Beltrami value spec needs 'constant' or 'poly', got {sorted(spec)}")


def _poly_sup(spec: dict, support: Region2D) -> float:
    if "constant" in spec:
        c = spec["constant"]
        return abs(complex(*c) if isinstance(c, (list, tuple)) else complex(c))
    # |z^j conj(z)^k| <= R^(j+k) with R the largest modulus on the support
    x0, x1, y0, y1 = support.bounds()
    r = max(abs(complex(x, y)) for x in (x0, x1) for y in (y0, y1))
    return sum(abs(complex(re, im)) * r ** (int(j) + int(k)) for j, k, re, im in spec["poly"])


@dataclass(frozen=True)
class BeltramiField:
    """A compactly supported Beltrami coefficient.

    ``value`` is a vectorised callable; outside ``support`` the field is zero.
    ``spec`` keeps the JSON description when the field came from one, so the
    field can be written back out.
    """

    support: Region2D
    value: Callable = field(compare=False)
    sup_bound: float
    ambient: str = "half-plane"
    spec: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.ambient not in AMBIENTS:
            raise ValidationError(f"ambient must be one of {AMBIENTS}, got {self.ambient!r}")
        if not np.isfinite(self.sup_bound) or self.sup_bound < 0:
            raise ValidationError("sup_bound must be finite and non-negative")
        if self.ambient == "half-plane" and self.support.bounds()[2] <= 0:
            raise ValidationError("half-plane field must be supported strictly inside H")

    @classmethod
    def from_spec(cls, rects, spec: dict, ambient: str = "half-plane") -> "BeltramiField":
        support = Region2D(rects)
        return cls(support, _value_from_spec(spec), _poly_sup(spec, support), ambient, dict(spec))

    @classmethod
    def constant(cls, rects, c: complex = 1.0, ambient: str = "half-plane") -> "BeltramiField":
        c = complex(c)
        return cls.from_spec(rects, {"constant": [c.real, c.imag]}, ambient)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        inside = self.support.contains(z)
        out = np.zeros(z.shape, dtype=complex)
        if np.any(inside):
            out[inside] = self.value(z[inside])
        return out

    def scaled(self, c: complex) -> "BeltramiField":
        v = self.value
        return BeltramiField(self.support, lambda z: c * v(z), abs(c) * self.sup_bound, self.ambient)

    def to_json(self) -> dict:
        if self.spec is None:
            raise ValidationError("field was built from a callable and has no JSON form")
        return {"rects": self.support.to_json(), "ambient": self.ambient, **self.spec}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d) -> "BeltramiField":
        if isinstance(d, str):
            d = json.loads(d)
        spec = {k: d[k] for k in ("constant", "poly") if k in d}
        return cls.from_spec(d["rects"], spec, d.get("ambient", "half-plane"))


@dataclass(frozen=True)
class DeformationField:
    base_points: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.base_points, dtype=complex).ravel()
        v = np.asarray(self.velocities, dtype=complex).ravel()
        if b.shape != v.shape:
            raise ValidationError("base_points and velocities differ in length")
        if not np.all(np.isfinite(v)):
            raise ValidationError("velocities must be finite")
        object.__setattr__(self, "base_points", b)
        object.__setattr__(self, "velocities", v)

    def apply(self, eps: float) -> np.ndarray:
        return self.base_points + eps * self.velocities


def reflect_extend(nu: BeltramiField) -> BeltramiField:
    """Extend a half-plane field to the sphere by ν̂(z̄) = conj ν(z)."""
    if nu.ambient != "half-plane":
        raise ValidationError("reflect_extend expects a half-plane field")
    upper = nu.support
    v = nu.value

    def value(z):
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        top = z.imag > 0
        out[top] = v(z[top])
        out[~top] = np.conj(v(np.conj(z[~top])))
        return out

    return BeltramiField(upper.union(upper.mirrored()), value, nu.sup_bound, "sphere")


def pushforward(nu: BeltramiField, phi: cm.ConformalChain, samples: int = 64,
                margin: float = 0.05) -> BeltramiField:
    """Transport ν through the conformal map φ.

    The new support is the union of the bounding boxes of φ(rectangle),
    enlarged by ``margin``; points of the box that do not come from the
    original support get value 0.  Evaluation inverts φ with Newton's method
    seeded from a sample grid.
    """
    s = np.linspace(0.0, 1.0, samples)
    rects, seeds_z, seeds_w = [], [], []
    for x0, x1, y0, y1 in nu.support.rects:
        zz = ((x0 + (x1 - x0) * s)[None, :] + 1j * (y0 + (y1 - y0) * s)[:, None]).ravel()
        ww = phi(zz)
        bx0, bx1 = ww.real.min(), ww.real.max()
        by0, by1 = ww.imag.min(), ww.imag.max()
        pad = margin * max(bx1 - bx0, by1 - by0)
        rects.append((bx0 - pad, bx1 + pad, by0 - pad, by1 + pad))
        seeds_z.append(zz)
        seeds_w.append(ww)
    seeds_z = np.concatenate(seeds_z)
    seeds_w = np.concatenate(seeds_w)
    support = _disjoint_cover(rects)
    if nu.ambient == "half-plane" and support.bounds()[2] <= 0:
        ambient = "sphere"
    else:
        ambient = nu.ambient
    v = nu.value

    def value(w):
        w = np.asarray(w, dtype=complex)
        flat = w.ravel()
        near = np.argmin(np.abs(flat[:, None] - seeds_w[None, :]), axis=1)
        z = cm.invert_point(phi, flat, seeds_z[near])
        out = np.zeros(flat.shape, dtype=complex)
        inside = nu.support.contains(z)
        if np.any(inside):
            _, d1, _, _ = cm.eval_jet(phi, z[inside])
            out[inside] = v(z[inside]) * d1 ** 2 / np.abs(d1) ** 2
        return out.reshape(w.shape)

    return BeltramiField(support, value, nu.sup_bound, ambient)


def _disjoint_cover(rects) -> Region2D:
    # Overlapping image boxes are merged into their common bounding box.
    rects = [list(r) for r in rects]
    merged = True
    while merged:
        merged = False
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                a, b = rects[i], rects[j]
                if min(a[1], b[1]) > max(a[0], b[0]) and min(a[3], b[3]) > max(a[2], b[2]):
                    rects[i] = [min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3])]
                    del rects[j]
                    merged = True
                    break
            if merged:
                break
    return Region2D(rects)


def velocity_kernel(z, zeta, ambient: str = "half-plane", normalization: str = "infinity"):
    """Kernel K(z, ζ) with F(ζ) = -(1/π) ∫ ν̂(z) K(z, ζ) d²z.

    ``normalization`` applies to the half-plane case: ``"infinity"`` fixes
    0 and keeps ψ(z) - z bounded at ∞; ``"origin"`` fixes ∞ and makes ψ
    tangent to the identity at 0.
    """
    if ambient == "sphere":
        return zeta * (zeta - 1.0) / (z * (z - 1.0) * (z - zeta))
    if normalization == "infinity":
        return zeta / (z * (z - zeta))
    if normalization == "origin":
        return zeta ** 2 / (z ** 2 * (z - zeta))
    raise ValidationError(f"unknown normalization {normalization!r}")


def first_order_velocity(nu: BeltramiField, zeta, spec: QuadSpec | None = None,
                         normalization: str = "infinity"):
    """First-order velocity ∂_ε ψ^{εν}(ζ) at ε = 0, for scalar or array ζ.

    Half-plane fields are reflected first, so the velocity is real on R.
    """
    zeta_arr = np.atleast_1d(np.asarray(zeta, dtype=complex))
    full = reflect_extend(nu) if nu.ambient == "half-plane" else nu
    if np.any(full.support.contains(zeta_arr)):
        raise SupportHit("velocity requested at a point of the support")
    if nu.ambient == "sphere":
        if np.any(full.support.contains(np.array([0.0, 1.0]))):
            raise ValidationError("sphere field support must avoid 0 and 1")
    spec = spec or VELOCITY_QUAD
    out = np.empty(zeta_arr.shape, dtype=complex)
    block = max(1, 4096 // 16)
    for s in range(0, zeta_arr.size, block):
        zb = zeta_arr[s:s + block]

        def integrand(z, zb=zb):
            k = velocity_kernel(z[:, None], zb[None, :], nu.ambient, normalization)
            return full.value(z)[:, None] * k

        out[s:s + block] = -quad2d(integrand, full.support, spec) / np.pi
    if np.ndim(zeta) == 0:
        return complex(out[0])
    return out.reshape(np.shape(zeta))


def deformation_field(points, nu: BeltramiField, spec: QuadSpec | None = None,
                      normalization: str = "infinity") -> DeformationField:
    pts = np.asarray(points, dtype=complex).ravel()
    return DeformationField(pts, first_order_velocity(nu, pts, spec, normalization))


def default_clearance(nu: BeltramiField) -> float:
    """Ten percent of the support's inradius-like scale (shortest rectangle side)."""
    return 0.1 * min(min(r[1] - r[0], r[3] - r[2]) for r in nu.support.rects)


def deform_points(points, nu: BeltramiField, eps: float, clearance: float | None = None,
                  spec: QuadSpec | None = None, normalization: str = "infinity",
                  velocities=None) -> np.ndarray:
    """First-order deformation z -> z + ε F(z) of a point sample.

    ``velocities`` may be supplied to reuse a precomputed deformation field.
    """
    pts = np.asarray(points, dtype=complex)
    if abs(eps) * nu.sup_bound >= 1:
        raise ValidationError("|eps| * sup_bound must be < 1")
    delta = default_clearance(nu) if clearance is None else float(clearance)
    full = reflect_extend(nu) if nu.ambient == "half-plane" else nu
    dist = full.support.distance(pts)
    if np.any(dist < delta):
        i = int(np.argmin(dist))
        raise ClearanceViolated(f"point {pts.ravel()[i]} is within {dist.ravel()[i]:.3g} "
                                f"of the support (clearance {delta:.3g})")
    if velocities is None:
        velocities = first_order_velocity(nu, pts, spec, normalization)
    out = pts + eps * np.asarray(velocities, dtype=complex).reshape(pts.shape)
    if nu.ambient == "half-plane":
        upper = pts.imag > 0
        if np.any(out.imag[upper] <= 0):
            raise LeftHalfPlane("a deformed point left the upper half-plane; reduce eps")
    return out


__all__ = [
    "BeltramiField", "DeformationField", "reflect_extend", "pushforward", "velocity_kernel",
    "first_order_velocity", "deformation_field", "deform_points", "default_clearance",
]
