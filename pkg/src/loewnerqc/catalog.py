"""Named, reproducible fixtures: drivers, curves, Beltrami fields, chord-to-loop."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .beltrami import BeltramiField, reflect_extend
from .errors import ClearanceViolated, NotSimple, SelfIntersection, UnknownFixture, ValidationError
from .loewner_chain import DrivingFunction, TraceBundle
from .zipper import JordanCurveSample, mobius_normalize, polyline_distance

# ----------------------------------------------------------------------------- drivers


def _zero(p):
    return (lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)))


def _linear(p):
    c = float(p.get("c", 2.0))
    return (lambda t: c * np.asarray(t, dtype=float),
            lambda t: np.full_like(np.asarray(t, dtype=float), c))


def _sine(p):
    amp, om = float(p.get("A", 0.8)), float(p.get("omega", 4.0))
    return (lambda t: amp * np.sin(om * np.asarray(t, dtype=float)),
            lambda t: amp * om * np.cos(om * np.asarray(t, dtype=float)))


def _sqrt(p):
    c = float(p.get("c", 3.0))
    return (lambda t: c * np.sqrt(np.asarray(t, dtype=float)),
            lambda t: 0.5 * c / np.sqrt(np.asarray(t, dtype=float)))


def _bump(p):
    # lambda = A sin^2(pi t / w) on [0, w], constant 0 afterwards; C^1 with
    # derivative supported in [0, w]
    amp, w = float(p.get("A", 1.0)), float(p.get("width", 1.0))

    def lam(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < w, amp * np.sin(np.pi * t / w) ** 2, 0.0)

    def dlam(t):
        t = np.asarray(t, dtype=float)
        return np.where(t < w, amp * np.pi / w * np.sin(2 * np.pi * t / w), 0.0)
    return lam, dlam


def _ramp(p):
    # lambda = c min(t, w): derivative c on [0, w], zero afterwards
    c, w = float(p.get("c", 1.0)), float(p.get("width", 1.0))
    return (lambda t: c * np.minimum(np.asarray(t, dtype=float), w),
            lambda t: np.where(np.asarray(t, dtype=float) < w, c, 0.0))


DRIVERS: dict[str, Callable] = {
    "zero": _zero, "linear": _linear, "sine": _sine, "sqrt": _sqrt, "compact-bump": _bump,
    "ramp": _ramp,
}


def driver_functions(name: str, params: dict | None = None):
    """``(lambda, lambda_dot)`` callables of a registered driver."""
    if name not in DRIVERS:
        raise UnknownFixture(f"unknown driver {name!r}; known: {sorted(DRIVERS)}")
    return DRIVERS[name](params or {})


def make_driver(name: str, params: dict | None = None) -> DrivingFunction:
    """Sample a registered driver on ``N`` equal steps of ``[0, T]`` (a = t)."""
    params = dict(params or {})
    lam, _ = driver_functions(name, params)
    T = float(params.get("T", 1.0))
    n = int(params.get("N", 100))
    if n < 1 or T <= 0:
        raise ValidationError("driver fixtures need N >= 1 and T > 0")
    t = T * np.arange(n + 1) / n
    return DrivingFunction(t, lam(t))


# ----------------------------------------------------------------------------- curves


def _circle(p):
    n = int(p.get("n", 512))
    r = float(p.get("r", 1.0))
    c = complex(*p.get("center", (0.0, 0.0)))
    u = np.exp(2j * np.pi * np.arange(n) / n)
    return JordanCurveSample(c + r * u, c)


def _perturbed_circle(p):
    # boundary of p(D) for p(z) = z + a z^k
    n = int(p.get("n", 512))
    a, k = float(p.get("a", 0.1)), int(p.get("k", 2))
    if abs(a) * k >= 1:
        raise ValidationError("z + a z^k is univalent on the disk only for |a| k < 1")
    u = np.exp(2j * np.pi * np.arange(n) / n)
    return JordanCurveSample(u + a * u ** k, 0j)


CURVES: dict[str, Callable] = {"circle": _circle, "perturbed-circle": _perturbed_circle}


def make_curve(name: str, params: dict | None = None) -> JordanCurveSample:
    if name not in CURVES:
        raise UnknownFixture(f"unknown curve {name!r}; known: {sorted(CURVES)}")
    return CURVES[name](params or {})


# ----------------------------------------------------------------------------- fields


def _const_rect(p):
    rect = p.get("rect", (1.0, 2.0, 1.0, 2.0))
    c = p.get("c", 1.0)
    c = complex(*c) if isinstance(c, (list, tuple)) else complex(c)
    return BeltramiField.constant([rect], c, p.get("ambient", "half-plane"))


def _poly_rect(p):
    rect = p.get("rect", (1.0, 2.0, 1.0, 2.0))
    # terms [j, k, re, im] meaning (re + i im) z^j conj(z)^k
    terms = p.get("poly", [[0, 0, 0.5, 0.0], [1, 0, 0.1, 0.0], [0, 1, 0.0, 0.1]])
    return BeltramiField.from_spec([rect], {"poly": [list(t) for t in terms]},
                                   p.get("ambient", "half-plane"))


def _two_rect(p):
    inner = p.get("inner", (-0.4, -0.1, 0.1, 0.4))
    outer = p.get("outer", (1.4, 1.8, -0.2, 0.2))
    c = p.get("c", 1.0)
    c = complex(*c) if isinstance(c, (list, tuple)) else complex(c)
    return BeltramiField.constant([inner, outer], c, p.get("ambient", "sphere"))


FIELDS: dict[str, Callable] = {"const-rect": _const_rect, "poly-rect": _poly_rect, "two-rect": _two_rect}


def support_distance(nu: BeltramiField, points, closed: bool = False) -> float:
    """Distance between the support of ``nu`` and a polyline.

    Segments are subdivided finely enough that a segment crossing a
    rectangle always leaves a sample inside it.
    """
    p = np.asarray(points, dtype=complex)
    if closed:
        p = np.concatenate([p, p[:1]])
    side = min(min(r[1] - r[0], r[3] - r[2]) for r in nu.support.rects)
    seg = np.abs(np.diff(p))
    k = np.maximum(1, np.ceil(seg / (0.25 * side)).astype(int))
    dense = [p[:1]]
    for a, b, m in zip(p[:-1], p[1:], k):
        dense.append(a + (b - a) * np.arange(1, m + 1) / m)
    dense = np.concatenate(dense)
    d_pts = float(np.min(nu.support.distance(dense)))
    corners = np.array([complex(x, y) for r in nu.support.rects for x in r[:2] for y in r[2:]])
    d_corners = float(np.min(polyline_distance(p, corners)))
    return min(d_pts, d_corners)


def make_field(name: str, params: dict | None = None, curve=None, clearance: float | None = None,
               closed: bool | None = None) -> BeltramiField:
    """Build a registered field, optionally checking clearance from ``curve``.

    ``curve`` may be a point array, a chord or a Jordan curve sample.  The
    default clearance is 5% of the shortest rectangle side.
    """
    if name not in FIELDS:
        raise UnknownFixture(f"unknown field {name!r}; known: {sorted(FIELDS)}")
    nu = FIELDS[name](params or {})
    if curve is not None:
        pts, is_closed = _curve_points(curve)
        if closed is not None:
            is_closed = closed
        side = min(min(r[1] - r[0], r[3] - r[2]) for r in nu.support.rects)
        delta = 0.05 * side if clearance is None else float(clearance)
        full = nu if nu.ambient == "sphere" else reflect_extend(nu)
        d = support_distance(full, pts, is_closed)
        if d < delta:
            raise ClearanceViolated(f"support is {d:.3g} from the curve (clearance {delta:.3g})")
    return nu


def _curve_points(curve):
    if isinstance(curve, JordanCurveSample):
        return curve.points, True
    pts = getattr(curve, "points", curve)
    pts = np.asarray(pts, dtype=complex)
    return np.concatenate([[0j], pts]), False


# ----------------------------------------------------------------------------- chord to loop


def chord_to_loop(bundle: TraceBundle, s_max: float = 1e3, ratio: float | None = None,
                  z0=None, grid: int = 41) -> JordanCurveSample:
    """Loop ``eta^2 ∪ R+`` built from a traced chord, Möbius-mapped to a bounded curve.

    The driver is held at ``lambda_T`` after the last node, so the rest of the
    chord is ``g_T^{-1}(lambda_T + i s)``; it is sampled geometrically in
    ``s`` up to ``s_max``.  ``R+`` is sampled geometrically with the same
    ratio.  ``A(w) = 1/(w - z0)`` with ``z0`` the grid point farthest from
    the curve inside the box spanned by the squared chord.
    """
    eta = bundle.chord.points
    n = eta.size
    ratio = 1.0 + 2.0 / np.sqrt(n) if ratio is None else float(ratio)
    if ratio <= 1:
        raise ValidationError("ratio must exceed 1")
    ginv = bundle.g_chain().inverse()
    lam_T = float(bundle.driver.lam[-1])
    dt_last = float(bundle.driver.t[-1] - bundle.driver.t[-2])
    s1 = 2.0 * np.sqrt(dt_last)
    s = s1 * ratio ** np.arange(int(np.log(s_max / s1) / np.log(ratio)) + 1)
    with np.errstate(all="ignore"):
        tail = ginv(lam_T + 1j * s, check=False)
    x1 = abs(eta[0]) ** 2
    xmax = abs(tail[-1]) ** 2
    xs = x1 * ratio ** np.arange(int(np.log(xmax / x1) / np.log(ratio)) + 1)
    loop = np.concatenate([[0j], eta ** 2, tail ** 2, xs[::-1]])
    if z0 is None:
        core = np.concatenate([[0j], eta ** 2])
        r = max(float(np.abs(core).max()), 1.0)
        img, z0 = mobius_normalize(loop, grid, window=(-r, r, -r, r))
    else:
        img = 1.0 / (loop - complex(z0))
    try:
        return JordanCurveSample(img)
    except NotSimple as exc:
        raise SelfIntersection(str(exc), exc.indices) from exc


# ----------------------------------------------------------------------------- registry


@dataclass(frozen=True)
class FixtureSpec:
    kind: str
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        reg = REGISTRY.get(self.kind)
        if reg is None:
            raise UnknownFixture(f"unknown fixture kind {self.kind!r}; known: {sorted(REGISTRY)}")
        if self.name not in reg:
            raise UnknownFixture(f"unknown {self.kind} fixture {self.name!r}; known: {sorted(reg)}")

    def build(self, **kwargs):
        if self.kind == "driver":
            return make_driver(self.name, self.params)
        if self.kind == "curve":
            return make_curve(self.name, self.params)
        return make_field(self.name, self.params, **kwargs)

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "params": self.params, "seed": self.seed}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, d) -> "FixtureSpec":
        if isinstance(d, str):
            d = json.loads(d)
        return cls(d["kind"], d["name"], dict(d.get("params", {})), int(d.get("seed", 0)))


REGISTRY = {"driver": DRIVERS, "curve": CURVES, "field": FIELDS}


def slit_points(n: int, height: float = 2.0) -> np.ndarray:
    """``n`` equally spaced points of the vertical slit ``(0, i height]``."""
    return 1j * height * np.arange(1, n + 1) / n


__all__ = [
    "DRIVERS", "CURVES", "FIELDS", "REGISTRY", "FixtureSpec", "driver_functions", "make_driver",
    "make_curve", "make_field", "support_distance", "chord_to_loop", "slit_points",
]
