"""Forward chordal Loewner evolution with exact vertical-slit steps.

On each step ``(t_{k-1}, t_k]`` the driving value is frozen at ``lambda(t_k)``
and the Loewner equation is solved exactly by

    phi_k(z) = x_k + sqrt((z - x_k)^2 + h_k^2),   h_k = 2 sqrt(t_k - t_{k-1}),

so ``g_t`` is a :class:`ConformalChain` of slit maps, hydrodynamically
normalised with half-plane capacity ``2 t`` and ``g_{t_k}(eta(t_k)) = lambda(t_k)``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import conformal_maps as cm
from .errors import NonMonotoneCapacity, OutOfDomain, StepTooLarge, ValidationError
from .numerics import richardson


@dataclass(frozen=True)
class DrivingFunction:
    """Sampled driving function: times ``t``, values ``lam`` and capacities ``a``."""

    t: np.ndarray
    lam: np.ndarray
    a: np.ndarray

    def __init__(self, t, lam, a=None):
        t = np.asarray(t, dtype=float)
        lam = np.asarray(lam, dtype=float)
        a = t.copy() if a is None else np.asarray(a, dtype=float)
        if not (t.shape == lam.shape == a.shape) or t.ndim != 1 or t.size < 1:
            raise ValidationError("driver arrays must be 1-D with equal length")
        if np.any(np.diff(t) <= 0):
            raise NonMonotoneCapacity("times must be strictly increasing")
        if np.any(np.diff(a) <= 0):
            raise NonMonotoneCapacity("capacities must be strictly increasing")
        for name, v in (("t", t), ("lam", lam), ("a", a)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def __len__(self):
        return self.t.size

    def __call__(self, t):
        """Piecewise-linear interpolation in time (constant beyond the last node)."""
        return np.interp(t, self.t, self.lam)

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def in_capacity_time(self) -> "DrivingFunction":
        return DrivingFunction(self.a, self.lam, self.a)

    # ----------------------------------------------------------------- io
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "lambda", "a"])
        for row in zip(self.t, self.lam, self.a):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DrivingFunction":
        rows = list(csv.DictReader(io.StringIO(text)))
        t = [float(r["t"]) for r in rows]
        lam = [float(r["lambda"]) for r in rows]
        a = [float(r["a"]) for r in rows] if rows and "a" in rows[0] else None
        return cls(t, lam, a)

    def to_json(self) -> dict:
        return {"t": self.t.tolist(), "lambda": self.lam.tolist(), "a": self.a.tolist()}

    @classmethod
    def from_json(cls, d) -> "DrivingFunction":
        if isinstance(d, str):
            d = json.loads(d)
        return cls(d["t"], d["lambda"], d.get("a"))


@dataclass(frozen=True)
class ChordSample:
    """Ordered points of a chord in H, starting next to 0."""

    points: np.ndarray
    capacity_times: np.ndarray | None = None

    def __init__(self, points, capacity_times=None, validate: bool = True):
        p = np.asarray(points, dtype=complex).ravel()
        if validate:
            if p.size < 1:
                raise ValidationError("chord needs at least one point")
            if np.any(p.imag <= 0):
                k = int(np.flatnonzero(p.imag <= 0)[0])
                raise ValidationError(f"chord point {k} = {p[k]} is not in the upper half-plane")
            if np.any(np.diff(p) == 0):
                raise ValidationError("consecutive chord points coincide")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)
        ct = None if capacity_times is None else np.asarray(capacity_times, dtype=float)
        object.__setattr__(self, "capacity_times", ct)

    def __len__(self):
        return self.points.size

    def with_origin(self) -> np.ndarray:
        return np.concatenate([[0j], self.points])

    def to_csv(self) -> str:
        return points_to_csv(self.points)

    @classmethod
    def from_csv(cls, text: str, validate: bool = True) -> "ChordSample":
        return cls(points_from_csv(text), validate=validate)

    def to_json(self) -> dict:
        return {"re": self.points.real.tolist(), "im": self.points.imag.tolist()}


def points_to_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im"])
    for z in np.asarray(points, dtype=complex):
        w.writerow([repr(float(z.real)), repr(float(z.imag))])
    return buf.getvalue()


def points_from_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    return np.array([complex(float(r["re"]), float(r["im"])) for r in rows])


def _slit_inverse_upper(w, h, x):
    """Inverse vertical-slit map on the closed upper half-plane (real points map to the slit)."""
    u = w - x
    with np.errstate(divide="ignore", invalid="ignore"):
        r = u * np.sqrt(1.0 - (h * h) / (u * u))
    r = np.where(u == 0, 1j * h, r)
    on_cut = (u.imag == 0) & (np.abs(u.real) <= h)
    r = np.where(on_cut, 1j * np.sqrt(np.maximum(h * h - u.real ** 2, 0.0)), r)
    return x + r


@dataclass
class TraceBundle:
    """Result of a forward trace (or an unzipping): slit steps plus output nodes.

    ``step_x[j], step_h[j]`` define the j-th slit map; node ``k`` (time
    ``t[k]``) corresponds to the composition of steps ``0..step_index[k]``.
    """

    driver: DrivingFunction
    chord: ChordSample
    step_x: np.ndarray
    step_h: np.ndarray
    step_index: np.ndarray

    def n_steps(self, k: int) -> int:
        return int(self.step_index[k]) + 1

    def g_chain(self, k: int | None = None, merge: bool = True) -> cm.ConformalChain:
        """Chain for ``g_t`` at node ``k`` (default: last node)."""
        k = len(self.driver) - 1 if k is None else k
        n = self.n_steps(k) if k >= 0 else 0
        return slit_chain(self.step_x[:n], self.step_h[:n], merge=merge)

    def f_chain(self, k: int | None = None) -> cm.ConformalChain:
        """Centered chain ``f_t = g_t - lambda_t``."""
        k = len(self.driver) - 1 if k is None else k
        return self.g_chain(k).then(cm.translation(-self.driver.lam[k]))

    def g_chain_at_time(self, t: float) -> cm.ConformalChain:
        """``g_t`` for any ``t >= 0``; beyond the last node the driver is held constant."""
        T = self.driver.T
        if t > T:
            x = float(self.driver.lam[-1])
            return self.g_chain().then(cm.vertical_slit(2.0 * np.sqrt(t - T), x))
        k = int(np.searchsorted(self.driver.t, t - 1e-14 * max(1.0, t)))
        if k < len(self.driver) and abs(self.driver.t[k] - t) <= 1e-12 * max(1.0, t):
            return self.g_chain(k)
        raise ValidationError(f"time {t} is not a node of the trace")

    def centered_jets_over_nodes(self, z, nodes=None):
        """Jets of ``f_{t_k}`` at points ``z`` for each requested node.

        One forward pass through the slit steps; returns arrays of shape
        ``(len(nodes),) + z.shape`` for value and first derivative.
        """
        z = np.asarray(z, dtype=complex)
        nodes = np.arange(len(self.driver)) if nodes is None else np.asarray(nodes)
        want = {int(self.step_index[k]): i for i, k in enumerate(nodes)}
        vals = np.empty((len(nodes),) + z.shape, dtype=complex)
        ders = np.empty_like(vals)
        w = z.copy()
        d1 = np.ones_like(w)
        if -1 in want:
            vals[want[-1]] = w
            ders[want[-1]] = d1
        last = int(self.step_index[nodes].max())
        for j in range(last + 1):
            m = cm.vertical_slit(self.step_h[j], self.step_x[j])
            w, f1, _, _ = m.jet(w, check=False)
            d1 = d1 * f1
            if j in want:
                i = want[j]
                vals[i] = w
                ders[i] = d1
        lam = self.driver.lam[nodes]
        vals = vals - lam.reshape((-1,) + (1,) * z.ndim)
        return vals, ders


def slit_chain(xs, hs, merge: bool = True, domain_tag: str = "H minus hull") -> cm.ConformalChain:
    """Compose vertical-slit maps; equal consecutive bases merge exactly."""
    maps = []
    cur_x, cur_h2 = None, 0.0
    for x, h in zip(xs, hs):
        if merge and cur_x is not None and x == cur_x:
            cur_h2 += h * h
            continue
        if cur_x is not None:
            maps.append(cm.vertical_slit(np.sqrt(cur_h2), cur_x))
        cur_x, cur_h2 = x, h * h
    if cur_x is not None:
        maps.append(cm.vertical_slit(np.sqrt(cur_h2), cur_x))
    return cm.ConformalChain(maps, domain_tag)


def trace_forward(driver: DrivingFunction | Callable, dt: float | None = None, T: float | None = None,
                  substeps: int = 1) -> TraceBundle:
    """Trace the chord generated by ``driver``.

    ``driver`` is a :class:`DrivingFunction` (piecewise linear in time) or a
    callable ``lambda(t)``.  With ``dt=None`` the driver's own nodes are the
    time grid.  Each output interval is split into ``substeps`` slit steps;
    only the output nodes are returned as chord points.
    """
    if isinstance(driver, DrivingFunction):
        if np.any(driver.a != driver.t):
            raise NonMonotoneCapacity("forward tracing needs a driver in capacity time (a = t)")
        lam_fn = driver
        T = driver.T if T is None else T
        if dt is None:
            t_out = driver.t[driver.t > 0]
        else:
            n = int(round(T / dt))
            t_out = T * np.arange(1, n + 1) / n
        t0 = float(driver.t[0]) if driver.t[0] <= 0 else 0.0
    else:
        lam_fn = driver
        if T is None or dt is None:
            raise ValidationError("callable drivers need both T and dt")
        n = int(round(T / dt))
        t_out = T * np.arange(1, n + 1) / n
        t0 = 0.0
    if dt is not None and dt <= 0:
        raise ValidationError("dt must be positive")
    if t_out.size == 0:
        raise ValidationError("nothing to trace")
    m = int(substeps)
    knots = np.concatenate([[t0], t_out])
    frac = np.arange(1, m + 1) / m
    t_steps = (knots[:-1, None] + np.diff(knots)[:, None] * frac[None, :]).ravel()
    dts = np.diff(np.concatenate([[t0], t_steps]))
    if np.any(dts <= 0):
        raise NonMonotoneCapacity("time grid is not increasing")
    xs = np.asarray(lam_fn(t_steps), dtype=float)
    hs = 2.0 * np.sqrt(dts)
    step_index = np.arange(1, t_out.size + 1) * m - 1

    tips = xs[step_index] + 1j * hs[step_index]
    owner = step_index.copy()
    for j in range(step_index[-1] - 1, -1, -1):
        sel = owner > j
        if not np.any(sel):
            continue
        first = int(np.argmax(sel))
        tips[first:] = _slit_inverse_upper(tips[first:], hs[j], xs[j])
    if np.any(~np.isfinite(tips)) or np.any(tips.imag <= 0):
        raise StepTooLarge("a traced tip left the upper half-plane; reduce dt")

    lam_out = xs[step_index]
    drv = DrivingFunction(np.concatenate([[t0], t_out]), np.concatenate([[float(lam_fn(t0))], lam_out]))
    chord = ChordSample(tips, capacity_times=t_out)
    # node 0 is time t0 (identity chain)
    return TraceBundle(drv, chord, xs, hs, np.concatenate([[-1], step_index]))


def coeffs_from_inverted(g_chain: cm.ConformalChain, lam_t: float, delta: float = 1e-4,
                         levels: int = 3):
    """Recover ``(lambda_t, a_t)`` from the jet at 0 of the inverted chain.

    ``lambda = -N f~(0) / 2`` and ``a = -S f~(0) / 12`` with
    ``f~ = iota o (g_t - lambda_t) o iota``; the limit at 0 is taken by
    Richardson extrapolation over ``z0 = i delta / 2**j``.
    """
    chain = cm.ConformalChain([cm.inversion()]).then(g_chain, cm.translation(-lam_t), cm.inversion())
    z0 = 1j * delta / 2.0 ** np.arange(levels)
    try:
        _, _, n, s = cm.eval_ns(chain, z0)
    except OutOfDomain as exc:
        raise OutOfDomain(f"inverted chain not analytic near 0: {exc}") from exc
    n0 = richardson(list(n), 2.0)
    s0 = richardson(list(s), 2.0)
    return float(-0.5 * n0.real), float(-s0.real / 12.0)


def asymptotic_check(driver: DrivingFunction, z, t_max: float = 1e6, n_points: int = 13,
                     dt: float | None = None, t_start: float | None = None):
    """Large-time behaviour of the centered chain at a fixed point ``z``.

    The driver is held constant after its last node.  Returns a list of rows
    ``(t, |f_t(z)^2/(4t) - 1|, log|f_t'(z)| / log t, local exponent)`` on a
    geometric grid; the local exponent ``d log|f_t'| / d log t = -Re(2t/f_t^2)``
    is exact for the current chain.
    """
    bundle = trace_forward(driver, dt)
    base = bundle.g_chain()
    T, lam_T = driver.T, float(driver.lam[-1])
    start = max(10.0 * T, 10.0) if t_start is None else t_start
    rows = []
    for t in np.geomspace(start, t_max, n_points):
        chain = base.then(cm.vertical_slit(2.0 * np.sqrt(t - T), lam_T), cm.translation(-lam_T))
        w, d1, _, _ = cm.eval_jet(chain, z)
        rows.append((float(t), float(abs(w * w / (4 * t) - 1)),
                     float(np.log(abs(d1)) / np.log(t)), float(-(2 * t / (w * w)).real)))
    return rows
