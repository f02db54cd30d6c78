"""Chordal Dirichlet energy, universal Liouville action and loop energy."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import conformal_maps as cm
from .errors import CapacityStall, NonFiniteIntegrand, RangeUncovered
from .loewner_chain import DrivingFunction
from .zipper import JordanCurveSample, JordanMaps, jordan_maps


@dataclass
class EnergyReport:
    value: float
    breakdown: dict = field(default_factory=dict)
    mesh: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"value": self.value, "breakdown": dict(self.breakdown), "mesh": dict(self.mesh)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def dirichlet_energy(driver: DrivingFunction, range: tuple[float, float] | None = None) -> float:
    """(1/2) ∫ (dλ/da)² da for the piecewise-linear driver on ``range`` (in t).

    End points of ``range`` that fall between nodes are handled by linear
    interpolation of both λ and a, so partial energies add up exactly.
    """
    t, lam, a = driver.t, driver.lam, driver.a
    s, e = (t[0], t[-1]) if range is None else (float(range[0]), float(range[1]))
    span = max(abs(t[0]), abs(t[-1]), 1.0)
    if s < t[0] - 1e-12 * span or e > t[-1] + 1e-12 * span or e < s:
        raise RangeUncovered(f"range [{s}, {e}] is not covered by nodes [{t[0]}, {t[-1]}]")
    if e == s:
        return 0.0
    inner = (t > s) & (t < e)
    tt = np.concatenate([[s], t[inner], [e]])
    ll = np.interp(tt, t, lam)
    aa = np.interp(tt, t, a)
    da = np.diff(aa)
    if np.any(da <= 1e-15 * max(abs(a[-1]), 1.0)):
        k = int(np.argmin(da))
        raise CapacityStall(f"capacity increment {da[k]:.3e} on [{tt[k]}, {tt[k + 1]}] is not positive")
    return float(0.5 * np.sum(np.diff(ll) ** 2 / da))


def _dirichlet_series(chain: cm.ConformalChain, radius: float, n_samples: int, n_terms: int,
                      exterior: bool) -> float:
    """∫ |φ''/φ'|² over D (or D*) from the Taylor (Laurent) coefficients of log φ'.

    With log φ' = Σ b_n z^n the integral is π Σ n |b_n|².  The coefficients
    come from an FFT of z·φ''/φ' on the circle of the given radius.
    """
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    z = radius * np.exp(1j * theta)
    with np.errstate(all="ignore"):
        _, _, pre, _ = cm.eval_ns(chain, z, check=False)
    coef = np.fft.fft(z * pre) / n_samples
    n = np.arange(1, n_terms + 1)
    c = coef[-n] if exterior else coef[n]
    # |c_n| = n |b_n| r^{±n}; undo the radius and weight by 1/n
    scale = radius ** (2 * n) if exterior else radius ** (-2 * n)
    terms = np.abs(c) ** 2 * scale / n
    if not np.all(np.isfinite(terms)):
        raise NonFiniteIntegrand("non-finite pre-Schwarzian on the sampling circle")
    return float(np.pi * np.sum(terms))


def liouville_parameters(n_points: int, terms_per_point: int = 2, decay: float = 5.0) -> dict:
    """Sampling radius and FFT sizes for a curve with ``n_points`` vertices.

    ``terms_per_point * n`` series terms are kept; the circle sits at
    ``1 - decay / K`` so that undoing the radius amplifies rounding by at most
    ``exp(2 * decay)``.
    """
    k = int(terms_per_point * n_points)
    delta = decay / k
    m = int(2 ** np.ceil(np.log2(4 * k)))
    return {"n_terms": k, "delta": delta, "n_samples": m}


def liouville_action(maps: JordanMaps, terms_per_point: int = 2, decay: float = 5.0) -> EnergyReport:
    """Universal Liouville action S of the curve behind ``maps``.

    S = ∫_D |f''/f'|² + ∫_{D*} |g''/g'|² + 4π log|f'(0)/g'(∞)|.  The log term
    carries a plus sign: that is the combination which vanishes on every
    circle and is invariant under Möbius maps.
    """
    par = liouville_parameters(len(maps.curve), terms_per_point, decay)
    r = 1.0 - par["delta"]
    interior = _dirichlet_series(maps.f_chain, r, par["n_samples"], par["n_terms"], False)
    exterior = _dirichlet_series(maps.g_chain, 1.0 / r, par["n_samples"], par["n_terms"], True)
    log_term = 4.0 * np.pi * float(np.log(abs(maps.f_prime_0) / maps.g_prime_inf))
    mesh = {"n_points": len(maps.curve), **par, "boundary_error": maps.boundary_error}
    return EnergyReport(interior + exterior + log_term,
                        {"interior": interior, "exterior": exterior, "log_term": log_term}, mesh)


def loop_energy(curve: JordanCurveSample | JordanMaps, boundary_tol: float | None = None,
                **kwargs) -> EnergyReport:
    """Loop Loewner energy as S/π, from the zipper maps of ``curve``.

    ``boundary_tol`` is handed to :func:`jordan_maps`; pass ``inf`` to keep
    the boundary error as a diagnostic only.
    """
    maps = curve if isinstance(curve, JordanMaps) else jordan_maps(curve, boundary_tol)
    rep = liouville_action(maps, **kwargs)
    return EnergyReport(rep.value / np.pi, {k: v / np.pi for k, v in rep.breakdown.items()}, rep.mesh)
