import numpy as np
import pytest

from loewnerqc import catalog
from loewnerqc import conformal_maps as cm
from loewnerqc.errors import NonMonotoneCapacity, ValidationError
from loewnerqc.loewner_chain import (ChordSample, DrivingFunction, asymptotic_check,
                                     coeffs_from_inverted, trace_forward)

RAY_ANGLE = np.pi / 5  # c = 3 solves c^2 a (1 - a) = 4 (1 - 2a)^2 with a = 1/5


def _trace(name, params=None, n=1000, T=1.0, substeps=1):
    lam, _ = catalog.driver_functions(name, params or {})
    return trace_forward(lambda t: lam(t), dt=T / n, T=T, substeps=substeps)


def test_zero_driver_tip():
    b = _trace("zero", n=100)
    assert abs(b.chord.points[-1] - 2j) < 1e-10


def test_zero_driver_chain_value():
    g = _trace("zero", n=100).g_chain()
    assert g(1 + 1j) == pytest.approx(np.sqrt((1 + 1j) ** 2 + 4), rel=1e-12)


def test_sqrt_driver_traces_a_ray():
    b = _trace("sqrt", {"c": 3.0}, n=1000)
    ang = np.angle(b.chord.points)
    # the first vertices carry a scale-free start-up error; past 100 steps it is below 1e-3
    assert np.max(np.abs(ang[100:] - RAY_ANGLE)) < 1e-3
    assert abs(ang[-1] - RAY_ANGLE) < 2e-4


def test_sqrt_ray_start_up_error_shrinks_with_substeps():
    errs = [np.max(np.abs(np.angle(_trace("sqrt", {"c": 3.0}, n=500, substeps=s).chord.points[20:])
                          - RAY_ANGLE)) for s in (1, 4)]
    assert errs[1] < errs[0] / 2


def test_coeffs_zero_slit():
    lam, a = coeffs_from_inverted(cm.ConformalChain([cm.vertical_slit(2.0)]), 0.0)
    assert abs(lam) < 1e-6 and abs(a - 1) < 1e-6


def test_coeffs_identity():
    lam, a = coeffs_from_inverted(cm.identity_chain(), 0.0)
    assert abs(lam) < 1e-12 and abs(a) < 1e-12


def test_coeffs_traced_sine():
    lam_fn = lambda t: np.sin(2 * np.pi * t)  # noqa: E731
    b = trace_forward(lam_fn, dt=1e-3, T=0.3)
    lam, a = coeffs_from_inverted(b.g_chain(), b.driver.lam[-1])
    assert abs(lam - lam_fn(0.3)) < 1e-6
    assert abs(a - 0.3) < 1e-6


def test_asymptotic_zero_driver_closed_form():
    drv = catalog.make_driver("zero", {"T": 1.0, "N": 10})
    z = 1 + 1j
    rows = asymptotic_check(drv, z, t_max=1e6, n_points=5)
    t, ratio, logr, local = rows[-1]
    assert ratio == pytest.approx(abs(z * z) / (4 * t), rel=1e-6)
    # f_t'(z) = z / sqrt(z^2 + 4t): the finite-t log ratio carries log(|z|/2)/log t
    assert logr == pytest.approx(np.log(abs(z / np.sqrt(z * z + 4 * t))) / np.log(t), rel=1e-10)
    assert abs(local + 0.5) < 1e-3


def test_asymptotic_ramp_ratio():
    drv = catalog.make_driver("ramp", {"T": 1.0, "N": 1000})
    rows = asymptotic_check(drv, 2j, t_max=1e4, n_points=5)
    assert rows[-1][1] < 1e-2
    ratios = [r[1] for r in rows]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


def test_hydrodynamic_normalization():
    b = _trace("sine", n=400)
    g = b.g_chain()
    t = b.driver.t[-1]
    z = 1e4 * np.exp(1j * np.pi * (np.arange(16) + 0.5) / 16)
    resid = np.abs(g(z) - z - 2 * t / z) * np.abs(z) ** 2
    assert np.all(np.isfinite(resid)) and resid.max() < 1e3


def test_scaling_covariance():
    c = 1.7
    lam, _ = catalog.driver_functions("sine", {})
    a = trace_forward(lambda t: lam(t), dt=1e-3, T=1.0)
    b = trace_forward(lambda t: c * lam(t / c ** 2), dt=c ** 2 * 1e-3, T=c ** 2)
    assert np.max(np.abs(b.chord.points - c * a.chord.points) / np.abs(c * a.chord.points)) < 1e-8


def test_capacity_additivity(rng):
    b = _trace("sine", n=200)
    k = 120
    full = b.g_chain()
    head = b.g_chain(k)
    tail = cm.ConformalChain([cm.vertical_slit(h, x) for x, h in
                              zip(b.step_x[k:], b.step_h[k:])])
    z = rng.uniform(-3, 3, 100) + 1j * rng.uniform(2, 4, 100)
    assert np.max(np.abs(tail(head(z)) - full(z))) < 1e-12


def test_driver_validation():
    with pytest.raises(ValidationError):
        DrivingFunction([0, 1, 1], [0, 0, 0])
    with pytest.raises(NonMonotoneCapacity):
        trace_forward(DrivingFunction([0, 1], [0, 0], [0, 2]))
    with pytest.raises(ValidationError):
        ChordSample([1j, -1j])


def test_csv_round_trip():
    d = catalog.make_driver("sine", {"N": 20})
    again = DrivingFunction.from_csv(d.to_csv())
    assert np.array_equal(again.lam, d.lam) and np.array_equal(again.a, d.a)
    c = _trace("sine", n=20).chord
    assert np.array_equal(ChordSample.from_csv(c.to_csv()).points, c.points)
