"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the verdict lines are
written straight to the terminal.
"""
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from loewnerqc import catalog
from loewnerqc import conformal_maps as cm
from loewnerqc.loewner_chain import trace_forward
from loewnerqc.numerics import convergence_slope
from loewnerqc.variation import run_verification, vary_sle_mass
from loewnerqc.zipper import extract_driving

EPS = 2.5e-3
_LOOP_RUNS = []


def _verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nCRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _fd_at(report, eps=EPS):
    return dict(report.fd_values)[eps]


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def test_criterion_01_closed_form_chain(capsys, rng):
    def run():
        worst = 0.0
        for _ in range(100):
            t = rng.uniform(0.01, 4.0)
            z = complex(rng.uniform(-3, 3), rng.uniform(0.05, 3))
            g = trace_forward(lambda s: 0.0 * s, dt=t / 10, T=t).g_chain()
            exact = complex(cm.sqrt_h(z * z + 4 * t))  # branch with image in H
            worst = max(worst, abs(complex(g(z)) - exact) / abs(exact))
        return worst
    worst, secs = _timed(run)
    _verdict(capsys, 1, worst <= 1e-10 and secs < 1.0,
             f"max relative error {worst:.2e} (<= 1e-10), {secs:.2f} s (< 1 s)")


def _round_trip(name, params, n):
    lam, _ = catalog.driver_functions(name, params)
    b = trace_forward(lambda t: lam(t), dt=1.0 / n, T=1.0, substeps=8)
    d = extract_driving(b.chord).driver
    return float(np.max(np.abs(d.lam - lam(d.a))))


@pytest.mark.parametrize("name,params", [("zero", {}), ("linear", {"c": 2.0}),
                                         ("sine", {"A": 0.8, "omega": 4.0})])
def test_criterion_02_round_trip(capsys, name, params):
    t0 = time.perf_counter()
    errs = [(1.0 / n, _round_trip(name, params, n)) for n in (500, 1000, 2000)]
    secs = time.perf_counter() - t0
    sup = errs[-1][1]
    # an error at rounding level everywhere means the round trip is exact
    exact = max(e for _, e in errs) <= 1e-12
    slope = float("inf") if exact else convergence_slope(errs)
    ok = sup <= 5e-3 and slope >= 0.5 and secs < 30
    _verdict(capsys, 2, ok, f"{name}: sup error {sup:.2e} (<= 5e-3), slope {slope:.2f} (>= 0.5), "
                            f"{secs:.1f} s (< 30 s)")


@pytest.fixture(scope="module")
def thm11():
    reports, secs = _timed(run_verification, "thm1.1", {})
    return {r.quantity: r for r in reports}, secs


def _thm11_verdict(capsys, n, rep, secs):
    fd = _fd_at(rep)
    rel = abs(fd - rep.formula_value) / abs(rep.formula_value)
    ok = rel <= 1e-2 and rep.slope >= 1 and secs < 120
    _verdict(capsys, n, ok, f"{rep.quantity}: formula {rep.formula_value:.10g}, FD {fd:.10g}, "
                            f"relative gap {rel:.2e} (<= 1e-2), slope {rep.slope:.2f} (>= 1), "
                            f"{secs:.1f} s (< 120 s)")


def test_criterion_03_driving_variation(capsys, thm11):
    reports, secs = thm11
    _thm11_verdict(capsys, 3, reports["driving"], secs)


def test_criterion_04_capacity_variation(capsys, thm11):
    reports, secs = thm11
    _thm11_verdict(capsys, 4, reports["capacity"], secs)


def test_criterion_05_rate_consistency(capsys):
    reports, secs = _timed(run_verification, "prop2.3", {})
    rep = {r.quantity: r for r in reports}["rate-capacity"]
    h, fd = min(rep.fd_values)
    gap = abs(fd - rep.formula_value)
    _verdict(capsys, 5, gap <= 1e-3 and secs < 120,
             f"rate formula {rep.formula_value:.10g}, d/dt at h={h:g} {fd:.10g}, "
             f"gap {gap:.2e} (<= 1e-3), {secs:.1f} s (< 120 s)")


def test_criterion_06_energy_variation(capsys):
    (rep,), secs = _timed(run_verification, "cor2.4", {})
    fd = _fd_at(rep)
    rel = abs(fd - rep.formula_value) / abs(rep.formula_value)
    ok = rel <= 1e-2 and rep.slope >= 1 and secs < 300
    _verdict(capsys, 6, ok, f"formula {rep.formula_value:.10g}, FD {fd:.10g}, relative gap {rel:.2e} "
                            f"(<= 1e-2), slope {rep.slope:.2f} (>= 1), {secs:.1f} s (< 300 s)")


def test_criterion_07_loop_equals_chordal_energy(capsys):
    (rep,), secs = _timed(run_verification, "thm1.2", {})
    gaps = rep.details["relative_gaps"]
    shrinking = all(b < a for a, b in zip(gaps, gaps[1:]))
    ok = gaps[-1] <= 5e-2 and shrinking and abs(rep.formula_value - 2.0) < 1e-12 and secs < 600
    _verdict(capsys, 7, ok, f"loop energies {[round(v, 5) for _, v in rep.fd_values]} vs 2, "
                            f"relative gaps {[f'{g:.1e}' for g in gaps]} (last <= 5e-2, shrinking), "
                            f"{secs:.1f} s (< 600 s)")


CIRCLE_FIELDS = [
    {"name": "two-rect", "params": {}},
    {"name": "const-rect", "params": {"rect": [1.4, 1.8, 0.3, 0.6], "ambient": "sphere", "c": [0.5, 0.5]}},
]


@pytest.mark.parametrize("field", CIRCLE_FIELDS, ids=lambda f: f["name"])
def test_criterion_08_circle_is_critical(capsys, field):
    cfg = {"curve": {"name": "circle", "params": {}}, "field": field, "meshes": [256, 512, 1024]}
    (rep,), secs = _timed(run_verification, "thm1.3", cfg)
    _LOOP_RUNS.append(rep)
    s_max = rep.details["max_abs_schwarzian"]
    const = rep.details.get("fd_bound_constant", float("nan"))
    ok = s_max <= 1e-6 and abs(rep.formula_value) <= 1e-10 and np.isfinite(const) and secs < 600
    _verdict(capsys, 8, ok, f"{field['name']}: formula {rep.formula_value:.1e}, max|S| {s_max:.1e} "
                            f"(<= 1e-6), |FD| <= C eps with C = {const:.2e}, {secs:.1f} s (< 600 s)")


def test_criterion_09_perturbed_circle(capsys):
    (rep,), secs = _timed(run_verification, "thm1.3", {})
    _LOOP_RUNS.append(rep)
    fd = _fd_at(rep)
    rel = abs(fd - rep.formula_value) / abs(rep.formula_value)
    ok = rel <= 5e-2 and rep.slope >= 1 and secs < 900
    _verdict(capsys, 9, ok, f"formula {rep.formula_value:.10g}, FD {fd:.10g}, relative gap {rel:.2e} "
                            f"(<= 5e-2), slope {rep.slope:.2f} (>= 1), {secs:.1f} s (< 900 s)")


def test_criterion_10_sle_mass_is_bit_exact(capsys):
    if not _LOOP_RUNS:
        _LOOP_RUNS.extend(run_verification("thm1.3", {"meshes": [256, 512, 1024]}))
    ok = all(r.details["sle_mass_variation"] == -r.formula_value / 12
             and vary_sle_mass(r.formula_value) == -r.formula_value / 12 for r in _LOOP_RUNS)
    _verdict(capsys, 10, ok, f"checked {len(_LOOP_RUNS)} loop-energy runs for exact equality")


ASYMPTOTIC_POINTS = [(1.0, 1.0), (0.0, 2.0), (-1.0, 2.0)]


def test_criterion_11_large_time_asymptotics(capsys):
    t0 = time.perf_counter()
    rows = []
    for z in ASYMPTOTIC_POINTS:
        (rep,) = run_verification("lemmaA1", {"driver": {"name": "ramp", "params": {}}, "z": list(z),
                                              "t_max": 1e4, "n_points": 7})
        rows.append((z, rep.details["rows"][-1]))
    secs = time.perf_counter() - t0
    ok = secs < 120
    parts = []
    for z, (t, ratio, expo, local) in rows:
        ok &= ratio <= 1e-2 and -0.52 <= expo <= -0.48
        parts.append(f"z={complex(*z)}: ratio {ratio:.1e}, log|f'|/log t {expo:.3f}, local {local:.4f}")
    _verdict(capsys, 11, ok, f"t=1e4; {'; '.join(parts)}; {secs:.1f} s (< 120 s)")


def test_criterion_12_property_suites(capsys):
    suite = Path(__file__).with_name("test_properties.py")
    res = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", str(suite)],
                         capture_output=True, text=True, timeout=1800)
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr[-200:]
    _verdict(capsys, 12, res.returncode == 0, f"property suite: {tail}")
