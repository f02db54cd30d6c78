import numpy as np
import pytest

from loewnerqc import catalog
from loewnerqc import conformal_maps as cm
from loewnerqc.beltrami import (BeltramiField, DeformationField, deform_points, deformation_field,
                                first_order_velocity, pushforward, reflect_extend, velocity_kernel)
from loewnerqc.errors import ClearanceViolated, LeftHalfPlane, SupportHit, ValidationError
from loewnerqc.numerics import Region2D, midpoint2d
from loewnerqc.zipper import self_intersections

SQUARE = (1, 2, 1, 2)
# -(1/pi) * midpoint sum on 2048^2 cells per rectangle of the reflected field, frozen
F_AT_I = -0.034779053088531395 - 0.030515970496937134j


@pytest.fixture
def nu():
    return BeltramiField.constant([SQUARE])


def test_reflect_constant(nu):
    full = reflect_extend(nu)
    assert full.ambient == "sphere"
    assert set(full.support.rects) == {(1, 2, 1, 2), (1, 2, -2, -1)}
    assert full(1.5 - 1.5j) == 1 and full(1.5 + 1.5j) == 1


def test_reflect_imaginary_constant():
    full = reflect_extend(BeltramiField.constant([SQUARE], 1j))
    assert full(1.5 - 1.5j) == pytest.approx(-1j)


def test_reflect_identity_field():
    full = reflect_extend(BeltramiField.from_spec([SQUARE], {"poly": [[1, 0, 1, 0]]}))
    z = 1.3 + 1.7j
    assert full(np.conj(z)) == pytest.approx(np.conj(z))


def test_reflect_needs_half_plane():
    with pytest.raises(ValidationError):
        reflect_extend(BeltramiField.constant([SQUARE], ambient="sphere"))


def test_pushforward_translation_and_scaling(nu):
    moved = pushforward(nu, cm.ConformalChain([cm.translation(0.5 + 0.25j)]))
    assert moved(2.0 + 1.75j) == pytest.approx(1.0)
    assert moved.support.contains(2.0 + 1.75j)
    scaled = pushforward(nu, cm.ConformalChain([cm.scaling(3.0)]))
    assert scaled(4.5 + 4.5j) == pytest.approx(1.0)


def test_pushforward_square(nu, rng):
    out = pushforward(nu, cm.ConformalChain([cm.square()]))
    z = rng.uniform(1.05, 1.95, 20) + 1j * rng.uniform(1.05, 1.95, 20)
    assert np.max(np.abs(out(z * z) - z * z / np.abs(z) ** 2)) < 1e-10


def test_velocity_zero_field():
    zero = BeltramiField.constant([SQUARE], 0.0)
    assert first_order_velocity(zero, 0.5 + 0.5j) == 0


def test_velocity_vanishes_at_origin(nu):
    assert abs(first_order_velocity(nu, 0j)) < 1e-15


def test_velocity_matches_midpoint_oracle(nu):
    assert abs(first_order_velocity(nu, 1j) - F_AT_I) < 1e-6


def test_midpoint_oracle_is_reproducible(nu):
    full = reflect_extend(nu)
    region = full.support
    val = -midpoint2d(lambda z: full.value(z) * velocity_kernel(z, 1j), region, 512) / np.pi
    assert abs(val - F_AT_I) < 1e-5


def test_origin_kernel_agrees_for_real_constant_on_square(nu):
    # ∫ 1/z^2 over the square and its mirror is real-cancelling, so both
    # normalizations give the same velocity for this field
    a = first_order_velocity(nu, 1j)
    b = first_order_velocity(nu, 1j, normalization="origin")
    assert abs(a - b) < 1e-12


def test_velocity_support_hit(nu):
    with pytest.raises(SupportHit):
        first_order_velocity(nu, 1.5 + 1.5j)
    with pytest.raises(SupportHit):
        first_order_velocity(nu, 1.5 - 1.5j)


def test_sphere_normalization():
    mu = BeltramiField.constant([(-0.4, -0.1, 0.1, 0.4)], ambient="sphere")
    f = first_order_velocity(mu, np.array([0j, 1 + 0j, 1e3, 1e5]))
    assert abs(f[0]) < 1e-15 and abs(f[1]) < 1e-15
    assert abs(f[3]) / 1e5 == pytest.approx(abs(f[2]) / 1e3, rel=1e-2)


def test_sphere_support_must_avoid_marked_points():
    mu = BeltramiField.constant([(0.9, 1.1, -0.1, 0.1)], ambient="sphere")
    with pytest.raises(ValidationError):
        first_order_velocity(mu, 3j)


def test_velocity_holomorphic_off_support(nu):
    h = 1e-4
    for z0 in (0.3 + 0.4j, 3 + 2j, -1 + 0.5j):
        fx = (first_order_velocity(nu, z0 + h) - first_order_velocity(nu, z0 - h)) / (2 * h)
        fy = (first_order_velocity(nu, z0 + 1j * h) - first_order_velocity(nu, z0 - 1j * h)) / (2 * h)
        assert abs(0.5 * (fx + 1j * fy)) < 1e-6


def test_velocity_real_on_real_axis(nu):
    x = np.linspace(-10, 10, 41)
    assert np.max(np.abs(first_order_velocity(nu, x).imag)) < 1e-9


def test_velocity_linear_in_field(nu):
    other = BeltramiField.from_spec([SQUARE], {"poly": [[0, 1, 0.2, 0.1]]})
    both = BeltramiField.from_spec([SQUARE], {"poly": [[0, 0, 2.0, 0.0], [0, 1, -0.6, -0.3]]})
    z = np.array([0.5j, 3 + 1j])
    lhs = first_order_velocity(both, z)
    rhs = 2 * first_order_velocity(nu, z) - 3 * first_order_velocity(other, z)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_deform_identity_at_zero_eps(nu):
    pts = catalog.slit_points(50)
    assert np.array_equal(deform_points(pts, nu, 0.0), pts)


def test_deform_keeps_real_axis(nu):
    x = np.linspace(-3, 3, 13).astype(complex)
    assert np.max(np.abs(deform_points(x, nu, 0.1).imag)) < 1e-10


def test_deformed_slit_is_simple(nu):
    pts = catalog.slit_points(200)
    out = deform_points(pts, nu, 1e-3)
    assert self_intersections(np.concatenate([[0j], out])) == []


def test_deform_errors(nu):
    with pytest.raises(ClearanceViolated):
        deform_points(np.array([1.5 + 0.95j]), nu, 1e-3)
    with pytest.raises(ValidationError):
        deform_points(np.array([0.5j]), nu, 2.0)
    big = BeltramiField.constant([(0.05, 0.6, 0.05, 0.6)], 0.9)
    with pytest.raises(LeftHalfPlane):
        deform_points(np.array([0.3 + 0.001j]), big, -0.99, clearance=0.0)


def test_deformation_field_apply(nu):
    pts = catalog.slit_points(10)
    d = deformation_field(pts, nu)
    assert np.allclose(d.apply(1e-3), deform_points(pts, nu, 1e-3), atol=0, rtol=1e-15)
    with pytest.raises(ValidationError):
        DeformationField([1, 2], [1])


def test_field_json_round_trip():
    f = BeltramiField.from_spec([SQUARE, (3, 4, 1, 2)], {"poly": [[1, 1, 0.1, -0.2]]})
    again = BeltramiField.from_json(f.dumps())
    z = np.array([1.5 + 1.2j, 3.2 + 1.9j])
    assert np.array_equal(again(z), f(z))
    assert again.sup_bound == f.sup_bound


def test_field_validation():
    with pytest.raises(ValidationError):
        BeltramiField.constant([(0, 1, -0.5, 0.5)])
    with pytest.raises(ValidationError):
        BeltramiField.constant([SQUARE], ambient="disk")
    assert Region2D([SQUARE]).area == 1
