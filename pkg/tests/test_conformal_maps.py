import json

import numpy as np
import pytest

from loewnerqc import conformal_maps as cm
from loewnerqc.errors import DerivativeVanishes, NewtonDivergence, OutOfDomain, ValidationError


def test_identity_jet():
    w, d1, d2, d3 = cm.eval_jet(cm.identity_chain(), 1 + 1j)
    assert (w, d1, d2, d3) == (1 + 1j, 1, 0, 0)


def test_square_then_slit_cancels_derivative():
    chain = cm.ConformalChain([cm.square(), cm.vertical_slit(2.0)])
    z = 0.9 + 1.2j
    assert chain(z) == pytest.approx(cm.sqrt_h(z ** 4 + 4))
    with pytest.raises((DerivativeVanishes, OutOfDomain)):
        cm.eval_jet(chain, 1 + 1j)


def test_closed_form_slit_jet():
    z = 1 + 1j
    w, d1, d2, d3 = cm.eval_jet(cm.ConformalChain([cm.vertical_slit(2.0)]), z)
    r = np.sqrt(z * z + 4)
    assert w == pytest.approx(2.0581 + 0.4859j, abs=1e-4)
    assert w == pytest.approx(r, rel=1e-14)
    assert d1 == pytest.approx(z / r, rel=1e-14)
    assert d2 == pytest.approx(4 / r ** 3, rel=1e-14)
    assert d3 == pytest.approx(-12 * z / r ** 5, rel=1e-14)


def test_mobius_schwarzian_vanishes():
    chain = cm.ConformalChain([cm.mobius(1 + 2j, 0.5, -0.3j, 2)])
    z = np.array([0.1 + 0.2j, -1 + 3j, 2.5 - 0.5j])
    assert np.max(np.abs(cm.schwarzian(chain, z))) < 1e-14
    assert np.max(np.abs(cm.schwarzian(chain, z, method="jet"))) < 1e-13


def test_square_n_and_s():
    chain = cm.ConformalChain([cm.square()])
    assert cm.preschwarzian(chain, 1j) == pytest.approx(-1j)
    assert cm.schwarzian(chain, 1j) == pytest.approx(1.5)


def test_inverted_slit_schwarzian_at_origin():
    # f~ = iota o g_1 o iota for the zero driver; S f~(0) = -12 t
    inv = cm.inversion()
    chain = cm.ConformalChain([inv, cm.vertical_slit(2.0), inv])
    s = cm.schwarzian(chain, 1e-4j)
    assert s == pytest.approx(-12.0, abs=1e-6)


def test_schwarzian_of_inverse_mobius():
    chain = cm.ConformalChain([cm.mobius(2, 1, 1, 3)])
    assert abs(cm.schwarzian_of_inverse(chain, 0.3 + 0.1j, 0.0)) < 1e-13


def test_schwarzian_of_inverse_quadratic():
    # phi(z) = z + 0.1 z^2 as a Moebius-free chain: translate, square, scale, translate
    # phi(z) = 0.1 (z + 5)^2 - 2.5
    chain = cm.ConformalChain([cm.translation(5), cm.square(), cm.scaling(0.1), cm.translation(-2.5)])
    w = 0.2 + 0.1j

    def inverse(v):
        return (-1 + np.sqrt(1 + 0.4 * v)) / 0.2
    d = cm.cauchy_derivatives(inverse, w, radius=0.05)
    oracle = d[3] / d[1] - 1.5 * (d[2] / d[1]) ** 2
    assert cm.schwarzian_of_inverse(chain, w, 0.2) == pytest.approx(oracle, rel=1e-8)


def test_schwarzian_of_sqrt_via_inverse():
    # S[sqrt](w) = 3 / (8 w^2); at w = -1 that is 3/8
    chain = cm.ConformalChain([cm.square()])
    assert cm.schwarzian_of_inverse(chain, -1 + 0j, 1j) == pytest.approx(3 / 8)


def test_newton_divergence():
    chain = cm.ConformalChain([cm.square()])
    with pytest.raises(NewtonDivergence):
        cm.invert_point(chain, -1 + 0j, 5.0 + 0.1j, maxiter=2)


def test_branch_convention():
    z = np.array([1 + 0j, -1 + 0j, 1j, -1 + 1e-3j, -1 - 1e-3j, 4 + 0j])
    r = cm.sqrt_h(z)
    assert np.all(r.imag >= 0)
    assert r[1] == pytest.approx(1j)
    assert r[0] == pytest.approx(1)


def test_sqrt_cut_raises():
    with pytest.raises(OutOfDomain):
        cm.ConformalChain([cm.sqrt_map()])(2.0 + 0j)


def test_map_validation():
    with pytest.raises(ValidationError):
        cm.mobius(1, 2, 2, 4)
    with pytest.raises(ValidationError):
        cm.vertical_slit(0.0)


def test_chain_then_inverse_round_trip(rng):
    chain = cm.ConformalChain([cm.translation(0.3), cm.vertical_slit(1.5, 0.3), cm.mobius(1, 0, 0.1, 1),
                               cm.vertical_slit(0.7, -0.2)])
    z = rng.uniform(-2, 2, 20) + 1j * rng.uniform(0.5, 2, 20)
    back = chain.inverse()(chain(z))
    assert np.max(np.abs(back - z)) < 1e-12


def test_json_round_trip():
    chain = cm.ConformalChain([cm.translation(1 - 2j), cm.vertical_slit(1.5, 0.3), cm.mobius(1, 0, 0.1j, 1),
                               cm.sqrt_map(), cm.square(), cm.scaling(-2)], "test")
    again = cm.ConformalChain.from_json(json.loads(chain.dumps()))
    z = 0.4 + 0.9j
    assert again(z) == chain(z)
