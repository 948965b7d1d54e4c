import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinhgordon.algebra import CPoly
from sinhgordon.errors import BoundaryError, MalformedInputError
from sinhgordon.laxflow import a_poly, killing_flow, seed_loop
from sinhgordon.spectral import SpectralPair, curve_from_xi, poly_reality_check
from sinhgordon.whitham import (WhithamDirection, a_basis, b_basis, c_basis, period_from_pair,
                                whitham_flow, whitham_tangent)

P = 2 * np.pi
LAM = CPoly([0, 1])


@pytest.fixture(scope="module")
def sp1():
    xi = seed_loop(1, 1.3, 0.4)
    return curve_from_xi(xi, 1, P, killing_flow(xi, 1, (0.0, P), 64).cauchy_data(P))


def _pair(g, seed):
    """Reality-compatible pair with b(0)^2/a(0) = -p^2/16 (closing not required)."""
    rng = np.random.default_rng(seed)
    a = a_poly(seed_loop(g, 0.9, *(0.3 * rng.standard_normal(g - 1) + 0.2j * rng.standard_normal(g - 1))), g)
    x = rng.standard_normal(len(b_basis(g)))
    b = (x @ b_basis(g))
    b[0] = -0.25j * P * np.sqrt(a.coef(0))
    b[-1] = -np.conj(b[0])
    return SpectralPair(a, CPoly(b), g, P)


def _check_equation(sp, c, adot, bdot):
    lhs = bdot * sp.a * (-2.0) + sp.b * adot
    rhs = (LAM * sp.a * c.deriv()) * (-2.0) + sp.a * c + LAM * sp.a.deriv() * c
    n = max(lhs.degree, rhs.degree) + 1
    return np.abs(lhs.padded(n) - rhs.padded(n)).max()


def test_bases_shapes():
    for g in range(1, 5):
        assert a_basis(g).shape == (2 * g + 1, 2 * g + 1)
        assert b_basis(g).shape == (g + 2, g + 2)
        assert c_basis(g).shape == (g, g + 2)


def test_direction_validation():
    with pytest.raises(MalformedInputError):
        WhithamDirection([1.0, 1.0, 1.0], 1)
    with pytest.raises(MalformedInputError):
        WhithamDirection([0, 1j, 0], 1)
    with pytest.raises(MalformedInputError):
        WhithamDirection([0, 0, 0, 1.0], 1)
    WhithamDirection([0, 2.0, 0], 1)


def test_zero_direction(sp1):
    adot, bdot = whitham_tangent(sp1, WhithamDirection([0, 0, 0], 1))
    assert adot.is_zero() and bdot.is_zero()


def test_tangent_plugback_and_reality(sp1, rng):
    for _ in range(5):
        d = WhithamDirection.random(rng, 1)
        adot, bdot, res = whitham_tangent(sp1, d, return_residual=True)
        assert res < 1e-10
        assert _check_equation(sp1, d.c, adot, bdot) < 1e-10
        va, vb = adot.padded(3), bdot.padded(3)
        assert np.abs(va - np.conj(va[::-1])).max() < 1e-12
        assert np.abs(vb + np.conj(vb[::-1])).max() < 1e-12
        # adot(0) is tangent to |a(0)| = 1 and bdot(0) keeps p fixed
        assert abs((np.conj(sp1.a.coef(0)) * adot.coef(0)).real) < 1e-12
        pdot = bdot.coef(0) / sp1.b.coef(0) - 0.5 * adot.coef(0) / sp1.a.coef(0)
        assert abs(pdot) < 1e-10


def test_genus_one_closed_form(sp1):
    # b = (p/4)(lam a' - a) is preserved, so bdot = (p/4)(lam adot' - adot)
    adot, bdot = whitham_tangent(sp1, WhithamDirection([0, 1.0, 0], 1))
    expect = (LAM * adot.deriv() - adot) * (P / 4)
    assert np.abs(bdot.padded(3) - expect.padded(3)).max() < 1e-10


@pytest.mark.parametrize("g", [1, 2, 3])
def test_tangent_linear_and_rank(g):
    sp = _pair(g, 10 + g)
    rng = np.random.default_rng(g)
    d1, d2 = WhithamDirection.random(rng, g), WhithamDirection.random(rng, g)
    s, t = 0.6, -1.7
    comb = WhithamDirection(d1.c * s + d2.c * t, g)
    a12, b12 = whitham_tangent(sp, comb)
    a1, b1 = whitham_tangent(sp, d1)
    a2, b2 = whitham_tangent(sp, d2)
    n = 2 * g + 1
    assert np.abs(a12.padded(n) - s * a1.padded(n) - t * a2.padded(n)).max() < 1e-10
    assert np.abs(b12.padded(g + 2) - s * b1.padded(g + 2) - t * b2.padded(g + 2)).max() < 1e-10
    cols = []
    for v in c_basis(g):
        ad, bd = whitham_tangent(sp, WhithamDirection(CPoly(v), g))
        z = np.concatenate([ad.padded(n), bd.padded(g + 2)])
        cols.append(np.concatenate([z.real, z.imag]))
    assert np.linalg.matrix_rank(np.array(cols), tol=1e-8) == g


def test_flow_identity(sp1):
    tr = whitham_flow(sp1, WhithamDirection([0, 1.0, 0], 1), (0.3, 0.3))
    assert len(tr.pairs) == 1 and tr.pairs[0] is sp1


def test_flow_invariants(sp1):
    tr = whitham_flow(sp1, WhithamDirection([0, 1.0, 0], 1), (0.0, 0.5))
    assert not tr.truncated
    assert tr.drift("period") < 1e-8
    assert tr.drift("a_cycles") < 1e-5
    assert tr.drift("lattice_residuals") < 1e-5
    assert abs(period_from_pair(tr.pairs[-1]) - P) < 1e-8
    for sp in tr.pairs:
        assert poly_reality_check(sp.a, "a", 1, tol=1e-10)
        assert abs(abs(sp.a.coef(0)) - 1) < 1e-10


def test_flow_keeps_genus_one_relation(sp1):
    tr = whitham_flow(sp1, WhithamDirection([0, -1.0, 0], 1), (0.0, 0.5))
    sp = tr.pairs[-1]
    expect = (LAM * sp.a.deriv() - sp.a) * (P / 4)
    assert np.abs(sp.b.padded(3) - expect.padded(3)).max() < 1e-8


def test_flow_reversal(sp1):
    d = WhithamDirection([0, 1.0, 0], 1)
    fwd = whitham_flow(sp1, d, (0.0, 0.5))
    back = whitham_flow(fwd.pairs[-1], d, (0.5, 0.0))
    end = back.pairs[-1]
    assert np.abs(end.a.padded(3) - sp1.a.padded(3)).max() < 1e-7
    assert np.abs(end.b.padded(3) - sp1.b.padded(3)).max() < 1e-7


def test_flow_collision(sp1):
    with pytest.raises(BoundaryError) as exc:
        whitham_flow(sp1, WhithamDirection([0, 1.0, 0], 1), (0.0, 5.0))
    traj = exc.value.trajectory
    assert traj.truncated
    assert traj.monitors[-1]["root_distance"] < traj.monitors[0]["root_distance"]


def test_flow_long_run_away_from_collision(sp1):
    tr = whitham_flow(sp1, WhithamDirection([0, -1.0, 0], 1), (0.0, 5.0))
    assert tr.drift("a_cycles") < 1e-6
    assert tr.drift("period") < 1e-8


@settings(max_examples=10, deadline=None)
@given(st.floats(-1.5, 1.5).filter(lambda x: abs(x) > 1e-3))
def test_plugback_random_scale(sp1, x):
    d = WhithamDirection.from_params([x], 1)
    adot, bdot = whitham_tangent(sp1, d)
    assert _check_equation(sp1, d.c, adot, bdot) < 1e-10 * (1 + abs(x))
