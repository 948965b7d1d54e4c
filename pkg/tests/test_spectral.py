import numpy as np
import pytest

from sinhgordon.algebra import CPoly, poly_reality_check
from sinhgordon.errors import CurveRecoveryError, PathError, PreconditionError
from sinhgordon.jets import CauchyData
from sinhgordon.laxflow import a_poly, killing_flow, seed_loop
from sinhgordon.spectral import (SpectralPair, a_cycle_integral, circle_path, closing_conditions,
                                 contour_integral, curve_from_xi, eigenvector_at, form_dlnmu,
                                 h_value, lattice_distance, period_residual, residue_pairing,
                                 segment_integral, segment_path)

P = 2 * np.pi


@pytest.fixture(scope="module")
def g1_pair():
    xi = seed_loop(1, 1.3, 0.4)
    cd = killing_flow(xi, 1, (0.0, P), n_out=64).cauchy_data(P)
    return xi, cd, curve_from_xi(xi, 1, P, cd)


@pytest.fixture(scope="module")
def g2_pair():
    """Genus-2 data satisfying the reality conditions (not closing)."""
    xi = seed_loop(2, 1.2, 0.3 + 0.2j, 0.5 - 0.1j)
    a = a_poly(xi, 2)
    b = CPoly([-0.5j * P / 4 * 2 * np.sqrt(-a.coef(0)).real, 0.3 + 0.1j, 0.0, 0.3 - 0.1j])
    b = CPoly(0.5 * (b.padded(4) - np.conj(b.padded(4)[::-1])))
    return xi, SpectralPair(a, b, 2, P)


def test_genus_zero_a():
    xi = seed_loop(0)
    assert a_poly(xi, 0) == CPoly([-1])


@pytest.mark.parametrize("g", [1, 2, 3])
def test_a_normalized(g):
    a = a_poly(seed_loop(g, 0.8, 0.1, 0.2j, rng=np.random.default_rng(g)), g)
    assert abs(abs(a.coef(0)) - 1) < 1e-14
    assert poly_reality_check(a, "a", g, tol=1e-12)


def test_genus_one_closed_form(g1_pair):
    xi, cd, sp = g1_pair
    lam = CPoly([0, 1])
    expect = (lam * sp.a.deriv() - sp.a) * (P / 4)
    assert np.abs(sp.b.padded(3) - expect.padded(3)).max() < 1e-8
    s = 0.4**2 + 1.3**2 + 1.3**-2
    assert np.allclose(sp.a.padded(3), [-1, -s, -1], atol=1e-14)
    assert sp.fit_residual < 1e-6


def test_b0_matches_leading_lnmu_asymptote(g1_pair):
    # d ln mu ~ -(ip/4) lambda^{-3/2} d lambda near 0 forces b(0)^2 / a(0) = -p^2/16
    assert period_residual(g1_pair[2]) < 1e-6


def test_b_reality(g1_pair):
    assert poly_reality_check(g1_pair[2].b, "b", 1, tol=1e-12)
    assert g1_pair[2].in_moduli()


def test_curve_recovery_error():
    xi = seed_loop(1, 1.3, 0.4)
    with pytest.raises(CurveRecoveryError):
        # Cauchy data of a different solution cannot produce a degree-2 b
        curve_from_xi(xi, 1, P, CauchyData.random(np.random.default_rng(3), N=64, amp=0.4))


def test_json_roundtrip(g2_pair):
    sp = g2_pair[1]
    back = SpectralPair.from_json(sp.to_json())
    assert back.a == sp.a and back.b == sp.b and back.g == 2


# --- closing conditions --------------------------------------------------------------------------

def test_closing_passes_for_periodic_flow(g1_pair):
    rep = closing_conditions(g1_pair[2], tol=1e-5)
    assert rep["pass"]
    assert len(rep["segment_integrals"]) == 1 and len(rep["h_values"]) == 2


def test_closing_fails_after_perturbation(g1_pair):
    sp = g1_pair[2]
    bad = SpectralPair(sp.a, sp.b + CPoly([0, 0.01]), 1, sp.p)
    assert not closing_conditions(bad, tol=1e-5)["pass"]


def test_segment_sheet_antisymmetry(g2_pair):
    sp = g2_pair[1]
    roots, _ = sp.roots()
    for alpha in [r for r in roots if abs(r) < 1]:
        s1 = segment_integral(sp, alpha, sheet=1)
        s2 = segment_integral(sp, alpha, sheet=-1)
        assert abs(s1 + s2) < 1e-9 * (1 + abs(s1))


def test_quadrature_refinement(g2_pair):
    sp = g2_pair[1]
    roots, _ = sp.roots()
    for alpha in [r for r in roots if abs(r) < 1]:
        coarse = segment_integral(sp, alpha, panels=8)
        fine = segment_integral(sp, alpha, panels=16)
        assert abs(coarse - fine) < 1e-9
    for alpha in roots:
        assert abs(h_value(sp, alpha, panels=16) - h_value(sp, alpha, panels=32)) < 1e-9
    c1 = circle_path(sp, 0.3, panels=16)
    assert abs(c1.integrate(form_dlnmu(sp)) - c1.refined().integrate(form_dlnmu(sp))) < 1e-9


def test_path_nodes_on_curve(g2_pair):
    sp = g2_pair[1]
    roots, _ = sp.roots()
    path = segment_path(sp, roots[0], 1 / np.conj(roots[0]))
    assert path.check() < 1e-10


def test_path_through_branch_point_rejected(g2_pair):
    sp = g2_pair[1]
    roots, _ = sp.roots()
    inner = [r for r in roots if abs(r) < 1]
    alpha = inner[0]
    # a straight segment through another root, without detours
    other = roots[np.argmax(np.abs(roots - alpha))]
    with pytest.raises(PathError):
        segment_path(sp, alpha, alpha + 2 * (other - alpha), detour=False)


def test_cauchy_integral():
    sp = SpectralPair(CPoly([-1]), CPoly([0.5j]), 0, P)
    path = circle_path(sp, 0.7, panels=16)
    for i in range(3):
        for j in range(3):
            val = path.integrate(lambda lam, nu: lam ** (i - j - 1) * np.ones_like(nu))
            assert abs(val - (2j * np.pi if i == j else 0)) < 1e-12


@pytest.mark.parametrize("i", [1, 2])
@pytest.mark.parametrize("j", [1, 2])
def test_residue_pairing(g2_pair, i, j):
    assert abs(residue_pairing(g2_pair[1], i, j) - 2 * (i == j)) < 1e-8


def test_a_cycle_vanishes(g1_pair):
    sp = g1_pair[2]
    roots, _ = sp.roots()
    for alpha in [r for r in roots if abs(r) < 1]:
        assert abs(a_cycle_integral(sp, alpha)) < 1e-6


def test_h_values_on_lattice(g1_pair):
    sp = g1_pair[2]
    for alpha in sp.roots()[0]:
        assert lattice_distance(h_value(sp, alpha)) < 1e-6


def test_contour_integral_guard(g2_pair):
    sp = g2_pair[1]
    roots, _ = sp.roots()
    r = abs(roots[0])
    path = circle_path(sp, r, theta0=np.angle(roots[0]) - 1e-3 / 16, panels=16)
    with pytest.raises(PathError):
        contour_integral(path, form_dlnmu(sp))


# --- degenerate data -------------------------------------------------------------------------------

def test_planted_common_root(g2_pair):
    sp = g2_pair[1]
    alpha = sp.roots()[0][0]
    # b with a root at alpha, kept b-type real by pairing with 1/conj(alpha)
    q = CPoly([-alpha, 1]) * CPoly([-1 / np.conj(alpha), 1])
    b = q * CPoly([1j])
    planted = SpectralPair(sp.a, b, 2, P)
    assert planted.resultant_proxy() < 1e-10
    assert not planted.in_moduli()
    assert sp.resultant_proxy() > 1e-3


# --- eigenvectors -------------------------------------------------------------------------------------

def _curve_points(sp, rng, n):
    lam = np.exp(rng.uniform(-1, 1, n) + 1j * rng.uniform(-np.pi, np.pi, n))
    return lam, sp.nu(lam)


def test_eigenvector_residual(g2_pair, rng):
    xi, sp = g2_pair
    for lam, nu in zip(*_curve_points(sp, rng, 20)):
        v, _ = eigenvector_at(xi, lam, nu)
        X = xi(lam)
        assert v[0] == 1
        assert np.abs((X - nu / lam * np.eye(2)) @ v).max() < 1e-8 * np.abs(X).max()


def test_eigenvector_involution(g2_pair, rng):
    xi, sp = g2_pair
    for lam, nu in zip(*_curve_points(sp, rng, 10)):
        v1, _ = eigenvector_at(xi, lam, nu)
        v2, _ = eigenvector_at(xi, lam, -nu)
        assert abs(v1[1] - v2[1]) > 1e-6


def test_eigenvector_rejects_non_eigenvalue(g2_pair):
    with pytest.raises(PreconditionError):
        eigenvector_at(g2_pair[0], 0.5, 17.0)


def test_pole_flag_count(g2_pair):
    # v2 blows up only near zeros of the (1,2) entry of xi: at most g+1 clusters
    xi, sp = g2_pair
    hits = []
    for rad in np.exp(np.linspace(-2, 2, 121)):
        if abs(rad - 1) < 1e-2:
            continue
        lam = rad * np.exp(1j * np.linspace(0, 2 * np.pi, 240, endpoint=False))
        for l, n in zip(lam, sp.nu(lam)):
            for s in (1, -1):
                if eigenvector_at(xi, l, s * n, pole_flag=1e2)[1]:
                    hits.append((l, s * n))
    assert hits
    clusters = []
    for l, n in hits:
        if not any(abs(l - c[0]) < 0.2 and abs(n - c[1]) < 0.2 * (1 + abs(n)) for c in clusters):
            clusters.append((l, n))
    assert len(clusters) <= sp.g + 1
