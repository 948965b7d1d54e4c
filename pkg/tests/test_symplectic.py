import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sinhgordon.algebra import CPoly, LaurentLoop, iwasawa_split
from sinhgordon.errors import MalformedInputError, PreconditionError
from sinhgordon.jets import CauchyData, spectral_dx, spectral_integral
from sinhgordon.laxflow import array_to_loop, killing_flow, loop_to_array, seed_loop, spectral_a
from sinhgordon.spectral import curve_from_xi
from sinhgordon.symplectic import (Cocycle, Tangent, gradient, hamiltonian, involution_matrix,
                                   isospectral_field, omega_form, omega_gradient_check,
                                   pairing_rhs, serre_pairing_check, whitham_induced_tangent,
                                   _cocycle_loop)
from sinhgordon.whitham import WhithamDirection, whitham_tangent

P = 2 * np.pi


@pytest.fixture(scope="module")
def data():
    return CauchyData.random(np.random.default_rng(11), N=128, n_modes=3, amp=0.3)


@pytest.fixture(scope="module")
def g1():
    xi = seed_loop(1, 1.3, 0.4)
    traj = killing_flow(xi, 1, (0.0, P), 32)
    return xi, traj


# --- Omega ------------------------------------------------------------------------------------

def test_omega_sine_example():
    x = np.arange(64) * P / 64
    t1 = Tangent(np.sin(x), np.zeros(64), P)
    t2 = Tangent(np.zeros(64), np.sin(x), P)
    assert omega_form(t1, t2) == pytest.approx(np.pi, abs=1e-13)


def test_omega_antisymmetric(rng):
    t1, t2 = Tangent.random(rng, 64, P), Tangent.random(rng, 64, P)
    assert abs(omega_form(t1, t1)) < 1e-14
    assert abs(omega_form(t1, t2) + omega_form(t2, t1)) < 1e-12


def test_omega_grid_mismatch(rng):
    with pytest.raises(PreconditionError):
        omega_form(Tangent.random(rng, 64, P), Tangent.random(rng, 32, P))


# --- Hamiltonians --------------------------------------------------------------------------------

def test_vacuum_hamiltonians():
    cd = CauchyData.vacuum(32)
    assert hamiltonian(cd, 1) == 0
    assert hamiltonian(cd, 2) == pytest.approx(-P / 2, abs=1e-13)
    assert abs(hamiltonian(cd, 3)) < 1e-14


def test_H1_direct_quadrature(data):
    ux = spectral_dx(data.u, 1, data.period_p)
    direct = spectral_integral(0.5 * data.uy * ux, data.period_p)
    assert hamiltonian(data, 1) == pytest.approx(direct, abs=1e-10)


def test_H2_direct_quadrature(data):
    ux = spectral_dx(data.u, 1, data.period_p)
    dens = 0.25 * data.uy**2 - 0.25 * ux**2 + 0.5 * np.cosh(2 * data.u)
    assert hamiltonian(data, 2) == pytest.approx(-spectral_integral(dens, data.period_p), abs=1e-10)


def test_hamiltonian_range():
    with pytest.raises(PreconditionError):
        hamiltonian(CauchyData.vacuum(16), 0)


def test_hamiltonians_translation_invariant():
    xi = seed_loop(1, 1.3, 0.4)
    cd = killing_flow(xi, 1, (0.0, P), 32).cauchy_data(P)
    shifted = CauchyData(np.roll(cd.u, 5), np.roll(cd.uy, 5), P)
    for n in range(1, 5):
        assert hamiltonian(cd, n) == pytest.approx(hamiltonian(shifted, n), abs=1e-12)


# --- gradients -------------------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2])
def test_gradient_theorem_low(data, rng, n):
    dirs = [Tangent.random(rng, data.N, data.period_p) for _ in range(5)]
    assert omega_gradient_check(data, n, dirs) < 1e-7


def test_gradient_vacuum_zero(rng):
    cd = CauchyData.vacuum(64)
    for n in (1, 3):
        G = gradient(cd, n)
        assert G.norm() == 0


def test_involution(data):
    M = involution_matrix(data, 4)
    assert np.abs(M + M.T).max() < 1e-12
    assert np.abs(M).max() < 1e-6


def test_involution_vacuum():
    assert np.abs(involution_matrix(CauchyData.vacuum(32), 4)).max() == 0


# --- cocycles -----------------------------------------------------------------------------------------

def test_cocycle_reality():
    Cocycle([1j])
    Cocycle([0.3 + 0.2j, -0.3 + 0.2j])
    with pytest.raises(MalformedInputError):
        Cocycle([1.0])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_cocycle_from_params(g, seed):
    f = Cocycle.random(np.random.default_rng(seed), g)
    assert np.abs(np.conj(f.c) + f.c[::-1]).max() < 1e-15


# --- isospectral fields ----------------------------------------------------------------------------------

def test_isospectral_zero(g1):
    xi, traj = g1
    t = isospectral_field(xi, Cocycle([0j]), traj, P)
    assert t.norm() == 0


def test_isospectral_routes_agree(g1):
    xi, traj = g1
    f = Cocycle([0.7j])
    a = isospectral_field(xi, f, traj, P, route="positive")
    b = isospectral_field(xi, f, traj, P, route="unitary")
    assert a.norm() > 1e-3
    assert np.abs(a.du - b.du).max() < 1e-10 and np.abs(a.duy - b.duy).max() < 1e-10


def test_isospectral_linear(genus_two):
    traj = killing_flow(genus_two, 2, (0.0, 3.0), 16)
    rng = np.random.default_rng(5)
    f1, f2 = Cocycle.random(rng, 2), Cocycle.random(rng, 2)
    s, t = 0.7, -1.3
    comb = Cocycle(s * f1.c + t * f2.c)
    lhs = isospectral_field(genus_two, comb, traj, 3.0)
    r1 = isospectral_field(genus_two, f1, traj, 3.0)
    r2 = isospectral_field(genus_two, f2, traj, 3.0)
    assert np.abs(lhs.du - s * r1.du - t * r2.du).max() < 1e-9
    assert np.abs(lhs.duy - s * r1.duy - t * r2.duy).max() < 1e-9


def test_isospectral_preserves_a(genus_two):
    # move xi along the induced variation [A+, xi] and difference a(lambda)
    f = Cocycle([0.4 + 0.1j, -0.4 + 0.1j])
    _, pos = iwasawa_split(_cocycle_loop(f, genus_two))
    dxi = pos.bracket(genus_two)
    z0 = loop_to_array(genus_two, 2)
    dz = loop_to_array(dxi, 2)
    s = 1e-4
    da = (spectral_a(z0 + s * dz) - spectral_a(z0 - s * dz)) / (2 * s)
    assert np.abs(da).max() < 1e-6
    ta = killing_flow(array_to_loop(z0 + s * dz), 2, (0.0, 1.0), 8).a
    tb = killing_flow(array_to_loop(z0 - s * dz), 2, (0.0, 1.0), 8).a
    assert np.abs((ta - tb) / (2 * s)).max() < 1e-6


def test_isotropy_genus_one(g1):
    xi, traj = g1
    a = isospectral_field(xi, Cocycle([1j]), traj, P)
    b = isospectral_field(xi, Cocycle([-0.3j]), traj, P)
    assert abs(omega_form(a, b)) < 1e-6


# --- pairing -----------------------------------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_pairing_rhs_real(g, seed):
    rng = np.random.default_rng(seed)
    f = Cocycle.random(rng, g)
    c = WhithamDirection.random(rng, g).c
    for mode in ("curve", "lambda"):
        v = pairing_rhs(f, c, mode)
        assert abs(v.imag) <= 1e-12 * (1 + abs(v))


def test_pairing_trivial_sides(g1):
    xi, _ = g1
    zero_f = serre_pairing_check(xi, Cocycle([0j]), WhithamDirection([0, 1, 0], 1), P, N=32)
    assert zero_f["rhs"] == 0 and abs(zero_f["lhs"]) < 1e-12
    zero_c = serre_pairing_check(xi, Cocycle([1j]), WhithamDirection([0, 0, 0], 1), P, N=32)
    assert zero_c["rhs"] == 0 and abs(zero_c["lhs"]) < 1e-12


@pytest.mark.parametrize("r, alpha", [(1.3, 0.4), (0.8, -0.2)])
def test_pairing_equation_genus_one(r, alpha):
    xi = seed_loop(1, r, alpha)
    out = serre_pairing_check(xi, Cocycle([0.5j]), WhithamDirection([0, 1.0, 0], 1), P, N=32)
    assert not out["skipped"]
    assert out["rhs_real"]
    assert abs(out["lhs"] - out["rhs"]) < 1e-4 * (1 + abs(out["rhs"]))
    assert out["rhs_lambda_residue"] == pytest.approx(out["rhs"] / 2)


def test_gram_matrix_nondegenerate(g1):
    xi, traj = g1
    sp = curve_from_xi(xi, 1, P, traj.cauchy_data(P))
    adot, _ = whitham_tangent(sp, WhithamDirection([0, 1.0, 0], 1))
    wt = whitham_induced_tangent(xi, 1, P, 32, adot)
    iso = isospectral_field(xi, Cocycle([1j]), traj, P)
    gram = np.array([[omega_form(x, y) for y in (iso, wt)] for x in (iso, wt)])
    assert np.linalg.matrix_rank(gram, tol=1e-6) == 2
    assert np.linalg.cond(gram) < 1e6
