"""Symplectic form, Hamiltonians and their gradients, isospectral tangents and
the residue pairing between cocycles and Whitham directions."""

import numpy as np

from .algebra import LaurentLoop, iwasawa_split, pg_membership
from .diffpoly import PS_CAP, b_densities, dy, evaluate, pinkall_sterling
from .errors import (IterationFailure, MalformedInputError, PreconditionError,
                     StructureError, SinhGordonError)
from .jets import MAX_JET_ORDER, CauchyData, extend_jet, spectral_integral
from .laxflow import (_U_pieces, array_to_loop, killing_flow, killing_rhs,
                      loop_to_array, spectral_a)

H_CAP = 2 * (PS_CAP + 1)


class Tangent:
    """Tangent vector (du, duy) at Cauchy data with period p."""

    __slots__ = ("du", "duy", "period_p")

    def __init__(self, du, duy, period_p):
        du, duy = np.asarray(du, dtype=float), np.asarray(duy, dtype=float)
        if du.shape != duy.shape or du.ndim != 1:
            raise MalformedInputError("du and duy must be 1-d grids of equal length")
        self.du, self.duy, self.period_p = du, duy, float(period_p)

    def __add__(self, other):
        _match(self, other)
        return Tangent(self.du + other.du, self.duy + other.duy, self.period_p)

    def __mul__(self, s):
        return Tangent(s * self.du, s * self.duy, self.period_p)

    __rmul__ = __mul__

    def norm(self):
        return float(max(np.abs(self.du).max(), np.abs(self.duy).max()))

    @classmethod
    def random(cls, rng, N, p, n_modes=3, amp=1.0):
        d = CauchyData.random(rng, N, p, n_modes=n_modes, amp=0.5)
        return cls(amp * d.u, amp * d.uy, p)


class Cocycle:
    """Coefficients c_0..c_{g-1} of f_0 = sum c_i lam^(-i-1) nu with conj(c_i) = -c_{g-1-i}."""

    __slots__ = ("c", "g")

    def __init__(self, c, tol=1e-12):
        c = np.asarray(c, dtype=complex)
        if np.abs(np.conj(c) + c[::-1]).max(initial=0.0) > tol * max(1.0, np.abs(c).max(initial=0.0)):
            raise MalformedInputError("cocycle violates conj(c_i) = -c_{g-1-i}")
        self.c, self.g = c, c.size

    @classmethod
    def from_params(cls, x, g):
        x = np.asarray(x, float)
        c = np.zeros(g, complex)
        k = 0
        for i in range(g):
            j = g - 1 - i
            if i < j:
                c[i] = x[k] + 1j * x[k + 1]
                c[j] = -np.conj(c[i])
                k += 2
            elif i == j:
                c[i] = 1j * x[k]
                k += 1
        return cls(c)

    @classmethod
    def random(cls, rng, g):
        return cls.from_params(rng.standard_normal(g), g)


def _match(t1, t2):
    if t1.du.shape != t2.du.shape or abs(t1.period_p - t2.period_p) > 1e-12 * t1.period_p:
        raise PreconditionError("tangents live on different grids")


def omega_form(t1, t2):
    """Omega(t1, t2) = integral of (du1 duy2 - du2 duy1) dx."""
    _match(t1, t2)
    return float(spectral_integral(t1.du * t2.duy - t2.du * t1.duy, t1.period_p))


# --- Hamiltonians -----------------------------------------------------------------

def _jet_for(density, cd, jet=None):
    need = max(density.max_order(), 1)
    if jet is not None and jet.order >= need:
        return jet
    return extend_jet(cd, min(max(need, 2), MAX_JET_ORDER))


def hamiltonian(cd, n, jet=None):
    """H_{2k+1} = (-1)^(k+1) Re c_k, H_{2k+2} = (-1)^(k+1) Im c_k with c_k = int b_{2k+1}."""
    if not 1 <= n <= H_CAP:
        raise PreconditionError("H_n available for 1 <= n <= %d" % H_CAP)
    k = (n - 1) // 2
    dens = b_densities(2 * k + 1)[2 * k + 1]
    v = complex(spectral_integral(evaluate(dens, _jet_for(dens, cd, jet)), cd.period_p))
    return (-1) ** (k + 1) * (v.real if n % 2 else v.imag)


def gradient(cd, n, jet=None):
    """Omega-gradient of H_n: (Re/Im omega_k, Re/Im d_y omega_k) at y = 0."""
    k = (n - 1) // 2
    if k > PS_CAP:
        raise PreconditionError("gradient of H_%d needs omega_%d beyond the cap" % (n, k))
    w = pinkall_sterling(k)[k].omega
    wy = dy(w)
    jet = _jet_for(wy, cd, jet)
    part = np.real if n % 2 else np.imag
    return Tangent(part(evaluate(w, jet)), part(evaluate(wy, jet)), cd.period_p)


def _fd4(f, h):
    return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h)


def directional_derivative(cd, n, t, h=1e-3, tol=1e-7):
    """4th-order central difference of H_n along t, with a step-halving agreement check."""
    f = lambda s: hamiltonian(cd.shifted(t.du, t.duy, s), n)
    d1, d2 = _fd4(f, h), _fd4(f, h / 2)
    bound = 10 * tol * (1 + abs(d2))
    if abs(d1 - d2) > bound:
        raise IterationFailure("finite differences disagree (%.2e > %.2e)" % (abs(d1 - d2), bound))
    return d2 + (d2 - d1) / 15


def omega_gradient_check(cd, n, directions, h=1e-3):
    """max over directions of |dH_n(t) - Omega(G_n, t)| / (1 + |dH_n(t)|)."""
    G = gradient(cd, n)
    worst = 0.0
    for t in directions:
        dH = directional_derivative(cd, n, t, h)
        worst = max(worst, abs(dH - omega_form(G, t)) / (1 + abs(dH)))
    return worst


def involution_matrix(cd, n_max):
    """Matrix of {H_m, H_n} = Omega(G_m, G_n), m, n = 1..n_max."""
    jet = extend_jet(cd, MAX_JET_ORDER)
    G = [gradient(cd, n, jet) for n in range(1, n_max + 1)]
    P = np.zeros((n_max, n_max))
    for i in range(n_max):
        for j in range(i + 1, n_max):
            P[i, j] = omega_form(G[i], G[j])
            P[j, i] = -P[i, j]
    return P


# --- isospectral tangents --------------------------------------------------------

def _U_loop(z):
    Um1, U0, U1 = _U_pieces(z)
    return LaurentLoop({-1: Um1, 0: U0, 1: U1})


def _cocycle_loop(f, loop):
    out = LaurentLoop()
    for i, ci in enumerate(f.c):
        if ci != 0:
            out = out + loop.shift(-i).scale(ci)
    return out


def _read_tangent(dU, u, tol):
    """Match dU against 1/2((-i dv, i lam^-1 e^u du - i e^-u du), (i lam e^u du - i e^-u du, i dv))."""
    eu = np.exp(u)
    du = (2 * dU[-1][0, 1] / (1j * eu))
    dv = 2j * dU[0][0, 0]
    pattern = LaurentLoop({
        -1: 0.5j * du * eu * np.array([[0, 1], [0, 0]]),
        0: 0.5j * np.array([[-dv, -du / eu], [-du / eu, dv]]),
        1: 0.5j * du * eu * np.array([[0, 0], [1, 0]]),
    })
    scale = 1 + abs(du) + abs(dv)
    mismatch = (dU - pattern).max_abs() / scale
    imag = max(abs(du.imag), abs(dv.imag)) / scale
    if mismatch > tol or imag > tol:
        raise StructureError("variation of U does not match the Lax pattern (%.2e, imag %.2e)"
                             % (mismatch, imag))
    return du.real, dv.real, mismatch


def isospectral_field(xi, f, trajectory=None, p=None, N=None, route="positive", tol=1e-7):
    """Tangent (du, duy) generated by the cocycle f along the Killing field of xi.

    A(x) = sum c_i lam^-i zeta(x) is split A = A_u + A_+; then
    dU = -(A_+)' + [A_+, U]   (route "positive")  or
    dU = (A_u)' + [U, A_u]    (route "unitary").
    """
    g = f.g
    if trajectory is None:
        if p is None or N is None:
            raise PreconditionError("need a trajectory or (p, N)")
        trajectory = killing_flow(xi, g, (0.0, p), N)
    p = trajectory.s[1] * len(trajectory.s) if p is None else p
    du = np.zeros(len(trajectory.s))
    dv = np.zeros(len(trajectory.s))
    if not np.any(f.c):
        return Tangent(du, dv, p)
    for k, z in enumerate(trajectory.zeta):
        zeta = array_to_loop(z)
        dzeta = array_to_loop(killing_rhs(z))
        U = _U_loop(z)
        uni, pos = iwasawa_split(_cocycle_loop(f, zeta))
        duni, dpos = iwasawa_split(_cocycle_loop(f, dzeta))
        if route == "positive":
            dU = pos.bracket(U) - dpos
        elif route == "unitary":
            dU = duni + U.bracket(uni)
        else:
            raise PreconditionError("route must be 'positive' or 'unitary'")
        du[k], dv[k], _ = _read_tangent(dU, trajectory.u[k], tol)
    return Tangent(du, dv, p)


# --- P_g parametrization and refit ------------------------------------------------

_TRACELESS = [np.array([[1, 0], [0, -1]], complex), np.array([[0, 1], [0, 0]], complex),
              np.array([[0, 0], [1, 0]], complex)]


def pg_basis(g):
    """Real basis of the P_g symmetric loops with vanishing lam^-1 term, plus the
    lam^-1 direction Q = i eps_+ lam^-1 + (its mirror)."""
    cands = []
    for n in range(0, g):
        for E in _TRACELESS:
            for ph in (1, 1j):
                L = LaurentLoop({n: ph * E})
                cands.append(L + L.star(g))
    flat = np.array([np.concatenate([c.flat(-1, g).real, c.flat(-1, g).imag]) for c in cands])
    _, s, Vt = np.linalg.svd(flat, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    n_c = (g + 2) * 4
    basis = [LaurentLoop.from_flat(v[:n_c] + 1j * v[n_c:], -1, g) for v in Vt[:rank]]
    q = LaurentLoop({-1: 1j * _TRACELESS[1]})
    return q + q.star(g), basis


class PgChart:
    """Linear chart xi = r Q + sum w_k B_k of P_g."""

    def __init__(self, g):
        self.g = g
        self.Q, self.B = pg_basis(g)
        self.lo, self.hi = -1, g
        cols = [self.Q] + self.B
        self.mat = np.array([c.flat(-1, g) for c in cols]).T

    def params(self, xi):
        v = xi.flat(-1, self.g)
        A = np.concatenate([self.mat.real, self.mat.imag])
        y = np.concatenate([v.real, v.imag])
        th, *_ = np.linalg.lstsq(A, y, rcond=None)
        if np.abs(A @ th - y).max() > 1e-10 * max(1.0, np.abs(y).max()):
            raise PreconditionError("loop is not in the P_g chart")
        return th

    def loop(self, th):
        return LaurentLoop.from_flat(self.mat @ th, -1, self.g)

    def a_of(self, th):
        return spectral_a(loop_to_array(self.loop(th), self.g))

    def a_jacobian(self, th):
        cols = []
        for k in range(len(th)):
            e = np.zeros_like(th)
            e[k] = 1.0
            cols.append((self.a_of(th + e) - self.a_of(th - e)) / 2)
        J = np.array(cols).T
        return np.concatenate([J.real, J.imag])


def refit_xi(xi, g, a_target, tol=1e-13, max_iter=50):
    """Least-norm Gauss-Newton: xi' in P_g nearest to xi with a(xi') = a_target."""
    chart = PgChart(g)
    th0 = chart.params(xi)
    th = th0.copy()
    tgt = np.asarray(a_target, complex)
    for _ in range(max_iter):
        r = chart.a_of(th) - tgt
        F = np.concatenate([r.real, r.imag])
        if np.abs(F).max() < tol:
            return chart.loop(th)
        J = chart.a_jacobian(th)
        # least-norm step toward the constraint, then pull back toward th0 within the null space
        step, *_ = np.linalg.lstsq(J, -F, rcond=None)
        th = th + step
        Jn = chart.a_jacobian(th)
        P = np.eye(len(th)) - np.linalg.pinv(Jn) @ Jn
        th = th - P @ (th - th0)
    raise IterationFailure("P_g refit did not converge (residual %.2e)" % np.abs(F).max())


def whitham_induced_tangent(xi, g, p, N, adot, h=1e-3):
    """d/dt of the Cauchy data of the refit xi(t) with a(t) = a + t adot (4th-order differences)."""
    a0 = spectral_a(loop_to_array(xi, g))
    ad = adot.padded(2 * g + 1)

    def cd(s):
        tr = killing_flow(refit_xi(xi, g, a0 + s * ad), g, (0.0, p), N)
        return np.concatenate([tr.u, tr.uy])

    d = _fd4(cd, h)
    return Tangent(d[:N], d[N:], p)


def pairing_rhs(f, c, residue="curve"):
    """i Res([f] delta ln mu dlam/lam) from coefficients.

    f_0 delta ln mu dlam/lam = sum_i f_i lam^(-i-2) c(lam) dlam.  Its lambda-residue
    at 0 is S = sum_i f_i [lam^(i+1)] c, and the point over infinity contributes
    the same.  On the curve, lambda = 0 and infinity are branch points with local
    parameter sqrt(lambda), so each residue on Y is twice the lambda-residue:
    residue="curve" gives 4iS, residue="lambda" gives 2iS.
    """
    s = sum(fi * c.coef(i + 1) for i, fi in enumerate(f.c))
    if residue == "curve":
        return 4j * s
    if residue == "lambda":
        return 2j * s
    raise PreconditionError("residue must be 'curve' or 'lambda'")


def serre_pairing_check(xi, f, direction, p, N=64, h=1e-3):
    """Compare Omega(isospectral field of f, Whitham-induced tangent of c) with the residue side."""
    from .whitham import whitham_tangent
    from .spectral import curve_from_xi

    g = f.g
    if not pg_membership(xi, g, tol=1e-8):
        raise PreconditionError("xi is not in P_g")
    rhs = pairing_rhs(f, direction.c, "curve")
    out = {"rhs": float(rhs.real), "rhs_lambda_residue": float(pairing_rhs(f, direction.c, "lambda").real),
           "rhs_real": bool(abs(rhs.imag) <= 1e-12 * (1 + abs(rhs)))}
    tr = killing_flow(xi, g, (0.0, p), N)
    sp = curve_from_xi(xi, g, p, tr.cauchy_data(p))
    adot, _ = whitham_tangent(sp, direction)
    iso = isospectral_field(xi, f, tr, p)
    try:
        wt = whitham_induced_tangent(xi, g, p, N, adot, h)
    except SinhGordonError as exc:
        out.update({"lhs": None, "residual": None, "skipped": True, "reason": str(exc),
                    "isotropy": omega_form(iso, isospectral_field(xi, Cocycle(np.roll(f.c, 1)), tr, p))})
        return out
    lhs = omega_form(iso, wt)
    out.update({"lhs": lhs, "residual": float(abs(lhs - rhs)), "skipped": False})
    return out
