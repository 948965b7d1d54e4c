"""Lax operators, monodromy and polynomial Killing field flows.

Frame equation: F' = F U_lambda with
U = 1/2 [[-i u_y, i e^u / lambda + i e^-u], [i lambda e^u + i e^-u, i u_y]],
V = 1/2 [[i u_x, e^-u - e^u / lambda], [lambda e^u - e^-u, -i u_x]].
"""

import numpy as np
from scipy.integrate import solve_ivp

from .algebra import CPoly, LaurentLoop, pg_membership
from .diffpoly import b_densities, evaluate
from .errors import IntegrationFailure, PreconditionError, RealityLossError
from .jets import CauchyData, TrigInterpolant, extend_jet, spectral_integral

RTOL = 1e-12
ATOL = 1e-13


def U_matrix(u, uy, lam):
    """U_lambda for scalar (u, uy) and an array of lambda values, shape (L, 2, 2)."""
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    eu, emu = np.exp(u), np.exp(-u)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = -0.5j * uy
    out[..., 0, 1] = 0.5j * (eu / lam + emu)
    out[..., 1, 0] = 0.5j * (lam * eu + emu)
    out[..., 1, 1] = 0.5j * uy
    return out


def V_matrix(u, ux, lam):
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    eu, emu = np.exp(u), np.exp(-u)
    out = np.empty(lam.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5j * ux
    out[..., 0, 1] = 0.5 * (emu - eu / lam)
    out[..., 1, 0] = 0.5 * (lam * eu - emu)
    out[..., 1, 1] = -0.5j * ux
    return out


def build_U(cd, lam):
    """Callable x -> U_lambda(x) with (u, u_y) interpolated trigonometrically."""
    if np.any(np.asarray(lam) == 0):
        raise PreconditionError("lambda must be nonzero")
    interp = TrigInterpolant([cd.u, cd.uy], cd.period_p)

    def U(x):
        u, uy = interp(x)
        M = U_matrix(u, uy, lam)
        return M[0] if np.ndim(lam) == 0 else M

    return U


class Monodromy:
    __slots__ = ("lam", "M", "mu", "lnmu")

    def __init__(self, lam, M, mu, lnmu):
        self.lam, self.M, self.mu, self.lnmu = lam, M, mu, lnmu

    def __repr__(self):
        return "Monodromy(lambda=%s, lnmu=%s)" % (self.lam, self.lnmu)


def transfer_matrices(cd, lams, tol=1e-10, x0=0.0):
    """F(x0 + p) for F' = F U, F(x0) = 1, for every lambda in `lams`."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    if np.any(lams == 0):
        raise PreconditionError("lambda must be nonzero")
    interp = TrigInterpolant([cd.u, cd.uy], cd.period_p)
    L = lams.size

    def rhs(x, y):
        u, uy = interp(x)
        F = y.reshape(L, 2, 2)
        return np.einsum("lij,ljk->lik", F, U_matrix(u, uy, lams)).ravel()

    F0 = np.tile(np.eye(2, dtype=complex), (L, 1, 1)).ravel()
    rtol = min(tol, 1e-3) * 1e-2
    sol = solve_ivp(rhs, (x0, x0 + cd.period_p), F0, method="DOP853",
                    rtol=max(rtol, RTOL), atol=ATOL)
    if not sol.success:
        raise IntegrationFailure(sol.message)
    M = sol.y[:, -1].reshape(L, 2, 2)
    det = np.linalg.det(M)
    if np.abs(det - 1).max() > 1e-7:
        raise IntegrationFailure("det M drifted to %.3e" % np.abs(det - 1).max())
    bad = np.abs(det - 1) > 1e-12
    M[bad] /= np.sqrt(det[bad])[:, None, None]
    return M


def asymptotic_lnmu(cd, lam, c0=None):
    """(ip/2)/sqrt(lam) + c0 sqrt(lam), principal branch; c0 from the b_1 density."""
    lam = np.asarray(lam, dtype=complex)
    if c0 is None:
        c0 = lnmu_expansion(cd, 1)[1]
    s = np.sqrt(lam)
    return 0.5j * cd.period_p / s + c0 * s


def choose_branch(M, predicted):
    """Eigenvalue logarithm of M closest to `predicted` over both eigenvalues and 2 pi i Z."""
    ev = np.linalg.eigvals(M)
    best = None
    for mu in ev:
        base = np.log(mu)
        k = np.round((predicted - base).imag / (2 * np.pi))
        cand = base + 2j * np.pi * k
        if best is None or abs(cand - predicted) < abs(best[1] - predicted):
            best = (mu, cand)
    return best


def monodromy(cd, lam, tol=1e-10, x0=0.0, predictor=None):
    """Monodromy at one lambda or along a sequence of lambdas.

    ln mu is seeded from the small-lambda asymptote at the first sample and
    continued along the sequence.
    """
    scalar = np.ndim(lam) == 0
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    Ms = transfer_matrices(cd, lams, tol, x0)
    if predictor is None:
        c0 = lnmu_expansion(cd, 1)[1]
        pred = asymptotic_lnmu(cd, lams, c0)
    else:
        pred = np.broadcast_to(np.asarray(predictor, dtype=complex), lams.shape)
    out = []
    prev = None
    for i, (l, M) in enumerate(zip(lams, Ms)):
        guess = pred[i] if prev is None else prev[1] + (pred[i] - pred[i - 1])
        mu, ln = choose_branch(M, guess)
        prev = (mu, ln)
        out.append(Monodromy(complex(l), M, complex(mu), complex(ln)))
    return out[0] if scalar else out


def lnmu_expansion(cd, M, jet=None):
    """Coefficients of ln mu in powers of sqrt(lambda): {m: integral of b_m}, m = -1..M."""
    dens = b_densities(max(M, 1))
    if jet is None:
        jet = extend_jet(cd, max(M + 1, 2))
    out = {}
    for m in range(-1, M + 1):
        d = dens[m]
        out[m] = 0j if d.is_zero() else complex(spectral_integral(evaluate(d, jet), cd.period_p))
    return out


def series_lnmu(coeffs, lam):
    s = np.sqrt(np.asarray(lam, dtype=complex))
    return sum(c * s**m for m, c in coeffs.items())


# --- polynomial Killing fields ---------------------------------------------------

def spectral_a(zeta_arr):
    """a(lambda) = -lambda det zeta for coefficient array of powers -1..g."""
    n = zeta_arr.shape[0]
    det = np.zeros(2 * n - 1, dtype=complex)          # powers -2 .. 2g
    for i in range(n):
        for j in range(n):
            A, B = zeta_arr[i], zeta_arr[j]
            det[i + j] += A[0, 0] * B[1, 1] - A[0, 1] * B[1, 0]
    # det index i is power i-2; a_k = -det_{k-1}; det at power 2g vanishes
    return -det[1:-1]


def killing_scale(zeta_arr):
    a0 = zeta_arr[0, 0, 1] * zeta_arr[1, 1, 0]
    return 2 * np.sqrt(abs(a0))


def fields_from_zeta(zeta_arr):
    """(u, u_y, u_x) read off a Killing field coefficient array."""
    kappa = killing_scale(zeta_arr)
    beta = zeta_arr[0, 0, 1]
    alpha0 = zeta_arr[1, 0, 0]
    u = np.log((-2j * beta / kappa).real)
    return u, -2 * alpha0.imag / kappa, 2 * alpha0.real / kappa


def _U_pieces(zeta_arr):
    """Coefficients of U(zeta) at powers -1, 0, 1."""
    kappa = killing_scale(zeta_arr)
    beta = zeta_arr[0, 0, 1]
    a0, g0 = zeta_arr[1, 0, 0], zeta_arr[1, 1, 0]
    d = 1j * a0.imag
    Um1 = np.array([[0, beta], [0, 0]]) / kappa
    U0 = np.array([[d, -np.conj(g0)], [g0, -d]]) / kappa
    U1 = np.array([[0, 0], [-np.conj(beta), 0]]) / kappa
    return Um1, U0, U1


def _V_pieces(zeta_arr):
    kappa = killing_scale(zeta_arr)
    beta = zeta_arr[0, 0, 1]
    a0, g0 = zeta_arr[1, 0, 0], zeta_arr[1, 1, 0]
    d = 1j * a0.real
    Vm1 = 1j * np.array([[0, beta], [0, 0]]) / kappa
    V0 = np.array([[d, 1j * np.conj(g0)], [1j * g0, -d]]) / kappa
    V1 = 1j * np.array([[0, 0], [np.conj(beta), 0]]) / kappa
    return Vm1, V0, V1


def _lax_rhs(zeta_arr, pieces):
    """[zeta, P] for P with powers -1, 0, 1, truncated to powers -1..g."""
    n = zeta_arr.shape[0]
    out = np.zeros_like(zeta_arr)
    for k, P in zip((-1, 0, 1), pieces):
        for i in range(n):
            j = i + k
            if 0 <= j < n:
                out[j] += zeta_arr[i] @ P - P @ zeta_arr[i]
    return out


def killing_rhs(zeta_arr):
    return _lax_rhs(zeta_arr, _U_pieces(zeta_arr))


def y_rhs(zeta_arr):
    return _lax_rhs(zeta_arr, _V_pieces(zeta_arr))


def loop_to_array(xi, g):
    return np.array([xi[n] for n in range(-1, g + 1)], dtype=complex)


def array_to_loop(arr):
    return LaurentLoop({n - 1: arr[n] for n in range(arr.shape[0])})


class KillingTrajectory:
    """Samples of a Killing field along one coordinate direction."""

    def __init__(self, s, zeta, g):
        self.s = s
        self.zeta = zeta
        self.g = g
        fields = [fields_from_zeta(z) for z in zeta]
        self.u = np.array([f[0] for f in fields])
        self.uy = np.array([f[1] for f in fields])
        self.ux = np.array([f[2] for f in fields])
        self.a = np.array([spectral_a(z) for z in zeta])

    def loop(self, i):
        return array_to_loop(self.zeta[i])

    def cauchy_data(self, p):
        return CauchyData(self.u, self.uy, p)

    def a_drift(self):
        """Sup over nodes of the coefficient-wise relative drift of a."""
        a0 = self.a[0]
        scale = np.maximum(np.abs(a0), 1e-8 * np.abs(a0).max())
        return float(np.max(np.abs(self.a - a0) / scale))


def _check_reality(zeta_arr):
    beta = zeta_arr[0, 0, 1]
    if beta.imag <= 0 or abs(beta.real) > 1e-8 * abs(beta.imag):
        raise RealityLossError("beta_{-1} left iR^+: %r" % beta)


def _flow(xi, g, span, n_out, tol, rhs_fn):
    if not pg_membership(xi, g, tol=1e-8):
        raise PreconditionError("initial loop is not in P_g")
    z0 = loop_to_array(xi, g)
    shape = z0.shape
    s_eval = np.linspace(span[0], span[1], n_out, endpoint=False) if n_out else None
    if span[1] == span[0]:
        return KillingTrajectory(np.array([span[0]]), z0[None], g)

    def rhs(s, y):
        return rhs_fn(y.reshape(shape)).ravel()

    sol = solve_ivp(rhs, span, z0.ravel(), method="DOP853", rtol=max(tol, RTOL),
                    atol=ATOL, t_eval=s_eval, dense_output=False)
    if not sol.success:
        raise IntegrationFailure(sol.message)
    zeta = sol.y.T.reshape((-1,) + shape)
    for z in zeta:
        _check_reality(z)
    return KillingTrajectory(sol.t, zeta, g)


def killing_flow(xi, g, x_span, n_out=256, tol=1e-12):
    """Integrate zeta' = [zeta, U(zeta)] from zeta(x_span[0]) = xi.

    Output nodes are n_out equispaced points in [x0, x1) so that a full
    period yields a CauchyData grid directly.
    """
    return _flow(xi, g, x_span, n_out, tol, killing_rhs)


def y_flow(xi, g, y_span, n_out=64, tol=1e-12):
    """Integrate d zeta/dy = [zeta, V(zeta)]; u_x is read from Re alpha_0."""
    return _flow(xi, g, y_span, n_out, tol, y_rhs)


def killing_endpoint(xi, g, length, tol=1e-12):
    """zeta at x = length as a LaurentLoop."""
    z0 = loop_to_array(xi, g)
    shape = z0.shape
    sol = solve_ivp(lambda s, y: killing_rhs(y.reshape(shape)).ravel(), (0, length), z0.ravel(),
                    method="DOP853", rtol=max(tol, RTOL), atol=ATOL)
    if not sol.success:
        raise IntegrationFailure(sol.message)
    return array_to_loop(sol.y[:, -1].reshape(shape))


def a_poly(xi, g):
    return CPoly(spectral_a(loop_to_array(xi, g)))


# --- optional surface export -----------------------------------------------------

def sym_bobenko_export(xi, g, nx, ny, x_len, y_len, t0, t1, path=None):
    """Frames over an (x, y) grid, f = F_{l1} F_{l0}^{-1} with l = e^{it}, projected to R^3.

    Returns (vertices, faces, f_values); writes an OBJ file when `path` is given.
    """
    if np.isclose(np.exp(1j * t0), np.exp(1j * t1)):
        raise PreconditionError("lambda0 and lambda1 must differ")
    lams = np.array([np.exp(1j * t0), np.exp(1j * t1)])
    xs = np.linspace(0, x_len, nx)
    ys = np.linspace(0, y_len, ny)
    z0 = loop_to_array(xi, g)
    shape = z0.shape

    def x_rhs(s, y):
        z = y[: z0.size].reshape(shape)
        F = y[z0.size:].reshape(2, 2, 2)
        u, uy, _ = fields_from_zeta(z)
        dF = np.einsum("lij,ljk->lik", F, U_matrix(u, uy, lams))
        return np.concatenate([killing_rhs(z).ravel(), dF.ravel()])

    def y_rhs_full(s, y):
        z = y[: z0.size].reshape(shape)
        F = y[z0.size:].reshape(2, 2, 2)
        u, _, ux = fields_from_zeta(z)
        dF = np.einsum("lij,ljk->lik", F, V_matrix(u, ux, lams))
        return np.concatenate([y_rhs(z).ravel(), dF.ravel()])

    F0 = np.tile(np.eye(2, dtype=complex), (2, 1, 1))
    state0 = np.concatenate([z0.ravel(), F0.ravel()])
    if nx > 1:
        solx = solve_ivp(x_rhs, (0, x_len), state0, t_eval=xs, method="DOP853", rtol=1e-11, atol=1e-12)
        rows = solx.y.T
    else:
        rows = state0[None]
    fvals = np.empty((nx, ny, 2, 2), dtype=complex)
    for i, st in enumerate(rows):
        if ny > 1:
            soly = solve_ivp(y_rhs_full, (0, y_len), st, t_eval=ys, method="DOP853", rtol=1e-11, atol=1e-12)
            cols = soly.y.T
        else:
            cols = st[None]
        for j, s in enumerate(cols):
            F = s[z0.size:].reshape(2, 2, 2)
            fvals[i, j] = F[1] @ np.linalg.inv(F[0])
    verts = _stereo(fvals.reshape(-1, 2, 2))
    faces = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            a = i * ny + j
            faces.append((a, a + ny, a + ny + 1))
            faces.append((a, a + ny + 1, a + 1))
    if path is not None:
        with open(path, "w") as fh:
            for v in verts:
                fh.write("v %.12g %.12g %.12g\n" % tuple(v))
            for f in faces:
                fh.write("f %d %d %d\n" % (f[0] + 1, f[1] + 1, f[2] + 1))
    return verts, np.array(faces), fvals


def _stereo(fs):
    """SU(2) element [[a, b], [-conj b, conj a]] -> S^3 point -> stereographic R^3."""
    a = fs[:, 0, 0]
    b = fs[:, 0, 1]
    x0, x1, x2, x3 = a.real, a.imag, b.real, b.imag
    return np.column_stack([x1, x2, x3]) / (1 + x0)[:, None]


def seed_loop(g, r=1.0, alpha=0.0, beta=0.0, rng=None, scale=0.3):
    """A loop in P_g with xi_{-1} = i r eps_+ and gamma_0 = i/r, so a(0) = -1.

    g = 0: i r eps_+ / lam + i r eps_-  (r = 1 for |a(0)| = 1).
    g = 1: xi_0 = [[i alpha, i/r], [i/r, -i alpha]] (alpha real).
    g >= 2: xi_0 = [[alpha, beta], [i/r, -alpha]], xi_{g-1} = -xi_0^H; the
    remaining coefficients are zero or, with rng, random of size `scale`.
    """
    if g < 0:
        raise PreconditionError("genus must be >= 0")
    if not r > 0:
        raise PreconditionError("r must be positive")
    ep = np.array([[0, 1], [0, 0]], complex)
    terms = {-1: 1j * r * ep}
    if g == 0:
        terms[0] = 1j * r * ep.T
        return LaurentLoop(terms)
    terms[g] = 1j * r * ep.T
    if g == 1:
        a = float(np.real(alpha))
        terms[0] = np.array([[1j * a, 1j / r], [1j / r, -1j * a]])
        return LaurentLoop(terms)
    X0 = np.array([[alpha, beta], [1j / r, -alpha]], complex)
    terms[0] = X0
    terms[g - 1] = -X0.conj().T
    for n in range(1, g - 1):
        m = g - 1 - n
        if n > m:
            break
        if rng is None:
            X = np.zeros((2, 2), complex)
        else:
            w = scale * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
            X = np.array([[w[0], w[1]], [w[2], -w[0]]])
        if n == m:
            X = 0.5 * (X - X.conj().T)
        terms[n] = X
        terms[m] = -X.conj().T
    return LaurentLoop(terms)
