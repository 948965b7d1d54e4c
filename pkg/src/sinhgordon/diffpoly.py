"""Differential polynomials in the jet of u, normal-form reduced by the PDE.

A monomial is e^{2mu} times a product of powers of u^{(j,k)} = d_z^j d_zbar^k u
with j*k == 0.  Mixed derivatives are rewritten with
u_{z zbar} = -(e^{2u} - e^{-2u})/4.
"""

import warnings
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import IterationFailure, PreconditionError
from .jets import z_derivative_grid

PS_CAP = 5
_PRUNE = 1e-13


def _key(m, factors):
    return (int(m), tuple(sorted(factors)))


class DiffPoly:
    """Sparse polynomial: {(m, ((var, power), ...)): coeff} with var = (j, k)."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        terms = terms or {}
        scale = max((abs(c) for c in terms.values()), default=0.0)
        cut = _PRUNE * max(scale, 1.0)
        self.terms = {k: complex(c) for k, c in terms.items() if abs(c) > cut}

    @classmethod
    def var(cls, j=0, k=0, power=1):
        if j and k:
            return reduce_mixed(j, k)
        return cls({_key(0, [((j, k), power)]): 1.0})

    @classmethod
    def exp2u(cls, m):
        return cls({_key(m, []): 1.0})

    @classmethod
    def const(cls, c):
        return cls({_key(0, []): c})

    def __add__(self, other):
        if not isinstance(other, DiffPoly):
            other = DiffPoly.const(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return DiffPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, DiffPoly):
            return DiffPoly({k: c * other for k, c in self.terms.items()})
        out = {}
        for (m1, f1), c1 in self.terms.items():
            for (m2, f2), c2 in other.terms.items():
                fac = dict(f1)
                for v, pw in f2:
                    fac[v] = fac.get(v, 0) + pw
                key = _key(m1 + m2, fac.items())
                out[key] = out.get(key, 0) + c1 * c2
        return DiffPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n):
        out = DiffPoly.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if not isinstance(other, DiffPoly):
            other = DiffPoly.const(other)
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def close_to(self, other, tol=1e-12):
        return all(abs(c) <= tol for c in (self - other).terms.values())

    def max_order(self):
        return max((max(j, k) for (_, f) in self.terms for (j, k), _ in f), default=0)

    def variables(self):
        return sorted({v for (_, f) in self.terms for v, _ in f})

    def exponents(self):
        return sorted({m for (m, _) in self.terms})

    def weight_set(self):
        """Scaling weights of the monomials (z-order counts +1, zbar-order -1)."""
        return sorted({sum((j - k) * pw for (j, k), pw in f) for (_, f) in self.terms})

    def conj(self):
        """Complex conjugate: swaps z and zbar derivatives."""
        return DiffPoly({_key(m, [((k, j), pw) for (j, k), pw in f]): np.conj(c)
                         for (m, f), c in self.terms.items()})

    def __repr__(self):
        return "DiffPoly(%s)" % pretty(self)

    def __str__(self):
        return pretty(self)

    def to_json(self):
        return [{"exp2u": m, "factors": [[j, k, pw] for (j, k), pw in f],
                 "coeff": [c.real, c.imag]} for (m, f), c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data):
        return cls({_key(d["exp2u"], [((j, k), pw) for j, k, pw in d["factors"]]):
                    complex(*d["coeff"]) for d in data})


U = DiffPoly.var(0, 0)
UZ = DiffPoly.var(1, 0)
UZB = DiffPoly.var(0, 1)
E2 = DiffPoly.exp2u(1)
EM2 = DiffPoly.exp2u(-1)
COSH2 = 0.5 * (E2 + EM2)
SINH2 = 0.5 * (E2 - EM2)
UZZB = -0.25 * E2 + 0.25 * EM2


@lru_cache(maxsize=None)
def reduce_mixed(j, k):
    """Normal form of d_z^j d_zbar^k u for j, k >= 1."""
    if j == 1 and k == 1:
        return UZZB
    if j > 1:
        return dz(reduce_mixed(j - 1, k))
    return dzbar(reduce_mixed(j, k - 1))


def _var_derivative(v, direction):
    j, k = v
    if direction == 0:
        return DiffPoly.var(j + 1, 0) if k == 0 else reduce_mixed(j + 1, k)
    return DiffPoly.var(0, k + 1) if j == 0 else reduce_mixed(j, k + 1)


def _derive(p, direction):
    first = (1, 0) if direction == 0 else (0, 1)
    acc = {}
    for (m, f), c in p.terms.items():
        fac = dict(f)
        if m:
            grown = dict(fac)
            grown[first] = grown.get(first, 0) + 1
            key = _key(m, grown.items())
            acc[key] = acc.get(key, 0) + 2 * m * c
        for v, pw in f:
            rest = dict(fac)
            if pw == 1:
                del rest[v]
            else:
                rest[v] = pw - 1
            dv = _var_derivative(v, direction)
            for (m2, f2), c2 in dv.terms.items():
                merged = dict(rest)
                for w, q in f2:
                    merged[w] = merged.get(w, 0) + q
                key = _key(m + m2, merged.items())
                acc[key] = acc.get(key, 0) + c * pw * c2
    return DiffPoly(acc)


def dz(p):
    return _derive(p, 0)


def dzbar(p):
    return _derive(p, 1)


def dx(p):
    return dz(p) + dzbar(p)


def dy(p):
    return 1j * (dz(p) - dzbar(p))


# --- 2x2 matrices over DiffPoly -------------------------------------------------

def mat(a, b, c, d):
    return [[_lift(a), _lift(b)], [_lift(c), _lift(d)]]


def _lift(x):
    return x if isinstance(x, DiffPoly) else DiffPoly.const(x)


def mat_mul(A, B):
    return [[A[i][0] * B[0][j] + A[i][1] * B[1][j] for j in range(2)] for i in range(2)]


def mat_add(A, B):
    return [[A[i][j] + B[i][j] for j in range(2)] for i in range(2)]


def mat_scale(A, s):
    return [[A[i][j] * s for j in range(2)] for i in range(2)]


def mat_map(A, fn):
    return [[fn(A[i][j]) for j in range(2)] for i in range(2)]


def diag_part(A):
    z = DiffPoly()
    return [[A[0][0], z], [z, A[1][1]]]


def off_part(A):
    z = DiffPoly()
    return [[z, A[0][1]], [A[1][0], z]]


def _phi_inverse(T):
    """Solve [beta_{-1}, a] = T for off-diagonal a, beta_{-1} = diag(i/2, -i/2)."""
    z = DiffPoly()
    return [[z, -1j * T[0][1]], [1j * T[1][0], z]]


def diagonalization_recursion(M):
    """Formal diagonalization of the gauged x-part of the Lax operator.

    Returns (a, b) with a[m] off-diagonal for m = 1..M+1 and b[m] diagonal for
    m = -1..M, both as 2x2 DiffPoly matrices (dicts keyed by m).
    """
    if M < 1:
        raise PreconditionError("need M >= 1")
    z = DiffPoly()
    beta_m1 = mat(0.5j, 0, 0, -0.5j)
    beta_0 = mat(z, -UZ, -UZ, z)
    beta_1 = mat(0.5j * COSH2, -0.5j * SINH2, 0.5j * SINH2, -0.5j * COSH2)
    b1d, b1o = diag_part(beta_1), off_part(beta_1)
    a = {1: _phi_inverse(mat_scale(beta_0, -1.0))}
    b = {-1: beta_m1, 0: mat(z, z, z, z)}
    b[1] = mat_add(mat_mul(beta_0, a[1]), b1d)
    a[2] = _phi_inverse(mat_add(mat_scale(b1o, -1.0), mat_scale(mat_map(a[1], dx), -1.0)))
    for m in range(2, M + 1):
        b[m] = mat_add(mat_mul(beta_0, a[m]), mat_mul(b1o, a[m - 1]))
        rhs = mat_add(mat_scale(mat_mul(b1d, a[m - 1]), -1.0), mat_scale(mat_map(a[m], dx), -1.0))
        for i in range(1, m + 1):
            rhs = mat_add(rhs, mat_mul(a[i], b[m - i]))
        a[m + 1] = _phi_inverse(off_part(rhs))
    return a, b


@lru_cache(maxsize=4)
def _diag_cached(M):
    return diagonalization_recursion(M)


def b_densities(M):
    """Scalar densities b_m (the (1,1) entries) for m = -1..M."""
    _, b = _diag_cached(max(M, 1))
    return {m: b[m][0][0] for m in range(-1, M + 1)}


# --- Pinkall-Sterling iteration ------------------------------------------------

class PSLevel:
    __slots__ = ("n", "omega", "tau", "sigma")

    def __init__(self, n, omega, tau, sigma):
        self.n, self.omega, self.tau, self.sigma = n, omega, tau, sigma

    def __repr__(self):
        return "PSLevel(n=%d, omega=%s)" % (self.n, pretty(self.omega))


def _partitions(n, largest=None):
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


def weight_basis(weight, exp_range):
    """Monomials in z-derivatives u^{(j,0)} of total weight `weight` times e^{2mu}."""
    out = []
    for part in _partitions(weight):
        fac = {}
        for j in part:
            fac[(j, 0)] = fac.get((j, 0), 0) + 1
        for m in range(-exp_range, exp_range + 1):
            out.append(DiffPoly({_key(m, fac.items()): 1.0}))
    return out


def snap_gaussian_rational(c, max_den=4096, tol=1e-9):
    """Nearest Gaussian rational with small denominators; returns (value, deviation)."""
    re = Fraction(c.real).limit_denominator(max_den)
    im = Fraction(c.imag).limit_denominator(max_den)
    v = complex(float(re), float(im))
    return v, abs(v - c)


def rational_audit(p, max_den=4096):
    """Largest distance of any coefficient from a small-denominator Gaussian rational."""
    return max((snap_gaussian_rational(c, max_den)[1] for c in p.terms.values()), default=0.0)


def _solve_antiderivative(rhs_z, rhs_zb, weight, exp_range):
    basis = weight_basis(weight, exp_range)
    cols_z = [dz(q) for q in basis]
    cols_zb = [dzbar(q) for q in basis]
    keys = sorted(set().union(*(c.terms for c in cols_z), *(c.terms for c in cols_zb),
                              rhs_z.terms, rhs_zb.terms))
    index = {k: i for i, k in enumerate(keys)}
    nk = len(keys)
    A = np.zeros((2 * nk, len(basis)), dtype=complex)
    for i, (cz, czb) in enumerate(zip(cols_z, cols_zb)):
        for k, c in cz.terms.items():
            A[index[k], i] = c
        for k, c in czb.terms.items():
            A[nk + index[k], i] = c
    rhs = np.zeros(2 * nk, dtype=complex)
    for k, c in rhs_z.terms.items():
        rhs[index[k]] = c
    for k, c in rhs_zb.terms.items():
        rhs[nk + index[k]] = c
    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = 1.0
    As = A / norms
    coef, *_ = np.linalg.lstsq(As, rhs, rcond=None)
    # one step of iterative refinement
    corr, *_ = np.linalg.lstsq(As, rhs - As @ coef, rcond=None)
    coef = (coef + corr) / norms
    resid = np.abs(A @ coef - rhs).max()
    if resid > 1e-9 * (1 + np.abs(rhs).max()):
        raise IterationFailure("ansatz for weight %d is inconsistent (residual %.2e)" % (weight, resid))
    terms, worst = {}, 0.0
    for q, c in zip(basis, coef):
        v, dev = snap_gaussian_rational(c)
        worst = max(worst, dev / (1 + abs(c)))
        if v != 0:
            (key,) = q.terms
            terms[key] = v
    if worst > 1e-9:
        warnings.warn("Pinkall-Sterling coefficient deviates from a rational by %.2e (relative)" % worst)
    return DiffPoly(terms), worst


def pinkall_sterling(n_max, cap=PS_CAP, convention="hamiltonian"):
    """Jacobi fields omega_0..omega_{n_max} with integration constants set to 0.

    The recursion is run as stated for the Lax ansatz:
    tau_zbar = i e^{-2u} omega_n, tau_z = 2i u_z omega_{n,z} - i omega_{n,zz},
    omega_{n+1} = -i tau_{n,z} - 2i u_z tau_n,
    sigma_{n+1} = e^{2u} tau_n + 2i omega_{n+1,zbar}.

    With ``convention="hamiltonian"`` (default) level n is multiplied by (-1)^n,
    which gives omega_1 = u_zzz - 2 u_z^3 and makes (Re omega_n, Re d_y omega_n)
    the Omega-gradient of H_{2n+1}.  ``convention="lax"`` returns the raw
    recursion output.
    """
    if n_max > cap:
        raise PreconditionError("Pinkall-Sterling iteration capped at n = %d" % cap)
    if convention not in ("hamiltonian", "lax"):
        raise PreconditionError("unknown convention %r" % (convention,))
    raw = _ps_lax(n_max)
    if convention == "lax":
        return list(raw)
    return [PSLevel(l.n, (-1) ** l.n * l.omega, (-1) ** l.n * l.tau, (-1) ** l.n * l.sigma)
            for l in raw]


_PS_LEVELS = []


def _ps_lax(n_max):
    levels = _PS_LEVELS
    if not levels:
        levels.append(PSLevel(0, UZ, None, DiffPoly()))
    while len(levels) <= n_max or levels[n_max].tau is None:
        last = levels[-1]
        if last.tau is None:
            omega = last.omega
            wz = dz(omega)
            rhs_z = 2j * UZ * wz - 1j * dz(wz)
            rhs_zb = 1j * EM2 * omega
            last.tau, _ = _solve_antiderivative(rhs_z, rhs_zb, 2 * last.n + 2, last.n + 1)
        if len(levels) <= n_max:
            omega_next = -1j * dz(last.tau) - 2j * UZ * last.tau
            sigma = E2 * last.tau + 2j * dzbar(omega_next)
            levels.append(PSLevel(last.n + 1, omega_next, None, sigma))
    return tuple(levels[: n_max + 1])


def jacobi_operator(p):
    """4 d_z d_zbar p + 4 cosh(2u) p, normal-form reduced."""
    return 4.0 * dz(dzbar(p)) + 4.0 * COSH2 * p


# --- evaluation ----------------------------------------------------------------

def evaluate(p, jet):
    """Evaluate on the grid of a YJet."""
    need = p.max_order()
    if need > jet.order:
        raise PreconditionError("jet order %d insufficient for derivative order %d" % (jet.order, need))
    u = jet.layers[0]
    cache = {}
    out = np.zeros(u.shape, dtype=complex)
    for (m, f), c in p.terms.items():
        term = np.full(u.shape, c, dtype=complex)
        if m:
            term = term * np.exp(2 * m * u)
        for v, pw in f:
            if v not in cache:
                cache[v] = z_derivative_grid(jet, *v) if v != (0, 0) else u.astype(complex)
            term = term * cache[v] ** pw
        out += term
    return out


# --- printing ------------------------------------------------------------------

def _var_name(v):
    j, k = v
    if j == 0 and k == 0:
        return "u"
    return "u_" + "z" * j if k == 0 else "u_" + "zb" * k


def _fmt_coeff(c):
    def r(x):
        f = Fraction(x).limit_denominator(4096)
        return str(f) if abs(float(f) - x) < 1e-12 else "%.12g" % x
    if c.imag == 0:
        return r(c.real)
    if c.real == 0:
        return r(c.imag) + "i"
    return "(%s%+gi)" % (r(c.real), c.imag)


def pretty(p):
    if p.is_zero():
        return "0"
    parts = []
    for (m, f), c in sorted(p.terms.items(), key=lambda kv: (-sum(j + k for (j, k), _ in kv[0][1]), kv[0])):
        names = []
        for v, pw in f:
            names.append(_var_name(v) + ("^%d" % pw if pw > 1 else ""))
        if m:
            names.append("e^{%du}" % (2 * m))
        cs = _fmt_coeff(c)
        body = " ".join(names)
        if not body:
            parts.append(cs)
        elif cs == "1":
            parts.append(body)
        elif cs == "-1":
            parts.append("-" + body)
        else:
            parts.append(cs + " " + body)
    return " + ".join(parts).replace("+ -", "- ")
