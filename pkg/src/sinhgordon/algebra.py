"""Complex polynomials, sl(2) Laurent loops, reality conditions and the
Lie-algebra Iwasawa split."""

import numpy as np

from .errors import MalformedInputError

EPS_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
EPS_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
H0 = np.array([[1, 0], [0, -1]], dtype=complex)


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


class CPoly:
    """Complex polynomial with ascending coefficients.

    The zero polynomial has an empty coefficient array and degree -1.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        self.coeffs = _frozen(c)

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return self.degree < 0

    def coef(self, k):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0j

    def padded(self, n):
        out = np.zeros(n, dtype=complex)
        m = min(n, len(self.coeffs))
        out[:m] = self.coeffs[:m]
        return out

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        out = np.zeros_like(lam)
        for c in self.coeffs[::-1]:
            out = out * lam + c
        return out if out.ndim else complex(out)

    def _lift(self, other):
        return other if isinstance(other, CPoly) else CPoly([other])

    def __add__(self, other):
        other = self._lift(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return CPoly(self.padded(n) + other.padded(n))

    __radd__ = __add__

    def __neg__(self):
        return CPoly(-self.coeffs)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, CPoly):
            return CPoly(self.coeffs * complex(other))
        if self.is_zero() or other.is_zero():
            return CPoly()
        return CPoly(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def shift(self, k):
        """Multiply by lambda**k (k >= 0)."""
        return CPoly(np.concatenate([np.zeros(k, dtype=complex), self.coeffs]))

    def deriv(self):
        if self.degree < 1:
            return CPoly()
        return CPoly(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def reflect(self, d):
        """lambda**d * conj(q(1/conj(lambda))) for deg q <= d."""
        if self.degree > d:
            raise MalformedInputError("degree %d exceeds reflection degree %d" % (self.degree, d))
        return CPoly(np.conj(self.padded(d + 1))[::-1])

    def __eq__(self, other):
        other = self._lift(other)
        return len(self.coeffs) == len(other.coeffs) and bool(np.all(self.coeffs == other.coeffs))

    def __hash__(self):
        return hash(tuple(self.coeffs))

    def __repr__(self):
        return "CPoly(%s)" % np.array2string(self.coeffs, precision=6)

    def to_json(self):
        return [[float(c.real), float(c.imag)] for c in self.coeffs]

    @classmethod
    def from_json(cls, data):
        return cls([complex(re, im) for re, im in data])


class LaurentLoop:
    """Finite Laurent polynomial in lambda with 2x2 complex coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        clean = {}
        for n, m in (terms or {}).items():
            m = np.asarray(m, dtype=complex)
            if m.shape != (2, 2):
                raise MalformedInputError("loop coefficients must be 2x2")
            if np.any(m != 0):
                clean[int(n)] = _frozen(m)
        self.terms = clean

    @property
    def lo(self):
        return min(self.terms) if self.terms else 0

    @property
    def hi(self):
        return max(self.terms) if self.terms else 0

    def powers(self):
        return sorted(self.terms)

    def __getitem__(self, n):
        return self.terms.get(n, np.zeros((2, 2), dtype=complex))

    def is_zero(self):
        return not self.terms

    def __add__(self, other):
        out = {n: m.copy() for n, m in self.terms.items()}
        for n, m in other.terms.items():
            out[n] = out[n] + m if n in out else m.copy()
        return LaurentLoop(out)

    def __neg__(self):
        return LaurentLoop({n: -m for n, m in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s):
        return LaurentLoop({n: s * m for n, m in self.terms.items()})

    def shift(self, k):
        """Multiply by lambda**k."""
        return LaurentLoop({n + k: m for n, m in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, LaurentLoop):
            return self.scale(other)
        out = {}
        for n, a in self.terms.items():
            for k, b in other.terms.items():
                prod = a @ b
                out[n + k] = out[n + k] + prod if n + k in out else prod
        return LaurentLoop(out)

    __rmul__ = scale

    def bracket(self, other):
        return self * other - other * self

    def __call__(self, lam):
        out = np.zeros((2, 2), dtype=complex)
        for n, m in self.terms.items():
            out = out + m * lam**n
        return out

    def trace_series(self):
        return {n: complex(np.trace(m)) for n, m in self.terms.items()}

    def is_traceless(self, tol=0.0):
        return all(abs(np.trace(m)) <= tol * (1 + np.abs(m).max()) for m in self.terms.values())

    def det_series(self):
        """Coefficients of det(loop) keyed by power."""
        out = {}
        items = list(self.terms.items())
        for n, a in items:
            for k, b in items:
                # det of 2x2 sum expands bilinearly: a00 b11 - a01 b10 over all ordered pairs
                v = a[0, 0] * b[1, 1] - a[0, 1] * b[1, 0]
                out[n + k] = out.get(n + k, 0j) + v
        return out

    def star(self, g):
        """Reality involution xi -> -lambda**(g-1) (xi(1/conj lambda))^H."""
        return LaurentLoop({g - 1 - n: -m.conj().T for n, m in self.terms.items()})

    def max_abs(self):
        return max((float(np.abs(m).max()) for m in self.terms.values()), default=0.0)

    def allclose(self, other, tol):
        diff = self - other
        return diff.max_abs() <= tol

    def __eq__(self, other):
        if set(self.terms) != set(other.terms):
            return False
        return all(np.array_equal(self.terms[n], other.terms[n]) for n in self.terms)

    def __repr__(self):
        return "LaurentLoop(powers %d..%d)" % (self.lo, self.hi)

    def flat(self, lo, hi):
        """Coefficients for powers lo..hi stacked into a flat complex vector."""
        return np.concatenate([self[n].ravel() for n in range(lo, hi + 1)])

    @classmethod
    def from_flat(cls, vec, lo, hi):
        vec = np.asarray(vec, dtype=complex).reshape(hi - lo + 1, 2, 2)
        return cls({lo + i: vec[i] for i in range(hi - lo + 1)})

    def to_json(self):
        return {
            str(n): [[[float(z.real), float(z.imag)] for z in row] for row in m]
            for n, m in sorted(self.terms.items())
        }

    @classmethod
    def from_json(cls, data):
        return cls({int(n): [[complex(re, im) for re, im in row] for row in m] for n, m in data.items()})


class SplitPair:
    __slots__ = ("unitary_part", "positive_part")

    def __init__(self, unitary_part, positive_part):
        self.unitary_part = unitary_part
        self.positive_part = positive_part

    def __iter__(self):
        yield self.unitary_part
        yield self.positive_part


def is_unitary_loop(A, tol=0.0):
    """A_n == -A_{-n}^H for every n."""
    for n in set(A.terms) | {-k for k in A.terms}:
        if np.abs(A[n] + A[-n].conj().T).max() > tol:
            return False
    return True


def is_positive_loop(A, tol=0.0):
    """Only powers >= 0; power-0 coefficient upper triangular with real diagonal."""
    if any(n < 0 for n in A.terms):
        return False
    a0 = A[0]
    return abs(a0[1, 0]) <= tol and abs(a0[0, 0].imag) <= tol and abs(a0[1, 1].imag) <= tol


def iwasawa_split(A):
    """Split an sl(2) loop into unitary and positive parts.

    Negative powers go wholly to the unitary part, which also receives the
    mirrored coefficient -A_n^H at power -n.  The constant term is split
    into an anti-hermitian piece and an upper-triangular piece with real
    diagonal.
    """
    if not A.is_traceless(tol=1e-12):
        raise MalformedInputError("iwasawa_split expects a trace-free loop")
    uni, pos = {}, {}
    for n, m in A.terms.items():
        if n < 0:
            uni[n] = m
            mirror = -m.conj().T
            uni[-n] = mirror
            pos[-n] = A[-n] - mirror
        elif n > 0 and -n not in A.terms:
            pos[n] = m
    a0 = A[0]
    al, be, ga = a0[0, 0], a0[0, 1], a0[1, 0]
    X = np.array([[1j * al.imag, -np.conj(ga)], [ga, -1j * al.imag]])
    Y = np.array([[al.real, be + np.conj(ga)], [0, -al.real]])
    uni[0] = X
    pos[0] = Y
    return SplitPair(LaurentLoop(uni), LaurentLoop(pos))


def lambda_inner(A, B):
    """Im of the lambda**0 coefficient of trace(A B)."""
    s = 0j
    for n, a in A.terms.items():
        if -n in B.terms:
            s += np.trace(a @ B.terms[-n])
    return float(s.imag)


def pg_membership(xi, g, tol=1e-10):
    """Membership in the finite-type phase space of genus g."""
    if any(n < -1 or n > g for n in xi.terms):
        return False
    scale = max(xi.max_abs(), 1.0)
    m = xi[-1]
    r = m[0, 1]
    if np.abs(m - r * EPS_PLUS).max() > tol * scale:
        return False
    if abs(r.real) > tol * scale or r.imag <= tol * scale:
        return False
    if not xi.star(g).allclose(xi, tol * scale):
        return False
    return abs(np.trace(m @ xi[0])) > tol * scale


def poly_reality_check(q, kind, g, tol=1e-12, samples=64):
    """Coefficient symmetry of a-, b- or c-type polynomials."""
    d = 2 * g if kind == "a" else g + 1
    if kind not in ("a", "b", "c"):
        raise MalformedInputError("unknown polynomial kind %r" % (kind,))
    if q.is_zero():
        raise MalformedInputError("zero polynomial")
    if q.degree > d:
        raise MalformedInputError("degree %d exceeds %d for %s-type" % (q.degree, d, kind))
    c = q.padded(d + 1)
    mirror = np.conj(c[::-1])
    sign = -1.0 if kind == "b" else 1.0
    scale = np.abs(c).max()
    if np.abs(c - sign * mirror).max() > tol * scale:
        return False
    if kind == "a":
        if abs(abs(c[0]) - 1.0) > tol * 10:
            return False
        z = np.exp(2j * np.pi * (np.arange(samples) + 0.5) / samples)
        w = z ** (-g) * q(z)
        if np.any(w.real > tol * scale) or np.any(np.abs(w.imag) > 1e3 * tol * scale):
            return False
    return True


def poly_roots(q, mult_tol=1e-7, polish=3):
    """Roots of q via companion eigenvalues with Newton polishing.

    Returns (roots, flags) where flags[i] is True when root i lies within
    mult_tol*(1+|root|) of another root.
    """
    if q.is_zero():
        raise MalformedInputError("zero polynomial has no finite root set")
    if q.degree < 1:
        raise MalformedInputError("constant polynomial")
    c = q.coeffs
    n = q.degree
    comp = np.zeros((n, n), dtype=complex)
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    roots = np.linalg.eigvals(comp)
    dq = q.deriv()
    for _ in range(polish):
        d = dq(roots)
        ok = np.abs(d) > 1e-14 * (1 + np.abs(roots))
        step = np.where(ok, q(roots) / np.where(ok, d, 1), 0)
        roots = roots - step
    roots = roots[np.lexsort((roots.imag, roots.real))]
    flags = np.zeros(n, dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j and abs(roots[i] - roots[j]) < mult_tol * (1 + abs(roots[i])):
                flags[i] = True
    return roots, flags
