"""Periodic Cauchy data and the y-jet of u generated by the PDE.

The PDE is u_xx + u_yy + 2 sinh(2u) = 0; along y = 0 the data (u, u_y)
determine every y-derivative through u_yy = -u_xx - 2 sinh(2u).
"""

from math import comb, factorial

import numpy as np

from .errors import DivergenceError, MalformedInputError, PreconditionError

MAX_JET_ORDER = 12
# Fourier modes below this fraction of a layer's largest mode are treated as roundoff
NOISE = 1e-15


class CauchyData:
    """Samples of (u, u_y) at x_k = k p / N."""

    __slots__ = ("u", "uy", "period_p")

    def __init__(self, u, uy, period_p):
        u = np.array(u, dtype=float)
        uy = np.array(uy, dtype=float)
        if u.ndim != 1 or u.shape != uy.shape:
            raise MalformedInputError("u and uy must be 1-d grids of equal length")
        n = u.size
        if n < 4 or n & (n - 1):
            raise MalformedInputError("grid size must be a power of two, got %d" % n)
        if not period_p > 0:
            raise MalformedInputError("period must be positive")
        u.setflags(write=False)
        uy.setflags(write=False)
        self.u, self.uy, self.period_p = u, uy, float(period_p)

    @property
    def N(self):
        return self.u.size

    @property
    def x(self):
        return np.arange(self.N) * self.period_p / self.N

    def shifted(self, du, duy, s=1.0):
        return CauchyData(self.u + s * np.asarray(du), self.uy + s * np.asarray(duy), self.period_p)

    @classmethod
    def vacuum(cls, N=256, p=2 * np.pi):
        return cls(np.zeros(N), np.zeros(N), p)

    @classmethod
    def from_modes(cls, modes, N=256, p=2 * np.pi, u0=0.0):
        """Build data from a list of Fourier modes.

        Each mode is (field, m, a, b) adding a cos(2 pi m x/p) + b sin(2 pi m x/p)
        to field 'u' or 'uy'.
        """
        x = np.arange(N) * p / N
        u = np.full(N, float(u0))
        uy = np.zeros(N)
        for field, m, a, b in modes:
            if abs(m) > N // 8:
                raise MalformedInputError("mode %d above the band limit N/8" % m)
            wave = a * np.cos(2 * np.pi * m * x / p) + b * np.sin(2 * np.pi * m * x / p)
            if field == "u":
                u += wave
            elif field == "uy":
                uy += wave
            else:
                raise MalformedInputError("unknown field %r" % (field,))
        return cls(u, uy, p)

    @classmethod
    def random(cls, rng, N=256, p=2 * np.pi, n_modes=3, amp=0.3):
        """Band-limited random data with a few low modes."""
        amp = min(amp, 0.5)
        modes = []
        for field in ("u", "uy"):
            for m in range(0, n_modes + 1):
                a, b = amp * rng.uniform(-1, 1, 2) / (1 + m)
                modes.append((field, m, a, 0.0 if m == 0 else b))
        return cls.from_modes(modes, N, p)

    @classmethod
    def from_csv(cls, path, p=None):
        data = np.genfromtxt(path, delimiter=",", names=True)
        try:
            x, u, uy = data["x"], data["u"], data["uy"]
        except (ValueError, KeyError):
            raise MalformedInputError("CSV needs columns x, u, uy")
        if p is None:
            p = x[1] - x[0] + x[-1] - x[0]
        return cls(u, uy, p)

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.x, self.u, self.uy]), delimiter=",",
                   header="x,u,uy", comments="", fmt="%.17g")


def _wavenumbers(N, p):
    return 2 * np.pi * np.fft.fftfreq(N, d=1.0 / N) / p


def spectral_dx(f, order, p):
    """k-th periodic derivative by Fourier multiplier."""
    f = np.asarray(f)
    if order == 0:
        return f.copy()
    N = f.shape[-1]
    mult = (1j * _wavenumbers(N, p)) ** order
    if order % 2:
        mult[N // 2] = 0
    out = np.fft.ifft(np.fft.fft(f) * mult)
    return out.real if np.isrealobj(f) else out


def spectral_integral(f, p):
    """Periodic quadrature (mean times period)."""
    return np.mean(f, axis=-1) * p


class TrigInterpolant:
    """Evaluate band-limited periodic grids at arbitrary x."""

    def __init__(self, grids, p):
        grids = np.atleast_2d(np.asarray(grids, dtype=float))
        N = grids.shape[-1]
        c = np.fft.rfft(grids, axis=-1) / N
        c[:, 1:] *= 2
        if N % 2 == 0:
            c[:, -1] /= 2
        self.c = c
        self.k = 2 * np.pi * np.arange(c.shape[-1]) / p

    def __call__(self, x):
        e = np.exp(1j * self.k * x)
        return (self.c @ e).real


class YJet:
    """Layers Y_m = d^m u / dy^m at y = 0 for m = 0..M."""

    __slots__ = ("layers", "period_p", "bandwidth", "_cache")

    def __init__(self, layers, period_p, bandwidth=None):
        self.layers = [np.asarray(l, dtype=float) for l in layers]
        self.period_p = period_p
        self.bandwidth = bandwidth
        self._cache = {}

    @property
    def order(self):
        return len(self.layers) - 1

    def xy(self, a, b):
        """d^a/dx^a d^b/dy^b u on the grid."""
        if b > self.order:
            raise PreconditionError("y-order %d exceeds jet order %d" % (b, self.order))
        key = (a, b)
        if key not in self._cache:
            d = spectral_dx(self.layers[b], a, self.period_p)
            # FFT roundoff above the band would otherwise be amplified like k^a
            self._cache[key] = d if self.bandwidth is None or a == 0 else _truncate(d, self.bandwidth)
        return self._cache[key]


def _exp_series(t, s):
    """Taylor coefficients of exp(s*u) given coefficients t of u (first axis)."""
    out = [np.exp(s * t[0])]
    for n in range(1, len(t)):
        acc = np.zeros_like(t[0])
        for k in range(1, n + 1):
            acc = acc + k * s * t[k] * out[n - k]
        out.append(acc / n)
    return out


def jet_bandwidth(cd, rel=1e-14):
    """Highest Fourier mode carrying resolved content of u, u_y or e^{+-2u}.

    The y-recursion differentiates twice per step, so any roundoff above
    this mode would be amplified like k^M; layers are truncated here.
    """
    K = 1
    for f in (cd.u, cd.uy, np.exp(2 * cd.u), np.exp(-2 * cd.u)):
        a = np.abs(np.fft.rfft(f))
        # roundoff plateau in the upper half of the spectrum (e.g. ODE-generated data)
        plateau = 30 * np.median(a[a.size // 2:])
        big = np.nonzero(a > max(rel * max(a.max(), 1e-300), plateau))[0]
        if big.size:
            K = max(K, int(big[-1]))
    return min(K, cd.N // 2 - 1)


def _truncate(f, K, n=None, floor=0.0):
    """Keep modes 0..K; optionally resample onto an n-point grid."""
    c = np.fft.rfft(f)
    n = f.size if n is None else n
    out = np.zeros(n // 2 + 1, dtype=complex)
    k = min(K + 1, c.size, out.size)
    out[:k] = c[:k] * (n / f.size)
    if floor:
        out[np.abs(out) < floor * np.abs(out).max()] = 0
    return np.fft.irfft(out, n=n)


def extend_jet(cd, M=MAX_JET_ORDER, max_order=MAX_JET_ORDER, bandwidth=None):
    """Generate Y_0..Y_M from the Cauchy data.

    Layers are kept band-limited to `bandwidth` (default: jet_bandwidth).  The
    sinh products are formed on a padded grid wide enough that modes up to
    (M+1)K do not alias back into the band.
    """
    if M > max_order:
        raise PreconditionError("jet order %d above the configured maximum %d" % (M, max_order))
    p, N = cd.period_p, cd.N
    K = jet_bandwidth(cd) if bandwidth is None else int(bandwidth)
    Nf = max(N, 1 << int(np.ceil(np.log2((M + 2) * K + 1))))
    Y = [_truncate(cd.u, K, Nf, NOISE), _truncate(cd.uy, K, Nf, NOISE)]
    for m in range(0, M - 1):
        t = [Y[j] / factorial(j) for j in range(m + 1)]
        ep = _exp_series(t, 2.0)
        em = _exp_series(t, -2.0)
        sinh_m = 0.5 * (ep[m] - em[m])
        if np.abs(sinh_m).max() > 1e12:
            raise DivergenceError("jet arithmetic overflow at order %d" % m)
        Y.append(_truncate(-spectral_dx(Y[m], 2, p) - 2 * factorial(m) * sinh_m, K, None, NOISE))
        if np.abs(Y[-1]).max() > 1e12:
            raise DivergenceError("jet layer %d exceeds 1e12" % (m + 2))
    return YJet([_truncate(y, K, N) for y in Y[: M + 1]], p, K)


def z_derivative_grid(jet, j, k):
    """d_z^j d_zbar^k u on y = 0 with d_z = (d_x - i d_y)/2."""
    if j + k > jet.order:
        raise PreconditionError("order %d exceeds jet order %d" % (j + k, jet.order))
    # coefficients of X^(n-b) Y^b in (X - iY)^j (X + iY)^k
    c1 = np.array([comb(j, b) * (-1j) ** b for b in range(j + 1)])
    c2 = np.array([comb(k, b) * (1j) ** b for b in range(k + 1)])
    c = np.convolve(c1, c2)
    n = j + k
    out = np.zeros(jet.layers[0].shape, dtype=complex)
    for b, cb in enumerate(c):
        if cb != 0:
            out = out + cb * jet.xy(n - b, b)
    return out / 2**n
