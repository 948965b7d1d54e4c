"""Isoperiodic deformations of spectral data (a, b).

A direction c (degree <= g+1, c_i = conj(c_{g+1-i}), c(0) = 0) determines the
tangent (adot, bdot) through

    -2 bdot a + b adot = -2 lam a c' + a c + lam a' c.
"""

import numpy as np
from scipy.integrate import DOP853

from .algebra import CPoly
from .errors import BoundaryError, DegeneratePairError, IntegrationFailure, MalformedInputError
from .spectral import SpectralPair, a_cycle_integral, h_value, lattice_distance


def _basis(n_coef, mirror, sign, skip_ends=False):
    """Real basis of coefficient vectors with v_k = sign * conj(v_{n-1-k})."""
    out = []
    lo, hi = (1, n_coef - 2) if skip_ends else (0, n_coef - 1)
    for k in range(lo, hi + 1):
        m = mirror(k)
        if k > m:
            continue
        if k == m:
            v = np.zeros(n_coef, complex)
            v[k] = 1.0 if sign > 0 else 1j
            out.append(v)
            continue
        v = np.zeros(n_coef, complex)
        v[k], v[m] = 1.0, sign
        w = np.zeros(n_coef, complex)
        w[k], w[m] = 1j, -1j * sign
        out += [v, w]
    return np.array(out)


def a_basis(g):
    return _basis(2 * g + 1, lambda k: 2 * g - k, +1)


def b_basis(g):
    return _basis(g + 2, lambda k: g + 1 - k, -1)


def c_basis(g):
    return _basis(g + 2, lambda k: g + 1 - k, +1, skip_ends=True)


def to_params(coef, basis):
    """Real coordinates of a coefficient vector in a real basis (exact for members)."""
    A = np.concatenate([basis.T.real, basis.T.imag])
    y = np.concatenate([np.asarray(coef).real, np.asarray(coef).imag])
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    return x


class WhithamDirection:
    """Admissible direction c for the period-preserving flow."""

    __slots__ = ("c", "g")

    def __init__(self, c, g, tol=1e-12):
        c = c if isinstance(c, CPoly) else CPoly(c)
        if c.degree > g + 1:
            raise MalformedInputError("deg c = %d exceeds g+1 = %d" % (c.degree, g + 1))
        v = c.padded(g + 2)
        scale = max(1.0, np.abs(v).max())
        if abs(v[0]) > tol * scale:
            raise MalformedInputError("c(0) must vanish for period-preserving flows")
        if np.abs(v - np.conj(v[::-1])).max() > tol * scale:
            raise MalformedInputError("c violates c_i = conj(c_{g+1-i})")
        self.c, self.g = c, int(g)

    @classmethod
    def from_params(cls, x, g):
        return cls(CPoly(np.asarray(x, float) @ c_basis(g)), g)

    @classmethod
    def random(cls, rng, g, scale=1.0):
        return cls.from_params(scale * rng.standard_normal(g), g)


def _rhs_poly(a, c):
    lam = CPoly([0, 1])
    return (lam * a * c.deriv()) * (-2.0) + a * c + lam * a.deriv() * c


def _system(sp):
    """Real matrix mapping (adot params, bdot params) to the equation and tangency rows."""
    g = sp.g
    Ba, Bb = a_basis(g), b_basis(g)
    n_out = 3 * g + 2
    cols = []
    for v in Ba:
        cols.append((sp.b * CPoly(v)).padded(n_out))
    for v in Bb:
        cols.append((CPoly(v) * sp.a * (-2.0)).padded(n_out))
    C = np.array(cols).T
    A = np.concatenate([C.real, C.imag])
    a0 = sp.a.coef(0)
    tang = np.array([(np.conj(a0) * v[0]).real for v in Ba] + [0.0] * len(Bb))
    return np.vstack([A, tang]), Ba, Bb


def whitham_tangent(sp, direction, cond_max=1e10, return_residual=False):
    """(adot, bdot) for the Whitham direction c; least-norm dense solve."""
    c = direction.c if isinstance(direction, WhithamDirection) else CPoly(direction)
    if c.is_zero():
        z = (CPoly(), CPoly())
        return z + (0.0,) if return_residual else z
    A, Ba, Bb = _system(sp)
    rhs = _rhs_poly(sp.a, c).padded(3 * sp.g + 2)
    y = np.concatenate([rhs.real, rhs.imag, [0.0]])
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] < s[0] / cond_max:
        raise DegeneratePairError("Whitham system is rank deficient (cond %.2e)" % (s[0] / s[-1]))
    x, *_ = np.linalg.lstsq(A, y, rcond=None)
    na = len(Ba)
    adot = CPoly(x[:na] @ Ba)
    bdot = CPoly(x[na:] @ Bb)
    res = float(np.abs(A @ x - y).max() / max(1.0, np.abs(y).max()))
    return (adot, bdot, res) if return_residual else (adot, bdot)


def period_from_pair(sp):
    """p recovered from b(0)^2 / a(0) = -p^2/16."""
    return 4.0 * np.sqrt(-(sp.b.coef(0) ** 2 / sp.a.coef(0))).real


def monitors(sp):
    roots, _ = sp.roots()
    inner = [r for r in roots if abs(r) < 1]
    d = np.abs(roots[:, None] - roots[None, :]) + np.diag(np.full(len(roots), np.inf))
    return {
        "period_invariant": complex(sp.b.coef(0) / np.sqrt(complex(sp.a.coef(0).real, abs(sp.a.coef(0).imag)))),
        "period": float(period_from_pair(sp)),
        "lattice_residuals": [float(lattice_distance(h_value(sp, r))) for r in roots],
        "a_cycles": [complex(a_cycle_integral(sp, r)) for r in inner],
        "root_distance": float(d.min()),
    }


class WhithamTrajectory:
    def __init__(self, t, pairs, monitor_log, truncated=False):
        self.t, self.pairs, self.monitors, self.truncated = np.asarray(t), pairs, monitor_log, truncated

    def drift(self, key):
        vals = [m[key] for m in self.monitors]
        if isinstance(vals[0], list):
            arr = np.array(vals, dtype=complex)
            return float(np.abs(arr - arr[0]).max()) if arr.size else 0.0
        arr = np.array(vals, dtype=complex)
        return float(np.abs(arr - arr[0]).max())

    def rows(self):
        for t, sp, m in zip(self.t, self.pairs, self.monitors):
            roots, _ = sp.roots()
            yield {"t": float(t), "a": sp.a.to_json(), "b": sp.b.to_json(),
                   "roots": [[float(r.real), float(r.imag)] for r in roots],
                   "period": m["period"], "root_distance": m["root_distance"],
                   "lattice_max": max(m["lattice_residuals"] or [0.0]),
                   "a_cycle_max": max([abs(v) for v in m["a_cycles"]] or [0.0])}


def whitham_flow(sp, direction, t_span, tol=1e-11, n_out=11, collision=1e-4, monitor=True):
    """Integrate (a, b) along X_c; `direction` is a WhithamDirection or callable (sp) -> WhithamDirection."""
    g = sp.g
    Ba, Bb = a_basis(g), b_basis(g)
    na = len(Ba)
    t0, t1 = map(float, t_span)

    def unpack(x):
        return SpectralPair(CPoly(x[:na] @ Ba), CPoly(x[na:] @ Bb), g, sp.p)

    def dirn(s):
        return direction(s) if callable(direction) else direction

    x0 = np.concatenate([to_params(sp.a.padded(2 * g + 1), Ba), to_params(sp.b.padded(g + 2), Bb)])
    if t1 == t0:
        return WhithamTrajectory([t0], [sp], [monitors(sp)] if monitor else [{}])

    def rhs(t, x):
        s = unpack(x)
        ad, bd = whitham_tangent(s, dirn(s))
        return np.concatenate([to_params(ad.padded(2 * g + 1), Ba), to_params(bd.padded(g + 2), Bb)])

    def gap(x):
        r, _ = unpack(x).roots()
        d = np.abs(r[:, None] - r[None, :]) + np.diag(np.full(len(r), np.inf))
        return d.min()

    # stepped by hand so that a near-singular system at a collision ends the run cleanly
    t_eval = np.linspace(t0, t1, n_out)
    direc = np.sign(t1 - t0)
    solver = DOP853(rhs, t0, x0, t1, rtol=tol, atol=tol * 1e-2)
    ts, ys, k, stop = [t0], [x0], 1, None
    while solver.status == "running" and stop is None:
        try:
            msg = solver.step()
        except DegeneratePairError:
            stop = solver.t
            break
        if solver.status == "failed":
            raise IntegrationFailure(msg)
        dense = solver.dense_output()
        while k < n_out and direc * (t_eval[k] - solver.t) <= 0:
            ts.append(t_eval[k])
            ys.append(dense(t_eval[k]))
            k += 1
        if gap(solver.y) < collision:
            stop = solver.t
    pairs = [unpack(y) for y in ys]
    mons = [monitors(p) if monitor else {} for p in pairs]
    traj = WhithamTrajectory(ts, pairs, mons, truncated=stop is not None)
    if stop is not None:
        raise BoundaryError("roots of a collide near t=%.6g" % stop, traj)
    return traj
