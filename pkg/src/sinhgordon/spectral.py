"""Spectral curve data (a, b), closing conditions and integration on nu^2 = lambda a(lambda)."""

import numpy as np

from .algebra import CPoly, pg_membership, poly_reality_check, poly_roots
from .errors import CurveRecoveryError, MalformedInputError, PathError, PreconditionError
from .laxflow import a_poly, transfer_matrices

GL_ORDER = 16


class SpectralPair:
    """Spectral data (a, b) of genus g and period p."""

    __slots__ = ("a", "b", "g", "p", "fit_residual")

    def __init__(self, a, b, g, p, fit_residual=0.0):
        a = a if isinstance(a, CPoly) else CPoly(a)
        b = b if isinstance(b, CPoly) else CPoly(b)
        if a.degree > 2 * g or b.degree > g + 1:
            raise MalformedInputError("degrees (%d, %d) too large for genus %d" % (a.degree, b.degree, g))
        self.a, self.b, self.g, self.p = a, b, int(g), float(p)
        self.fit_residual = fit_residual

    def roots(self):
        return poly_roots(self.a)

    def sqrt_a0(self):
        return np.sqrt(self.a.coef(0))

    def period_invariant(self):
        """b(0)/sqrt(a(0)) with the principal square root."""
        return self.b.coef(0) / self.sqrt_a0()

    def root_separation(self):
        r, _ = self.roots()
        d = np.abs(r[:, None] - r[None, :]) + np.diag(np.full(len(r), np.inf))
        return float(d.min())

    def resultant_proxy(self):
        """min |b(alpha)| over roots of a (zero iff a and b share a root)."""
        r, _ = self.roots()
        return float(np.min(np.abs(self.b(r))))

    def in_moduli(self, tol=1e-7):
        r, flags = self.roots()
        return bool(not flags.any() and self.resultant_proxy() > tol
                    and poly_reality_check(self.a, "a", self.g, tol=1e-9)
                    and poly_reality_check(self.b, "b", self.g, tol=1e-9))

    def nu(self, lam):
        """Principal-branch nu = sqrt(lambda a(lambda))."""
        lam = np.asarray(lam, dtype=complex)
        return np.sqrt(lam * self.a(lam))

    def to_json(self):
        return {"g": self.g, "p": self.p, "a": self.a.to_json(), "b": self.b.to_json()}

    @classmethod
    def from_json(cls, d):
        return cls(CPoly.from_json(d["a"]), CPoly.from_json(d["b"]), d["g"], d["p"])


def period_residual(sp):
    """|b(0)^2/a(0) + p^2/16|, i.e. b(0) = -(ip/4) sqrt(a(0)) on either branch."""
    return abs(sp.b.coef(0) ** 2 / sp.a.coef(0) + sp.p**2 / 16)


# --- recovering b from the monodromy -------------------------------------------

def _eig_pair(M, xi_val, ref=None):
    """Eigenvalue mu of M and the matching eigenvalue of xi_val on the same eigenline."""
    w, V = np.linalg.eig(M)
    i = 0 if ref is None else int(np.argmin(np.abs(w - ref)))
    v = V[:, i]
    k = int(np.argmax(np.abs(v)))
    nu_t = (xi_val @ v)[k] / v[k]
    return w[i], nu_t


def dlnmu_samples(cd, xi, lams, h=1e-4, tol=1e-12):
    """d ln mu / d lambda at each lambda (Richardson-extrapolated centred differences),
    plus the eigenvalue of xi on the same eigenline."""
    lams = np.asarray(lams, dtype=complex)
    steps = np.array([1, -1, 2, -2]) * h
    all_l = np.concatenate([lams] + [lams * (1 + s) for s in steps])
    Ms = transfer_matrices(cd, all_l, tol)
    n = lams.size
    out_d, out_nu = [], []
    for j, lam in enumerate(lams):
        mu, nu_t = _eig_pair(Ms[j], xi(lam))
        logs = []
        for q in range(4):
            w = np.linalg.eigvals(Ms[(q + 1) * n + j])
            m = w[np.argmin(np.abs(w - mu))]
            logs.append(np.log(m / mu))
        d1 = (logs[0] - logs[1]) / (2 * h * lam)
        d2 = (logs[2] - logs[3]) / (4 * h * lam)
        out_d.append((4 * d1 - d2) / 3)
        out_nu.append(lam * nu_t)
    return np.array(out_d), np.array(out_nu)


def curve_from_xi(xi, g, p, cd, n_samples=None, h=1e-4, radius=1.0, max_residual=1e-5):
    """Spectral pair (a, b) for a loop xi in P_g and Cauchy data cd with period p.

    a = -lambda det xi exactly; b(lambda) = lambda nu d ln mu/d lambda sampled on a
    circle and fitted by least squares, then projected onto b-type reality.
    """
    if not pg_membership(xi, g, tol=1e-8):
        raise PreconditionError("xi is not in P_g")
    a = a_poly(xi, g)
    n = n_samples or 4 * (g + 2)
    theta = 2 * np.pi * (np.arange(n) + 0.37) / n
    lams = radius * np.exp(1j * theta)
    d, nu = dlnmu_samples(cd, xi, lams, h=h)
    vals = lams * nu * d
    V = np.vander(lams, g + 2, increasing=True)
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    resid = float(np.abs(V @ coef - vals).max() / max(1.0, np.abs(vals).max()))
    mirror = np.conj(coef[::-1])
    proj = 0.5 * (coef - mirror)
    pre = float(np.abs(coef + mirror).max())
    if resid > max_residual:
        raise CurveRecoveryError("b fit residual %.2e exceeds %.1e" % (resid, max_residual))
    return SpectralPair(a, CPoly(proj), g, p, fit_residual=max(resid, pre))


# --- paths on the curve -----------------------------------------------------------

class CurvePath:
    """Piecewise path in lambda with sheet-continued nu at Gauss-Legendre nodes.

    Each piece maps t in [0, 1] to (lambda, dlambda/dt); see `line_piece` and
    `arc_piece`.
    """

    def __init__(self, sp, pieces, panels=8, sheet=1, kind="segment", start_nu=None):
        self.sp, self.kind = sp, kind
        self.pieces, self.panels = list(pieces), int(panels)
        x, w = np.polynomial.legendre.leggauss(GL_ORDER)
        edges = np.linspace(0, 1, self.panels + 1)
        t = np.concatenate([(edges[i] + edges[i + 1]) / 2 + (edges[i + 1] - edges[i]) / 2 * x
                            for i in range(self.panels)])
        wt = np.concatenate([(edges[i + 1] - edges[i]) / 2 * w for i in range(self.panels)])
        lam, dlam, wts, tt = [], [], [], []
        for k, piece in enumerate(self.pieces):
            l, dl = piece(t)
            lam.append(l)
            dlam.append(dl)
            wts.append(wt)
            tt.append(k + t)
        self.lam = np.concatenate(lam).astype(complex)
        self.dlam = np.concatenate(dlam).astype(complex)
        self.weights = np.concatenate(wts)
        self.t = np.concatenate(tt) / len(self.pieces)
        self.sheet, self.start_nu = sheet, start_nu
        self.nu = self._continue(sheet, start_nu)

    def _continue(self, sheet, start_nu):
        lam = self.lam
        sq = np.sqrt(lam * self.sp.a(lam))
        nu = np.empty_like(sq)
        if start_nu is None:
            nu[0] = sheet * sq[0]
        else:
            nu[0] = sq[0] if abs(sq[0] - start_nu) <= abs(sq[0] + start_nu) else -sq[0]
        for k in range(1, len(sq)):
            # minimal distance to the previous node = agreement of phase
            dot = (sq[k] * np.conj(nu[k - 1])).real
            nu[k] = sq[k] if dot >= 0 else -sq[k]
            size = abs(sq[k]) * abs(nu[k - 1])
            if size > 1e-24 and abs(dot) < 0.2 * size:
                raise PathError("ambiguous sheet continuation near lambda=%s; refine the path" % lam[k])
        return nu

    def refined(self):
        return CurvePath(self.sp, self.pieces, 2 * self.panels, self.sheet, self.kind, self.start_nu)

    def other_sheet(self):
        return CurvePath(self.sp, self.pieces, self.panels, -self.sheet, self.kind,
                         None if self.start_nu is None else -self.start_nu)

    def end_nu(self):
        return self.nu[-1]

    def integrate(self, form):
        vals = form(self.lam, self.nu)
        return complex(np.sum(vals * self.dlam * self.weights))

    def check(self):
        la = self.lam * self.sp.a(self.lam)
        return float(np.max(np.abs(self.nu**2 - la) / (1 + np.abs(la))))

    def min_distance(self, pts, samples=64):
        """Distance from `pts` to the path, sampled densely between quadrature nodes."""
        pts = np.asarray(list(pts), dtype=complex)
        if pts.size == 0:
            return np.inf
        t = np.linspace(0, 1, samples * self.panels + 1)
        lam = np.concatenate([piece(t)[0] for piece in self.pieces])
        return float(np.abs(lam[:, None] - pts[None, :]).min())


def line_piece(a, b, cluster="none"):
    """Straight piece a -> b; cluster the nodes at branch-point ends."""
    d = b - a
    if cluster == "both":
        return lambda t: (a + d * (1 - np.cos(np.pi * t)) / 2, d * np.pi * np.sin(np.pi * t) / 2)
    if cluster == "end":
        return lambda t: (a + d * np.sin(np.pi * t / 2), d * np.pi / 2 * np.cos(np.pi * t / 2))
    if cluster == "start":
        return lambda t: (a + d * (1 - np.cos(np.pi * t / 2)), d * np.pi / 2 * np.sin(np.pi * t / 2))
    return lambda t: (a + d * t, d * np.ones_like(t))


def arc_piece(center, radius, th0, th1):
    def piece(t):
        e = np.exp(1j * (th0 + (th1 - th0) * t))
        return center + radius * e, 1j * (th1 - th0) * radius * e
    return piece


def _left_arc(q, r, p1, p2, left):
    f1, f2 = np.angle(p1 - q), np.angle(p2 - q)
    fl = np.angle(left)
    ccw = (f2 - f1) % (2 * np.pi)
    if (fl - f1) % (2 * np.pi) < ccw:
        return arc_piece(q, r, f1, f1 + ccw)
    return arc_piece(q, r, f1, f1 - ((f1 - f2) % (2 * np.pi)))


def routed_pieces(start, end, avoid, cluster_start=False, cluster_end=False, detour=True):
    """Straight route start -> end with semicircular detours around points in `avoid`."""
    d = end - start
    L = abs(d)
    dhat = d / L
    hits = []
    for q in avoid:
        if min(abs(q - start), abs(q - end)) < 1e-9 * (1 + L):
            continue
        s = ((q - start) * np.conj(dhat)).real
        dist = abs(start + s * dhat - q)
        if not 0 < s < L:
            continue
        others = [abs(q - o) for o in list(avoid) + [start, end] if abs(q - o) > 1e-12]
        r = min(0.3 * min(others), 0.25 * L)
        if dist < r:
            if not detour and dist < 1e-6:
                raise PathError("straight path passes within %.1e of branch point %s; "
                                "enable the semicircular detour" % (dist, q))
            if detour:
                hits.append((s, q, r, dist))
    hits.sort(key=lambda h: h[0])
    pieces, cur = [], start
    first = True
    for s, q, r, dist in hits:
        half = np.sqrt(r**2 - dist**2)
        p1 = start + (s - half) * dhat
        p2 = start + (s + half) * dhat
        pieces.append(line_piece(cur, p1, "start" if (first and cluster_start) else "none"))
        pieces.append(_left_arc(q, r, p1, p2, 1j * dhat))
        cur, first = p2, False
    if first:
        mode = {(True, True): "both", (True, False): "start", (False, True): "end"}.get(
            (cluster_start, cluster_end), "none")
    else:
        mode = "end" if cluster_end else "none"
    pieces.append(line_piece(cur, end, mode))
    return pieces


def segment_path(sp, alpha, beta, panels=8, sheet=1, detour=True):
    """Branch point alpha -> beta along a straight line, detouring other branch points."""
    roots, _ = sp.roots()
    avoid = [q for q in roots if abs(q - alpha) > 1e-9 and abs(q - beta) > 1e-9] + [0.0]
    pieces = routed_pieces(alpha, beta, avoid, True, True, detour)
    return CurvePath(sp, pieces, panels, sheet, "segment")


def circle_path(sp, radius, theta0=0.0, turns=1.0, panels=16, sheet=1, start_nu=None, center=0.0):
    piece = arc_piece(center, radius, theta0, theta0 + 2 * np.pi * turns)
    return CurvePath(sp, [piece], int(panels * max(turns, 1)), sheet, "cycle", start_nu)


# --- named forms ------------------------------------------------------------------

def form_dlnmu(sp):
    return lambda lam, nu: sp.b(lam) / (nu * lam)


def form_holomorphic(i):
    return lambda lam, nu: lam ** (i - 1) / nu


def form_h_times(j, base, sign=1.0):
    return lambda lam, nu: sign * nu * lam ** (-j) * base(lam, nu)


def contour_integral(path, form, min_branch_distance=1e-4):
    r, _ = poly_roots(path.sp.a) if path.sp.a.degree > 0 else (np.array([]), None)
    pts = np.concatenate([r, [0.0]])
    # open paths may start or end on a branch point
    ends = () if path.kind == "cycle" else (path.pieces[0](np.array([0.0]))[0][0],
                                            path.pieces[-1](np.array([1.0]))[0][0])
    pts = np.array([q for q in pts if all(abs(q - e) > 1e-3 for e in ends)], dtype=complex)
    dist = path.min_distance(pts)
    if dist < min_branch_distance:
        raise PathError("path passes within %.1e of a branch point" % dist)
    return path.integrate(form)


# --- closing conditions -------------------------------------------------------------

def segment_integral(sp, alpha, panels=8, sheet=1, detour=True):
    """Integral of (b/nu) dlambda/lambda from alpha to 1/conj(alpha)."""
    path = segment_path(sp, alpha, 1 / np.conj(alpha), panels, sheet, detour)
    return path.integrate(form_dlnmu(sp))


def h_value(sp, alpha, rho=None, panels=16):
    """Odd primitive h of d ln mu at the branch point alpha.

    Base point P0 = (rho, +sqrt(rho a(rho))) on a small circle around lambda = 0.
    One turn of that circle ends at the involuted point, so h(P0) = -I/2 with I
    the integral over the turn; h(alpha) adds an arc to arg(alpha) and a ray.
    """
    roots, _ = sp.roots()
    rho = 0.5 * np.abs(roots).min() if rho is None else rho
    form = form_dlnmu(sp)
    loop = circle_path(sp, rho, 0.0, 1.0, panels)
    h0 = -0.5 * loop.integrate(form)
    th = np.angle(alpha)
    pieces = [arc_piece(0.0, rho, 0.0, th)] if abs(th) > 1e-14 else []
    others = [q for q in roots if abs(q - alpha) > 1e-9] + [0.0]
    pieces += routed_pieces(rho * np.exp(1j * th), alpha, others, False, True)
    path = CurvePath(sp, pieces, panels, 1, "segment", start_nu=loop.nu[0])
    return h0 + path.integrate(form)


def a_cycle_integral(sp, alpha, panels=16):
    """Closed integral of d ln mu around the cut alpha -- 1/conj(alpha).

    Uses a circle enclosing exactly that pair when one exists, otherwise twice
    the segment integral (the collapsed cycle).
    """
    beta = 1 / np.conj(alpha)
    roots, _ = sp.roots()
    others = np.array([q for q in roots if abs(q - alpha) > 1e-9 and abs(q - beta) > 1e-9] + [0.0])
    mid, half = (alpha + beta) / 2, abs(beta - alpha) / 2
    gap = np.abs(others - mid).min() - half
    if gap > 1e-3 * (1 + half):
        # panel count follows radius / clearance so the nearby singularity stays resolved
        R = half + 0.5 * gap
        panels = max(panels, int(np.ceil(2.5 * R / (0.5 * gap))))
        path = circle_path(sp, R, 0.1, 1.0, panels, center=mid)
        return path.integrate(form_dlnmu(sp))
    return 2 * segment_integral(sp, alpha)


def lattice_distance(h):
    """Distance of h to pi i Z."""
    k = np.round(h.imag / np.pi)
    return abs(h - 1j * np.pi * k)


def closing_conditions(sp, tol=1e-5):
    roots, flags = sp.roots()
    if flags.any():
        raise PreconditionError("a has a multiple root")
    inner = [r for r in roots if abs(r) < 1]
    segs = [segment_integral(sp, r) for r in inner]
    hs = [h_value(sp, r) for r in roots]
    seg_ok = all(abs(s) < tol for s in segs)
    h_ok = all(lattice_distance(h) < tol * (1 + abs(h)) for h in hs)
    return {"segment_integrals": segs, "h_values": hs,
            "lattice_residuals": [lattice_distance(h) for h in hs],
            "pass": bool(seg_ok and h_ok)}


# --- Serre duality residue pairing --------------------------------------------------

def residue_pairing(sp, i, j, panels=16):
    """Res_0 + Res_inf of h_j omega_i with h_j = (nu lam^-j, -nu lam^-j), omega_i = lam^(i-1) dlam/nu.

    Lambda-residues are obtained from a doubled (closed on the curve) circle divided by 2.
    """
    roots, _ = sp.roots()
    r_in = 0.5 * np.abs(roots).min()
    r_out = 2.0 * np.abs(roots).max()
    w = form_holomorphic(i)
    inner = circle_path(sp, r_in, theta0=0.3, turns=2.0, panels=panels)
    outer = circle_path(sp, r_out, theta0=0.3, turns=2.0, panels=panels)
    res0 = inner.integrate(form_h_times(j, w, 1.0)) / (2 * 2j * np.pi)
    res_inf = -outer.integrate(form_h_times(j, w, -1.0)) / (2 * 2j * np.pi)
    return res0 + res_inf


# --- eigenvectors ---------------------------------------------------------------------

def eigenvector_at(xi, lam, nu, tol=1e-8, pole_flag=1e6):
    """v = (1, v2) with (xi(lam) - nu/lam) v = 0; returns (v, pole_flag)."""
    X = xi(lam)
    ev = nu / lam
    scale = max(1.0, np.abs(X).max())
    if abs(np.linalg.det(X - ev * np.eye(2))) > tol * scale**2:
        raise PreconditionError("(lambda, nu/lambda) is not an eigenpair of xi")
    if abs(X[0, 1]) > abs(X[1, 1] - ev) * 1e-14:
        v2 = (ev - X[0, 0]) / X[0, 1]
    else:
        v2 = X[1, 0] / (ev - X[1, 1])
    return np.array([1.0, v2]), bool(abs(v2) > pole_flag)
