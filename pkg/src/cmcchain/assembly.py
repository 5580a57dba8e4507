"""Matched asymptotics and gluing.

From the free data (r, K, neck scales eps, displacements delta) all
dependent parameters are derived in closed form: source strengths
eps^pm = eps/C^pm, neck translations d_k, separations sigma_k = Lambda_k(eps_k),
sphere centers t_k and neck chart centers p_k^flat.  The assembled surface
is produced as a single t-ascending ProfileCurve: perturbed spheres are
polar graphs r(1 + G) in their own normal charts, necks are the cutoff
interpolation between the scaled catenoid (or the first Delaunay neck) and
the numerically transported sphere graphs in the neck charts.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import blocks as bl
from .blocks import (DelaunayEnd, NeckBlock, SphereBlock, catenoid_graph,
                     catenoid_graph_derivs, delaunay_period, delaunay_solve,
                     expansion_constants, solve_green)
from .charts import NormalChart, cartesian_to_polar
from .errors import NoSolutionError, RangeError
from .revgeom import (REGION_DELAUNAY, REGION_NECK, REGION_SPHERE,
                      REGION_TRANSITION, ProfileCurve)

CHART_R_FACTOR = 2.0      # sphere-chart working radius R = 2r
CHART_RP = 0.5            # scaled neck-chart radius R' (weight plateau edge)
MATCH_POWER = 0.75        # matching radius eps^{3/4}
REGIME_SLACK = 10.0       # allowed factor around r^3 < eps < r^2


# -- cutoff -----------------------------------------------------------------

def _bump(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = z > 0
    out[m] = np.exp(-1.0 / z[m])
    return out


def chi(y):
    """Smooth monotone cutoff: 1 on y <= 1/2, 0 on y >= 1."""
    y = np.asarray(y, dtype=float)
    a = _bump(1.0 - y)
    b = _bump(y - 0.5)
    return a / (a + b + 1e-300)


def chi_derivs(y, h=1e-6):
    y = np.asarray(y, dtype=float)
    d1 = (chi(y + h) - chi(y - h)) / (2 * h)
    d2 = (chi(y + h) - 2 * chi(y) + chi(y - h)) / h ** 2
    return d1, d2


_yg = np.linspace(0.0, 1.0, 4001)
CHI_D1_SUP = float(np.max(np.abs(chi_derivs(_yg)[0])))
CHI_D2_SUP = float(np.max(np.abs(chi_derivs(_yg)[1])))
del _yg


def cutoff(x, eps):
    """chi(|x| / eps^{3/4}) on the scaled neck chart."""
    if eps <= 0:
        raise RangeError("cutoff needs eps > 0")
    return chi(np.asarray(x, dtype=float) / eps ** MATCH_POWER)


# -- matching relations -------------------------------------------------------

def lambda_map(r, eps, cp_ratio, cm_ratio):
    """sigma = Lambda(eps) = r eps (2(log 2 - log eps) - cm_ratio - cp_ratio).

    cp_ratio = c^+/C^+ of the lower sphere, cm_ratio = c^-/C^- of the upper
    sphere.  Strictly increasing for eps below lambda_eps_max.
    """
    eps = np.asarray(eps, dtype=float)
    bracket = 2.0 * (np.log(2.0) - np.log(eps)) - cm_ratio - cp_ratio
    if np.any(bracket - 2.0 <= 0):
        raise RangeError("eps beyond the monotone range of Lambda")
    return r * eps * bracket


def lambda_eps_max(cp_ratio, cm_ratio):
    """Upper end of the monotone range of Lambda (where dLambda/deps = 0)."""
    return np.exp((2.0 * np.log(2.0) - cm_ratio - cp_ratio - 2.0) / 2.0)


def invert_lambda(r, sigma, cp_ratio, cm_ratio):
    """Monotone inverse of lambda_map, relative accuracy 1e-12 or better."""
    if sigma == 0.0:
        return 0.0
    emax = lambda_eps_max(cp_ratio, cm_ratio) * (1 - 1e-9)
    smax = lambda_map(r, emax, cp_ratio, cm_ratio)
    if not 0 < sigma <= smax:
        raise NoSolutionError("sigma outside the image of Lambda")
    return brentq(lambda e: lambda_map(r, e, cp_ratio, cm_ratio) - sigma,
                  1e-300, emax, xtol=1e-300, rtol=8.9e-16)


@dataclass
class GluedConfiguration:
    """All free and derived parameters of one glued chain."""

    kind: str                       # 'finite' | 'one-ended'
    r: float
    K: int
    eps: np.ndarray                 # neck scales; finite: K entries, OE: K+1
    delta: np.ndarray               # same indexing (last OE entry = Delaunay)
    sigma: np.ndarray
    d: np.ndarray                   # matched neck translations
    t_centers: np.ndarray           # sphere centers t_0..t_K
    p_flat: np.ndarray              # neck chart centers
    blocks: list                    # SphereBlock per sphere 0..K
    necks: list                     # NeckBlock per neck
    delaunay: DelaunayEnd = None
    chart_R: float = 0.0
    chart_Rp: float = CHART_RP

    @property
    def n_necks(self):
        return len(self.necks)

    def cap_radius(self, j):
        """r eps_j^{3/4}, the matching radius of neck j (unscaled)."""
        return self.r * self.eps[j] ** MATCH_POWER

    def check_regime(self, slack=REGIME_SLACK):
        r = self.r
        ok = np.all(self.eps > r ** 3 / slack) and np.all(self.eps < slack * r ** 2)
        ok = ok and np.all(np.abs(self.delta) < np.sqrt(self.eps))
        return bool(ok)

    def to_json_dict(self):
        return {
            "kind": self.kind,
            "r": self.r,
            "K": self.K,
            "eps": list(map(float, self.eps)),
            "delta": list(map(float, self.delta)),
            "sigma": list(map(float, self.sigma)),
            "d": list(map(float, self.d)),
            "t_centers": list(map(float, self.t_centers)),
            "p_flat": list(map(float, self.p_flat)),
            "eps_src_plus": [b.eps_src_plus for b in self.blocks],
            "eps_src_minus": [b.eps_src_minus for b in self.blocks],
            "c_plus": [b.c_plus for b in self.blocks],
            "c_minus": [b.c_minus for b in self.blocks],
            "C_log": bl.LOG_COEFF,
            "cap_plus": [b.cap_plus for b in self.blocks],
            "cap_minus": [b.cap_minus for b in self.blocks],
            "delaunay": None if self.delaunay is None else {
                "T": self.delaunay.T, "eps": self.delaunay.eps,
                "T_K": self.delaunay.T_K, "omega": self.delaunay.omega,
            },
            "chart_R": self.chart_R,
            "chart_Rp": self.chart_Rp,
        }


def derive_configuration(profile, kind, r, K, eps, delta=None, light=False):
    """Build blocks and derived data from the free parameters.

    eps: neck scales; K entries for the finite kind (neck j joins spheres j
    and j+1 on the positive side), K+1 for one-ended (the last entry is the
    Delaunay neck radius).  light=True skips the Delaunay profile solve
    (positions only need the period).
    """
    eps = np.asarray(eps, dtype=float)
    n_necks = K if kind == "finite" else K + 1
    if eps.size != n_necks:
        raise RangeError("expected %d neck scales, got %d" % (n_necks, eps.size))
    if np.any(eps <= 0):
        raise RangeError("neck scales must be positive")
    delta = np.zeros(n_necks) if delta is None else np.asarray(delta, dtype=float)

    two_pi = 2 * np.pi
    blocks_ = []
    for j in range(K + 1):
        if kind == "finite":
            # the center sphere sees the mirrored neck 0 on its minus pole
            src_minus = two_pi * eps[j - 1] if j > 0 else two_pi * eps[0]
            src_plus = two_pi * eps[j] if j < K else 0.0
        else:
            src_minus = two_pi * eps[j - 1] if j > 0 else 0.0
            src_plus = two_pi * eps[j]
        g = solve_green(src_plus, src_minus)
        cp, Cp, cm, Cm = expansion_constants(g)
        blocks_.append(SphereBlock(
            index=j, center_t=0.0, r=r,
            eps_src_plus=src_plus, eps_src_minus=src_minus,
            green=g, A_mult=g.A,
            c_plus=cp, C_plus=Cp, c_minus=cm, C_minus=Cm,
            cap_plus=(r * eps[j] ** MATCH_POWER if (kind == "one-ended" or j < K) else 0.0),
            cap_minus=(r * eps[j - 1] ** MATCH_POWER if j > 0 else
                       (r * eps[0] ** MATCH_POWER if kind == "finite" else 0.0)),
        ))

    sigma = np.empty(n_necks)
    d = np.empty(n_necks)
    delaunay = None
    for j in range(n_necks):
        if kind == "one-ended" and j == K:
            T = delaunay_period(eps[K])
            delaunay = None if light else delaunay_solve(T)
            sigma[j] = r * (T - 2.0)
            cp_ratio = blocks_[K].c_plus / blocks_[K].C_plus
            d[j] = (np.log(2.0) - np.log(eps[K])) - sigma[j] / (2 * r * eps[K]) - cp_ratio
        else:
            cp_ratio = blocks_[j].c_plus / blocks_[j].C_plus
            cm_ratio = blocks_[j + 1].c_minus / blocks_[j + 1].C_minus
            sigma[j] = lambda_map(r, eps[j], cp_ratio, cm_ratio)
            d[j] = 0.5 * (cm_ratio - cp_ratio)

    t_centers = np.empty(K + 1)
    t_centers[0] = 0.0
    for j in range(K):
        t_centers[j + 1] = t_centers[j] + 2 * r + sigma[j]
    for j, b in enumerate(blocks_):
        b.center_t = t_centers[j]
    p_flat = np.array([t_centers[min(j, K)] + r + sigma[j] / 2 for j in range(n_necks)])

    necks = [NeckBlock(index=j, eps=float(eps[j]), d=float(d[j]),
                       delta=float(delta[j]), p_flat=float(p_flat[j]))
             for j in range(n_necks)]
    if delaunay is not None:
        delaunay.T_K = float(p_flat[K] + r * eps[K] * (d[K] + delta[K]))
        delaunay.omega = r * eps[K] ** MATCH_POWER
    return GluedConfiguration(
        kind=kind, r=r, K=K, eps=eps, delta=delta, sigma=sigma, d=d,
        t_centers=t_centers, p_flat=p_flat, blocks=blocks_, necks=necks,
        delaunay=delaunay, chart_R=CHART_R_FACTOR * r,
    )


def configuration_from_sigma(profile, kind, r, K, sigma, delta=None, n_iter=8):
    """Invert the matching maps: recover eps from separations sigma.

    The expansion constants couple weakly to the neighbouring neck scales,
    so the per-neck inverse is iterated to a fixed point.
    """
    sigma = np.asarray(sigma, dtype=float)
    eps = np.full(sigma.shape, 1e-6)
    cfg = derive_configuration(profile, kind, r, K, eps, delta)
    for _ in range(n_iter):
        new_eps = np.empty_like(eps)
        for j in range(sigma.size):
            if kind == "one-ended" and j == K:
                new_eps[j] = delaunay_solve(2.0 + sigma[j] / r).eps
            else:
                cp_ratio = cfg.blocks[j].c_plus / cfg.blocks[j].C_plus
                cm_ratio = cfg.blocks[j + 1].c_minus / cfg.blocks[j + 1].C_minus
                new_eps[j] = invert_lambda(r, sigma[j], cp_ratio, cm_ratio)
        drift = np.max(np.abs(new_eps - eps) / np.maximum(new_eps, 1e-300))
        eps = new_eps
        cfg = derive_configuration(profile, kind, r, K, eps, delta)
        if drift < 1e-14:
            break
    return cfg


# -- sampling ----------------------------------------------------------------

@dataclass
class SamplingSpec:
    n_sphere: int = 220       # mid-latitude samples per sphere
    n_pole: int = 130         # log-clustered samples per pole zone
    n_waist: int = 150        # samples on the pure catenoid piece
    n_trans: int = 90         # per transition annulus
    n_fsph: int = 150         # construction samples for the F_sph spline
    del_per_period: int = 380
    del_periods: float = 4.0


def _log_grid(lo, hi, n):
    return np.exp(np.linspace(np.log(lo), np.log(hi), n))


def _theta_grid(th_lo, th_hi, spec):
    """Polar-angle grid on [th_lo, th_hi], geometrically clustered toward
    any end that is a neck handoff (theta near 0 or pi)."""
    parts = []
    mid_lo, mid_hi = th_lo, th_hi
    if 1e-12 < th_lo < 0.1:
        zone = min(40.0 * th_lo, th_lo + 0.35 * (th_hi - th_lo))
        parts.append(_log_grid(th_lo, zone, spec.n_pole))
        mid_lo = zone
    gap = np.pi - th_hi
    if 1e-12 < gap < 0.1:
        zone = min(40.0 * gap, gap + 0.35 * (th_hi - mid_lo))
        parts.append(np.pi - _log_grid(gap, zone, spec.n_pole)[::-1])
        mid_hi = np.pi - zone
    parts.insert(1 if (1e-12 < th_lo < 0.1) else 0,
                 np.linspace(mid_lo, mid_hi, spec.n_sphere))
    th = np.unique(np.concatenate(parts))
    return th[(th >= th_lo - 1e-15) & (th <= th_hi + 1e-15)]


@dataclass
class _SphereGraph:
    """Transported graph of a perturbed sphere over a neck chart (scaled)."""

    X: np.ndarray             # scaled transverse abscissa, ascending
    theta: np.ndarray         # sphere polar angle from the facing pole
    spline: CubicSpline       # x0(log X), scaled heights

    def F(self, X):
        return self.spline(np.log(X))

    def F1(self, X):
        return self.spline(np.log(X), 1) / X

    def F2(self, X):
        lx = np.log(X)
        return (self.spline(lx, 2) - self.spline(lx, 1)) / X ** 2

    def theta_at(self, X):
        return float(np.interp(X, self.X, self.theta))


def _sphere_chart_polar(block, r, theta):
    """Chart polar data R(theta) = r (1 + G) of the perturbed sphere.

    Source-free poles (caps of terminal spheres) use the regular limits of G.
    """
    G = block.green
    theta = np.asarray(theta, dtype=float)
    R = np.empty_like(theta)
    dR = np.empty_like(theta)
    ddR = np.empty_like(theta)
    interior = (theta > 1e-11) & (theta < np.pi - 1e-11)
    if np.any(interior):
        th = theta[interior]
        R[interior] = r * (1.0 + G.value(th))
        dR[interior] = r * G.d1(th)
        ddR[interior] = r * G.d2(th)
    for sign, at in ((+1, ~interior & (theta <= 1e-11)),
                     (-1, ~interior & (theta >= np.pi - 1e-11))):
        if np.any(at):
            R[at] = r * (1.0 + G.pole_value(sign))
            dR[at] = 0.0
            ddR[at] = r * G.pole_d2(sign)
    return R, dR, ddR


def _transported_sphere_graph(profile, config, j_neck, side, spec):
    """The adjacent perturbed sphere as a graph over the scaled neck chart.

    side=-1: sphere j_neck below the neck (its + pole faces the chart);
    side=+1: sphere j_neck+1 above (its - pole faces the chart).
    """
    r = config.r
    eps = config.eps[j_neck]
    Xh = eps ** MATCH_POWER
    j_sph = j_neck if side < 0 else j_neck + 1
    block = config.blocks[j_sph]
    theta = _log_grid(0.3 * Xh, 2.4 * Xh, spec.n_fsph)   # angle from facing pole
    th_from_plus = theta if side < 0 else np.pi - theta
    R, _, _ = _sphere_chart_polar(block, r, th_from_plus)
    sphere_chart = NormalChart(profile, config.t_centers[j_sph])
    ch = sphere_chart.exp(R, th_from_plus)
    neck_chart = NormalChart(profile, config.p_flat[j_neck])
    rhat, beta = neck_chart.log(ch.T, ch.X)
    x0 = rhat * np.cos(beta) / r
    xr = rhat * np.sin(beta) / r
    order = np.argsort(xr)
    xr, x0, theta = xr[order], x0[order], theta[order]
    return _SphereGraph(X=xr, theta=theta, spline=CubicSpline(np.log(xr), x0))


def _piece_from_chart_cart(chart, r, x0, xr, d0, dr, dd0, ddr, lam, region,
                           region_index, neck_idx=None, extra_ann=None):
    """Map a chart-cartesian curve (scaled coords; unscaled = r*(x0, xr)) with
    lam-derivatives to a global ProfileCurve piece carrying chart data."""
    rr, bb, drh, dbb, ddrh, ddbb = cartesian_to_polar(
        r * x0, r * xr, r * d0, r * dr, r * dd0, r * ddr)
    T, X, Tl, Xl, Tll, Xll = chart.map_curve(rr, bb, drh, dbb, ddrh, ddbb)
    # chart data stored per unscaled chart-Euclidean arclength
    wch = np.hypot(d0, dr)
    dwc = (d0 * dd0 + dr * ddr) / wch
    ann = {
        "chart_center": np.full(np.size(x0), chart.center_t),
        "x0c": r * x0, "xrc": r * xr,
        "dx0c": d0 / wch, "dxrc": dr / wch,
        "ddx0c": (dd0 / wch ** 2 - d0 * dwc / wch ** 3) / r,
        "ddxrc": (ddr / wch ** 2 - dr * dwc / wch ** 3) / r,
        "Jchart": -dr / wch,
    }
    if neck_idx is not None:
        ann["neck_idx"] = np.full(np.size(x0), float(neck_idx))
        ann["Xn"] = np.asarray(xr, dtype=float).copy()
        ann["x0n"] = np.asarray(x0, dtype=float).copy()
    if extra_ann:
        ann.update(extra_ann)
    return ProfileCurve.from_parametric(
        T, X, Tl, Xl, Tll, Xll, region=region, region_index=region_index,
        lam=lam, ann=ann)


def _sphere_piece(profile, config, j_sph, th_lo, th_hi, spec, chart=None):
    """Perturbed sphere j as a global piece over polar angles [th_lo, th_hi]
    (measured from the +t pole), stored t-ascending."""
    r = config.r
    block = config.blocks[j_sph]
    chart = chart or NormalChart(profile, config.t_centers[j_sph])
    theta = _theta_grid(th_lo, th_hi, spec)[::-1]   # descending theta = ascending t
    R, dRdth, ddRdth = _sphere_chart_polar(block, r, theta)
    # lam = pi - theta, so d/dlam = -d/dtheta
    lam = np.pi - theta
    x0 = R * np.cos(theta) / r
    xr = R * np.sin(theta) / r
    d0 = -(dRdth * np.cos(theta) - R * np.sin(theta)) / r
    dr = -(dRdth * np.sin(theta) + R * np.cos(theta)) / r
    dd0 = (ddRdth * np.cos(theta) - 2 * dRdth * np.sin(theta) - R * np.cos(theta)) / r
    ddr = (ddRdth * np.sin(theta) + 2 * dRdth * np.cos(theta) - R * np.sin(theta)) / r
    xr[theta < 1e-14] = 0.0
    xr[theta > np.pi - 1e-14] = 0.0
    return _piece_from_chart_cart(
        chart, r, x0, xr, d0, dr, dd0, ddr, lam,
        region=REGION_SPHERE, region_index=j_sph,
        extra_ann={"theta": theta, "sphere_k": np.full(theta.size, float(j_sph))},
    )


def _catenoid_waist_piece(profile, config, j, spec, chart):
    nk = config.necks[j]
    eps = nk.eps
    Xhalf = 0.5 * eps ** MATCH_POWER
    U = np.arccosh(Xhalf / eps)
    u = np.linspace(-U, U, spec.n_waist)
    x0 = eps * (u + nk.d + nk.delta)
    xr = eps * np.cosh(u)
    d0 = np.full_like(u, eps)
    dr = eps * np.sinh(u)
    dd0 = np.zeros_like(u)
    ddr = eps * np.cosh(u)
    return _piece_from_chart_cart(
        chart, config.r, x0, xr, d0, dr, dd0, ddr, u,
        region=REGION_NECK, region_index=j, neck_idx=j)


def _transition_piece(profile, config, j, side, graph, spec, chart, inner=None):
    """Cutoff-interpolated annulus X in [Xh/2, Xh] of neck j on one side.

    side=-1: lower annulus (t ascends as X descends); +1: upper.  `inner`
    optionally replaces the catenoid model by callables (F, F1, F2) of X
    (used when gluing the Delaunay end).
    """
    r = config.r
    nk = config.necks[j]
    eps = nk.eps
    Xh = eps ** MATCH_POWER
    lam = np.linspace(np.log(0.5 * Xh), np.log(Xh), spec.n_trans)
    sgn = 1.0
    if side < 0:
        lam = -lam[::-1]          # ascending lam, X = exp(-lam) descending
        sgn = -1.0
    X = np.exp(sgn * lam)
    if inner is None:
        Fn = catenoid_graph(eps, nk.d + nk.delta, side, X)
        Fn1, Fn2 = catenoid_graph_derivs(eps, side, X)
    else:
        Fn, Fn1, Fn2 = inner[0](X), inner[1](X), inner[2](X)
    Fs, Fs1, Fs2 = graph.F(X), graph.F1(X), graph.F2(X)
    y = X / Xh
    c = chi(y)
    c1, c2 = chi_derivs(y)
    c1 = c1 / Xh
    c2 = c2 / Xh ** 2
    F = c * Fn + (1 - c) * Fs
    F1 = c1 * (Fn - Fs) + c * Fn1 + (1 - c) * Fs1
    F2 = c2 * (Fn - Fs) + 2 * c1 * (Fn1 - Fs1) + c * Fn2 + (1 - c) * Fs2
    dXdl = sgn * X
    ddXdl = X
    d0 = F1 * dXdl
    dr = dXdl
    dd0 = F2 * X * X + F1 * ddXdl
    ddr = ddXdl
    return _piece_from_chart_cart(
        chart, r, F, X, d0, dr, dd0, ddr, lam,
        region=REGION_TRANSITION, region_index=j, neck_idx=j)


def _delaunay_piece(profile, config, spec):
    """The pure truncated Delaunay end, from the lower-branch entry of the
    first neck out to del_periods periods (global coordinates)."""
    r = config.r
    de = config.delaunay
    eps = de.eps
    Xhalf = 0.5 * eps ** MATCH_POWER
    x_entry = -float(np.interp(Xhalf, de.rho_half, de.x_half))
    x_end = spec.del_periods * de.T
    half = (1 - np.cos(np.linspace(0, np.pi, max(spec.del_per_period // 2, 32)))) / 2
    seg_edges = [x_entry]
    nxt = de.T / 2
    while seg_edges[-1] < x_end:
        seg_edges.append(min(nxt, x_end))
        nxt += de.T / 2
    xs = []
    for a, b in zip(seg_edges[:-1], seg_edges[1:]):
        seg = a + (b - a) * half
        xs.append(seg[:-1] if b < x_end else seg)
    x = np.concatenate(xs)
    rho, rd, rdd = de.rho_derivs(x)
    t = de.T_K + r * x
    j_near = np.round(x / de.T)
    x0n = x - j_near * de.T
    x0n = np.where(j_near == 0, x + eps * (config.necks[config.K].d + config.necks[config.K].delta), x0n)
    ann = {
        "del_x": x,
        "Jchart": -rd / np.hypot(1.0, rd),
        "neck_idx": config.K + j_near,
        "Xn": rho.copy(),
        "x0n": x0n,
    }
    return ProfileCurve.from_parametric(
        t, r * rho, np.full_like(x, r), r * rd, np.zeros_like(x), r * rdd,
        region=REGION_DELAUNAY, region_index=config.K, lam=x, ann=ann)


def _neck_pieces(profile, config, j, graphs, spec, chart):
    lower = _transition_piece(profile, config, j, -1, graphs[(j, -1)], spec, chart)
    waist = _catenoid_waist_piece(profile, config, j, spec, chart)
    upper = _transition_piece(profile, config, j, +1, graphs[(j, +1)], spec, chart)
    return [lower, waist, upper]


def _delaunay_glue_pieces(profile, config, graphs, spec, chart):
    """Lower transition mixing the first Delaunay neck with sphere K, then
    the pure truncated end."""
    r = config.r
    de = config.delaunay
    Xg = _log_grid(0.3 * de.eps ** MATCH_POWER, 2.4 * de.eps ** MATCH_POWER, spec.n_fsph)
    xg = -np.interp(Xg, de.rho_half, de.x_half)
    rhat, beta = chart.log(de.T_K + r * xg, r * Xg)
    x0 = rhat * np.cos(beta) / r
    xr = rhat * np.sin(beta) / r
    order = np.argsort(xr)
    spl = CubicSpline(np.log(xr[order]), x0[order])

    def F(X):
        return spl(np.log(X))

    def F1(X):
        return spl(np.log(X), 1) / X

    def F2(X):
        lx = np.log(X)
        return (spl(lx, 2) - spl(lx, 1)) / X ** 2

    lower = _transition_piece(profile, config, config.K, -1,
                              graphs[(config.K, -1)], spec, chart,
                              inner=(F, F1, F2))
    return [lower, _delaunay_piece(profile, config, spec)]


def assemble(profile, config, spec=None):
    """The glued approximate surface as a single t-ascending ProfileCurve."""
    spec = spec or SamplingSpec()
    K = config.K
    kind = config.kind

    neck_charts = [NormalChart(profile, nb.p_flat) for nb in config.necks]
    sphere_charts = [NormalChart(profile, tc) for tc in config.t_centers]

    graphs = {}
    for j in range(config.n_necks):
        graphs[(j, -1)] = _transported_sphere_graph(profile, config, j, -1, spec)
        if not (kind == "one-ended" and j == K):
            graphs[(j, +1)] = _transported_sphere_graph(profile, config, j, +1, spec)

    def handoff(j, side):
        return graphs[(j, side)].theta_at(config.eps[j] ** MATCH_POWER)

    pieces = []
    if kind == "finite":
        pieces.append(_sphere_piece(profile, config, 0, handoff(0, -1), np.pi / 2,
                                    spec, chart=sphere_charts[0]))
        for j in range(K):
            pieces.extend(_neck_pieces(profile, config, j, graphs, spec, neck_charts[j]))
            th_minus = np.pi - handoff(j, +1)
            th_plus = handoff(j + 1, -1) if j + 1 < K else 0.0
            pieces.append(_sphere_piece(profile, config, j + 1, th_plus, th_minus,
                                        spec, chart=sphere_charts[j + 1]))
        half = ProfileCurve.concatenate(pieces)
        sl = slice(1, None)
        pos = ProfileCurve(
            s=half.s[sl], t=half.t[sl], rho=half.rho[sl], dt=half.dt[sl],
            drho=half.drho[sl], ddt=half.ddt[sl], ddrho=half.ddrho[sl],
            region=half.region[sl], region_index=half.region_index[sl],
            closure=half.closure, ann={k: v[sl] for k, v in half.ann.items()})
        curve = ProfileCurve.concatenate([half.mirrored(), pos], closure="reflection")
    else:
        pieces.append(_sphere_piece(profile, config, 0, handoff(0, -1), np.pi,
                                    spec, chart=sphere_charts[0]))
        for j in range(K):
            pieces.extend(_neck_pieces(profile, config, j, graphs, spec, neck_charts[j]))
            th_minus = np.pi - handoff(j, +1)
            th_plus = handoff(j + 1, -1) if j + 1 < K else handoff(K, -1)
            pieces.append(_sphere_piece(profile, config, j + 1, th_plus, th_minus,
                                        spec, chart=sphere_charts[j + 1]))
        pieces.extend(_delaunay_glue_pieces(profile, config, graphs, spec,
                                            neck_charts[K]))
        curve = ProfileCurve.concatenate(pieces, closure="semi-infinite")
    curve.check_invariants()
    _annotate_weight_radius(profile, curve, config)
    return curve


def _annotate_weight_radius(profile, curve, config):
    """Per-sample scaled chart coordinates to the nearest neck center.

    Stores 'chart_rad' (scaled polar radius, feeds the weight function),
    'near_center_t' (the owning neck chart center), and the scaled axial /
    transverse decomposition 'near_x0', 'near_Xr' (feed the projection
    windows and the neck kernel weight).
    """
    r = config.r
    centers = list(config.p_flat)
    if config.kind == "finite":
        centers = [-c for c in config.p_flat[::-1]] + centers
    elif config.delaunay is not None:
        de = config.delaunay
        jmax = int(np.ceil((curve.t.max() - de.T_K) / (r * de.T))) + 1
        centers += [de.T_K + j * r * de.T for j in range(1, jmax + 1)]
    rad = np.full(curve.n, np.inf)
    near = np.full(curve.n, np.nan)
    nx0 = np.full(curve.n, np.nan)
    nxr = np.full(curve.n, np.nan)
    for c in centers:
        m = np.abs(curve.t - c) <= 0.75 * r
        if not np.any(m):
            continue
        if profile.is_flat:
            sA = np.sqrt(profile.A(float(c)))
            dx0 = (curve.t[m] - c) / r
            dxr = sA * curve.rho[m] / r
            rr = np.hypot(dx0, dxr)
        else:
            chart = NormalChart(profile, float(c))
            rhat, beta = chart.log(curve.t[m], curve.rho[m])
            rr = rhat / r
            dx0 = rr * np.cos(beta)
            dxr = rr * np.sin(beta)
        idx = np.where(m)[0]
        upd = rr < rad[idx]
        sel = idx[upd]
        rad[sel] = rr[upd]
        near[sel] = c
        nx0[sel] = dx0[upd]
        nxr[sel] = dxr[upd]
    curve.ann["chart_rad"] = rad
    curve.ann["near_center_t"] = near
    curve.ann["near_x0"] = nx0
    curve.ann["near_Xr"] = nxr


def matching_mismatch(profile, config, j, n=40):
    """max |F_sph - F_neck asymptote| near the matching radius of neck j;
    the optimal-matching residual, O(eps^{3/2})."""
    eps = config.eps[j]
    Xh = eps ** MATCH_POWER
    out = []
    for side in (-1, +1):
        g = _transported_sphere_graph(profile, config, j, side, SamplingSpec())
        X = np.linspace(0.8 * Xh, 1.2 * Xh, n)
        nk = config.necks[j]
        Fn = catenoid_graph(eps, nk.d, side, X)
        out.append(float(np.max(np.abs(g.F(X) - Fn))))
    return max(out)
