"""Geometry of axially symmetric surfaces.

A surface of revolution about the axis gamma is represented by its sampled
generating curve (t(s), rho(s)) with exact first and second derivatives
stored per sample.  Fundamental forms and mean curvature are provided with
respect to both the flat coordinate metric and the ambient warped-product
metric; the mean curvature convention is the sum of principal curvatures
with the outward normal, so a round sphere of radius r has H = 2/r.

Orientation convention: curves are parametrized so that t is (weakly)
increasing along the meridian; the outward unit normal is then the +90
degree rotation (-rho', t') of the unit tangent.
"""

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (DomainError, PerturbationTooLargeError, RangeError,
                     SingularPointError)

REGION_SPHERE = 0
REGION_TRANSITION = 1
REGION_NECK = 2
REGION_DELAUNAY = 3
REGION_NAMES = {0: "sphere", 1: "transition", 2: "neck", 3: "delaunay"}

_AXIS_TOL = 1e-13


@dataclass
class ProfileCurve:
    """Sampled generating curve with per-sample derivative data.

    Derivatives are with respect to the stored parameter s (Euclidean
    arclength of the generating curve).  `region` holds per-sample region
    codes, `region_index` the owning sphere/neck index.  `ann` carries
    optional per-sample annotations (chart radii, weights, ...).
    """

    s: np.ndarray
    t: np.ndarray
    rho: np.ndarray
    dt: np.ndarray
    drho: np.ndarray
    ddt: np.ndarray
    ddrho: np.ndarray
    region: np.ndarray
    region_index: np.ndarray
    closure: str = "open"
    ann: dict = field(default_factory=dict)

    def __post_init__(self):
        self._spline_t = None
        self._spline_rho = None

    @property
    def n(self):
        return self.s.size

    def check_invariants(self):
        if np.any(self.rho < -1e-15):
            raise ValueError("rho must be nonnegative")
        speed = self.dt ** 2 + self.drho ** 2
        if np.any(speed <= 0):
            raise ValueError("curve parametrization is singular")
        return True

    # -- spline access -----------------------------------------------------
    def _splines(self):
        if self._spline_t is None:
            self._spline_t = CubicSpline(self.s, self.t)
            self._spline_rho = CubicSpline(self.s, self.rho)
        return self._spline_t, self._spline_rho

    def at(self, s):
        """(t, rho, dt, drho, ddt, ddrho) at parameter s via the spline."""
        st, sr = self._splines()
        s = np.asarray(s, dtype=float)
        return (st(s), sr(s), st(s, 1), sr(s, 1), st(s, 2), sr(s, 2))

    def nearest_index(self, s):
        return int(np.clip(np.searchsorted(self.s, s), 0, self.n - 1))

    # -- constructors ------------------------------------------------------
    @classmethod
    def from_parametric(cls, t, rho, dt_dl, drho_dl, ddt_dl, ddrho_dl,
                        region, region_index, closure="open", ann=None,
                        lam=None, s0=0.0):
        """Build from an arbitrary parametrization; converts derivative data
        to Euclidean arclength and accumulates s by trapezoidal quadrature."""
        t = np.asarray(t, dtype=float)
        rho = np.asarray(rho, dtype=float)
        w = np.hypot(dt_dl, drho_dl)
        dwdl = (dt_dl * ddt_dl + drho_dl * ddrho_dl) / w
        dt = dt_dl / w
        drho = drho_dl / w
        ddt = ddt_dl / w ** 2 - dt_dl * dwdl / w ** 3
        ddrho = ddrho_dl / w ** 2 - drho_dl * dwdl / w ** 3
        if lam is None:
            lam = np.arange(t.size, dtype=float)
        ds = np.diff(lam) * 0.5 * (w[1:] + w[:-1])
        s = s0 + np.concatenate([[0.0], np.cumsum(ds)])
        region = np.broadcast_to(np.asarray(region), t.shape).copy()
        region_index = np.broadcast_to(np.asarray(region_index), t.shape).copy()
        return cls(s=s, t=t, rho=rho, dt=dt, drho=drho, ddt=ddt, ddrho=ddrho,
                   region=region, region_index=region_index, closure=closure,
                   ann=dict(ann or {}))

    @classmethod
    def concatenate(cls, pieces, closure="open"):
        """Join pieces in order; s is re-accumulated to stay increasing."""
        arrays = {}
        for key in ("t", "rho", "dt", "drho", "ddt", "ddrho", "region", "region_index"):
            arrays[key] = np.concatenate([getattr(p, key) for p in pieces])
        # chain the s-parameters with chord gaps at the seams
        s_parts = []
        offset = 0.0
        prev_end = None
        for p in pieces:
            s = p.s - p.s[0]
            if prev_end is not None:
                gap = float(np.hypot(p.t[0] - prev_end[0], p.rho[0] - prev_end[1]))
                offset += max(gap, 1e-15)
            s_parts.append(s + offset)
            offset = s_parts[-1][-1]
            prev_end = (p.t[-1], p.rho[-1])
        arrays["s"] = np.concatenate(s_parts)
        keys = set()
        for p in pieces:
            keys.update(p.ann.keys())
        ann = {}
        for k in keys:
            cols = []
            for p in pieces:
                if k in p.ann:
                    cols.append(np.asarray(p.ann[k], dtype=float))
                else:
                    cols.append(np.full(p.n, np.nan))
            ann[k] = np.concatenate(cols)
        return cls(closure=closure, ann=ann, **arrays)

    def mirrored(self):
        """The t -> -t reflection, reparametrized so t still ascends."""
        sl = slice(None, None, -1)
        out = ProfileCurve(
            s=(self.s[-1] - self.s)[sl],
            t=-self.t[sl], rho=self.rho[sl],
            dt=self.dt[sl], drho=-self.drho[sl],
            ddt=-self.ddt[sl], ddrho=self.ddrho[sl],
            region=self.region[sl].copy(), region_index=self.region_index[sl].copy(),
            closure=self.closure,
            ann={k: v[sl].copy() for k, v in self.ann.items()},
        )
        for key in ("x0n", "Jchart", "x0c", "chart_center"):
            if key in out.ann:
                out.ann[key] = -out.ann[key]
        if "theta" in out.ann:
            out.ann["theta"] = np.pi - out.ann["theta"]
        # chart derivative data does not survive reflection cleanly; drop it
        for key in ("dx0c", "dxrc", "ddx0c", "ddxrc"):
            out.ann.pop(key, None)
        return out

    # -- serialization -----------------------------------------------------
    def to_csv(self, path_or_buf):
        buf = path_or_buf if hasattr(path_or_buf, "write") else open(path_or_buf, "w")
        try:
            buf.write("s,t,rho,region\n")
            for i in range(self.n):
                buf.write("%.17g,%.17g,%.17g,%s\n"
                          % (self.s[i], self.t[i], self.rho[i], REGION_NAMES[int(self.region[i])]))
        finally:
            if buf is not path_or_buf:
                buf.close()

    @classmethod
    def from_csv(cls, path_or_buf):
        buf = path_or_buf if hasattr(path_or_buf, "read") else open(path_or_buf)
        try:
            header = buf.readline()
            rows = [line.strip().split(",") for line in buf if line.strip()]
        finally:
            if buf is not path_or_buf:
                buf.close()
        names = {v: k for k, v in REGION_NAMES.items()}
        s = np.array([float(r[0]) for r in rows])
        t = np.array([float(r[1]) for r in rows])
        rho = np.array([float(r[2]) for r in rows])
        region = np.array([names[r[3]] for r in rows])
        st = CubicSpline(s, t)
        sr = CubicSpline(s, rho)
        return cls(s=s, t=t, rho=rho, dt=st(s, 1), drho=sr(s, 1),
                   ddt=st(s, 2), ddrho=sr(s, 2), region=region,
                   region_index=np.full(s.size, -1), closure="open")

    def to_obj(self, path_or_buf, angular_res=64):
        """Tessellate the revolution surface.  Every sample emits angular_res
        vertices (axis samples emit a degenerate ring, faces there form fans)."""
        buf = path_or_buf if hasattr(path_or_buf, "write") else open(path_or_buf, "w")
        try:
            m = int(angular_res)
            thetas = 2 * np.pi * np.arange(m) / m
            for i in range(self.n):
                for th in thetas:
                    buf.write("v %.12g %.12g %.12g\n"
                              % (self.rho[i] * np.cos(th), self.rho[i] * np.sin(th), self.t[i]))
            for i in range(self.n - 1):
                a = i * m
                b = (i + 1) * m
                for j in range(m):
                    jn = (j + 1) % m
                    buf.write("f %d %d %d\n" % (a + j + 1, b + j + 1, b + jn + 1))
                    buf.write("f %d %d %d\n" % (a + j + 1, b + jn + 1, a + jn + 1))
        finally:
            if buf is not path_or_buf:
                buf.close()


@dataclass
class FundamentalForms:
    """First/second fundamental form data at a point of the curve."""

    h: np.ndarray          # diag(h_ss, h_theta_theta)
    B: np.ndarray          # diag(B_ss, B_theta_theta)
    H: float
    kappa_m: float         # meridian principal curvature
    kappa_p: float         # parallel principal curvature
    N: tuple               # (axial, radial) components of the unit normal
    metric: str            # 'euclidean' | 'ambient'

    @property
    def B_norm(self):
        return float(np.hypot(self.kappa_m, self.kappa_p))


def _sample_data(curve, idx=None, s=None):
    if idx is not None:
        return (curve.t[idx], curve.rho[idx], curve.dt[idx], curve.drho[idx],
                curve.ddt[idx], curve.ddrho[idx])
    return curve.at(s)


def euclidean_forms(curve, idx=None, s=None):
    """Fundamental forms w.r.t. the flat metric dt^2 + dx^2 + dy^2."""
    t, rho, tp, rp, tpp, rpp = _sample_data(curve, idx, s)
    return _forms(t, rho, tp, rp, tpp, rpp, A=1.0, A1=0.0, metric="euclidean")


def ambient_forms_exact(profile, curve, idx=None, s=None):
    """Fundamental forms w.r.t. g = dt^2 + A(t) delta, exact Christoffels."""
    t, rho, tp, rp, tpp, rpp = _sample_data(curve, idx, s)
    A = float(profile.A(t))
    A1 = float(profile.A(t, 1))
    return _forms(t, rho, tp, rp, tpp, rpp, A=A, A1=A1, metric="ambient")


def _forms(t, rho, tp, rp, tpp, rpp, A, A1, metric):
    t = float(t); rho = float(rho)
    tp = float(tp); rp = float(rp); tpp = float(tpp); rpp = float(rpp)
    sA = np.sqrt(A)
    W2 = tp * tp + A * rp * rp
    W = np.sqrt(W2)
    # outward unit normal: +90 degree rotation of the tangent in the
    # orthonormal (t, sqrt(A) x) frame
    nt = -sA * rp / W
    nr = tp / (sA * W)
    c0 = tpp - 0.5 * A1 * rp * rp
    c1 = rpp + (A1 / A) * tp * rp
    B_ss = -(nt * c0 + A * nr * c1)
    kappa_m = B_ss / W2
    if rho < _AXIS_TOL:
        if abs(rp) < 1e-8:
            raise SingularPointError("tangent not transverse to the axis at a cap")
        # smooth axis cap: umbilic, parallel curvature equals the meridian one
        kappa_p = kappa_m
        B_tt = 0.0
        h_tt = 0.0
    else:
        ct0 = -0.5 * A1 * rho * rho
        ct1 = -rho
        B_tt = -(nt * ct0 + A * nr * ct1)
        h_tt = A * rho * rho
        kappa_p = B_tt / h_tt
    H = kappa_m + kappa_p
    return FundamentalForms(
        h=np.diag([W2, h_tt]), B=np.diag([B_ss, B_tt]), H=float(H),
        kappa_m=float(kappa_m), kappa_p=float(kappa_p),
        N=(float(nt), float(nr)), metric=metric,
    )


def area_element(profile, curve):
    """g-area of the revolution surface per unit curve parameter, all samples."""
    A = profile.A(curve.t)
    W = np.sqrt(curve.dt ** 2 + A * curve.drho ** 2)
    return 2 * np.pi * np.sqrt(A) * np.abs(curve.rho) * W


def ambient_H_samples(profile, curve):
    """Vectorized ambient mean curvature at all samples of the curve."""
    t = curve.t
    rho = curve.rho
    tp, rp, tpp, rpp = curve.dt, curve.drho, curve.ddt, curve.ddrho
    A = profile.A(t)
    A1 = profile.A(t, 1)
    sA = np.sqrt(A)
    W2 = tp * tp + A * rp * rp
    W = np.sqrt(W2)
    nt = -sA * rp / W
    nr = tp / (sA * W)
    c0 = tpp - 0.5 * A1 * rp * rp
    c1 = rpp + (A1 / A) * tp * rp
    km = -(nt * c0 + A * nr * c1) / W2
    with np.errstate(divide="ignore", invalid="ignore"):
        kp = 0.5 * A1 * nt / A + nr / rho
    cap = rho < _AXIS_TOL
    kp = np.where(cap, km, kp)
    return km + kp


def euclid_normal_axial(curve):
    """Axial component of the flat-coordinate outward unit normal, all samples."""
    W = np.hypot(curve.dt, curve.drho)
    return -curve.drho / W


# -- normal-coordinate mean-curvature expansion ----------------------------

def expansion_from_chart_data(curv, Y, N0, E1, H0, kappa_m, kappa_p):
    """Mean curvature of a surface point from the ambient-curvature expansion.

    Inputs live in the orthonormal chart frame at the chart center: Y is the
    position vector of the point, N0 the chart-Euclidean unit normal, E1 the
    meridian unit tangent (E2 is the circle direction, frame leg 2), H0 and
    (kappa_m, kappa_p) the chart-Euclidean mean curvature and principal
    curvatures.  `curv` is the CurvatureData at the center.
    """
    E2 = np.array([0.0, 0.0, 1.0])
    rm = curv.rm
    drm = curv.drm
    ric = curv.ric
    dric = curv.dric
    t1 = (1.0 - rm(N0, Y, N0, Y) / 6.0 - drm(Y, N0, Y, N0, Y) / 12.0) * H0
    t2 = (rm(E1, Y, E1, Y) / 3.0 + drm(Y, E1, Y, E1, Y) / 6.0) * kappa_m
    t2 += (rm(E2, Y, E2, Y) / 3.0 + drm(Y, E2, Y, E2, Y) / 6.0) * kappa_p
    t3 = (
        -2.0 / 3.0 * ric(Y, N0)
        - 0.5 * dric(Y, Y, N0)
        + dric(N0, Y, Y) / 12.0
        + drm(N0, N0, Y, N0, Y) / 6.0
    )
    return float(t1 + t2 + t3)


def ambient_mean_curvature_expansion(profile, curve, idx, curv=None, max_Y=0.5):
    """Expansion value at sample idx of a curve carrying chart annotations.

    The curve must have been built in a normal chart (annotations
    'chart_center', 'x0c', 'xrc' = chart axial/radial coordinates, plus
    chart-frame derivative data 'dx0c', 'dxrc', 'ddx0c', 'ddxrc').
    """
    ann = curve.ann
    needed = ("chart_center", "x0c", "xrc", "dx0c", "dxrc", "ddx0c", "ddxrc")
    for k in needed:
        if k not in ann or not np.isfinite(ann[k][idx]):
            raise RangeError("sample %d carries no chart data" % idx)
    center = float(ann["chart_center"][idx])
    x0 = float(ann["x0c"][idx]); xr = float(ann["xrc"][idx])
    if np.hypot(x0, xr) > max_Y:
        raise RangeError("chart position exceeds the expansion trust radius")
    if curv is None:
        from .ambient import curvature_frame_data
        curv = curvature_frame_data(profile, center)
    f = _forms(x0, xr, ann["dx0c"][idx], ann["dxrc"][idx],
               ann["ddx0c"][idx], ann["ddxrc"][idx], A=1.0, A1=0.0, metric="euclidean")
    Y = np.array([x0, xr, 0.0])
    N0 = np.array([f.N[0], f.N[1], 0.0])
    W = np.hypot(ann["dx0c"][idx], ann["dxrc"][idx])
    E1 = np.array([ann["dx0c"][idx] / W, ann["dxrc"][idx] / W, 0.0])
    return expansion_from_chart_data(curv, Y, N0, E1, f.H, f.kappa_m, f.kappa_p)


def expansion_geodesic_sphere(profile, t0, r, beta, curv=None):
    """Expansion evaluated on the geodesic sphere of radius r at gamma(t0).

    In the chart the sphere is round: Y = r Theta, N0 = Theta, principal
    curvatures 1/r.  beta is the polar angle from the +t pole (array ok).
    """
    if curv is None:
        from .ambient import curvature_frame_data
        curv = curvature_frame_data(profile, t0)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    out = np.empty_like(beta)
    for i, b in enumerate(beta):
        Th = np.array([np.cos(b), np.sin(b), 0.0])
        E1 = np.array([-np.sin(b), np.cos(b), 0.0])
        out[i] = expansion_from_chart_data(
            curv, r * Th, Th, E1, 2.0 / r, 1.0 / r, 1.0 / r
        )
    return out if out.size > 1 else float(out[0])


# -- graphs and deformations ------------------------------------------------

def graph_forms(F, x, derivs=None, upward=True):
    """Fundamental forms of the graph x0 = F(|x|) over the plane (flat metric).

    F may be a callable returning the value (derivatives by central
    differences) or `derivs` supplies (F, F', F'') callables.  The normal is
    taken with positive axial component when upward=True.
    """
    x = float(x)
    if x <= 0:
        raise DomainError("graph radius must be positive")
    if derivs is not None:
        f0, f1, f2 = (d(x) for d in derivs)
    else:
        h = 1e-6 * max(1.0, abs(x))
        f0 = F(x)
        f1 = (F(x + h) - F(x - h)) / (2 * h)
        f2 = (F(x + h) - 2 * f0 + F(x - h)) / h ** 2
    # curve (t, rho) = (F(x), x), parametrized by x
    forms = _forms(f0, x, f1, 1.0, f2, 0.0, A=1.0, A1=0.0, metric="euclidean")
    if upward and forms.N[0] < 0:
        forms = FundamentalForms(h=forms.h, B=-forms.B, H=-forms.H,
                                 kappa_m=-forms.kappa_m, kappa_p=-forms.kappa_p,
                                 N=(-forms.N[0], -forms.N[1]), metric=forms.metric)
    return forms


def normal_graph(curve, f, fp=None, fpp=None, enforce=True):
    """Displace the curve by f along its Euclidean outward unit normal.

    f (and optionally f', f'' w.r.t. arclength) may be callables of s or
    sample arrays.  Derivative data of the new curve is rebuilt by spline.
    """
    s = curve.s
    fv = f(s) if callable(f) else np.asarray(f, dtype=float)
    if enforce:
        bmax = 0.0
        for i in range(0, curve.n, max(1, curve.n // 64)):
            bmax = max(bmax, euclidean_forms(curve, idx=i).B_norm)
        if fp is not None:
            g = fp(s) if callable(fp) else np.asarray(fp, dtype=float)
            gmax = float(np.max(np.abs(g)))
        else:
            gmax = float(np.max(np.abs(np.gradient(fv, s))))
        if np.max(np.abs(fv)) * bmax + gmax > 0.1:
            raise PerturbationTooLargeError(
                "|f| |B| + |grad f| = %.3g exceeds 0.1" % (np.max(np.abs(fv)) * bmax + gmax)
            )
    W = np.hypot(curve.dt, curve.drho)
    nt = -curve.drho / W
    nr = curve.dt / W
    t_new = curve.t + fv * nt
    r_new = curve.rho + fv * nr
    # reparametrize by chord length and rebuild derivatives from the spline
    ds = np.hypot(np.diff(t_new), np.diff(r_new))
    s_new = np.concatenate([[0.0], np.cumsum(ds)])
    st = CubicSpline(s_new, t_new)
    sr = CubicSpline(s_new, r_new)
    return ProfileCurve(
        s=s_new, t=t_new, rho=r_new,
        dt=st(s_new, 1), drho=sr(s_new, 1), ddt=st(s_new, 2), ddrho=sr(s_new, 2),
        region=curve.region.copy(), region_index=curve.region_index.copy(),
        closure=curve.closure, ann={},
    )


def linearized_operator(curve, f_derivs, idx=None, s=None):
    """L(f) = Lap f + |B|^2 f on the revolution surface (flat metric).

    f_derivs = (f, f', f'') as callables of arclength or as values at the
    requested point.  The surface Laplacian of an axisymmetric function is
    f'' + (rho'/rho) f'.
    """
    t, rho, tp, rp, tpp, rpp = _sample_data(curve, idx, s)
    if rho < _AXIS_TOL:
        raise SingularPointError("linearized operator evaluated at an axis point")
    sv = curve.s[idx] if idx is not None else s
    if callable(f_derivs[0]):
        f0, f1, f2 = (d(sv) for d in f_derivs)
    else:
        f0, f1, f2 = f_derivs
    forms = euclidean_forms(curve, idx=idx, s=s)
    W = np.hypot(tp, rp)   # ~1 for arclength-normalized samples
    lap = f2 + (rp / W) * f1 / rho
    return float(lap + forms.B_norm ** 2 * f0)


def make_circle_curve(r, center_t=0.0, n=721, theta_min=0.0, theta_max=np.pi):
    """Round sphere meridian, parametrized t-ascending (from the -t pole)."""
    lam = np.linspace(np.pi - theta_max, np.pi - theta_min, n)  # lam = pi - theta
    t = center_t - r * np.cos(lam)
    rho = r * np.sin(lam)
    dt = r * np.sin(lam)
    drho = r * np.cos(lam)
    ddt = r * np.cos(lam)
    ddrho = -r * np.sin(lam)
    return ProfileCurve.from_parametric(
        t, rho, dt, drho, ddt, ddrho,
        region=REGION_SPHERE, region_index=0,
        closure="capped" if theta_min == 0.0 and theta_max == np.pi else "open",
    )


def make_catenoid_curve(eps, half_height, n=801, waist_t=0.0):
    """Catenoid rho = eps cosh((t - waist_t)/eps), |t - waist_t| <= half_height."""
    u = np.linspace(-half_height / eps, half_height / eps, n)
    t = waist_t + eps * u
    rho = eps * np.cosh(u)
    dt = np.full_like(u, eps)
    drho = eps * np.sinh(u)
    ddt = np.zeros_like(u)
    ddrho = eps * np.cosh(u)
    return ProfileCurve.from_parametric(
        t, rho, dt, drho, ddt, ddrho, region=REGION_NECK, region_index=0,
    )


def make_cylinder_curve(a, length=1.0, n=101):
    t = np.linspace(0.0, length, n)
    rho = np.full_like(t, float(a))
    z = np.zeros_like(t)
    return ProfileCurve.from_parametric(
        t, rho, np.ones_like(t), z, z, z, region=REGION_SPHERE, region_index=0,
    )
