"""Analytic and ODE building blocks: Green-perturbed spheres, catenoid
necks, Delaunay unduloid profiles, and the Jacobi fields used in projections.

Green's function on the unit sphere.  We solve

    (Lap_{S^2} + 2) G = source(eps+, eps-) + A * J,   <G, J> = 0,

axisymmetric, with point sources at the poles normalized so that G behaves
like the 2D Newtonian potential: G ~ (eps/2pi) log(1/rho) near a pole of
strength eps (the matched spheres dip toward their necks).  The solvability
multiplier A kills the J-component of the source.  In u = cos(theta) the
closed form is

    G = a P1 + b Q1 + A c_n w_p,
    Q1  = -cos(theta) log(tan(theta/2)) - 1      (Legendre second kind)
    w_p = -cos(theta) log(sin(theta)) / 3        (particular: L w_p = u)

with b = (eps+ + eps-)/(4 pi), A = c_n (eps+ - eps-), c_n = sqrt(3/4pi),
and a fixed by <G, J> = 0.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .errors import DomainError, NoSolutionError, RangeError

C_N = np.sqrt(3.0 / (4.0 * np.pi))
LOG_COEFF = 1.0 / (2.0 * np.pi)    # 2D delta-source log normalization
# <w_p, P1>_{L^2(S^2)} = -(pi/3) (4 ln2 / 3 - 16/9), from the closed form
W1_INTEGRAL = -(np.pi / 3.0) * (4.0 * np.log(2.0) / 3.0 - 16.0 / 9.0)


@dataclass
class GreenSolution:
    """Closed-form axisymmetric solution of the perturbed sphere equation."""

    eps_plus: float
    eps_minus: float
    a: float
    b: float
    A: float

    def __call__(self, theta):
        return self.value(theta)

    def value(self, theta):
        th = np.asarray(theta, dtype=float)
        c = np.cos(th)
        q1 = -c * np.log(np.tan(th / 2.0)) - 1.0
        wp = -c * np.log(np.sin(th)) / 3.0
        return self.a * c + self.b * q1 + self.A * C_N * wp

    def d1(self, theta):
        th = np.asarray(theta, dtype=float)
        s, c = np.sin(th), np.cos(th)
        lt = np.log(np.tan(th / 2.0))
        ls = np.log(s)
        dq1 = s * lt - c / s
        dwp = (s * ls - c * c / s) / 3.0
        return -self.a * s + self.b * dq1 + self.A * C_N * dwp

    def d2(self, theta):
        th = np.asarray(theta, dtype=float)
        s, c = np.sin(th), np.cos(th)
        lt = np.log(np.tan(th / 2.0))
        ls = np.log(s)
        ddq1 = c * lt + 1.0 + 1.0 / (s * s)
        ddwp = (c * ls + 3.0 * c + c ** 3 / (s * s)) / 3.0
        return -self.a * c + self.b * ddq1 + self.A * C_N * ddwp

    def ode_residual(self, theta):
        """(Lap_{S^2} + 2) G - A J at interior angles; zero up to rounding."""
        th = np.asarray(theta, dtype=float)
        lap = self.d2(th) + (np.cos(th) / np.sin(th)) * self.d1(th)
        return lap + 2.0 * self.value(th) - self.A * C_N * np.cos(th)

    def pole_value(self, sign):
        """Regular limit of G at a source-free pole (+1: theta=0, -1: pi)."""
        if (sign > 0 and self.eps_plus > 0) or (sign < 0 and self.eps_minus > 0):
            raise DomainError("G diverges at a pole with nonzero strength")
        return sign * self.a + self.b * (np.log(2.0) - 1.0)

    def pole_d2(self, sign):
        """d2G/dtheta2 at a source-free pole, from the ODE: 2 G'' + 2 G = A J."""
        return (self.A * C_N * sign - 2.0 * self.pole_value(sign)) / 2.0


def solve_green(eps_plus, eps_minus):
    """Green data for pole strengths eps+ (theta=0) and eps- (theta=pi)."""
    ep = float(eps_plus)
    em = float(eps_minus)
    if ep < 0 or em < 0:
        raise DomainError("source strengths must be nonnegative")
    A = C_N * (ep - em)
    b = (ep + em) / (4.0 * np.pi)
    a = -(3.0 / (4.0 * np.pi)) * A * C_N * W1_INTEGRAL
    return GreenSolution(eps_plus=ep, eps_minus=em, a=a, b=b, A=A)


def expansion_constants(green):
    """(c+, C+, c-, C-): near-pole graph expansion constants of the
    perturbed sphere, eps^pm (c^pm + C^pm log|x|), from the analytic
    near-pole form of Q1 (no numeric regression).

    C^pm = 1/(2 pi) always; cformulas use the finite parts
    G(theta -> 0) = cG + CG log(theta).  Sides with zero strength return
    c = nan (no neck attaches there).
    """
    ln2 = np.log(2.0)
    cG_plus = green.a + green.b * (ln2 - 1.0)
    cG_minus = -green.a + green.b * (ln2 - 1.0)
    Cp = Cm = LOG_COEFF
    cp = -cG_plus / green.eps_plus if green.eps_plus > 0 else np.nan
    cm = -cG_minus / green.eps_minus if green.eps_minus > 0 else np.nan
    return cp, Cp, cm, Cm


@dataclass
class SphereBlock:
    """Perturbed-sphere data for one sphere of the chain."""

    index: int
    center_t: float
    r: float
    eps_src_plus: float      # source strength at the +t pole
    eps_src_minus: float
    green: GreenSolution
    A_mult: float            # solvability multiplier
    c_plus: float
    C_plus: float
    c_minus: float
    C_minus: float
    cap_plus: float          # cap radius r * eps_neck^{3/4} at the +t pole (0 if capped smooth)
    cap_minus: float


@dataclass
class NeckBlock:
    index: int
    eps: float
    d: float                 # matched translation
    delta: float             # displacement parameter
    p_flat: float            # chart center arclength


# -- catenoid ---------------------------------------------------------------

def catenoid_graph(eps, d, sign, x):
    """F_neck^{sign}(eps, d; x) = sign * eps * arccosh(x/eps) + eps d."""
    x = np.asarray(x, dtype=float)
    if np.any(x < eps * (1 - 1e-12)):
        raise DomainError("catenoid graph needs x >= eps")
    return sign * eps * np.arccosh(np.maximum(x / eps, 1.0)) + eps * d


def catenoid_graph_derivs(eps, sign, x):
    """dF/dx and d2F/dx2 of the catenoid graph."""
    x = np.asarray(x, dtype=float)
    root = np.sqrt(np.maximum(x * x - eps * eps, 0.0))
    return sign * eps / root, -sign * eps * x / root ** 3


def catenoid_asymptote(eps, d, sign, x):
    """The constant+log part: sign*(eps(log 2 - log eps) + eps log x) + eps d."""
    x = np.asarray(x, dtype=float)
    return sign * (eps * (np.log(2.0) - np.log(eps)) + eps * np.log(x)) + eps * d


# -- Jacobi fields ------------------------------------------------------------

def jacobi_sphere(theta, r=1.0):
    """Axial translation kernel field on the radius-r sphere, unit L^2 norm."""
    return np.cos(np.asarray(theta, dtype=float)) * C_N / r


def jacobi_neck(eps, x):
    """Odd kernel field of the catenoid, asymptotic to +-1.

    x is the signed radial coordinate on the two catenoid ends (odd
    extension through the neck); |x| >= eps required.  Note: this is the
    genuine kernel element sqrt(x^2 - eps^2)/|x| (tanh of the conformal
    parameter); the reciprocal form fails the kernel equation.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) < eps * (1 - 1e-12)):
        raise DomainError("jacobi_neck needs |x| >= eps")
    ax = np.maximum(np.abs(x), eps)
    return np.sign(x) * np.sqrt(np.maximum(ax * ax - eps * eps, 0.0)) / ax


# -- Delaunay unduloids -------------------------------------------------------

def delaunay_period(eps):
    """Period T of the unit-H=2 unduloid with neck radius eps in (0, 1/2).

    Quadrature of the first-integral-reduced profile ODE with the
    square-root endpoint singularities absorbed by rho = 1/2 + w cos(psi).
    """
    eps = float(eps)
    if not 0 < eps < 0.5:
        raise RangeError("neck radius must lie in (0, 1/2)")
    F = eps - eps * eps
    w = 0.5 - eps

    def f(psi):
        rho = 0.5 + w * np.cos(psi)
        return (F + rho * rho) / np.sqrt(rho + F + rho * rho)

    val, _ = quad(f, 0.0, np.pi, limit=400, epsabs=1e-14, epsrel=1e-13)
    return 2.0 * val


_T_MAX_CACHE = {}


def delaunay_T_max():
    if "T" not in _T_MAX_CACHE:
        _T_MAX_CACHE["T"] = delaunay_period(0.5 - 1e-9)
    return _T_MAX_CACHE["T"]


@dataclass
class DelaunayEnd:
    """One period of the unit-scale unduloid profile (H = 2, neck at x=0)."""

    T: float
    eps: float               # rho_T(0), the neck radius
    psi: np.ndarray          # half-period parameter grid
    x_half: np.ndarray       # axial positions, x in [0, T/2]
    rho_half: np.ndarray
    T_K: float = 0.0         # global translation (set by the assembly)
    omega: float = 0.0       # truncation window (set by the assembly)
    _spline: CubicSpline = field(default=None, repr=False)

    @property
    def first_integral(self):
        return self.eps - self.eps ** 2

    def rho(self, x):
        """Periodic profile rho_T(x); minimum eps at integer multiples of T."""
        if self._spline is None:
            self._spline = CubicSpline(self.x_half, self.rho_half, bc_type="clamped")
        x = np.abs(np.asarray(x, dtype=float))
        x = np.mod(x, self.T)
        x = np.where(x > self.T / 2, self.T - x, x)
        return self._spline(x)

    def rho_derivs(self, x):
        """(rho, drho/dx, d2rho/dx2) from the first integral, exact given rho."""
        x = np.asarray(x, dtype=float)
        r = self.rho(x)
        F = self.first_integral
        u2 = np.maximum((r / (F + r * r)) ** 2 - 1.0, 0.0)
        # branch sign: rho increases on (0, T/2), decreases on (T/2, T)
        xm = np.mod(x, self.T)
        sgn = np.where(xm <= self.T / 2, 1.0, -1.0)
        rdot = sgn * np.sqrt(u2)
        opr = 1.0 + rdot ** 2
        rddot = opr / r - 2.0 * opr ** 1.5
        return r, rdot, rddot

    def mean_curvature(self, x):
        r, rd, rdd = self.rho_derivs(x)
        return -rdd / (1 + rd ** 2) ** 1.5 + 1.0 / (r * np.sqrt(1 + rd ** 2))


def delaunay_solve(T, n_half=4001):
    """Unduloid profile with the given period on the chain-of-spheres branch.

    Bisection on the neck radius to match delaunay_period; the half-period
    profile is generated by the same singularity-free quadrature.
    """
    T = float(T)
    if T <= 2.0 or T > delaunay_T_max():
        raise NoSolutionError("period must lie in (2, %.6f]" % delaunay_T_max())
    eps = brentq(lambda e: delaunay_period(e) - T, 1e-12, 0.5 - 1e-12,
                 xtol=1e-16, rtol=8.9e-16)
    F = eps - eps * eps
    w = 0.5 - eps
    q = np.linspace(0.0, np.pi, n_half)      # from the neck (rho=eps) to the bulge
    rho = 0.5 - w * np.cos(q)
    integrand = (F + rho * rho) / np.sqrt(rho + F + rho * rho)
    from scipy.integrate import cumulative_simpson
    x = np.concatenate([[0.0], cumulative_simpson(integrand, x=q)])
    return DelaunayEnd(T=T, eps=float(eps), psi=q, x_half=x, rho_half=rho)


def delaunay_orbit(eps, n_periods=1.0, rtol=1e-12, max_step=None):
    """Shooting oracle: integrate the H=2 profile ODE from a neck.

    Returns (s, t, rho, phi) dense samples; independent of the quadrature
    construction, used for conservation and residual checks.
    """
    H = 2.0

    def rhs(s, y):
        t, rho, phi = y
        return [np.cos(phi), np.sin(phi), np.cos(phi) / rho - H]

    smax = n_periods * 1.2 * np.pi
    sol = solve_ivp(rhs, (0.0, smax), [0.0, eps, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-14, dense_output=True,
                    max_step=max_step or np.inf)
    s = np.linspace(0, sol.t[-1], 4000)
    t, rho, phi = sol.sol(s)
    return s, t, rho, phi
