"""Geodesic normal-coordinate charts centered at axis points.

By axial symmetry every chart reduces to the 2D totally geodesic slice
with metric dt^2 + A(t) dx^2.  The exponential map is integrated as a
batched geodesic ODE together with its first and second variations in the
shooting angle, which supplies exact first and second derivatives of
mapped curves.  Chart radial coordinate == geodesic distance to the center.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NoSolutionError

_RTOL = 3e-14
_ATOL = 1e-16


@dataclass
class ChartPoints:
    """exp-map output: global position, unit velocity, beta-derivatives."""

    T: np.ndarray
    X: np.ndarray
    U: np.ndarray     # dT/ds (s = arclength)
    V: np.ndarray     # dX/ds
    Tb: np.ndarray    # dT/dbeta
    Xb: np.ndarray
    Ub: np.ndarray    # d(dT/ds)/dbeta
    Vb: np.ndarray
    Tbb: np.ndarray   # d2T/dbeta2
    Xbb: np.ndarray


class NormalChart:
    """Normal coordinates (geodesic polar (rhat, beta)) around (center_t, 0).

    beta is the angle from the +t axis direction.  For A == const the map
    is closed form; otherwise geodesics are integrated in a single batched
    solve over a shared unit parameter.
    """

    def __init__(self, profile, center_t):
        self.profile = profile
        self.center_t = float(center_t)
        self.A0 = float(profile.A(self.center_t))
        self.flat = profile.is_flat

    # -- exponential map ---------------------------------------------------
    def exp(self, rhat, beta):
        rhat = np.atleast_1d(np.asarray(rhat, dtype=float))
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        rhat, beta = np.broadcast_arrays(rhat, beta)
        rhat = rhat.astype(float).ravel()
        beta = beta.astype(float).ravel()
        if self.flat:
            return self._exp_flat(rhat, beta)
        return self._exp_ode(rhat, beta)

    def _exp_flat(self, rhat, beta):
        sA = np.sqrt(self.A0)
        c, s = np.cos(beta), np.sin(beta)
        return ChartPoints(
            T=self.center_t + rhat * c,
            X=rhat * s / sA,
            U=c, V=s / sA,
            Tb=-rhat * s, Xb=rhat * c / sA,
            Ub=-s, Vb=c / sA,
            Tbb=-rhat * c, Xbb=-rhat * s / sA,
        )

    def _exp_ode(self, rhat, beta):
        prof = self.profile
        n = beta.size
        sA = np.sqrt(self.A0)
        y0 = np.zeros((12, n))
        y0[0] = self.center_t
        y0[2] = np.cos(beta)
        y0[3] = np.sin(beta) / sA
        y0[6] = -np.sin(beta)
        y0[7] = np.cos(beta) / sA
        y0[10] = -np.cos(beta)
        y0[11] = -np.sin(beta) / sA

        def rhs(tau, yf):
            y = yf.reshape(12, n)
            T, X, U, V = y[0], y[1], y[2], y[3]
            pT, pX, pU, pV = y[4], y[5], y[6], y[7]
            qT, qX, qU, qV = y[8], y[9], y[10], y[11]
            A = prof.A(T)
            A1 = prof.A(T, 1)
            A2 = prof.A(T, 2)
            A3 = prof.A(T, 3)
            phi = A1 / A
            phip = A2 / A - phi * phi
            phipp = A3 / A - 3 * A1 * A2 / A ** 2 + 2 * (A1 / A) ** 3
            d = np.empty_like(y)
            d[0] = U
            d[1] = V
            d[2] = 0.5 * A1 * V * V
            d[3] = -phi * U * V
            d[4] = pU
            d[5] = pV
            d[6] = 0.5 * A2 * pT * V * V + A1 * V * pV
            d[7] = -(phip * pT * U * V + phi * (pU * V + U * pV))
            d[8] = qU
            d[9] = qV
            d[10] = (
                0.5 * A2 * qT * V * V + A1 * V * qV
                + 0.5 * A3 * pT * pT * V * V + 2 * A2 * pT * V * pV + A1 * pV * pV
            )
            d[11] = -(
                phip * qT * U * V + phi * (qU * V + U * qV)
                + phipp * pT * pT * U * V + 2 * phip * pT * (pU * V + U * pV)
                + 2 * phi * pU * pV
            )
            return (d * rhat).ravel()

        sol = solve_ivp(rhs, (0.0, 1.0), y0.ravel(), method="DOP853", rtol=_RTOL, atol=_ATOL)
        y = sol.y[:, -1].reshape(12, n)
        return ChartPoints(
            T=y[0], X=y[1], U=y[2], V=y[3],
            Tb=y[4], Xb=y[5], Ub=y[6], Vb=y[7],
            Tbb=y[8], Xbb=y[9],
        )

    # -- logarithm map -----------------------------------------------------
    def log(self, t, rho, tol=1e-14, max_iter=25):
        """Invert exp: chart polar coordinates of global points (t, rho >= 0)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rho = np.atleast_1d(np.asarray(rho, dtype=float))
        t, rho = np.broadcast_arrays(t, rho)
        t = t.astype(float).ravel()
        rho = rho.astype(float).ravel()
        sA = np.sqrt(self.A0)
        dt0 = t - self.center_t
        xs = rho * sA
        rhat = np.hypot(dt0, xs)
        beta = np.arctan2(xs, dt0)
        if self.flat:
            return rhat, beta
        scale = np.maximum(np.max(rhat), 1e-30)
        for _ in range(max_iter):
            ch = self.exp(rhat, beta)
            rt = ch.T - t
            rx = ch.X - rho
            if max(np.max(np.abs(rt)), np.max(np.abs(rx))) < tol * max(1.0, scale):
                break
            # Jacobian [[U, Tb], [V, Xb]] per point
            det = ch.U * ch.Xb - ch.Tb * ch.V
            drhat = (ch.Xb * rt - ch.Tb * rx) / det
            dbeta = (-ch.V * rt + ch.U * rx) / det
            rhat = rhat - drhat
            beta = beta - dbeta
            rhat = np.maximum(rhat, 0.0)
        else:
            raise NoSolutionError("log map failed to converge")
        return rhat, beta

    def distance(self, t, rho):
        """Geodesic distance to the chart center (= chart radius)."""
        rhat, _ = self.log(t, rho)
        return rhat

    # -- curve mapping -----------------------------------------------------
    def map_curve(self, rhat, beta, d_rhat, d_beta, dd_rhat, dd_beta):
        """Map a chart curve lam -> (rhat, beta) with its first and second
        lam-derivatives to global (T, X) samples with exact derivatives."""
        ch = self.exp(rhat, beta)
        prof = self.profile
        if self.flat:
            aU = np.zeros_like(ch.T)
            aV = np.zeros_like(ch.T)
        else:
            A1 = prof.A(ch.T, 1)
            A = prof.A(ch.T)
            aU = 0.5 * A1 * ch.V * ch.V
            aV = -(A1 / A) * ch.U * ch.V
        T = ch.T
        X = ch.X
        Tl = ch.U * d_rhat + ch.Tb * d_beta
        Xl = ch.V * d_rhat + ch.Xb * d_beta
        Tll = (
            aU * d_rhat ** 2 + ch.U * dd_rhat + 2 * ch.Ub * d_rhat * d_beta
            + ch.Tbb * d_beta ** 2 + ch.Tb * dd_beta
        )
        Xll = (
            aV * d_rhat ** 2 + ch.V * dd_rhat + 2 * ch.Vb * d_rhat * d_beta
            + ch.Xbb * d_beta ** 2 + ch.Xb * dd_beta
        )
        return T, X, Tl, Xl, Tll, Xll


def cartesian_to_polar(x0, xr, d_x0, d_xr, dd_x0, dd_xr):
    """Chart cartesian (axial x0, radial xr) samples with derivatives to
    polar (rhat, beta) with derivatives.  beta measured from the +axial leg."""
    rhat = np.hypot(x0, xr)
    beta = np.arctan2(xr, x0)
    dr = (x0 * d_x0 + xr * d_xr) / rhat
    db = (x0 * d_xr - xr * d_x0) / rhat ** 2
    ddr = (d_x0 ** 2 + d_xr ** 2 + x0 * dd_x0 + xr * dd_xr - dr ** 2) / rhat
    ddb = (x0 * dd_xr - xr * dd_x0 - 2 * rhat * dr * db) / rhat ** 2
    return rhat, beta, dr, db, ddr, ddb
