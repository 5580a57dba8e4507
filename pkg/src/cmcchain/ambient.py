"""Axially symmetric warped-product metric g = dt^2 + A(t) (dx^2 + dy^2).

The metric is described by its warping profile A(t) > 0.  Everything the
rest of the package needs from the ambient space is produced here: the
scalar curvature S(t) along the axis, its gradient, and the full Riemann /
Ricci data (with first covariant derivatives) at axis points in a
parallel orthonormal frame (e0 = d/dt, ei = A^{-1/2} d/dx^i).

Tensor conventions: Rm is stored so that Rm[i,j,i,j] over orthonormal legs
is the sectional curvature of the (i,j) plane, and Ric[b,d] = sum_a
Rm[a,b,a,d], so trace(Ric) = S.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, ProfileError
from .exprparse import compile_expression


def fd_weights(order, offsets):
    """Finite-difference weights for d^order/dt^order at 0 on the given offsets.

    Fornberg's algorithm; offsets must be distinct.
    """
    x = np.asarray(offsets, dtype=float)
    n = x.size
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    for i in range(1, n):
        c2 = 1.0
        mn = min(i, order)
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for k in range(mn, -1, -1):
                c[j, k] = ((x[i]) * c[j, k] - (k * c[j, k - 1] if k > 0 else 0.0)) / c3
        for k in range(mn, 0, -1):
            c[i, k] = c1 * (k * c[i, k - 1] - x[i - 1] * c[i, k]) / c2
        c[i, 0] = -c1 * x[i - 1] * c[i, 0] / c2
        c1 = c2
    return c[:, order]


# 6th-order central stencils, offsets +-1..4 as needed per derivative order
_FD_OFFSETS = {1: np.arange(-3, 4), 2: np.arange(-3, 4), 3: np.arange(-4, 5), 4: np.arange(-4, 5)}
_FD_W = {k: fd_weights(k, v) for k, v in _FD_OFFSETS.items()}


@dataclass(frozen=True)
class MetricProfile:
    """Warping profile A(t) with up to four derivatives.

    If analytic derivatives are not supplied they are produced by 6th-order
    central differences with step h_fd * max(1, |t|).
    """

    name: str
    A_fn: Callable
    derivs: Optional[Sequence[Callable]]  # (A', A'', A''', A'''') or None
    domain: tuple
    parity: str          # 'even' | 'none'
    regime: str          # 'finite-length' | 'one-ended' | 'none'
    h_fd: float = 1e-4
    is_flat: bool = False

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.domain[0] - 1e-12) or np.any(t > self.domain[1] + 1e-12):
            raise DomainError(
                "t outside domain [%g, %g] of profile %r" % (self.domain[0], self.domain[1], self.name)
            )
        return t

    def A(self, t, k=0):
        """A(t) and derivatives; k = 0..4."""
        t = self._check_domain(t)
        if k == 0:
            return np.asarray(self.A_fn(t), dtype=float)
        if self.derivs is not None:
            return np.asarray(self.derivs[k - 1](t), dtype=float)
        h = self.h_fd * np.maximum(1.0, np.abs(t))
        off = _FD_OFFSETS[k]
        w = _FD_W[k]
        vals = sum(
            wi * np.asarray(self.A_fn(t + oi * h), dtype=float) for wi, oi in zip(w, off)
        )
        return vals / h ** k

    # -- structural checks ------------------------------------------------
    def validate(self, n_grid=200):
        """Verify positivity, parity, and the regime structure numerically.

        Returns a dict of diagnostic values.  Raises ProfileError when a
        structural requirement fails (positivity, parity, degenerate or
        non-monotone regime structure).  The orientation of the scalar
        curvature (max vs min at the center; increasing vs decreasing along
        the ray) is recorded, not enforced.
        """
        lo, hi = self.domain
        ts = np.linspace(lo, hi, n_grid)
        Av = self.A(ts)
        if np.any(Av <= 0):
            raise ProfileError("A(t) must be positive on the domain")
        diag = {}
        if self.parity == "even":
            err = np.abs(self.A(ts) - self.A(-ts)) / (1 + np.abs(Av))
            if np.max(err) > 1e-12:
                raise ProfileError("profile declared even but A(t) != A(-t)")
        if self.regime == "one-ended":
            tp = np.linspace(max(lo, 0.05), hi, n_grid)
            S = scalar_curvature(self, tp)
            sign = np.sign(S[np.argmax(np.abs(S))])
            if np.any(S * sign < 0):
                raise ProfileError("one-ended regime: S must be single-signed on the ray")
            dS = scalar_curvature_gradient(self, tp)
            if np.any(dS * (-sign) < 0):
                raise ProfileError("one-ended regime: |S| must decay monotonically to 0")
            # exponential-decay fit of |S| on the outer half of the ray
            m = tp >= 0.5 * (tp[0] + tp[-1])
            alpha = np.polyfit(tp[m], np.log(np.maximum(np.abs(S[m]), 1e-300)), 1)[0]
            if alpha >= 0:
                raise ProfileError("one-ended regime: |S| must decay exponentially")
            diag["decay_alpha"] = float(alpha)
            diag["S_sign"] = float(sign)
            diag["meets_paper_regime"] = bool(sign < 0)  # S < 0 increasing to 0
        elif self.regime == "finite-length":
            dS0 = scalar_curvature_gradient(self, 0.0)
            if abs(float(dS0)) > 1e-8:
                raise ProfileError("finite-length regime: S must have a critical point at t = 0")
            h = 1e-3
            Spp = (
                scalar_curvature(self, h) - 2 * scalar_curvature(self, 0.0) + scalar_curvature(self, -h)
            ) / h ** 2
            if abs(float(Spp)) < 1e-6:
                raise ProfileError("finite-length regime: critical point of S at 0 is degenerate")
            diag["S_second_deriv_at_0"] = float(Spp)
            diag["meets_paper_regime"] = bool(Spp < 0)  # non-degenerate maximum
        return diag


# -- built-in profiles ----------------------------------------------------

def flat_profile(scale=1.0, domain=(-50.0, 50.0)):
    c = float(scale)
    return MetricProfile(
        name="flat",
        A_fn=lambda t: np.full_like(np.asarray(t, dtype=float), c),
        derivs=tuple(lambda t, _k=k: np.zeros_like(np.asarray(t, dtype=float)) for k in range(4)),
        domain=domain,
        parity="even",
        regime="none",
        is_flat=True,
    )


def one_ended_exp_profile(gamma=1.0, domain=(-2.0, 60.0)):
    """A(t) = 1 + gamma * e^{-t}.

    gamma = +1 gives S < 0 increasing to 0 along the ray; gamma in (-1, 0)
    gives the mirror orientation S > 0 decreasing to 0.
    """
    g = float(gamma)
    if g <= -1.0:
        raise ProfileError("gamma must exceed -1 for positivity")

    def Ak(k):
        return lambda t: (-1.0) ** k * g * np.exp(-np.asarray(t, dtype=float))

    return MetricProfile(
        name="one-ended-exp" if g == 1.0 else "one-ended-exp(gamma=%g)" % g,
        A_fn=lambda t: 1.0 + g * np.exp(-np.asarray(t, dtype=float)),
        derivs=tuple(Ak(k) for k in range(1, 5)),
        domain=domain,
        parity="none",
        regime="one-ended",
    )


def even_bump_profile(beta=0.5, domain=(-8.0, 8.0)):
    """A(t) = 1 + beta * e^{-t^2}.

    beta > 0 gives a non-degenerate maximum of S at t = 0; beta in (-1, 0)
    a non-degenerate minimum.
    """
    b = float(beta)
    if b <= -1.0:
        raise ProfileError("beta must exceed -1 for positivity")

    def d1(t):
        t = np.asarray(t, dtype=float)
        return -2 * t * b * np.exp(-t * t)

    def d2(t):
        t = np.asarray(t, dtype=float)
        return (4 * t * t - 2) * b * np.exp(-t * t)

    def d3(t):
        t = np.asarray(t, dtype=float)
        return (-8 * t ** 3 + 12 * t) * b * np.exp(-t * t)

    def d4(t):
        t = np.asarray(t, dtype=float)
        return (16 * t ** 4 - 48 * t * t + 12) * b * np.exp(-t * t)

    return MetricProfile(
        name="even-bump" if b == 0.5 else "even-bump(beta=%g)" % b,
        A_fn=lambda t: 1.0 + b * np.exp(-np.asarray(t, dtype=float) ** 2),
        derivs=(d1, d2, d3, d4),
        domain=domain,
        parity="even",
        regime="finite-length",
    )


def hyperbolic_profile(domain=(-3.0, 3.0)):
    """A(t) = e^{2t}: hyperbolic 3-space.  Test profile (no chain regime)."""

    def Ak(k):
        return lambda t: 2.0 ** k * np.exp(2 * np.asarray(t, dtype=float))

    return MetricProfile(
        name="hyperbolic",
        A_fn=lambda t: np.exp(2 * np.asarray(t, dtype=float)),
        derivs=tuple(Ak(k) for k in range(1, 5)),
        domain=domain,
        parity="none",
        regime="none",
    )


def profile_from_expression(expr, parity="none", regime="none", domain=(-10.0, 10.0), h_fd=1e-4):
    fn = compile_expression(expr)
    return MetricProfile(
        name="expr:" + expr, A_fn=fn, derivs=None, domain=tuple(domain),
        parity=parity, regime=regime, h_fd=h_fd,
    )


BUILTIN_PROFILES = {
    "flat": flat_profile,
    "one-ended-exp": one_ended_exp_profile,
    "even-bump": even_bump_profile,
    "hyperbolic": hyperbolic_profile,
}


# -- curvature ------------------------------------------------------------

def scalar_curvature(profile, t):
    """Scalar curvature S(t) = A^{-2} (-2 A A'' + A'^2 / 2) along the axis."""
    A = profile.A(t)
    A1 = profile.A(t, 1)
    A2 = profile.A(t, 2)
    return (-2.0 * A * A2 + 0.5 * A1 ** 2) / A ** 2


def scalar_curvature_gradient(profile, t):
    """dS/dt, differentiated analytically from the closed form of S."""
    A = profile.A(t)
    A1 = profile.A(t, 1)
    A2 = profile.A(t, 2)
    A3 = profile.A(t, 3)
    return -2.0 * A3 / A + 3.0 * A1 * A2 / A ** 2 - A1 ** 3 / A ** 3


@dataclass
class CurvatureData:
    """Riemann/Ricci data at a point of the axis, orthonormal parallel frame.

    Rm[i,j,k,l]; dRm[m,i,j,k,l] = (nabla_m Rm)[i,j,k,l]; Ric[b,d];
    dRic[m,b,d]; scalar S and dS = dS/dt.
    """

    t: float
    Rm: np.ndarray
    dRm: np.ndarray
    Ric: np.ndarray
    dRic: np.ndarray
    S: float
    dS: float

    def rm(self, a, b, c, d):
        return np.einsum("ijkl,i,j,k,l->", self.Rm, a, b, c, d)

    def drm(self, m, a, b, c, d):
        return np.einsum("mijkl,m,i,j,k,l->", self.dRm, m, a, b, c, d)

    def ric(self, a, b):
        return np.einsum("ij,i,j->", self.Ric, a, b)

    def dric(self, m, a, b):
        return np.einsum("mij,m,i,j->", self.dRic, m, a, b)


def _set_pair(M, a, b, val):
    M[a, b, a, b] = val
    M[b, a, b, a] = val
    M[a, b, b, a] = -val
    M[b, a, a, b] = -val


def curvature_frame_data(profile, t):
    """All Rm, Ric components and first covariant derivatives at gamma(t).

    The frame (d/dt, A^{-1/2} d/dx, A^{-1/2} d/dy) is parallel along the
    axis, so covariant t-derivatives of frame components are plain
    t-derivatives; the transverse covariant derivatives are pure
    Christoffel algebra because the coordinate components depend on t only.
    """
    t = float(np.asarray(t))
    A = float(profile.A(t))
    A1 = float(profile.A(t, 1))
    A2 = float(profile.A(t, 2))
    A3 = float(profile.A(t, 3))

    om1 = -A2 / 2 + A1 ** 2 / (4 * A)       # coordinate R_txtx
    om2 = -A1 ** 2 / 4                       # coordinate R_xyxy
    dom1 = -A3 / 2 + A1 * A2 / (2 * A) - A1 ** 3 / (4 * A ** 2)
    dom2 = -A1 * A2 / 2

    R = np.zeros((3, 3, 3, 3))
    _set_pair(R, 0, 1, om1)
    _set_pair(R, 0, 2, om1)
    _set_pair(R, 1, 2, om2)

    Rdot = np.zeros((3, 3, 3, 3))
    _set_pair(Rdot, 0, 1, dom1)
    _set_pair(Rdot, 0, 2, dom1)
    _set_pair(Rdot, 1, 2, dom2)

    # coordinate Christoffels of g = dt^2 + A delta
    G = np.zeros((3, 3, 3))
    G[0, 1, 1] = G[0, 2, 2] = -A1 / 2
    G[1, 0, 1] = G[1, 1, 0] = G[2, 0, 2] = G[2, 2, 0] = A1 / (2 * A)

    dR = np.zeros((3, 3, 3, 3, 3))
    dR[0] = Rdot
    dR -= np.einsum("ami,ajkl->mijkl", G, R)
    dR -= np.einsum("amj,iakl->mijkl", G, R)
    dR -= np.einsum("amk,ijal->mijkl", G, R)
    dR -= np.einsum("aml,ijka->mijkl", G, R)

    e = np.array([1.0, A ** -0.5, A ** -0.5])
    Rf = R * np.einsum("i,j,k,l->ijkl", e, e, e, e)
    dRf = dR * np.einsum("m,i,j,k,l->mijkl", e, e, e, e, e)
    Ric = np.einsum("abad->bd", Rf)
    dRic = np.einsum("mabad->mbd", dRf)
    return CurvatureData(
        t=t, Rm=Rf, dRm=dRf, Ric=Ric, dRic=dRic,
        S=float(np.trace(Ric)), dS=float(np.trace(dRic[0])),
    )
