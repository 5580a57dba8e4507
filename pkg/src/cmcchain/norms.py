"""Weight function and discrete weighted-norm estimators.

The weight zeta_r equals r * |x| in the scaled neck charts (|x| <= R'/2),
r outside |x| >= R', with a smooth monotone geometric interpolation in
between.  Weighted sup norms are evaluated over the curve samples; the
Holder seminorm is estimated from sampled pairs at dyadic separations and
reported only.  Deviation reports compare sup zeta^{2-nu} |H - 2/r| per
region against the predicted leading bound
C max{ r^{3-nu}, r^{5-nu} eps^{1/2-3nu/4}, r^{1-nu} eps^{3/2-3nu/4},
delta r^{1-nu} eps^{1-3nu/4} }.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .assembly import CHART_RP, chi
from .errors import ConfigError, RangeError
from .revgeom import (REGION_DELAUNAY, REGION_NAMES, REGION_NECK,
                      REGION_SPHERE, REGION_TRANSITION, ambient_H_samples)


def weight_profile(x):
    """zeta_r / r as a function of the scaled chart radius x >= 0.

    x for x <= R'/2, 1 for x >= R', geometric interpolation via the
    standard cutoff in between; smooth and monotone.
    """
    x = np.asarray(x, dtype=float)
    xx = np.clip(x, 1e-300, None)
    expo = chi(xx / CHART_RP)          # 1 on x <= R'/2, 0 on x >= R'
    out = np.exp(expo * np.log(np.clip(xx, None, 1.0)))
    return np.where(np.isfinite(x), out, 1.0)


def weight(config, chart_rad):
    """zeta_r at points with the given scaled chart radius to the nearest neck."""
    return config.r * weight_profile(chart_rad)


def weight_values(config, curve):
    if "chart_rad" not in curve.ann:
        raise ConfigError("curve carries no chart_rad annotation; assemble() provides it")
    return weight(config, curve.ann["chart_rad"])


def weighted_sup(field, nu, config, curve, mask=None, nubar=None,
                 axial_mode="power", T_bar=None):
    """sup of zeta^{-nu} |field| over samples (optionally masked).

    With nubar (one-ended norms) the axial windows C_T = {t in [T, T+r]} for
    T > T_bar are additionally weighted by T^{-nubar} ('power', the displayed
    definition) or exp(-nubar T) ('exponential', the remark variant).
    """
    field = np.asarray(field, dtype=float)
    if field.size == 0 or field.size != curve.n:
        raise ConfigError("field must be sampled on the curve")
    zeta = weight_values(config, curve)
    vals = np.abs(field) * zeta ** (-nu)
    if mask is not None:
        vals = np.where(mask, vals, -np.inf)
    if nubar is None:
        return float(np.max(vals))
    if T_bar is None:
        T_bar = float(config.t_centers[config.K // 2])
    core = np.max(np.where(curve.t <= T_bar, vals, -np.inf))
    out = core if np.isfinite(core) else -np.inf
    r = config.r
    starts = np.unique(curve.t[curve.t > T_bar])
    for T in starts[:: max(1, starts.size // 400)]:
        m = (curve.t >= T) & (curve.t <= T + r)
        if not np.any(m):
            continue
        w = T ** (-nubar) if axial_mode == "power" else np.exp(-nubar * T)
        out = max(out, w * np.max(vals[m]))
    return float(out)


def holder_estimate(field, alpha, nu, config, curve, max_pairs=4000):
    """Sampled-pair estimate of the weighted alpha-Holder coefficient.

    Pairs at dyadic index separations within each region; reported only,
    never used in acceptance thresholds.
    """
    field = np.asarray(field, dtype=float)
    zeta = weight_values(config, curve)
    wf = field * zeta ** (alpha - nu)
    best = 0.0
    n = curve.n
    rng_step = max(1, n // max_pairs)
    for k in (1, 2, 4, 8, 16, 32):
        i = np.arange(0, n - k, rng_step)
        j = i + k
        same = curve.region[i] == curve.region[j]
        ds = np.abs(curve.s[j] - curve.s[i])
        ok = same & (ds > 0)
        if not np.any(ok):
            continue
        quot = np.abs(wf[j][ok] - wf[i][ok]) / ds[ok] ** alpha
        best = max(best, float(np.max(quot)))
    return best


def predicted_terms(r, eps, delta, nu):
    """The four competing terms of the mean-curvature deviation bound."""
    return {
        "sphere": r ** (3 - nu),
        "cap": r ** (5 - nu) * eps ** (0.5 - 0.75 * nu),
        "neck": r ** (1 - nu) * eps ** (1.5 - 0.75 * nu),
        "displacement": delta * r ** (1 - nu) * eps ** (1.0 - 0.75 * nu),
    }


@dataclass
class WeightedNormReport:
    nu: float
    nubar: float
    r: float
    eps_max: float
    delta_max: float
    region_sups: dict
    global_sup: float
    holder: float
    predicted: dict
    dominant_term: str
    dominant_value: float
    fitted_constant: float
    axial_mode: str = "power"

    def to_json(self, path=None):
        d = asdict(self)
        s = json.dumps(d, indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(s + "\n")
        return s

    def to_csv_rows(self):
        rows = [("region", "sup")]
        for k in sorted(self.region_sups):
            rows.append((k, "%.17g" % self.region_sups[k]))
        rows.append(("global", "%.17g" % self.global_sup))
        return rows


def deviation_report(profile, config, curve, nu, nubar=None, alpha=0.5,
                     axial_mode="power"):
    """Weighted deviation of H - 2/r on the assembled curve.

    Per-region sups of zeta^{2-nu} |H - 2/r| (exact ambient H), the global
    estimate, a sampled Holder coefficient, and the comparison against the
    dominant predicted term.
    """
    if not 1.0 < nu < 2.0:
        raise RangeError("nu must lie in (1, 2)")
    if nubar is not None and not -1.0 < nubar < 0.0:
        raise RangeError("nubar must lie in (-1, 0)")
    H = ambient_H_samples(profile, curve)
    field = H - 2.0 / config.r
    region_sups = {}
    for code, name in REGION_NAMES.items():
        m = curve.region == code
        if not np.any(m):
            continue
        region_sups[name] = weighted_sup(field, nu - 2.0, config, curve, mask=m,
                                         nubar=nubar, axial_mode=axial_mode)
    if nubar is None:
        global_sup = float(max(region_sups.values()))
    else:
        global_sup = weighted_sup(field, nu - 2.0, config, curve,
                                  nubar=nubar, axial_mode=axial_mode)
    pred = predicted_terms(config.r, float(np.max(config.eps)),
                           float(np.max(np.abs(config.delta))), nu)
    dom = max(pred, key=lambda k: pred[k])
    hold = holder_estimate(field, alpha, nu - 2.0, config, curve)
    return WeightedNormReport(
        nu=nu, nubar=(np.nan if nubar is None else nubar), r=config.r,
        eps_max=float(np.max(config.eps)),
        delta_max=float(np.max(np.abs(config.delta))),
        region_sups=region_sups, global_sup=global_sup, holder=hold,
        predicted=pred, dominant_term=dom, dominant_value=pred[dom],
        fitted_constant=global_sup / pred[dom], axial_mode=axial_mode,
    )
