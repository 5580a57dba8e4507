"""Batch front end: configuration ingestion and pipeline orchestration.

Subcommands: curvature | balance | assemble | verify | sweep | export.
All commands are pure functions of the JSON run configuration; reruns are
byte-identical (fixed quadrature orders, no clocks, no RNG).

Exit codes: 0 success, 2 invalid configuration, 3 infeasible balancing,
4 solver non-convergence, 5 no solution / domain error.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .ambient import (BUILTIN_PROFILES, profile_from_expression,
                      scalar_curvature, scalar_curvature_gradient)
from .assembly import SamplingSpec, assemble, derive_configuration
from .balance import (calibrate_constants, projections, solve_balancing)
from .errors import (CmcChainError, ConfigError, InfeasibleError,
                     NonConvergenceError)
from .norms import deviation_report
from .revgeom import ambient_H_samples

EXIT_OK = 0
EXIT_INVALID_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NONCONVERGENCE = 4
EXIT_NO_SOLUTION = 5


@dataclass
class RunConfig:
    """Validated run configuration (see README for the JSON schema)."""

    profile_name: str = "even-bump"
    profile_expression: str = None
    profile_params: dict = field(default_factory=dict)
    parity: str = "none"
    regime: str = "none"
    domain: tuple = None
    r: float = 0.01
    K: int = 10
    kind: str = "finite"
    eps_rule: str = "solved"          # 'solved' | 'r**3' | explicit list
    delta: list = None
    nu: float = 1.5
    nubar: float = -0.5
    alpha: float = 0.5
    axial_mode: str = "power"
    r_grid: list = field(default_factory=lambda: [0.04, 0.02, 0.01])
    solver_tol_factor: float = 1e-12
    solver_max_iter: int = 50
    angular_res: int = 64

    @classmethod
    def from_dict(cls, d):
        cfg = cls()
        prof = d.get("profile", {})
        if isinstance(prof, str):
            cfg.profile_name = prof
        else:
            cfg.profile_name = prof.get("name")
            cfg.profile_expression = prof.get("expression")
            cfg.profile_params = {k: v for k, v in prof.items()
                                  if k not in ("name", "expression", "parity", "regime", "domain")}
            cfg.parity = prof.get("parity", "none")
            cfg.regime = prof.get("regime", "none")
            if "domain" in prof:
                cfg.domain = tuple(prof["domain"])
        geom = d.get("geometry", {})
        cfg.r = float(geom.get("r", cfg.r))
        cfg.K = int(geom.get("K", cfg.K))
        cfg.kind = geom.get("kind", cfg.kind)
        norms = d.get("norms", {})
        cfg.nu = float(norms.get("nu", cfg.nu))
        cfg.nubar = float(norms.get("nubar", cfg.nubar))
        cfg.alpha = float(norms.get("alpha", cfg.alpha))
        cfg.axial_mode = norms.get("axial_weight", cfg.axial_mode)
        sweep = d.get("sweep", {})
        cfg.r_grid = [float(x) for x in sweep.get("r_grid", cfg.r_grid)]
        cfg.eps_rule = sweep.get("eps_rule", d.get("eps_rule", cfg.eps_rule))
        cfg.delta = d.get("delta")
        solver = d.get("solver", {})
        cfg.solver_tol_factor = float(solver.get("tol_factor", cfg.solver_tol_factor))
        cfg.solver_max_iter = int(solver.get("max_iter", cfg.solver_max_iter))
        cfg.angular_res = int(d.get("angular_res", cfg.angular_res))
        cfg.validate()
        return cfg

    def validate(self):
        if not 1.0 < self.nu < 2.0:
            raise ConfigError("nu must lie in (1, 2)")
        if self.kind == "one-ended" and not -1.0 < self.nubar < 0.0:
            raise ConfigError("nubar must lie in (-1, 0) for one-ended runs")
        if self.kind not in ("finite", "one-ended"):
            raise ConfigError("kind must be 'finite' or 'one-ended'")
        if self.r <= 0 or self.K < 1:
            raise ConfigError("need r > 0 and K >= 1")
        if any(np.diff(self.r_grid) >= 0) or any(r <= 0 for r in self.r_grid):
            raise ConfigError("r grid must be positive and decreasing")

    def make_profile(self):
        if self.profile_expression:
            return profile_from_expression(
                self.profile_expression, parity=self.parity, regime=self.regime,
                domain=self.domain or (-10.0, 10.0))
        name = self.profile_name
        if name not in BUILTIN_PROFILES:
            raise ConfigError("unknown profile %r" % name)
        kwargs = dict(self.profile_params)
        if self.domain is not None:
            kwargs["domain"] = self.domain
        return BUILTIN_PROFILES[name](**kwargs)

    def eps_for(self, profile, r, constants=None):
        """Neck scales per the eps rule; returns (eps, delta, solved_or_None)."""
        n = self.K if self.kind == "finite" else self.K + 1
        delta = np.zeros(n) if self.delta is None else np.asarray(self.delta, dtype=float)
        if isinstance(self.eps_rule, (list, tuple)):
            return np.asarray(self.eps_rule, dtype=float), delta, None
        if self.eps_rule == "solved":
            sol = solve_balancing(profile, r, self.K, self.kind,
                                  constants=constants,
                                  tol=self.solver_tol_factor * r ** 3,
                                  max_iter=self.solver_max_iter)
            return sol.eps, delta, sol
        from .exprparse import compile_expression
        try:
            val = float(compile_expression(self.eps_rule, var="r")(r))
        except CmcChainError as exc:
            raise ConfigError("bad eps rule %r: %s" % (self.eps_rule, exc))
        return np.full(n, val), delta, None


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(path):
    with open(path) as fh:
        return RunConfig.from_dict(json.load(fh))


# -- commands -------------------------------------------------------------------

def cmd_curvature(cfg, out_dir):
    profile = cfg.make_profile()
    diag = profile.validate()
    lo, hi = profile.domain
    ts = np.linspace(lo, hi, 201)
    S = scalar_curvature(profile, ts)
    dS = scalar_curvature_gradient(profile, ts)
    with open(os.path.join(out_dir, "curvature.csv"), "w") as fh:
        fh.write("t,S,Sdot\n")
        for i in range(ts.size):
            fh.write("%.17g,%.17g,%.17g\n" % (ts[i], S[i], dS[i]))
    _write_json(os.path.join(out_dir, "curvature.json"), {
        "profile": profile.name, "regime": profile.regime,
        "diagnostics": diag,
        "S_at_0": float(scalar_curvature(profile, 0.0)) if lo <= 0 <= hi else None,
    })
    return EXIT_OK


def cmd_balance(cfg, out_dir):
    profile = cfg.make_profile()
    constants = calibrate_constants(profile)
    sol = solve_balancing(profile, cfg.r, cfg.K, cfg.kind, constants=constants,
                          tol=cfg.solver_tol_factor * cfg.r ** 3,
                          max_iter=cfg.solver_max_iter)
    sol.to_json(os.path.join(out_dir, "solution.json"))
    sol.to_csv(os.path.join(out_dir, "solution.csv"), profile=profile)
    _write_json(os.path.join(out_dir, "constants.json"), constants.to_json_dict())
    return EXIT_OK


def cmd_assemble(cfg, out_dir):
    profile = cfg.make_profile()
    constants = calibrate_constants(profile) if cfg.eps_rule == "solved" else None
    eps, delta, _ = cfg.eps_for(profile, cfg.r, constants)
    config = derive_configuration(profile, cfg.kind, cfg.r, cfg.K, eps, delta)
    curve = assemble(profile, config)
    _write_json(os.path.join(out_dir, "configuration.json"), config.to_json_dict())
    curve.to_csv(os.path.join(out_dir, "curve.csv"))
    return EXIT_OK


def cmd_verify(cfg, out_dir):
    profile = cfg.make_profile()
    constants = calibrate_constants(profile)
    eps, delta, sol = cfg.eps_for(profile, cfg.r, constants)
    config = derive_configuration(profile, cfg.kind, cfg.r, cfg.K, eps, delta)
    curve = assemble(profile, config)
    nubar = cfg.nubar if cfg.kind == "one-ended" else None
    report = deviation_report(profile, config, curve, cfg.nu, nubar=nubar,
                              alpha=cfg.alpha, axial_mode=cfg.axial_mode)
    report.to_json(os.path.join(out_dir, "deviation.json"))
    with open(os.path.join(out_dir, "deviation.csv"), "w") as fh:
        for row in report.to_csv_rows():
            fh.write(",".join(row) + "\n")
    proj = projections(profile, config, curve)
    proj2 = projections(profile, config, curve, tau_factor=2.0)
    _write_json(os.path.join(out_dir, "projections.json"), {
        "neck": list(map(float, proj.neck)),
        "sphere": list(map(float, proj.sphere)),
        "tau_factor": 1.0,
        "tau_doubled": {
            "neck": list(map(float, proj2.neck)),
            "sphere": list(map(float, proj2.sphere)),
        },
        "constants": constants.to_json_dict(),
    })
    return EXIT_OK


def cmd_sweep(cfg, out_dir):
    if not cfg.r_grid:
        raise ConfigError("empty r grid")
    profile = cfg.make_profile()
    constants = calibrate_constants(profile) if cfg.eps_rule == "solved" else None
    from .norms import predicted_terms
    rows = []
    for r in cfg.r_grid:
        eps, delta, _ = cfg.eps_for(profile, r, constants)
        config = derive_configuration(profile, cfg.kind, r, cfg.K, eps, delta)
        curve = assemble(profile, config)
        nubar = cfg.nubar if cfg.kind == "one-ended" else None
        rep = deviation_report(profile, config, curve, cfg.nu, nubar=nubar)
        rows.append((r, rep.global_sup, rep.dominant_term, rep.dominant_value))
    rr = np.array([x[0] for x in rows])
    vv = np.array([x[1] for x in rows])
    pv = np.array([x[3] for x in rows])
    slope = float(np.polyfit(np.log(rr), np.log(np.maximum(vv, 1e-300)), 1)[0])
    pred_slope = float(np.polyfit(np.log(rr), np.log(np.maximum(pv, 1e-300)), 1)[0])
    with open(os.path.join(out_dir, "sweep.csv"), "w") as fh:
        fh.write("r,measured,predicted_term,predicted_value\n")
        for r, v, name, p in rows:
            fh.write("%.17g,%.17g,%s,%.17g\n" % (r, v, name, p))
        fh.write("# fitted_slope,%.17g\n" % slope)
        fh.write("# predicted_slope,%.17g\n" % pred_slope)
    _write_json(os.path.join(out_dir, "sweep.json"), {
        "r_grid": list(map(float, rr)),
        "measured": list(map(float, vv)),
        "fitted_slope": slope, "predicted_slope": pred_slope,
    })
    return EXIT_OK


def cmd_export(cfg, out_dir):
    profile = cfg.make_profile()
    constants = calibrate_constants(profile) if cfg.eps_rule == "solved" else None
    eps, delta, _ = cfg.eps_for(profile, cfg.r, constants)
    config = derive_configuration(profile, cfg.kind, cfg.r, cfg.K, eps, delta)
    curve = assemble(profile, config)
    curve.to_csv(os.path.join(out_dir, "curve.csv"))
    curve.to_obj(os.path.join(out_dir, "surface.obj"), angular_res=cfg.angular_res)
    _write_json(os.path.join(out_dir, "export.json"), {
        "samples": int(curve.n), "angular_res": cfg.angular_res,
        "vertices": int(curve.n * cfg.angular_res),
    })
    return EXIT_OK


COMMANDS = {
    "curvature": cmd_curvature,
    "balance": cmd_balance,
    "assemble": cmd_assemble,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "export": cmd_export,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="cmcchain",
        description="Glued chains of near-CMC spheres in warped-product metrics")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--angular-res", type=int, default=None,
                        help="OBJ angular resolution override")
    parser.add_argument("--seedless", action="store_true",
                        help="reserved; the pipeline uses no randomness")
    parser.add_argument("--version", action="version", version=__version__)
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.angular_res is not None:
            cfg.angular_res = args.angular_res
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print("invalid configuration: %s" % exc, file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except InfeasibleError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return EXIT_INFEASIBLE
    except NonConvergenceError as exc:
        print("non-convergence: %s" % exc, file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except CmcChainError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_NO_SOLUTION


if __name__ == "__main__":
    sys.exit(main())
