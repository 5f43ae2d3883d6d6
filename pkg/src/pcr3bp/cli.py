"""Command-line entry point: ``pcr3bp <command> [options]``.

Exit codes: 0 when every checked invariant holds, 1 when a check fails (a
machine-readable ``failure.json`` is written), 2 for usage errors.
Settings come from built-in defaults, then an optional INI file
(``[run]`` plus a section named after the command), then flags.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import contact, handle, hill, homology, orbits
from .dynamics import DomainError, SystemConfig, effective_potential
from .equilibria import RootFindingError, critical_values, gradient_norm, lagrange_points
from .regularization import starshaped_check
from .svg import PALETTE, Canvas

__all__ = ["RunConfig", "UsageError", "parse_energy", "build_parser", "main"]

_ENERGY_RE = re.compile(r"^\s*(L[1-5])\s*(?:([+-])\s*(\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|window))?\s*$")


class UsageError(ValueError):
    pass


def parse_energy(text, cfg: SystemConfig) -> float:
    """Numeric energy, or ``L<k>``, ``L<k>+d``, ``L<k>-d``; ``L1+window`` is the default window above ``L1``."""
    if text is None:
        raise UsageError("an energy is required (number or e.g. L1-0.05)")
    if isinstance(text, (int, float)):
        return float(text)
    try:
        return float(text)
    except ValueError:
        pass
    m = _ENERGY_RE.match(str(text))
    if not m:
        raise UsageError(f"cannot parse energy {text!r}")
    if cfg.mu == 0:
        raise UsageError("symbolic energies need mu > 0")
    label, sign, amount = m.groups()
    base = critical_values(cfg)[label]
    if amount is None:
        return base
    if amount == "window":
        if label != "L1" or sign != "+":
            raise UsageError("only L1+window is defined")
        return orbits.window_energy(cfg)
    return base + float(amount) if sign == "+" else base - float(amount)


@dataclass
class RunConfig:
    command: str
    mu: float
    energy: str | None
    tol: float | None
    output_dir: Path
    seed: int
    options: dict = field(default_factory=dict)

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(self.mu)

    def c(self) -> float:
        return parse_energy(self.energy, self.system)


# command -> option -> (type, default, help)
OPTIONS = {
    "lagrange": {},
    "hill": {"resolution": (int, 1000, "grid cells per axis"),
             "bbox": (str, "-2,2,-2,2", "xmin,xmax,ymin,ymax")},
    "starshaped": {"primary": (str, "earth", "earth or moon"), "fibers": (int, 200, "fiber count"),
                   "rays": (int, 200, "rays per fiber")},
    "orbit-search": {"type": (str, "symmetric-collision",
                              "symmetric-collision, symmetric-periodic or cross-chord"),
                     "primary": (str, "earth", "earth or moon"), "grid": (int, None, "shooting grid size"),
                     "crossings": (int, 3, "axis crossings K"), "t_max": (float, None, "time limit per shot")},
    "handle-check": {"n": (int, 1, "half dimension"), "k": (int, 1, "handle index"),
                     "eps": (float, 0.1, "cutoff width"), "delta": (float, 0.01, "cutoff depth"),
                     "samples": (int, 10_000, "samples per surface"), "sweep": (bool, False, "run the full sweep")},
    "contact-check": {"primary": (str, "earth", "earth or moon"), "samples": (int, 10_000, "surface samples"),
                      "kappa": (float, contact.DEFAULT_KAPPA, "exact perturbation, relative to the primary mass"),
                      "include_neck": (bool, False, "also report the neck above the first critical value")},
    "homology": {"pair": (str, "all", "pair name or all"), "degree": (int, homology.DEFAULT_DEGREE, "top degree")},
}
NEEDS_ENERGY = {"hill", "starshaped", "orbit-search", "contact-check"}
DEFAULT_ENERGY = {"orbit-search": "L1-0.05", "contact-check": "L1-0.05", "starshaped": "L1-0.05"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file with [run] and per-command sections")
    common.add_argument("--mu", type=float, default=None, help="mass ratio in (0, 1/2]")
    common.add_argument("--energy", default=None, help="Jacobi energy, numeric or symbolic like L1-0.05")
    common.add_argument("--tol", type=float, default=None, help="root tolerance of the searches")
    common.add_argument("--output-dir", type=Path, default=None, help="directory for artifacts")
    common.add_argument("--seed", type=int, default=None, help="seed for all random sampling")
    p = argparse.ArgumentParser(prog="pcr3bp", description="Planar circular restricted three-body toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd, opts in OPTIONS.items():
        sp = sub.add_parser(cmd, parents=[common])
        for name, (typ, _, hlp) in opts.items():
            if typ is bool:
                sp.add_argument(_flag(name), dest=name, action="store_const", const=True, default=None, help=hlp)
            else:
                sp.add_argument(_flag(name), dest=name, type=typ, default=None, help=hlp)
    return p


def _convert(typ, text):
    if typ is bool:
        return str(text).strip().lower() in ("1", "true", "yes", "on")
    return typ(text)


def resolve(args: argparse.Namespace) -> RunConfig:
    ini = configparser.ConfigParser()
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"config file not found: {args.config}")
        ini.read(args.config)
    run = ini["run"] if ini.has_section("run") else {}
    sect = ini[args.command] if ini.has_section(args.command) else {}

    def pick(name, typ, default):
        v = getattr(args, name, None)
        if v is not None:
            return v
        for s in (sect, run):
            key = name if name in s else name.replace("_", "-")
            if key in s:
                try:
                    return _convert(typ, s[key])
                except ValueError as exc:
                    raise UsageError(f"bad value for {name} in config: {s[key]!r}") from exc
        return default

    mu = pick("mu", float, 0.5)
    options = {name: pick(name, typ, d) for name, (typ, d, _) in OPTIONS[args.command].items()}
    return RunConfig(args.command, mu, pick("energy", str, DEFAULT_ENERGY.get(args.command)), pick("tol", float, None),
                     Path(pick("output_dir", str, "output")), pick("seed", int, 0), options)


def _dump(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1, default=_jsonable) + "\n")
    return path


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _clean(obj):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


class CheckFailed(Exception):
    def __init__(self, report: dict):
        super().__init__(report.get("reason", "check failed"))
        self.report = report


# ---------------------------------------------------------------------------
# commands


def cmd_lagrange(rc: RunConfig) -> dict:
    cfg = rc.system
    pts = lagrange_points(cfg)
    cv = critical_values(cfg, pts)
    rows = []
    print(f"{'label':<6}{'q1':>22}{'q2':>22}{'U':>22}{'index':>7}{'|grad U|':>12}")
    for p in pts:
        g = gradient_norm(cfg, p.q)
        rows.append({**p.as_dict(), "grad_norm": g})
        print(f"{p.label:<6}{p.q[0]:>22.15f}{p.q[1]:>22.15f}{p.value:>22.15f}{p.morse_index:>7d}{g:>12.2e}")
    print("ordering: " + ", ".join(cv.relations))
    out = {"mu": cfg.mu, "points": rows, "critical_values": cv.as_dict()}
    _dump(out, rc.output_dir / "lagrange.json")
    if not (cv.ordering_ok and cv.positions_ok):
        raise CheckFailed({"reason": "critical-value ordering violated", **out})
    return out


def cmd_hill(rc: RunConfig) -> dict:
    cfg = rc.system
    c = rc.c()
    bbox = tuple(float(v) for v in rc.options["bbox"].split(","))
    n = rc.options["resolution"]
    hmap = hill.component_count(cfg, c, bbox, (n, n))
    curves = hill.zero_velocity_curve(cfg, c, bbox, (n, n))
    hill.write_contours_csv(curves, rc.output_dir / "zero_velocity.csv")
    hill.render_svg(hmap, curves, rc.output_dir / "hill.svg", cfg)
    err = max((float(np.max(np.abs(effective_potential(cfg, cv.points) - c))) for cv in curves), default=0.0)
    out = {**hmap.summary(), "n_curves": len(curves), "max_contour_error": err}
    _dump(out, rc.output_dir / "hill.json")
    print(f"mu = {cfg.mu:g}  c = {c:.12f}  components = {hmap.n_components}")
    for comp in hmap.components:
        print(f"  component {comp.id}: cells={comp.cells} bounded={comp.bounded} contains={comp.contains}")
    if err > hill.CONTOUR_TOL:
        raise CheckFailed({"reason": "zero-velocity vertices off the level", **out})
    return out


def cmd_starshaped(rc: RunConfig) -> dict:
    cfg = rc.system
    c = rc.c()
    o = rc.options
    rep = starshaped_check(cfg, c, o["primary"], o["fibers"], o["rays"])
    out = _clean(rep.as_dict())
    _dump(out, rc.output_dir / "starshaped.json")
    ok = rep.each_ray_single_crossing and rep.min_transversality > 0
    print(f"single crossing: {rep.each_ray_single_crossing}  min dK/dr = {rep.min_transversality:.6g}")
    if not ok:
        raise CheckFailed({"reason": "fiber rays with multiple or no crossings", **out})
    return out


def _orbit_svg(cfg, c, results, path):
    cv = Canvas((-2.0, 2.0, -2.0, 2.0))
    for curve in hill.zero_velocity_curve(cfg, c, resolution=(400, 400)):
        cv.polyline(curve.points, color="#888888", width=0.8)
    for i, o in enumerate(results):
        cv.polyline(o.trajectory.states[:, :2], color=PALETTE[i % len(PALETTE)], width=1.2)
    cv.marker(*cfg.earth_pos, "e", "#1f3a93", 4)
    cv.marker(*cfg.moon_pos, "m", "#555555", 3)
    for p in lagrange_points(cfg):
        cv.marker(*p.q, p.label, "#c0392b", 2.5)
    cv.text(8, 16, f"mu = {cfg.mu:g}, c = {c:.6f}, orbits = {len(results)}")
    cv.save(path)


ORACLE_PAIR = {"symmetric-collision": "Le_Le", "symmetric-periodic": "Fix_Fix", "cross-chord": "Le_Lm"}


def cmd_orbit_search(rc: RunConfig) -> dict:
    cfg = rc.system
    c = rc.c()
    o = rc.options
    kind = o["type"]
    kw = {}
    if rc.tol is not None:
        kw["tol"] = rc.tol
    if o["t_max"] is not None:
        kw["t_max"] = o["t_max"]
    if kind == "symmetric-collision":
        res = orbits.find_symmetric_consecutive_collision(cfg, o["primary"], c, grid_size=o["grid"] or 720,
                                                          k_max=o["crossings"], **kw)
    elif kind == "symmetric-periodic":
        res = orbits.find_symmetric_periodic_orbit(cfg, c, grid_size=o["grid"] or 400, k_max=o["crossings"], **kw)
    elif kind == "cross-chord":
        res = orbits.find_cross_chord(cfg, c, grid_size=o["grid"] or 360, **kw)
    else:
        raise UsageError(f"unknown search type {kind!r}")
    summaries = [orbits.write_orbit(r, rc.output_dir, f"orbit_{i:03d}", cfg) for i, r in enumerate(res)]
    pair = ORACLE_PAIR[kind]
    oracle = homology.forcing_summary(pair, 10)
    out = _clean({"type": kind, "mu": cfg.mu, "c": c, "report": res.report(), "orbits": summaries,
                  "brackets": [b.as_dict() for b in res.brackets], "oracle": oracle})
    _dump(out, rc.output_dir / "search.json")
    _orbit_svg(cfg, c, res, rc.output_dir / "orbits.svg")
    print(f"{kind}: mu = {cfg.mu:g}  c = {c:.12f}  found = {len(res)}")
    for i, s in enumerate(summaries):
        worst = max(s["residuals"].values()) if s["residuals"] else float("nan")
        print(f"  {i:3d}  param = {s['angle_or_x0']:.12f}  length = {s['period_or_length']:.9f}  "
              f"action = {s['action']:.9f}  max residual = {worst:.2e}  verified = {s['verified']}")
    print(f"oracle {pair}: lower bound {oracle['lower_bound']} (degrees 0..10), parity rule: {oracle['parity_rule']}")
    if res.polish_failures:
        raise CheckFailed({"reason": "sign changes that polishing did not resolve", **out})
    return out


def cmd_handle_check(rc: RunConfig) -> dict:
    o = rc.options
    if o["sweep"]:
        reps = handle.parameter_sweep(o["samples"], rc.seed)
    else:
        reps = [handle.transversality_check(handle.HandleParams(o["n"], o["k"], o["eps"], o["delta"]),
                                            o["samples"], rc.seed)]
    out = {"reports": [r.as_dict() for r in reps], "passed": all(r.passed for r in reps)}
    _dump(_clean(out), rc.output_dir / "handle.json")
    for r in reps:
        p = r.params
        print(f"n={p.n} k={p.k} eps={p.eps:g} delta={p.delta:g}  min X.phi = {r.min_Xphi:.6g}  "
              f"min X.psi = {r.min_Xpsi:.6g}  passed = {r.passed}")
    if not out["passed"]:
        raise CheckFailed({"reason": "nonpositive transversality", **out})
    return out


def cmd_contact_check(rc: RunConfig) -> dict:
    cfg = rc.system
    c = rc.c()
    o = rc.options
    contact.check_domain(cfg, c)
    reps = contact.contact_condition_check(cfg, c, o["primary"], o["samples"], o["kappa"],
                                           include_neck=o["include_neck"])
    rng = np.random.default_rng(rc.seed)
    P = rng.standard_normal((1000, 6))
    V = rng.standard_normal((1000, 6))
    lk = contact.perturbed_primitive(o["kappa"] * cfg.mass(o["primary"]))
    anti = {"lambda_rho": contact.anti_invariance_error(contact.antisymmetrize(contact.canonical_one_form), P, V),
            "lambda_kappa_rho": contact.anti_invariance_error(contact.antisymmetrize(lk), P, V)}
    Pc, T = contact.collision_circle(cfg, o["primary"], 512)
    leg = []
    for name, form in (("lambda", contact.canonical_one_form), ("lambda_kappa_rho", contact.antisymmetrize(lk))):
        for curve, (A, B) in ((f"collision_{o['primary'][0]}", (Pc, T)),
                              (f"rho_collision_{o['primary'][0]}", (Pc @ contact.RHO_BAR.T, T @ contact.RHO_BAR.T))):
            leg.append(contact.legendrian_check(form, A, B, curve, name, cfg, c, o["primary"]).as_dict())
    asserted = [r for r in reps if r.region != "neck"]
    ok = all(r.passed for r in asserted) and max(anti.values()) <= 1e-14 and all(x["legendrian"] for x in leg)
    out = _clean({"mu": cfg.mu, "c": c, "contact": [r.as_dict() for r in reps], "anti_invariance": anti,
                  "legendrian": leg, "passed": ok})
    _dump(out, rc.output_dir / "contact.json")
    for r in reps:
        print(f"{r.form:<22}{r.region:<16}n={r.n_samples:<7d}min = {r.min_value:.6g}"
              + ("  (reported only)" if r.region == "neck" else ""))
    print(f"anti-invariance: {max(anti.values()):.2e}  Legendrian max: {max(x['max_abs'] for x in leg):.2e}")
    if not ok:
        raise CheckFailed({"reason": "contact condition, anti-invariance or Legendrian check failed", **out})
    return out


def cmd_homology(rc: RunConfig) -> dict:
    o = rc.options
    pairs = list(homology.PAIRS) if o["pair"] == "all" else [o["pair"]]
    for p in pairs:
        if p not in homology.PAIRS:
            raise UsageError(f"unknown pair {p!r}; expected one of {', '.join(homology.PAIRS)} or all")
    N = o["degree"]
    (rc.output_dir / "homology.csv").write_text(homology.rank_table_csv(pairs, N))
    out = {"degree": N, "pairs": {p: homology.forcing_summary(p, N) for p in pairs}}
    _dump(out, rc.output_dir / "homology.json")
    sys.stdout.write(homology.rank_table_text(pairs, N))
    return out


COMMANDS = {
    "lagrange": cmd_lagrange,
    "hill": cmd_hill,
    "starshaped": cmd_starshaped,
    "orbit-search": cmd_orbit_search,
    "handle-check": cmd_handle_check,
    "contact-check": cmd_contact_check,
    "homology": cmd_homology,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = resolve(args)
        cfg = rc.system
        if rc.command in NEEDS_ENERGY:
            rc.c()
    except (UsageError, DomainError) as exc:
        parser.error(str(exc))
    if cfg.mu == 0 and rc.command != "homology":
        parser.error("mu must be positive for this command")
    try:
        rc.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {rc.output_dir}: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[rc.command](rc)
    except UsageError as exc:
        parser.error(str(exc))
    except CheckFailed as exc:
        _dump(_clean(exc.report), rc.output_dir / "failure.json")
        print(f"check failed: {exc}", file=sys.stderr)
        return 1
    except (DomainError, RootFindingError, ValueError) as exc:
        _dump({"reason": str(exc), "command": rc.command}, rc.output_dir / "failure.json")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
