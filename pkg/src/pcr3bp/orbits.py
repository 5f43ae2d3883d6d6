"""Symmetric shooting searches.

Half-chords are shot from a collision (or from the fixed set of ``rho``) to
the ``k``-th crossing of the symmetry axis; a zero of ``p1`` there means the
half-chord ends on ``Fix(rho) = {q2 = 0, p1 = 0}`` and doubles, via ``rho``
and time reversal, to a symmetric consecutive collision (or a symmetric
periodic orbit).  Collision shots run in the Levi-Civita chart of the
primary, so ejection and re-collision are regular points of the flow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from .dynamics import (
    DomainError,
    SystemConfig,
    Trajectory,
    TrajectoryEvent,
    _make_rhs,
    apply_involution,
    effective_potential,
    hamiltonian,
    hamiltonian_vector_field,
)
from .equilibria import lagrange_points
from .integrate import Event, solve
from .regularization import (
    chart_hamiltonian,
    chart_involution,
    chart_to_phase,
    collision_ejection_state,
    levi_civita_transform,
    make_chart_rhs,
)

__all__ = [
    "ChordSpec",
    "Crossing",
    "ShotTrace",
    "OrbitResult",
    "Bracket",
    "SearchResult",
    "shoot_from_collision",
    "shoot_from_fix",
    "find_symmetric_consecutive_collision",
    "find_symmetric_periodic_orbit",
    "find_cross_chord",
    "double_chord",
    "chord_action",
    "fix_momentum",
    "window_energy",
    "write_orbit",
]

DEFAULT_K = 3
BISECT_TOL = 1e-6
ROOT_TOL = 1e-10
FOUND_TOL = 1e-7
INTEGRATION_TOL = 1e-10
SHRINK_FACTOR = 5.0
# relative to the size of the terms, residuals below this cannot shrink in double precision
RESIDUAL_FLOOR = 1e3 * np.finfo(float).eps
NEAR_COLLISION = 1e-3  # distance to the primary that makes a crossing suspect
WINDOW_FRACTION = 0.3


def window_energy(cfg: SystemConfig, fraction: float = WINDOW_FRACTION) -> float:
    """``U(L1) + fraction * (U(L2) - U(L1))``: a level with the neck open."""
    pts = lagrange_points(cfg)
    return pts[0].value + fraction * (pts[1].value - pts[0].value)


def _check_regular(cfg: SystemConfig, c: float):
    if cfg.mu == 0:
        return
    for p in lagrange_points(cfg):
        if abs(p.value - c) < 1e-9:
            raise DomainError(f"c is within 1e-9 of the critical value at {p.label}")


@dataclass(frozen=True)
class ChordSpec:
    start: str  # "collision_e", "collision_m" or "fix_rho"
    end: str
    mu: float
    c: float

    def as_dict(self) -> dict:
        return {"start": self.start, "end": self.end, "mu": self.mu, "c": self.c}


@dataclass(frozen=True)
class Crossing:
    """A crossing of ``q2 = 0``.

    ``branch`` is 0 when the crossing lies on the side ``q1 > b1`` of the
    chart primary (chart axis ``z2 = 0``) and 1 on the other side; for
    Cartesian shots it is 0.
    """

    index: int
    tau: float
    t: float
    q1: float
    p1: float
    branch: int
    distance: float  # to the chart primary (inf for Cartesian shots)
    y: tuple

    @property
    def near_collision(self) -> bool:
        return self.distance < NEAR_COLLISION


@dataclass
class ShotTrace:
    parameter: float
    direction: int
    crossings: list[Crossing]
    collisions: list[float]  # physical times of passages through the primary
    status: str  # "complete", "truncated", "collision" or "left_chart"

    @property
    def truncated(self) -> bool:
        return self.status != "complete"

    def p1_values(self) -> list[float]:
        return [cr.p1 for cr in self.crossings]


def _axis_p1(y) -> tuple[float, int]:
    z1, z2, w1, w2 = y[0], y[1], y[2], y[3]
    if abs(z2) <= abs(z1):
        return w1 / (2.0 * z1), 0
    return -w2 / (2.0 * z2), 1


def shoot_from_collision(cfg: SystemConfig, primary: str, c: float, angle: float,
                         n_crossings: int = DEFAULT_K, t_max: float = 30.0,
                         tol: float = INTEGRATION_TOL, direction: int = 1,
                         other_radius: float = 0.05) -> ShotTrace:
    """Eject from ``primary`` along ``angle`` and record axis crossings.

    With ``direction=-1`` the flow is run backwards from the same collision
    state.  The run stops after ``n_crossings`` crossings, when ``|t|``
    exceeds ``t_max`` (``truncated``) or near the other primary
    (``left_chart``).
    """
    r0 = collision_ejection_state(cfg, primary, c, angle)
    rhs = make_chart_rhs(cfg, c, primary)
    b1 = float(cfg.position(primary)[0])
    other = cfg.other(primary)
    o1 = float(cfg.position(other)[0])
    events = [Event("axis", lambda t, y: y[0] * y[1], 0, n_crossings)]

    def approach(t, y):
        d = rhs(t, y)
        return y[0] * d[0] + y[1] * d[1]

    events.append(Event("approach", approach, direction, 0))
    if cfg.mass(other) > 0:
        def near_other(t, y):
            q1 = b1 + y[0] * y[0] - y[1] * y[1]
            q2 = 2.0 * y[0] * y[1]
            return math.hypot(q1 - o1, q2) - other_radius

        events.append(Event("other", near_other, -1, 1))
    y0 = np.array([*r0.z, *r0.w, 0.0, 0.0])
    tau_end = direction * 1e4
    sol = solve(rhs, (0.0, tau_end), y0, rtol=0.0, atol=tol, events=events,
                stop=lambda t, y: abs(y[4]) > t_max)
    crossings = []
    collisions = []
    for ev in sol.events:
        if ev.name == "axis":
            p1, branch = _axis_p1(ev.y)
            n2 = ev.y[0] ** 2 + ev.y[1] ** 2
            q1 = b1 + ev.y[0] ** 2 - ev.y[1] ** 2
            crossings.append(Crossing(len(crossings) + 1, ev.t, ev.y[4], q1, p1, branch, n2, tuple(ev.y)))
        elif ev.name == "approach" and ev.y[0] ** 2 + ev.y[1] ** 2 < NEAR_COLLISION:
            collisions.append(float(ev.y[4]))
    if sol.status == "event:axis":
        status = "complete"
    elif sol.status == "event:other":
        status = "left_chart"
    else:
        status = "truncated"
    return ShotTrace(float(angle), direction, crossings, collisions, status)


def fix_momentum(cfg: SystemConfig, c: float, x0: float, branch: str) -> float | None:
    """``p2`` with ``H(x0, 0, 0, p2) = c``; ``branch`` picks the sign of ``p2 - q1``."""
    u = effective_potential(cfg, (x0, 0.0), check=False)
    if not np.isfinite(u) or u > c:
        return None
    v = math.sqrt(2.0 * (c - u))
    return x0 + (v if branch == "prograde" else -v)


def shoot_from_fix(cfg: SystemConfig, c: float, x0: float, branch: str,
                   n_crossings: int = DEFAULT_K, t_max: float = 30.0,
                   tol: float = INTEGRATION_TOL, collision_radius: float = NEAR_COLLISION) -> ShotTrace | None:
    """Start on ``Fix(rho)`` at ``(x0, 0, 0, p2)`` and record axis crossings (Cartesian)."""
    p2 = fix_momentum(cfg, c, x0, branch)
    if p2 is None:
        return None
    rhs = _make_rhs(cfg)
    e, m = cfg.earth_pos, cfg.moon_pos
    events = [Event("axis", lambda t, y: y[1], 0, n_crossings),
              Event("collision", lambda t, y: min(math.hypot(y[0] - e[0], y[1]),
                                                  math.hypot(y[0] - m[0], y[1]) if cfg.mu > 0 else math.inf)
                    - collision_radius, -1, 1)]
    sol = solve(rhs, (0.0, t_max), np.array([x0, 0.0, 0.0, p2]), rtol=0.0, atol=tol, events=events)
    crossings = [
        Crossing(k + 1, ev.t, ev.t, ev.y[0], ev.y[2], 0, math.inf, tuple(ev.y))
        for k, ev in enumerate(x for x in sol.events if x.name == "axis")
    ]
    status = {"event:axis": "complete", "event:collision": "collision"}.get(sol.status, "truncated")
    return ShotTrace(float(x0), 1, crossings, [], status)


# ---------------------------------------------------------------------------
# results


@dataclass
class OrbitResult:
    spec: ChordSpec
    parameter: float  # ejection angle or x0
    crossing: int
    branch: str
    half_length: float  # physical time of the half-chord
    trajectory: Trajectory
    chart: np.ndarray | None  # (tau, z1, z2, w1, w2, t, action) rows for collision orbits
    action: float
    residuals: dict[str, float]
    revalidated: dict[str, float] = field(default_factory=dict)
    floors: dict[str, float] = field(default_factory=dict)
    symmetry: str = "rho_symmetric"
    doubled: bool = True
    numerically_isolated: bool = True
    partial_action: float = 0.0

    @property
    def length(self) -> float:
        return 2.0 * self.half_length

    @property
    def found(self) -> bool:
        return all(v <= FOUND_TOL for v in self.residuals.values())

    @property
    def shrink_ratios(self) -> dict[str, float]:
        out = {}
        for k, v in self.residuals.items():
            fine = self.revalidated.get(k)
            if fine is not None:
                out[k] = math.inf if fine == 0.0 else v / fine
        return out

    @property
    def verified(self) -> bool:
        """Re-validation at tolerance/10 shrank every residual above the floor by ``SHRINK_FACTOR``."""
        if "error" in self.revalidated or not self.revalidated:
            return False
        for k, v in self.residuals.items():
            fine = self.revalidated[k]
            if fine > FOUND_TOL:
                return False
            floor = self.floors.get(k, RESIDUAL_FLOOR)
            if v > floor and fine > floor and v < SHRINK_FACTOR * fine:
                return False
        return True

    def summary(self, trajectory_csv_path: str | None = None) -> dict:
        return {
            "spec": self.spec.as_dict(),
            "angle_or_x0": self.parameter,
            "crossing": self.crossing,
            "branch": self.branch,
            "period_or_length": self.length,
            "action": self.action,
            "residuals": dict(self.residuals),
            "revalidated": dict(self.revalidated),
            "verified": self.verified,
            "numerically_isolated": self.numerically_isolated,
            "trajectory_csv_path": trajectory_csv_path,
        }


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    crossing: int
    branch: str
    status: str  # "converged", "discontinuity", "failed" or "rejected"
    root: float | None = None
    note: str = ""

    def as_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "crossing": self.crossing, "branch": self.branch,
                "status": self.status, "root": self.root, "note": self.note}


class SearchResult(list):
    """List of found orbits carrying the bracket diagnostics of the scan."""

    def __init__(self, results=(), brackets=(), grid=None, meta=None):
        super().__init__(results)
        self.brackets: list[Bracket] = list(brackets)
        self.grid = grid
        self.meta = dict(meta or {})

    @property
    def polish_failures(self) -> list[Bracket]:
        return [b for b in self.brackets if b.status == "failed"]

    def report(self) -> dict:
        stat: dict[str, int] = {}
        for b in self.brackets:
            stat[b.status] = stat.get(b.status, 0) + 1
        return {"found": len(self), "brackets": stat, **self.meta}


# ---------------------------------------------------------------------------
# shooting machinery shared by both searches


class _Discontinuity(Exception):
    pass


def _value(trace: ShotTrace | None, k: int, branch: int | None, require_far: bool = True):
    if trace is None or len(trace.crossings) < k:
        raise _Discontinuity("fewer crossings than requested")
    cr = trace.crossings[k - 1]
    if branch is not None and cr.branch != branch:
        raise _Discontinuity("crossing moved through the primary")
    if require_far and cr.near_collision:
        raise _Discontinuity("crossing passes close to the primary")
    return cr


def _polish(shoot, k, lo, hi, flo, fhi, branch, root_tol):
    """Bisection to BISECT_TOL, then Brent's method to ``root_tol``."""
    scale = max(abs(flo), abs(fhi))
    while hi - lo > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fm = _value(shoot(mid), k, branch).p1
        if abs(fm) > 10 * scale:
            raise _Discontinuity("p1 blows up inside the bracket")
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm

    def f(s):
        return _value(shoot(s), k, branch).p1

    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    return brentq(f, lo, hi, xtol=root_tol, rtol=4 * np.finfo(float).eps, maxiter=100)


def _repolish(shoot, k, bracket, root, branch, root_tol):
    """Polish again with a finer shooter, in a narrow window first, then the full bracket."""
    windows = [(max(bracket.lo, root - 10 * BISECT_TOL), min(bracket.hi, root + 10 * BISECT_TOL)),
               (bracket.lo, bracket.hi)]
    for lo, hi in windows:
        flo = _value(shoot(lo), k, branch).p1
        fhi = _value(shoot(hi), k, branch).p1
        if (flo < 0) != (fhi < 0) or flo == 0.0 or fhi == 0.0:
            return _polish(shoot, k, lo, hi, flo, fhi, branch, root_tol)
    raise _Discontinuity("no sign change at the finer tolerance")


def _scan(shoot, grid, k_max, branch_name, root_tol, periodic=False):
    traces = [shoot(s) for s in grid]
    pairs = list(zip(range(len(grid) - 1), range(1, len(grid))))
    if periodic:
        pairs.append((len(grid) - 1, 0))
    brackets = []
    roots = []
    for i, j in pairs:
        a, b = grid[i], grid[j] if j > i else grid[j] + 2 * math.pi
        ta, tb = traces[i], traces[j]
        for k in range(1, k_max + 1):
            if ta is None or tb is None or len(ta.crossings) < k or len(tb.crossings) < k:
                continue
            ca, cb = ta.crossings[k - 1], tb.crossings[k - 1]
            if (ca.p1 < 0) == (cb.p1 < 0):
                continue
            if ca.branch != cb.branch or ca.near_collision or cb.near_collision:
                brackets.append(Bracket(a, b, k, branch_name, "discontinuity", None, "collision between shots"))
                continue
            try:
                s = _polish(shoot, k, a, b, ca.p1, cb.p1, ca.branch, root_tol)
            except _Discontinuity as exc:
                brackets.append(Bracket(a, b, k, branch_name, "discontinuity", None, str(exc)))
                continue
            except (RuntimeError, ValueError) as exc:
                brackets.append(Bracket(a, b, k, branch_name, "failed", None, str(exc)))
                continue
            roots.append((s, k, ca.branch, len(brackets)))
            brackets.append(Bracket(a, b, k, branch_name, "converged", s))
    return traces, brackets, roots


# ---------------------------------------------------------------------------
# consecutive collisions


def _collision_orbit(cfg, primary, c, angle, k, tol, n_samples=201):
    """Integrate the doubled orbit directly over ``[0, 2 tau*]`` and measure it."""
    trace = shoot_from_collision(cfg, primary, c, angle, n_crossings=k, tol=tol)
    cr = _value(trace, k, None, require_far=False)
    tau_star = cr.tau
    half = np.linspace(0.0, tau_star, n_samples)
    taus = np.unique(np.concatenate([half, 2 * tau_star - half]))
    r0 = collision_ejection_state(cfg, primary, c, angle)
    sol = solve(make_chart_rhs(cfg, c, primary), (0.0, 2 * tau_star), np.array([*r0.z, *r0.w, 0.0, 0.0]),
                rtol=0.0, atol=tol, t_eval=taus)
    if sol.t.size != taus.size:
        raise _Discontinuity(f"validation run ended early ({sol.status})")
    Y = sol.y
    lookup = {float(t): i for i, t in enumerate(sol.t)}
    sym = 0.0
    for s in half:
        a = Y[lookup[float(s)], :4]
        b = Y[lookup[float(2 * tau_star - s)], :4] if float(2 * tau_star - s) in lookup else None
        if b is None:
            continue
        sym = max(sym, float(np.max(np.abs(b - chart_involution(a, cr.branch)))))
    endpoint = float(math.hypot(Y[-1, 0], Y[-1, 1]))
    energy = float(max(abs(chart_hamiltonian(cfg, c, primary, y)) for y in Y))
    residuals = {"endpoint": endpoint, "symmetry": sym, "energy": energy}
    size = float(np.max(np.abs(Y[:, :4])))
    scale = float(np.max(np.sum(Y[:, 2:4] ** 2, axis=1))) / 8.0 + cfg.mass(primary)
    floors = {"endpoint": RESIDUAL_FLOOR * size, "symmetry": RESIDUAL_FLOOR * size,
              "energy": RESIDUAL_FLOOR * scale}
    chart = np.column_stack([sol.t, Y])
    return trace, cr, residuals, chart, floors


def _cartesian_trajectory(cfg, primary, c, chart, events=()):
    # the Cartesian momentum is singular at the collision ends
    inner = np.hypot(chart[:, 1], chart[:, 2]) > 1e-4
    rows = chart[inner]
    X = chart_to_phase(cfg, primary, rows[:, 1:5])
    t = rows[:, 5]
    keep = np.concatenate(([True], np.diff(t) > 0))
    return Trajectory(t[keep], X[keep], float(c), tuple(events), "complete", cfg.mu)


def find_symmetric_consecutive_collision(cfg: SystemConfig, primary: str, c: float, grid_size: int = 720,
                                         tol: float = ROOT_TOL, k_max: int = DEFAULT_K,
                                         integration_tol: float = INTEGRATION_TOL,
                                         revalidate: bool = True, t_max: float = 30.0,
                                         direction: int = 1) -> SearchResult:
    """Scan ejection angles for half-chords ending on ``Fix(rho)``.

    Each root is validated by integrating the doubled orbit directly, then
    re-polished and re-validated with both tolerances divided by ten.
    ``direction=-1`` runs the same search on backward ejection traces.
    """
    _check_regular(cfg, c)
    label = {"earth": "collision_e", "moon": "collision_m"}[primary]
    grid = 2 * math.pi * np.arange(grid_size) / grid_size

    def shoot(s, itol=integration_tol):
        return shoot_from_collision(cfg, primary, c, s, n_crossings=k_max, t_max=t_max, tol=itol,
                                    direction=direction)

    _, brackets, roots = _scan(shoot, grid, k_max, "collision", tol, periodic=True)
    results = []
    for s, k, branch, bi in roots:
        if direction != 1:
            continue
        try:
            trace, cr, res, chart, floors = _collision_orbit(cfg, primary, c, s, k, integration_tol)
        except _Discontinuity as exc:
            brackets[bi] = Bracket(brackets[bi].lo, brackets[bi].hi, k, "collision", "rejected", s, str(exc))
            continue
        extra = {}
        if revalidate:
            try:
                def shoot_fine(a):
                    return shoot(a, integration_tol / 10)

                b = brackets[bi]
                s2 = _repolish(shoot_fine, k, b, s, branch, tol / 10)
                _, _, res2, _, _ = _collision_orbit(cfg, primary, c, s2, k, integration_tol / 10)
                extra = dict(res2, angle=s2)
            except (_Discontinuity, RuntimeError, ValueError) as exc:
                extra = {"error": str(exc)}
        action_total = float(chart[-1, 6])
        spec = ChordSpec(label, label, cfg.mu, float(c))
        traj = _cartesian_trajectory(cfg, primary, c, chart)
        result = OrbitResult(spec, float(s % (2 * math.pi)), k, "collision", float(cr.t), traj, chart,
                             action_total, res, extra, floors, partial_action=float(cr.y[5]))
        if result.found and (result.verified or not revalidate):
            results.append(result)
        else:
            brackets[bi] = Bracket(brackets[bi].lo, brackets[bi].hi, k, "collision", "rejected", s,
                                   f"residuals {res}, re-validated {extra}")
    meta = {"mu": cfg.mu, "c": float(c), "primary": primary, "grid_size": grid_size, "k_max": k_max}
    return SearchResult(results, brackets, grid, meta)


# ---------------------------------------------------------------------------
# symmetric periodic orbits


def _periodic_orbit(cfg, c, x0, branch, k, tol, n_samples=201):
    trace = shoot_from_fix(cfg, c, x0, branch, n_crossings=k, tol=tol)
    cr = _value(trace, k, None, require_far=False)
    T = cr.t
    p2 = fix_momentum(cfg, c, x0, branch)
    s0 = np.array([x0, 0.0, 0.0, p2])
    half = np.linspace(0.0, T, n_samples)
    ts = np.unique(np.concatenate([half, 2 * T - half]))
    rhs = _make_rhs(cfg)

    def with_action(t, y):
        f = rhs(t, y[:4])
        return np.append(f, y[2] * f[0] + y[3] * f[1])

    sol = solve(with_action, (0.0, 2 * T), np.append(s0, 0.0), rtol=0.0, atol=tol, t_eval=ts)
    if sol.t.size != ts.size:
        raise _Discontinuity(f"validation run ended early ({sol.status})")
    X = sol.y[:, :4]
    lookup = {float(t): i for i, t in enumerate(sol.t)}
    sym = 0.0
    for t in half:
        j = lookup.get(float(2 * T - t))
        if j is None:
            continue
        sym = max(sym, float(np.max(np.abs(X[j] - apply_involution("rho", X[lookup[float(t)]])))))
    closure = float(np.max(np.abs(X[-1] - s0)))
    energy = float(max(abs(hamiltonian(cfg, x) - c) for x in X))
    traj = Trajectory(sol.t, X, float(c), (), "complete", cfg.mu)
    size = float(np.max(np.abs(X)))
    scale = float(np.max(np.abs(effective_potential(cfg, X[:, :2], check=False)))) + abs(c)
    floors = {"closure": RESIDUAL_FLOOR * size, "symmetry": RESIDUAL_FLOOR * size, "energy": RESIDUAL_FLOOR * scale}
    residuals = {"closure": closure, "symmetry": sym, "energy": energy}
    return cr, residuals, traj, float(sol.y[-1, 4]), floors


def _axis_interval(cfg: SystemConfig, c: float) -> tuple[float, float]:
    """Axis extent of the bounded Hill component at level ``c``."""
    e, m = -cfg.mu, 1.0 - cfg.mu
    pts = {p.label: p for p in lagrange_points(cfg)}
    f = lambda x: effective_potential(cfg, (x, 0.0)) - c
    lo = brentq(f, pts["L3"].q[0], e - 1e-12) if f(pts["L3"].q[0]) > 0 else -2.0
    hi = brentq(f, m + 1e-12, pts["L2"].q[0]) if f(pts["L2"].q[0]) > 0 else 2.0
    if c < pts["L1"].value:
        # below the neck only the earth component is searched by default
        hi = brentq(f, e + 1e-12, pts["L1"].q[0])
    return lo, hi


def find_symmetric_periodic_orbit(cfg: SystemConfig, c: float, x_range=None, grid_size: int = 400,
                                  tol: float = ROOT_TOL, k_max: int = DEFAULT_K,
                                  branches=("prograde", "retrograde"),
                                  integration_tol: float = INTEGRATION_TOL, revalidate: bool = True,
                                  max_results: int | None = None, t_max: float = 30.0) -> SearchResult:
    """Scan ``x0`` on the axis for chords from ``Fix(rho)`` back to ``Fix(rho)``."""
    _check_regular(cfg, c)
    if x_range is None:
        x_range = _axis_interval(cfg, c)
    lo, hi = x_range
    grid = np.linspace(lo, hi, grid_size + 2)[1:-1]
    results = []
    brackets = []
    for branch in branches:
        def shoot(x, itol=integration_tol, branch=branch):
            return shoot_from_fix(cfg, c, x, branch, n_crossings=k_max, t_max=t_max, tol=itol)

        traces, br, roots = _scan(shoot, list(grid), k_max, branch, tol)
        offset = len(brackets)
        brackets.extend(br)
        for x, k, _, bi in roots:
            if max_results is not None and len(results) >= max_results:
                break
            try:
                cr, res, traj, action, floors = _periodic_orbit(cfg, c, x, branch, k, integration_tol)
            except _Discontinuity as exc:
                b = brackets[offset + bi]
                brackets[offset + bi] = Bracket(b.lo, b.hi, k, branch, "rejected", x, str(exc))
                continue
            extra = {}
            if revalidate:
                try:
                    b = brackets[offset + bi]
                    x2 = _repolish(lambda s: shoot(s, integration_tol / 10), k, b, x, 0, tol / 10)
                    _, res2, _, _, _ = _periodic_orbit(cfg, c, x2, branch, k, integration_tol / 10)
                    extra = dict(res2, x0=x2)
                except (_Discontinuity, RuntimeError, ValueError) as exc:
                    extra = {"error": str(exc)}
            spec = ChordSpec("fix_rho", "fix_rho", cfg.mu, float(c))
            result = OrbitResult(spec, float(x), k, branch, float(cr.t), traj, None, action, res, extra,
                                 floors, partial_action=float("nan"))
            if result.found and (result.verified or not revalidate):
                results.append(result)
            else:
                b = brackets[offset + bi]
                brackets[offset + bi] = Bracket(b.lo, b.hi, k, branch, "rejected", x,
                                                f"residuals {res}, re-validated {extra}")
    meta = {"mu": cfg.mu, "c": float(c), "x_range": [float(lo), float(hi)], "grid_size": grid_size,
            "k_max": k_max}
    return SearchResult(results, brackets, grid, meta)


# ---------------------------------------------------------------------------
# earth -> moon chords


@dataclass
class _Approach:
    angle: float
    miss: float | None  # signed closest-approach distance in the moon chart
    t: float
    status: str


def _shoot_cross(cfg, c, angle, t_max, tol, switch_radius, hysteresis, approach_radius):
    """Eject from the earth and return the first close approach to the moon.

    The run is handed from the earth chart to the moon chart inside
    ``switch_radius`` of the moon and back outside ``switch_radius + hysteresis``.
    """
    primary = "earth"
    r0 = collision_ejection_state(cfg, primary, c, angle)
    y = np.array([*r0.z, *r0.w, 0.0, 0.0])
    m1 = float(cfg.moon_pos[0])
    while True:
        t_now = y[4]
        if t_now >= t_max:
            return _Approach(angle, None, t_now, "truncated")
        rhs = make_chart_rhs(cfg, c, primary)
        b1 = float(cfg.position(primary)[0])
        if primary == "earth":
            def g(t, y, b1=b1):
                q1 = b1 + y[0] ** 2 - y[1] ** 2
                return math.hypot(q1 - m1, 2 * y[0] * y[1]) - switch_radius

            events = [Event("switch", g, -1, 1),
                      Event("home", lambda t, y: y[0] ** 2 + y[1] ** 2 - NEAR_COLLISION, -1, 0)]
        else:
            def g(t, y):
                return y[0] ** 2 + y[1] ** 2 - (switch_radius + hysteresis)

            def closest(t, y, rhs=rhs):
                d = rhs(t, y)
                return y[0] * d[0] + y[1] * d[1]

            events = [Event("switch", g, 1, 1), Event("closest", closest, 1, 0)]
        sol = solve(rhs, (0.0, 1e4), y, rtol=0.0, atol=tol, events=events,
                    stop=lambda t, yy: yy[4] > t_max)
        if primary == "moon":
            for ev in sol.events:
                if ev.name != "closest":
                    continue
                z, n2 = ev.y[:2], ev.y[0] ** 2 + ev.y[1] ** 2
                if n2 < approach_radius:
                    d = rhs(0.0, ev.y)
                    speed = math.hypot(d[0], d[1])
                    miss = (z[0] * d[1] - z[1] * d[0]) / speed
                    return _Approach(angle, miss, float(ev.y[4]), "approach")
        if sol.status != "event:switch":
            return _Approach(angle, None, float(sol.y[-1, 4]), "truncated")
        x = chart_to_phase(cfg, primary, sol.y[-1])
        primary = "moon" if primary == "earth" else "earth"
        r = levi_civita_transform(cfg, primary, x, c, energy_tol=1e-6)
        y = np.array([*r.z, *r.w, sol.y[-1, 4], sol.y[-1, 5]])
        del e1


def find_cross_chord(cfg: SystemConfig, c: float | None = None, grid_size: int = 360, tol: float = ROOT_TOL,
                     t_max: float = 8.0, integration_tol: float = 1e-11, switch_radius: float = 0.3,
                     hysteresis: float = 0.05, approach_radius: float = 0.05) -> SearchResult:
    """Earth-to-moon collision chords: zeros of the moon-chart miss distance.

    The parity report compares the count with the homology rank, which is
    zero for this pair; nondegenerate chords would then come in pairs.
    Nothing is asserted about existence.
    """
    if c is None:
        c = window_energy(cfg)
    _check_regular(cfg, c)
    if c <= lagrange_points(cfg)[0].value:
        raise DomainError("the neck at L1 is closed; earth-moon chords need c above U(L1)")
    grid = 2 * math.pi * np.arange(grid_size) / grid_size

    def shoot(a):
        return _shoot_cross(cfg, c, a, t_max, integration_tol, switch_radius, hysteresis, approach_radius)

    shots = [shoot(a) for a in grid]
    brackets, roots = [], []
    for i in range(grid_size):
        j = (i + 1) % grid_size
        sa, sb = shots[i], shots[j]
        a, b = grid[i], grid[j] + (2 * math.pi if j == 0 else 0.0)
        if sa.miss is None or sb.miss is None or (sa.miss < 0) == (sb.miss < 0):
            continue
        if abs(sa.t - sb.t) > 0.5:
            brackets.append(Bracket(a, b, 1, "moon", "discontinuity", None, "approach times differ"))
            continue

        def f(s):
            sh = shoot(s)
            if sh.miss is None:
                raise _Discontinuity("no approach")
            return sh.miss

        try:
            s = brentq(f, a, b, xtol=tol, maxiter=100)
        except _Discontinuity as exc:
            brackets.append(Bracket(a, b, 1, "moon", "discontinuity", None, str(exc)))
            continue
        except (RuntimeError, ValueError) as exc:
            brackets.append(Bracket(a, b, 1, "moon", "failed", None, str(exc)))
            continue
        sh = shoot(s)
        roots.append((s, sh))
        brackets.append(Bracket(a, b, 1, "moon", "converged", s))
    results = []
    for s, sh in roots:
        spec = ChordSpec("collision_e", "collision_m", cfg.mu, float(c))
        res = {"endpoint": abs(sh.miss) ** 2}  # miss is in chart units; distance is its square
        traj = Trajectory([0.0], np.zeros((1, 4)) * np.nan, float(c), (), "summary", cfg.mu)
        results.append(OrbitResult(spec, float(s % (2 * math.pi)), 1, "earth->moon", sh.t, traj, None,
                                   float("nan"), res, doubled=False, symmetry="none"))
    n = len(results)
    meta = {"mu": cfg.mu, "c": float(c), "grid_size": grid_size, "count": n,
            "parity": "even" if n % 2 == 0 else "odd", "homology_rank": 0,
            "prediction": "nondegenerate chords pair up (rank 0); count is reported, not asserted"}
    return SearchResult(results, brackets, grid, meta)


# ---------------------------------------------------------------------------
# doubling and action


def double_chord(half: Trajectory, tol: float = 1e-8) -> Trajectory:
    """Append ``rho`` of the time-reversed half-chord; the half must end on ``Fix(rho)``."""
    x_end = half.states[-1]
    if abs(x_end[1]) > tol or abs(x_end[2]) > tol:
        raise DomainError(f"half-chord ends off Fix(rho): q2 = {x_end[1]:.3e}, p1 = {x_end[2]:.3e}")
    T = half.t[-1]
    t0 = half.t[0]
    mirror_t = 2 * T - half.t[::-1][1:]
    mirror_x = apply_involution("rho", half.states[::-1][1:])
    t = np.concatenate([half.t, mirror_t])
    x = np.concatenate([half.states, mirror_x])
    events = tuple(half.events) + (TrajectoryEvent("fix_rho", float(T), tuple(map(float, x_end))),)
    del t0
    return Trajectory(t, x, half.energy, events, "complete", half.mu)


def chord_action(orbit, cfg: SystemConfig | None = None, c: float | None = None) -> dict:
    """``integral of p dq`` along the orbit and the fixed-energy action ``integral p dq - c T``.

    For an :class:`OrbitResult` the integral comes from the action component
    of the orbit integration.  For a :class:`Trajectory` the integrand
    ``p . dH/dp`` is integrated over the samples with Simpson's rule (needs
    ``cfg``) or ``p . dq`` with the trapezoidal rule (without ``cfg``); the
    error estimate compares against every other sample.
    """
    if isinstance(orbit, OrbitResult):
        c = orbit.spec.c if c is None else c
        return {"p_dq": orbit.action, "action": orbit.action - c * orbit.length, "quadrature_error": 0.0}
    traj = orbit
    c = traj.energy if c is None else c
    x = traj.states
    if len(traj) < 5:
        raise ValueError("need at least 5 samples for a quadrature estimate")
    if cfg is not None:
        f = np.array([np.dot(xi[2:], hamiltonian_vector_field(cfg, xi)[:2]) for xi in x])
        fine = float(simpson(f, x=traj.t))
        coarse = float(simpson(f[::2], x=traj.t[::2]))
        err = abs(fine - coarse) / 15.0
    else:
        def trap(xs):
            return float(np.sum(0.5 * (xs[1:, 2:] + xs[:-1, 2:]) * np.diff(xs[:, :2], axis=0)))

        fine = trap(x)
        idx = np.unique(np.append(np.arange(0, len(x), 2), len(x) - 1))
        err = abs(fine - trap(x[idx])) / 3.0
    return {"p_dq": fine, "action": fine - c * traj.duration, "quadrature_error": err}


def write_orbit(result: OrbitResult, directory, stem: str, cfg: SystemConfig) -> dict:
    directory = Path(directory)
    csv_path = result.trajectory.to_csv(directory / f"{stem}.csv", cfg)
    summary = result.summary(csv_path.name)
    (directory / f"{stem}.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")
    return summary
