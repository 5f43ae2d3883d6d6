"""Lagrange points, critical values, Morse indices and phase-space lifts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    PhaseState,
    SystemConfig,
    effective_potential,
    potential_gradient,
    potential_hessian,
)

__all__ = [
    "LagrangePoint",
    "CriticalValues",
    "RootFindingError",
    "lagrange_points",
    "critical_values",
    "lift_to_phase",
    "project",
    "collinear_force",
]

BRACKET_OFFSET = 1e-9
BISECT_TOL = 1e-4
NEWTON_TOL = 1e-14
MORSE_THRESHOLD = 1e-8
LABELS = ("L1", "L2", "L3", "L4", "L5")


class RootFindingError(RuntimeError):
    """A collinear root could not be bracketed or polished."""


@dataclass(frozen=True)
class LagrangePoint:
    label: str
    q: tuple[float, float]
    value: float
    morse_index: int

    def as_dict(self) -> dict:
        return {"label": self.label, "q": list(self.q), "U": self.value, "index": self.morse_index}


def collinear_force(cfg: SystemConfig, x: float) -> float:
    """``dU/dq1`` on the axis ``q2 = 0``."""
    e, m = -cfg.mu, 1.0 - cfg.mu
    f = (1.0 - cfg.mu) * (x - e) / abs(x - e) ** 3 - x
    if cfg.mu > 0:
        f += cfg.mu * (x - m) / abs(x - m) ** 3
    return f


def _collinear_slope(cfg: SystemConfig, x: float) -> float:
    e, m = -cfg.mu, 1.0 - cfg.mu
    d = -2.0 * (1.0 - cfg.mu) / abs(x - e) ** 3 - 1.0
    if cfg.mu > 0:
        d -= 2.0 * cfg.mu / abs(x - m) ** 3
    return d


def _collinear_root(cfg: SystemConfig, a: float, b: float) -> float:
    fa, fb = collinear_force(cfg, a), collinear_force(cfg, b)
    if fa * fb > 0:
        raise RootFindingError(f"no sign change on [{a}, {b}]: f = ({fa:.3e}, {fb:.3e})")
    while b - a > BISECT_TOL:
        mid = 0.5 * (a + b)
        fm = collinear_force(cfg, mid)
        if fm == 0.0:
            return mid
        if fa * fm < 0:
            b, fb = mid, fm
        else:
            a, fa = mid, fm
    x = 0.5 * (a + b)
    for _ in range(50):
        step = collinear_force(cfg, x) / _collinear_slope(cfg, x)
        x -= step
        if abs(step) <= NEWTON_TOL * max(1.0, abs(x)):
            break
    else:
        raise RootFindingError(f"Newton polish did not converge on [{a}, {b}]")
    if not (a - BISECT_TOL <= x <= b + BISECT_TOL):
        raise RootFindingError(f"Newton left the bracket [{a}, {b}]: x = {x}")
    return x


def morse_index(cfg: SystemConfig, q) -> int:
    w = np.linalg.eigvalsh(potential_hessian(cfg, q))
    if np.any(np.abs(w) < MORSE_THRESHOLD):
        raise RootFindingError(f"degenerate critical point at {q}: eigenvalues {w}")
    return int(np.sum(w < 0))


def lagrange_points(cfg: SystemConfig) -> list[LagrangePoint]:
    """The five critical points of the effective potential, L1..L5."""
    if cfg.mu == 0.0:
        raise RootFindingError("Lagrange points are undefined in the Kepler limit mu = 0")
    e, m = -cfg.mu, 1.0 - cfg.mu
    # far endpoints: dU/dq1 > 0 at -2 and < 0 at +2 for every admissible mu
    xs = {
        "L1": _collinear_root(cfg, e + BRACKET_OFFSET, m - BRACKET_OFFSET),
        "L2": _collinear_root(cfg, m + BRACKET_OFFSET, 2.0),
        "L3": _collinear_root(cfg, -2.0, e - BRACKET_OFFSET),
    }
    pts = []
    for label in ("L1", "L2", "L3"):
        q = (xs[label], 0.0)
        pts.append(LagrangePoint(label, q, effective_potential(cfg, q), morse_index(cfg, q)))
    s3 = math.sqrt(3.0) / 2.0
    for label, y in (("L4", s3), ("L5", -s3)):
        q = (0.5 - cfg.mu, y)
        pts.append(LagrangePoint(label, q, effective_potential(cfg, q), morse_index(cfg, q)))
    return pts


@dataclass(frozen=True)
class CriticalValues:
    mu: float
    values: dict[str, float]
    relations: tuple[str, ...]
    ordering_ok: bool
    positions_ok: bool

    def __getitem__(self, label: str) -> float:
        return self.values[label]

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "values": dict(self.values),
            "relations": list(self.relations),
            "ordering_ok": self.ordering_ok,
            "positions_ok": self.positions_ok,
        }


def critical_values(cfg: SystemConfig, points: list[LagrangePoint] | None = None,
                    equal_tol: float = 1e-12) -> CriticalValues:
    """Critical values with the ordering chain and the collinear arrangement.

    For ``mu < 1/2`` the chain is ``U1 < U2 < U3 < U4 = U5``; for ``mu = 1/2``
    it is ``U1 < U2 = U3 < U4 = U5``.  Equalities are judged to ``equal_tol``.
    """
    points = points if points is not None else lagrange_points(cfg)
    v = {p.label: p.value for p in points}
    x = {p.label: p.q[0] for p in points}
    rel = []

    def compare(a, b, expect):
        d = v[b] - v[a]
        if abs(d) <= equal_tol:
            got = "="
        else:
            got = "<" if d > 0 else ">"
        rel.append(f"U({a}) {got} U({b})")
        return got == expect

    ok = compare("L1", "L2", "<")
    ok &= compare("L2", "L3", "=" if cfg.mu == 0.5 else "<")
    ok &= compare("L3", "L4", "<")
    ok &= compare("L4", "L5", "=")
    e, m = -cfg.mu, 1.0 - cfg.mu
    pos = x["L3"] < e < x["L1"] < m < x["L2"]
    return CriticalValues(cfg.mu, v, tuple(rel), bool(ok), bool(pos))


def lift_to_phase(q) -> PhaseState:
    """``(q1, q2) -> (q1, q2, -q2, q1)``, the lift of a critical point of U."""
    q1, q2 = float(q[0]), float(q[1])
    return PhaseState((q1, q2), (-q2, q1))


def project(s: PhaseState) -> tuple[float, float]:
    return s.q


def gradient_norm(cfg: SystemConfig, q) -> float:
    return float(np.linalg.norm(potential_gradient(cfg, q)))
