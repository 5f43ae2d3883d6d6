"""Planar circular restricted three-body problem in rotating coordinates.

Distances are in units of the earth-moon separation, the total mass of the
primaries is one and the moon carries the mass ratio ``mu``.  The earth sits
at ``(-mu, 0)``, the moon at ``(1 - mu, 0)``.  Phase-space points are
``(q1, q2, p1, p2)`` and the Hamiltonian vector field follows the sign
convention ``i_X omega = -dH`` for ``omega = dq ^ dp``, i.e.
``q' = dH/dp`` and ``p' = -dH/dq``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .integrate import Event, solve

__all__ = [
    "SingularityError",
    "DomainError",
    "SystemConfig",
    "PhaseState",
    "TrajectoryEvent",
    "Trajectory",
    "effective_potential",
    "potential_gradient",
    "potential_hessian",
    "hamiltonian",
    "hamiltonian_expanded",
    "hamiltonian_vector_field",
    "apply_involution",
    "involution_matrix",
    "integrate_flow",
    "DEFAULT_COLLISION_RADIUS",
]

DEFAULT_COLLISION_RADIUS = 1e-3
_SINGULAR_EPS = 1e-14  # machine tolerance on unit-scale distances


class SingularityError(ValueError):
    """Raised when a quantity is evaluated at a primary."""


class DomainError(ValueError):
    """Raised when an operation is requested outside its domain."""


@dataclass(frozen=True)
class SystemConfig:
    """Mass ratio of the PCR3BP and the derived primary positions.

    ``mu = 0`` is accepted as the rotating Kepler limit (the moon becomes a
    massless marker at ``(1, 0)``); it is only meant for oracle checks.
    """

    mu: float

    def __post_init__(self):
        mu = float(self.mu)
        if not (0.0 <= mu <= 0.5) or math.isnan(mu):
            raise DomainError(f"mass ratio must lie in (0, 1/2], got {self.mu!r}")
        object.__setattr__(self, "mu", mu)

    @property
    def earth_pos(self) -> np.ndarray:
        return np.array([-self.mu, 0.0])

    @property
    def moon_pos(self) -> np.ndarray:
        return np.array([1.0 - self.mu, 0.0])

    def position(self, primary: str) -> np.ndarray:
        if primary == "earth":
            return self.earth_pos
        if primary == "moon":
            return self.moon_pos
        raise ValueError(f"unknown primary {primary!r}")

    def mass(self, primary: str) -> float:
        if primary == "earth":
            return 1.0 - self.mu
        if primary == "moon":
            return self.mu
        raise ValueError(f"unknown primary {primary!r}")

    @staticmethod
    def other(primary: str) -> str:
        return {"earth": "moon", "moon": "earth"}[primary]


@dataclass(frozen=True)
class PhaseState:
    """A point ``(q, p)`` of phase space in rotating coordinates."""

    q: tuple[float, float]
    p: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "q", (float(self.q[0]), float(self.q[1])))
        object.__setattr__(self, "p", (float(self.p[0]), float(self.p[1])))

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "PhaseState":
        return cls((x[0], x[1]), (x[2], x[3]))

    def as_array(self) -> np.ndarray:
        return np.array([*self.q, *self.p])


def _vec(s) -> np.ndarray:
    if isinstance(s, PhaseState):
        return s.as_array()
    x = np.asarray(s, dtype=float)
    if x.shape != (4,):
        raise ValueError(f"expected a 4-vector phase state, got shape {x.shape}")
    return x


def _distances(cfg: SystemConfig, q: np.ndarray):
    de = np.hypot(q[..., 0] + cfg.mu, q[..., 1])
    dm = np.hypot(q[..., 0] - 1.0 + cfg.mu, q[..., 1])
    return de, dm


def _check_regular(cfg: SystemConfig, de, dm):
    if np.any(de <= _SINGULAR_EPS) or (cfg.mu > 0 and np.any(dm <= _SINGULAR_EPS)):
        raise SingularityError("evaluation at a primary")


def effective_potential(cfg: SystemConfig, q, *, check: bool = True):
    """Effective potential ``-mu/|q-m| - (1-mu)/|q-e| - |q|^2/2``.

    Accepts a single 2-vector or an array whose last axis has length 2.
    """
    q = np.asarray(q, dtype=float)
    de, dm = _distances(cfg, q)
    if check:
        _check_regular(cfg, de, dm)
    with np.errstate(divide="ignore", invalid="ignore"):
        moon = cfg.mu / dm if cfg.mu > 0 else 0.0
        u = -moon - (1.0 - cfg.mu) / de - 0.5 * (q[..., 0] ** 2 + q[..., 1] ** 2)
    return float(u) if np.ndim(u) == 0 else u


def potential_gradient(cfg: SystemConfig, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    e, m = cfg.earth_pos, cfg.moon_pos
    de, dm = _distances(cfg, q)
    _check_regular(cfg, de, dm)
    g = (1.0 - cfg.mu) * (q - e) / de**3 - q
    if cfg.mu > 0:
        g = g + cfg.mu * (q - m) / dm**3
    return g


def potential_hessian(cfg: SystemConfig, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    hess = -np.eye(2)
    for b, mass in ((cfg.earth_pos, 1.0 - cfg.mu), (cfg.moon_pos, cfg.mu)):
        if mass == 0.0:
            continue
        d = q - b
        r = float(np.hypot(*d))
        if r <= _SINGULAR_EPS:
            raise SingularityError("evaluation at a primary")
        hess += mass * (np.eye(2) / r**3 - 3.0 * np.outer(d, d) / r**5)
    return hess


def hamiltonian(cfg: SystemConfig, s) -> float:
    """``H = ((p1 + q2)^2 + (p2 - q1)^2) / 2 + U(q)``."""
    x = _vec(s)
    q1, q2, p1, p2 = x
    return 0.5 * ((p1 + q2) ** 2 + (p2 - q1) ** 2) + effective_potential(cfg, x[:2])


def hamiltonian_expanded(cfg: SystemConfig, s) -> float:
    """Kinetic energy plus potentials plus the angular-momentum term."""
    x = _vec(s)
    q1, q2, p1, p2 = x
    de, dm = _distances(cfg, x[:2])
    _check_regular(cfg, de, dm)
    moon = cfg.mu / dm if cfg.mu > 0 else 0.0
    return 0.5 * (p1 * p1 + p2 * p2) - moon - (1.0 - cfg.mu) / de + p1 * q2 - p2 * q1


def _make_rhs(cfg: SystemConfig):
    mu = cfg.mu
    me = 1.0 - mu
    ex, mx = -mu, 1.0 - mu

    def rhs(t, y):
        q1, q2, p1, p2 = y
        dxe = q1 - ex
        dxm = q1 - mx
        re2 = dxe * dxe + q2 * q2
        rm2 = dxm * dxm + q2 * q2
        ke = me / (re2 * math.sqrt(re2))
        km = mu / (rm2 * math.sqrt(rm2)) if mu > 0 else 0.0
        return np.array(
            (
                p1 + q2,
                p2 - q1,
                p2 - ke * dxe - km * dxm,
                -p1 - ke * q2 - km * q2,
            )
        )

    return rhs


def hamiltonian_vector_field(cfg: SystemConfig, s) -> np.ndarray:
    """``(dH/dp, -dH/dq)`` at ``s``."""
    x = _vec(s)
    de, dm = _distances(cfg, x[:2])
    _check_regular(cfg, de, dm)
    return _make_rhs(cfg)(0.0, x)


_INVOLUTIONS = {
    "rho": np.diag([1.0, -1.0, -1.0, 1.0]),
    "sigma": np.diag([-1.0, 1.0, 1.0, -1.0]),
    "rho_sigma": -np.eye(4),
}


def involution_matrix(kind: str) -> np.ndarray:
    try:
        return _INVOLUTIONS[kind].copy()
    except KeyError:
        raise ValueError(f"unknown involution {kind!r}") from None


def apply_involution(kind: str, s, cfg: SystemConfig | None = None):
    """Apply ``rho``, ``sigma`` or their product to a phase state.

    ``sigma`` and ``rho_sigma`` are symmetries only for equal masses; passing
    a config with ``mu != 1/2`` raises :class:`DomainError`.
    """
    if kind != "rho" and cfg is not None and cfg.mu != 0.5:
        raise DomainError(f"{kind} is a symmetry only for mu = 1/2 (got mu = {cfg.mu})")
    M = involution_matrix(kind)
    if isinstance(s, PhaseState):
        return PhaseState.from_array(M @ s.as_array())
    x = np.asarray(s, dtype=float)
    return x @ M.T


@dataclass(frozen=True)
class TrajectoryEvent:
    kind: str
    t: float
    state: tuple[float, float, float, float]

    def as_dict(self) -> dict:
        return {"kind": self.kind, "t": self.t, "state": list(self.state)}


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped Cartesian phase states with energy and event tags."""

    t: np.ndarray
    states: np.ndarray
    energy: float
    events: tuple[TrajectoryEvent, ...] = ()
    status: str = "complete"
    mu: float | None = None

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        x = np.array(self.states, dtype=float).reshape(-1, 4)
        if t.shape[0] != x.shape[0]:
            raise ValueError("times and states differ in length")
        dt = np.diff(t)
        if t.size > 1 and not (np.all(dt > 0) or np.all(dt < 0)):
            raise ValueError("sample times must be strictly monotone")
        t.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "states", x)

    def __len__(self):
        return self.t.size

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if self.t.size else 0.0

    def phase_state(self, i: int) -> PhaseState:
        return PhaseState.from_array(self.states[i])

    def energies(self, cfg: SystemConfig) -> np.ndarray:
        return np.array([hamiltonian(cfg, x) for x in self.states])

    def max_energy_error(self, cfg: SystemConfig) -> float:
        if not len(self):
            return 0.0
        return float(np.max(np.abs(self.energies(cfg) - self.energy)))

    def rows(self, cfg: SystemConfig) -> Iterable[list[float]]:
        for ti, x, h in zip(self.t, self.states, self.energies(cfg)):
            yield [float(ti), *map(float, x), float(h)]

    def to_csv(self, path, cfg: SystemConfig) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "q1", "q2", "p1", "p2", "H"])
            for row in self.rows(cfg):
                w.writerow([repr(v) for v in row])
        return path

    def to_json(self, cfg: SystemConfig) -> dict:
        return {
            "mu": cfg.mu,
            "energy": self.energy,
            "status": self.status,
            "columns": ["t", "q1", "q2", "p1", "p2", "H"],
            "samples": [list(r) for r in self.rows(cfg)],
            "events": [e.as_dict() for e in self.events],
        }

    def write_json(self, path, cfg: SystemConfig) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(cfg), sort_keys=True, indent=1) + "\n")
        return path

    @classmethod
    def from_csv(cls, path, energy: float | None = None) -> "Trajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        e = float(data[0, 5]) if energy is None else energy
        return cls(data[:, 0], data[:, 1:5], e)


def integrate_flow(
    cfg: SystemConfig,
    s0,
    t_span: tuple[float, float],
    tol: float = 1e-10,
    *,
    collision_radius: float = DEFAULT_COLLISION_RADIUS,
    t_eval: Sequence[float] | None = None,
    axis_crossings: bool = False,
    max_steps: int = 200_000,
) -> Trajectory:
    """Integrate the PCR3BP flow from ``s0`` over ``t_span``.

    The run stops early with a ``collision:<primary>`` event once the
    satellite comes within ``collision_radius`` of a primary; step-size
    underflow is reported the same way rather than raised.  With
    ``axis_crossings`` every crossing of ``q2 = 0`` is tagged.
    """
    x0 = _vec(s0)
    de, dm = _distances(cfg, x0[:2])
    _check_regular(cfg, de, dm)
    if not tol > 0:
        raise ValueError("tol must be positive")
    e, m = cfg.earth_pos, cfg.moon_pos
    events = [
        Event("collision:earth", lambda t, y: math.hypot(y[0] - e[0], y[1]) - collision_radius, -1, 1),
    ]
    if cfg.mu > 0:
        events.append(
            Event("collision:moon", lambda t, y: math.hypot(y[0] - m[0], y[1]) - collision_radius, -1, 1)
        )
    if axis_crossings:
        events.append(Event("axis", lambda t, y: y[1]))
    # tol is the energy-drift budget: pure absolute control at tol/10 keeps
    # close approaches (large momenta) inside it.
    sol = solve(_make_rhs(cfg), t_span, x0, rtol=0.0, atol=0.1 * tol, events=events,
                t_eval=t_eval, max_steps=max_steps)
    tags = [TrajectoryEvent(ev.name, float(ev.t), tuple(map(float, ev.y))) for ev in sol.events]
    status = sol.status
    if status == "step_underflow":
        near = "earth" if math.hypot(*(sol.y[-1, :2] - e)) < math.hypot(*(sol.y[-1, :2] - m)) else "moon"
        tags.append(TrajectoryEvent(f"collision:{near}", float(sol.t[-1]), tuple(map(float, sol.y[-1]))))
        status = f"event:collision:{near}"
    t, y = sol.t, sol.y
    if t.size > 1:
        keep = np.concatenate(([True], np.diff(t) != 0))
        t, y = t[keep], y[keep]
    return Trajectory(t, y, hamiltonian(cfg, x0), tuple(tags), status, cfg.mu)
