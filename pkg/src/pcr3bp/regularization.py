"""Collision regularization.

Two pictures of the same closure are provided.

* The Moser picture swaps position and momentum about a primary ``b``,
  ``(q, p) -> (x, y) = (p, b - q)``, and compactifies the new base ``x`` to
  the unit sphere by inverse stereographic projection from the north pole.
  Collisions land on the fiber over the north pole.  The transported level
  set is the zero set of

      K(xi, eta) = |y| (H - c),   with  y = D(xi)^T eta,  |y| = |eta| (1 - xi3),

  which is smooth up to that fiber.  This is used for the geometric checks.

* A Levi-Civita chart ``q - b = z^2`` (complex squaring) with ``p = A(z)^{-T} w``
  and time change ``dt = |z|^2 dtau`` is used to integrate through collisions.
  The chart Hamiltonian is ``|z|^2 (H - c)`` expressed in ``(z, w)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dynamics import (
    DomainError,
    PhaseState,
    SystemConfig,
    effective_potential,
    hamiltonian,
    hamiltonian_vector_field,
)
from .equilibria import lagrange_points

__all__ = [
    "CotangentSpherePoint",
    "RegularizedState",
    "StarshapedReport",
    "moser_map",
    "moser_jacobian",
    "stereographic_lift",
    "stereographic_chart",
    "lift_arrays",
    "chart_differential",
    "moser_hamiltonian",
    "moser_to_phase",
    "rho_bar",
    "fibonacci_sphere",
    "tangent_frame",
    "regularized_energy_surface_sample",
    "write_samples_csv",
    "starshaped_check",
    "levi_civita_transform",
    "inverse_transform",
    "chart_hamiltonian",
    "regularized_vector_field",
    "make_chart_rhs",
    "collision_ejection_state",
    "pushforward_residual",
    "integrate_chart",
    "chart_to_phase",
    "chart_involution",
    "NORTH_POLE",
]

NORTH_POLE = np.array([0.0, 0.0, 1.0])
POLE_EPS = 1e-12


# ---------------------------------------------------------------------------
# Moser picture


def moser_map(b, s) -> tuple[np.ndarray, np.ndarray]:
    """``(q, p) -> (p, b - q)``."""
    x = s.as_array() if isinstance(s, PhaseState) else np.asarray(s, dtype=float)
    b = np.asarray(b, dtype=float)
    return x[..., 2:4].copy(), b - x[..., 0:2]


def moser_jacobian() -> np.ndarray:
    """Jacobian of the swap on ``(q1, q2, p1, p2)``; independent of ``b``."""
    J = np.zeros((4, 4))
    J[0, 2] = J[1, 3] = 1.0
    J[2, 0] = J[3, 1] = -1.0
    return J


@dataclass(frozen=True)
class CotangentSpherePoint:
    """A covector on the unit sphere: ``|base| = 1`` and ``base . covector = 0``."""

    base: tuple[float, float, float]
    covector: tuple[float, float, float]

    def __post_init__(self):
        b = np.asarray(self.base, dtype=float)
        v = np.asarray(self.covector, dtype=float)
        if abs(np.linalg.norm(b) - 1.0) > 1e-12 or abs(b @ v) > 1e-12 * max(1.0, np.linalg.norm(v)):
            raise ValueError("not a point of the cotangent bundle of the unit sphere")
        object.__setattr__(self, "base", tuple(map(float, b)))
        object.__setattr__(self, "covector", tuple(map(float, v)))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.base), np.array(self.covector)


def chart_differential(xi) -> np.ndarray:
    """Columns of the stereographic differential written in ``xi``; shape ``(..., 3, 2)``.

    At ``xi = iota(x)`` this equals ``d iota(x)``; both columns vanish at the
    north pole.
    """
    xi = np.asarray(xi)
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    s = 1.0 - x3
    d1 = np.stack([s - x1 * x1, -x1 * x2, x1 * s], axis=-1)
    d2 = np.stack([-x1 * x2, s - x2 * x2, x2 * s], axis=-1)
    return np.stack([d1, d2], axis=-1)


def lift_arrays(x, y):
    """Vectorized stereographic lift ``(x, y) -> (xi, eta)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n2 = np.sum(x * x, axis=-1)
    s = 1.0 + n2
    xi = np.stack([2 * x[..., 0] / s, 2 * x[..., 1] / s, (n2 - 1.0) / s], axis=-1)
    D = chart_differential(xi)
    eta = np.einsum("...ij,...j->...i", D, y) * (s * s / 4.0)[..., None]
    return xi, eta


def stereographic_lift(x, y) -> CotangentSpherePoint:
    """Base ``iota(x)`` and the covector pairing with ``d iota`` like ``y`` does."""
    xi, eta = lift_arrays(x, y)
    return CotangentSpherePoint(tuple(xi), tuple(eta))


def stereographic_chart(xi, eta):
    """Inverse of :func:`lift_arrays` away from the north pole."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    s = 1.0 - xi[..., 2]
    if np.any(s <= POLE_EPS):
        raise DomainError("the north-pole fiber has no chart image")
    x = xi[..., :2] / s[..., None]
    y = np.einsum("...ji,...j->...i", chart_differential(xi), eta)
    return x, y


def _sqrt_sumsq(v):
    # holomorphic norm: lets complex-step derivatives pass through
    return np.sqrt(np.sum(v * v, axis=-1))


def moser_hamiltonian(cfg: SystemConfig, c: float, primary: str, xi, eta):
    """``K = |y| (H - c)`` on ``T*S^2``; smooth across the north-pole fiber.

    Vectorized over leading axes and safe for complex arguments.
    """
    b = cfg.position(primary)
    o = cfg.position(cfg.other(primary))
    mb, mo = cfg.mass(primary), cfg.mass(cfg.other(primary))
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    x1, x2, x3 = xi[..., 0], xi[..., 1], xi[..., 2]
    e1, e2, e3 = eta[..., 0], eta[..., 1], eta[..., 2]
    s = 1.0 - x3
    # y = D^T eta, written out
    y1 = (s - x1 * x1) * e1 - x1 * x2 * e2 + x1 * s * e3
    y2 = -x1 * x2 * e1 + (s - x2 * x2) * e2 + x2 * s * e3
    r = np.sqrt(e1 * e1 + e2 * e2 + e3 * e3)
    k = r * (0.5 * (1.0 + x3) - c * s + x1 * (b[1] - y2) - x2 * (b[0] - y1)) - mb
    if mo > 0:
        d1 = b[0] - y1 - o[0]
        d2 = b[1] - y2 - o[1]
        k = k - mo * r * s / np.sqrt(d1 * d1 + d2 * d2)
    return k


def moser_to_phase(cfg: SystemConfig, primary: str, xi, eta) -> np.ndarray:
    """``(q1, q2, p1, p2)`` for points off the north-pole fiber."""
    x, y = stereographic_chart(xi, eta)
    q = cfg.position(primary) - y
    return np.concatenate([q, x], axis=-1)


def rho_bar(xi, eta):
    """Reflection at the meridian ``xi1 = 0`` composed with ``eta -> -eta``."""
    R = np.array([-1.0, 1.0, 1.0])
    return np.asarray(xi) * R, -np.asarray(eta) * R


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform points on the unit sphere (deterministic)."""
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)


def tangent_frame(xi) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent frame ``(e1, e2)`` with ``e1 x e2 = xi``."""
    xi = np.asarray(xi, dtype=float)
    d1 = chart_differential(xi)[..., 0]
    n = np.linalg.norm(d1, axis=-1, keepdims=True)
    # at the north pole d1 vanishes; any frame will do there
    fallback = np.broadcast_to(np.array([1.0, 0.0, 0.0]), xi.shape)
    e1 = np.where(n > 1e-9, d1 / np.where(n > 1e-9, n, 1.0), fallback)
    e1 = e1 - np.sum(e1 * xi, axis=-1, keepdims=True) * xi
    e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(xi, e1)
    return e1, e2


# ---------------------------------------------------------------------------
# Fiberwise starshapedness


@dataclass
class StarshapedReport:
    mu: float
    c: float
    primary: str
    n_fibers: int
    n_rays: int
    min_transversality: float
    min_liouville_derivative: float
    each_ray_single_crossing: bool
    crossing_histogram: dict[int, int]
    bad_fibers: list[int]
    north_pole_radius: float

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "c": self.c,
            "primary": self.primary,
            "n_fibers": self.n_fibers,
            "n_rays": self.n_rays,
            "min_transversality": self.min_transversality,
            "min_liouville_derivative": self.min_liouville_derivative,
            "each_ray_single_crossing": self.each_ray_single_crossing,
            "crossing_histogram": {str(k): v for k, v in sorted(self.crossing_histogram.items())},
            "bad_fibers": list(self.bad_fibers),
            "north_pole_radius": self.north_pole_radius,
        }


class _Component:
    """Grid lookup of the Hill component containing a primary."""

    def __init__(self, cfg: SystemConfig, c: float, primary: str, resolution=(1000, 1000)):
        from .hill import DEFAULT_BBOX, component_count

        self.bbox = DEFAULT_BBOX
        self.hmap = component_count(cfg, c, self.bbox, resolution)
        comp = self.hmap.component_of(primary)
        if comp is None or not comp.bounded:
            raise DomainError(f"no bounded Hill component around the {primary} at c = {c}")
        self.label = comp.id
        ny, nx = self.hmap.labels.shape
        self.shape = (ny, nx)
        js, is_ = np.nonzero(self.hmap.labels == self.label)
        b = cfg.position(primary)
        xs = self.bbox[0] + (is_ + 0.5) * (self.bbox[1] - self.bbox[0]) / nx
        ys = self.bbox[2] + (js + 0.5) * (self.bbox[3] - self.bbox[2]) / ny
        cell = (self.bbox[1] - self.bbox[0]) / nx
        self.extent = float(np.max(np.hypot(xs - b[0], ys - b[1]))) + 4 * cell

    def contains(self, q) -> np.ndarray:
        ny, nx = self.shape
        i = np.floor((q[..., 0] - self.bbox[0]) / (self.bbox[1] - self.bbox[0]) * nx).astype(int)
        j = np.floor((q[..., 1] - self.bbox[2]) / (self.bbox[3] - self.bbox[2]) * ny).astype(int)
        ok = (i >= 0) & (i < nx) & (j >= 0) & (j < ny)
        out = np.zeros(q.shape[:-1], dtype=bool)
        out[ok] = self.hmap.labels[j[ok], i[ok]] == self.label
        return out


def _radial_grid(n: int) -> np.ndarray:
    """Unit-interval samples: geometric near 0, uniform further out."""
    g = np.geomspace(1e-6, 1.0, n - n // 2)
    u = np.linspace(0.0, 1.0, n // 2 + 1)[1:]
    return np.unique(np.concatenate([g, u]))


def _ray_crossings(cfg, c, primary, comp, xi, dirs, n_radial, r_cap):
    """Crossing counts and located crossings for rays ``r * dirs`` over ``xi``.

    ``xi``: ``(F, 3)`` base points; ``dirs``: ``(F, R, 3)`` unit covectors.
    Returns ``(counts, r_star, dK/dr)`` each of shape ``(F, R)``; ``r_star``
    is the first crossing (nan where none).
    """
    F, R = dirs.shape[:2]
    b = cfg.position(primary)
    s = 1.0 - xi[:, 2]
    r_hi = np.minimum(comp.extent / np.maximum(s, 1e-300), np.broadcast_to(r_cap, s.shape))
    t = _radial_grid(n_radial)
    r = r_hi[:, None, None] * t[None, None, :]  # (F, 1, N)
    XI = xi[:, None, None, :]
    ETA = dirs[:, :, None, :] * r[..., None]  # (F, R, N, 3)
    k = moser_hamiltonian(cfg, c, primary, XI, ETA)
    D = chart_differential(xi)  # (F, 3, 2)
    ydir = np.einsum("fji,frj->fri", D, dirs)  # y per unit r
    q = b - ydir[:, :, None, :] * r[..., None]
    u = effective_potential(cfg, q, check=False)
    forbidden = u > c
    # samples before the first exit belong to the component by connectedness
    exited = np.cumsum(forbidden, axis=-1) > 0
    allowed = (~exited) | comp.contains(q)
    valid = allowed | forbidden
    pair = valid[..., :-1] & valid[..., 1:] & ~(forbidden[..., :-1] & forbidden[..., 1:])
    pos = k >= 0  # a sample exactly on the level counts as outside
    change = pair & (pos[..., :-1] != pos[..., 1:])
    counts = change.sum(axis=-1)

    first = np.argmax(change, axis=-1)
    has = counts > 0
    fi, ri = np.nonzero(has)
    lo = r[fi, 0, first[fi, ri]]
    hi = r[fi, 0, first[fi, ri] + 1]
    xs = xi[fi]
    ds = dirs[fi, ri]
    k_lo = moser_hamiltonian(cfg, c, primary, xs, ds * lo[:, None])
    # brackets are at most a few percent wide: 48 halvings reach roundoff
    for _ in range(48):
        mid = 0.5 * (lo + hi)
        km = moser_hamiltonian(cfg, c, primary, xs, ds * mid[:, None])
        same = (km >= 0) == (k_lo >= 0)
        lo = np.where(same, mid, lo)
        k_lo = np.where(same, km, k_lo)
        hi = np.where(same, hi, mid)
    rstar = 0.5 * (lo + hi)
    h = 1e-20 * np.maximum(rstar, 1.0)
    dk = np.imag(moser_hamiltonian(cfg, c, primary, xs.astype(complex), ds * (rstar + 1j * h)[:, None])) / h
    r_out = np.full((F, R), np.nan)
    d_out = np.full((F, R), np.nan)
    r_out[fi, ri] = rstar
    d_out[fi, ri] = dk
    return counts, r_out, d_out


def starshaped_check(cfg: SystemConfig, c: float, primary: str = "earth", n_fibers: int = 200,
                     n_rays: int = 200, n_radial: int = 256, chunk: int = 25,
                     r_cap: float = 1e6) -> StarshapedReport:
    """Count crossings of fiber rays with the regularized level ``K = 0``.

    Fibers sit over a Fibonacci lattice on the sphere plus the north pole.
    Transversality is the radial derivative ``dK/dr`` at the crossing.
    """
    if cfg.mu > 0 and c >= lagrange_points(cfg)[0].value:
        raise DomainError("fiberwise starshapedness is checked below the first critical value")
    comp = _Component(cfg, c, primary)
    bases = np.vstack([fibonacci_sphere(n_fibers), NORTH_POLE])
    e1, e2 = tangent_frame(bases)
    th = 2 * math.pi * np.arange(n_rays) / n_rays
    hist: dict[int, int] = {}
    bad = []
    min_d = math.inf
    min_l = math.inf
    pole_r = math.nan
    for start in range(0, len(bases), chunk):
        sl = slice(start, start + chunk)
        dirs = np.cos(th)[None, :, None] * e1[sl, None, :] + np.sin(th)[None, :, None] * e2[sl, None, :]
        is_pole = (1.0 - bases[sl, 2]) <= POLE_EPS
        cap = np.where(is_pole, 4.0 * max(cfg.mass(primary), 1e-3), r_cap)
        counts, rs, dks = _ray_crossings(cfg, c, primary, comp, bases[sl], dirs, n_radial, cap)
        for f in range(dirs.shape[0]):
            for v in counts[f]:
                hist[int(v)] = hist.get(int(v), 0) + 1
            if np.any(counts[f] != 1):
                bad.append(start + f)
            ok = counts[f] == 1
            if np.any(ok):
                min_d = min(min_d, float(np.min(dks[f][ok])))
                min_l = min(min_l, float(np.min((rs[f] * dks[f])[ok])))
            if is_pole[f]:
                pole_r = float(np.nanmean(rs[f]))
    return StarshapedReport(cfg.mu, float(c), primary, n_fibers + 1, n_rays, min_d, min_l,
                            not bad, hist, bad, pole_r)


def regularized_energy_surface_sample(cfg: SystemConfig, c: float, primary: str, n: int,
                                      n_collision: int | None = None) -> list[CotangentSpherePoint]:
    """Points of the regularized level: one ray crossing per Fibonacci fiber plus the collision circle."""
    if n <= 0:
        return []
    comp = _Component(cfg, c, primary)
    bases = fibonacci_sphere(n)
    e1, e2 = tangent_frame(bases)
    golden = math.pi * (3.0 - math.sqrt(5.0))
    th = golden * np.arange(n) * 1.618
    dirs = (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)[:, None, :]
    out = []
    for f in range(n):
        counts, rs, _ = _ray_crossings(cfg, c, primary, comp, bases[f:f + 1], dirs[f:f + 1], 256, 1e6)
        if counts[0, 0] >= 1:
            out.append(CotangentSpherePoint(tuple(bases[f]), tuple(rs[0, 0] * dirs[f, 0])))
    m = n_collision if n_collision is not None else max(8, n // 10)
    rad = cfg.mass(primary)
    for k in range(m):
        a = 2 * math.pi * k / m
        out.append(CotangentSpherePoint((0.0, 0.0, 1.0), (rad * math.cos(a), rad * math.sin(a), 0.0)))
    return out


def write_samples_csv(points, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bx", "by", "bz", "cx", "cy", "cz"])
        for pt in points:
            w.writerow([repr(v) for v in (*pt.base, *pt.covector)])
    return path


# ---------------------------------------------------------------------------
# Levi-Civita chart


@dataclass(frozen=True)
class RegularizedState:
    z: tuple[float, float]
    w: tuple[float, float]
    tau: float
    primary: str
    c: float
    mu: float

    def as_array(self) -> np.ndarray:
        return np.array([*self.z, *self.w])

    @property
    def cfg(self) -> SystemConfig:
        return SystemConfig(self.mu)


def chart_involution(y, branch: int = 0) -> np.ndarray:
    """``rho`` in chart variables; ``branch=1`` is the other lift ``z -> -conj(z)``."""
    y = np.asarray(y, dtype=float)
    M = np.array([1.0, -1.0, -1.0, 1.0]) if branch == 0 else np.array([-1.0, 1.0, 1.0, -1.0])
    return y * M


def _check_axis_primary(cfg, primary):
    if cfg.position(primary)[1] != 0.0:
        raise DomainError("chart requires the primary on the symmetry axis")


def levi_civita_transform(cfg: SystemConfig, primary: str, s, c: float, energy_tol: float = 1e-9,
                          tau: float = 0.0) -> RegularizedState:
    """Principal-branch chart point of a phase state on the level ``H = c``."""
    x = s.as_array() if isinstance(s, PhaseState) else np.asarray(s, dtype=float)
    h = hamiltonian(cfg, x)
    if abs(h - c) > energy_tol:
        raise DomainError(f"state is off the level: H - c = {h - c:.3e}")
    b = cfg.position(primary)
    d = complex(x[0] - b[0], x[1] - b[1])
    if d == 0:
        raise DomainError("collision state; use collision_ejection_state")
    z = np.sqrt(d)
    z1, z2 = z.real, z.imag
    p1, p2 = x[2], x[3]
    w1 = 2.0 * (z1 * p1 + z2 * p2)
    w2 = 2.0 * (-z2 * p1 + z1 * p2)
    return RegularizedState((z1, z2), (w1, w2), tau, primary, float(c), cfg.mu)


def chart_to_phase(cfg: SystemConfig, primary: str, y) -> np.ndarray:
    """Vectorized chart -> Cartesian map on rows ``(z1, z2, w1, w2, ...)``."""
    y = np.asarray(y)
    z1, z2, w1, w2 = y[..., 0], y[..., 1], y[..., 2], y[..., 3]
    b = cfg.position(primary)
    n2 = z1 * z1 + z2 * z2
    with np.errstate(divide="ignore", invalid="ignore"):
        p1 = (z1 * w1 - z2 * w2) / (2.0 * n2)
        p2 = (z2 * w1 + z1 * w2) / (2.0 * n2)
    return np.stack([b[0] + z1 * z1 - z2 * z2, b[1] + 2.0 * z1 * z2, p1, p2], axis=-1)


def inverse_transform(r: RegularizedState) -> PhaseState:
    if r.z[0] == 0.0 and r.z[1] == 0.0:
        raise DomainError("z = 0 is the collision locus")
    return PhaseState.from_array(chart_to_phase(r.cfg, r.primary, r.as_array()))


def chart_hamiltonian(cfg: SystemConfig, c: float, primary: str, y) -> float:
    """``|z|^2 (H - c)`` in chart variables."""
    _check_axis_primary(cfg, primary)
    z1, z2, w1, w2 = (float(v) for v in np.asarray(y)[:4])
    b1 = cfg.position(primary)[0]
    mb = cfg.mass(primary)
    other = cfg.other(primary)
    mo, o1 = cfg.mass(other), cfg.position(other)[0]
    n2 = z1 * z1 + z2 * z2
    k = (w1 * w1 + w2 * w2) / 8.0 - 0.5 * b1 * (z2 * w1 + z1 * w2) - 0.5 * n2 * (z1 * w2 - z2 * w1)
    k -= mb + c * n2
    if mo > 0:
        d1 = b1 + z1 * z1 - z2 * z2 - o1
        d2 = 2.0 * z1 * z2
        k -= n2 * mo / math.hypot(d1, d2)
    return k


def make_chart_rhs(cfg: SystemConfig, c: float, primary: str):
    """RHS on ``(z1, z2, w1, w2, t, action)`` in fictitious time.

    ``t' = |z|^2`` recovers physical time and ``action' = w . z'`` integrates
    ``p dq``.
    """
    _check_axis_primary(cfg, primary)
    b1 = float(cfg.position(primary)[0])
    other = cfg.other(primary)
    mo, o1 = cfg.mass(other), float(cfg.position(other)[0])

    def rhs(tau, y):
        z1, z2, w1, w2 = y[0], y[1], y[2], y[3]
        n2 = z1 * z1 + z2 * z2
        cross = z1 * w2 - z2 * w1
        dz1 = 0.25 * w1 - 0.5 * b1 * z2 + 0.5 * n2 * z2
        dz2 = 0.25 * w2 - 0.5 * b1 * z1 - 0.5 * n2 * z1
        kz1 = -0.5 * b1 * w2 - z1 * cross - 0.5 * n2 * w2 - 2.0 * c * z1
        kz2 = -0.5 * b1 * w1 - z2 * cross + 0.5 * n2 * w1 - 2.0 * c * z2
        if mo > 0:
            d1 = b1 + z1 * z1 - z2 * z2 - o1
            d2 = 2.0 * z1 * z2
            dd = math.sqrt(d1 * d1 + d2 * d2)
            inv = 1.0 / dd
            inv3 = inv * inv * inv
            # G = mo |z|^2 / |q - o|
            g_dot = d1 * 2.0 * z1 + d2 * 2.0 * z2
            h_dot = -d1 * 2.0 * z2 + d2 * 2.0 * z1
            kz1 -= mo * (2.0 * z1 * inv - n2 * g_dot * inv3)
            kz2 -= mo * (2.0 * z2 * inv - n2 * h_dot * inv3)
        return np.array((dz1, dz2, -kz1, -kz2, n2, w1 * dz1 + w2 * dz2))

    return rhs


def regularized_vector_field(r: RegularizedState) -> np.ndarray:
    """``(z', w')`` in fictitious time; finite on the collision locus."""
    rhs = make_chart_rhs(r.cfg, r.c, r.primary)
    return rhs(r.tau, np.array([*r.z, *r.w, 0.0, 0.0]))[:4]


def collision_ejection_state(cfg: SystemConfig, primary: str, c: float, angle: float) -> RegularizedState:
    """Collision point ``z = 0`` ejecting along ``angle`` in configuration space.

    Near ``z = 0`` one has ``z' = w/4`` and ``q - b = z^2``, so the chart
    momentum points at half the configuration angle.  ``|w|^2 = 8 m_b``
    makes the chart Hamiltonian vanish.
    """
    _check_axis_primary(cfg, primary)
    a = 0.5 * math.fmod(math.fmod(angle, 2 * math.pi) + 2 * math.pi, 2 * math.pi)
    rad = math.sqrt(8.0 * cfg.mass(primary))
    return RegularizedState((0.0, 0.0), (rad * math.cos(a), rad * math.sin(a)), 0.0, primary, float(c), cfg.mu)


def pushforward_residual(r: RegularizedState) -> float:
    """``| dX/dtau - |z|^2 X_H |`` for the Cartesian image ``X`` of the chart flow."""
    cfg = r.cfg
    z1, z2 = r.z
    n2 = z1 * z1 + z2 * z2
    if n2 == 0.0:
        raise DomainError("pushforward undefined on the collision locus")
    y = np.array([*r.z, *r.w])
    f = regularized_vector_field(r)
    # complex-step derivative of the chart map along the flow
    h = 1e-30
    dX = np.imag(chart_to_phase(cfg, r.primary, y + 1j * h * f)) / h
    x = chart_to_phase(cfg, r.primary, y)
    return float(np.max(np.abs(dX - n2 * hamiltonian_vector_field(cfg, x))))


def integrate_chart(cfg: SystemConfig, c: float, primary: str, y0, tau_span, tol: float = 1e-12,
                    events=(), tau_eval=None, max_steps: int = 200_000):
    """Integrate the chart flow on ``(z1, z2, w1, w2, t, action)``.

    ``y0`` may be a :class:`RegularizedState` or a 4- or 6-vector; physical
    time and action start at zero when omitted.
    """
    from .integrate import solve

    if isinstance(y0, RegularizedState):
        y0 = np.array([*y0.z, *y0.w, 0.0, 0.0])
    y0 = np.asarray(y0, dtype=float)
    if y0.size == 4:
        y0 = np.concatenate([y0, [0.0, 0.0]])
    return solve(make_chart_rhs(cfg, c, primary), tau_span, y0, rtol=0.0, atol=tol,
                 events=events, t_eval=tau_eval, max_steps=max_steps)
