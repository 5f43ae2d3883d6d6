"""Hill regions: sublevel sets of the effective potential and their boundaries.

The grid is cell-centred.  A cell is in the region iff ``U(center) <= c``;
the cells containing the primaries are in the region by convention.
Components are 4-connected, so a one-cell diagonal contact across the
first Lagrange point does not merge the two bounded pieces.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from skimage import measure

from .dynamics import SystemConfig, effective_potential, potential_hessian
from .equilibria import lagrange_points
from .svg import PALETTE, Canvas

__all__ = [
    "HillWarning",
    "ComponentInfo",
    "HillRegionMap",
    "ZeroVelocityCurve",
    "classify_point",
    "potential_grid",
    "component_count",
    "zero_velocity_curve",
    "write_contours_csv",
    "render_svg",
    "DEFAULT_BBOX",
    "DEFAULT_RESOLUTION",
]

DEFAULT_BBOX = (-2.0, 2.0, -2.0, 2.0)
DEFAULT_RESOLUTION = (1000, 1000)
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
# the neck (or gap) at L1 should span at least this many cells
MIN_NECK_CELLS = 2.0
CONTOUR_TOL = 1e-6
CRITICAL_TOL = 1e-9


class HillWarning(UserWarning):
    pass


def classify_point(cfg: SystemConfig, c: float, q) -> str:
    return "inside" if effective_potential(cfg, q) <= c else "forbidden"


def _centers(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + (np.arange(n) + 0.5) * ((hi - lo) / n)


def potential_grid(cfg: SystemConfig, bbox=DEFAULT_BBOX, resolution=DEFAULT_RESOLUTION):
    """``(xs, ys, U)`` with ``U[j, i] = U(xs[i], ys[j])`` on cell centres."""
    nx, ny = resolution
    xs = _centers(bbox[0], bbox[1], nx)
    ys = _centers(bbox[2], bbox[3], ny)
    X, Y = np.meshgrid(xs, ys)
    u = effective_potential(cfg, np.stack([X, Y], axis=-1), check=False)
    return xs, ys, u


def _cell_of(xs, ys, bbox, q):
    i = int(math.floor((q[0] - bbox[0]) / (bbox[1] - bbox[0]) * xs.size))
    j = int(math.floor((q[1] - bbox[2]) / (bbox[3] - bbox[2]) * ys.size))
    if 0 <= i < xs.size and 0 <= j < ys.size:
        return j, i
    return None


@dataclass(frozen=True)
class ComponentInfo:
    id: int
    cells: int
    bounded: bool
    contains: str  # "earth", "moon", "both" or "neither"

    def as_dict(self) -> dict:
        return {"id": self.id, "cells": self.cells, "bounded": self.bounded, "contains": self.contains}


@dataclass
class HillRegionMap:
    """Labelled Hill region on a grid; label 0 marks forbidden cells."""

    mu: float
    c: float
    bbox: tuple[float, float, float, float]
    resolution: tuple[int, int]
    labels: np.ndarray
    components: list[ComponentInfo]
    warnings: list[str] = field(default_factory=list)

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def inside(self) -> np.ndarray:
        return self.labels > 0

    def component_of(self, primary: str) -> ComponentInfo | None:
        for comp in self.components:
            if comp.contains in (primary, "both"):
                return comp
        return None

    def summary(self) -> dict:
        return {
            "mu": self.mu,
            "c": self.c,
            "bbox": list(self.bbox),
            "resolution": list(self.resolution),
            "n_components": self.n_components,
            "components": [comp.as_dict() for comp in self.components],
            "warnings": list(self.warnings),
        }


def _neck_width(cfg: SystemConfig, c: float) -> float | None:
    """Quadratic estimate of the half-width of the neck or gap at L1."""
    if cfg.mu == 0.0:
        return None
    l1 = lagrange_points(cfg)[0]
    h = potential_hessian(cfg, l1.q)
    d = c - l1.value
    # U has a maximum along the axis and a minimum across it at L1
    curv = h[1, 1] if d > 0 else -h[0, 0]
    return math.sqrt(2.0 * abs(d) / curv)


def component_count(cfg: SystemConfig, c: float, bbox=DEFAULT_BBOX,
                    resolution=DEFAULT_RESOLUTION) -> HillRegionMap:
    """Label the connected components of ``{U <= c}`` on a grid."""
    bbox = tuple(float(v) for v in bbox)
    resolution = (int(resolution[0]), int(resolution[1]))
    xs, ys, u = potential_grid(cfg, bbox, resolution)
    inside = u <= c
    prim_cells = {}
    for name in ("earth", "moon") if cfg.mu > 0 else ("earth",):
        cell = _cell_of(xs, ys, bbox, cfg.position(name))
        if cell is not None:
            inside[cell] = True
            prim_cells[name] = cell
    labels, n = ndimage.label(inside, structure=FOUR_CONNECTED)

    edge = np.zeros_like(inside)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    touching = set(np.unique(labels[edge & inside]).tolist())
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    where = {name: int(labels[cell]) for name, cell in prim_cells.items()}

    comps = []
    for k in range(1, n + 1):
        has = [name for name, lab in where.items() if lab == k]
        contains = "both" if len(has) == 2 else (has[0] if has else "neither")
        comps.append(ComponentInfo(k, int(counts[k]), k not in touching, contains))

    notes = []
    if len(touching) > 1:
        notes.append(
            f"{len(touching)} components meet the bounding box; enlarge bbox so only the unbounded one does"
        )
    cell = max((bbox[1] - bbox[0]) / resolution[0], (bbox[3] - bbox[2]) / resolution[1])
    width = _neck_width(cfg, c)
    if width is not None and width < MIN_NECK_CELLS * cell:
        notes.append(
            f"neck at L1 spans {width / cell:.2f} cells; refine the grid to at least "
            f"{int(math.ceil(MIN_NECK_CELLS * cell / width * max(resolution)))} per side"
        )
    for msg in notes:
        warnings.warn(msg, HillWarning, stacklevel=2)
    return HillRegionMap(cfg.mu, float(c), bbox, resolution, labels, comps, notes)


@dataclass(frozen=True)
class ZeroVelocityCurve:
    id: int
    points: np.ndarray  # (n, 2), closed curves repeat the first point
    closed: bool
    encloses: str  # "earth", "moon", "both" or "neither"

    def max_level_error(self, cfg: SystemConfig, c: float) -> float:
        return float(np.max(np.abs(effective_potential(cfg, self.points, check=False) - c)))


def _polish(cfg, c, pts, xs, ys):
    """Bisect each marching-squares vertex along its grid edge to ``U = c``."""
    row, col = pts[:, 0], pts[:, 1]
    on_row = np.abs(row - np.round(row)) <= 1e-9
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    # endpoints of the edge each vertex lies on, in data coordinates
    r0 = np.where(on_row, np.round(row), np.floor(row))
    c0 = np.where(on_row, np.floor(col), np.round(col))
    r0 = np.clip(r0, 0, ys.size - 1)
    c0 = np.clip(c0, 0, xs.size - 1)
    r1 = np.where(on_row, r0, np.minimum(r0 + 1, ys.size - 1))
    c1 = np.where(on_row, np.minimum(c0 + 1, xs.size - 1), c0)
    a = np.stack([xs[0] + c0 * dx, ys[0] + r0 * dy], axis=-1)
    b = np.stack([xs[0] + c1 * dx, ys[0] + r1 * dy], axis=-1)
    fa = effective_potential(cfg, a, check=False) - c
    lo = np.zeros(len(pts))
    hi = np.ones(len(pts))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = effective_potential(cfg, a + mid[:, None] * (b - a), check=False) - c
        same = np.sign(fm) == np.sign(fa)
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    t = 0.5 * (lo + hi)
    return a + t[:, None] * (b - a)


def zero_velocity_curve(cfg: SystemConfig, c: float, bbox=DEFAULT_BBOX,
                        resolution=DEFAULT_RESOLUTION) -> list[ZeroVelocityCurve]:
    """Polylines of ``U = c`` with every vertex polished to ``|U - c| <= 1e-6``."""
    if cfg.mu > 0:
        near = [p.label for p in lagrange_points(cfg) if abs(p.value - c) < CRITICAL_TOL]
        if near:
            warnings.warn(f"c is within {CRITICAL_TOL} of the critical value at {near}; contours degenerate",
                          HillWarning, stacklevel=2)
    xs, ys, u = potential_grid(cfg, bbox, resolution)
    raw = measure.find_contours(u, level=c)
    e, m = cfg.earth_pos, cfg.moon_pos
    curves = []
    for k, rc in enumerate(raw):
        pts = _polish(cfg, c, rc, xs, ys)
        closed = bool(np.array_equal(rc[0], rc[-1]))
        if closed:
            pts[-1] = pts[0]
            ins = measure.points_in_poly(np.array([e, m]), pts)
            has_e, has_m = bool(ins[0]), bool(ins[1]) and cfg.mu > 0
            enc = "both" if has_e and has_m else "earth" if has_e else "moon" if has_m else "neither"
        else:
            enc = "neither"
        curves.append(ZeroVelocityCurve(k, pts, closed, enc))
    return curves


def write_contours_csv(curves, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["curve_id", "x", "y"])
        for cv in curves:
            for x, y in cv.points:
                w.writerow([cv.id, repr(float(x)), repr(float(y))])
    return path


def render_svg(hmap: HillRegionMap, curves, path, cfg: SystemConfig | None = None,
               max_pixels: int = 250) -> Path:
    """Labelled regions, zero-velocity curves, primaries and Lagrange points."""
    cv = Canvas(hmap.bbox)
    ny, nx = hmap.labels.shape
    step = max(1, int(math.ceil(max(nx, ny) / max_pixels)))
    small = hmap.labels[::step, ::step]
    colors = {}
    for comp in hmap.components:
        base = PALETTE[(comp.id - 1) % len(PALETTE)]
        colors[comp.id] = base + "55"
    cv.label_image(small, colors)
    for curve in curves:
        cv.polyline(curve.points, color="#000000", width=1.2)
    cfg = cfg or SystemConfig(hmap.mu)
    cv.marker(*cfg.earth_pos, "e", "#1f3a93", 4)
    if cfg.mu > 0:
        cv.marker(*cfg.moon_pos, "m", "#555555", 3)
        for p in lagrange_points(cfg):
            cv.marker(*p.q, p.label, "#c0392b", 2.5)
    cv.text(8, 16, f"mu = {hmap.mu:g}, c = {hmap.c:.6f}, components = {hmap.n_components}")
    return cv.save(path)
