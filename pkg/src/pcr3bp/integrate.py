"""Adaptive DOP853 integrator with PI step control and event location.

The stepper is generic over the right-hand side ``fun(t, y) -> ndarray`` and
is used both for the Cartesian flow and for the regularized charts.  Events
are located by re-stepping from the start of the bracketing step with a
shortened step size, so located states carry the full order of the method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _tableau as tab

__all__ = ["Event", "EventHit", "Solution", "solve", "rk_step"]

_N = tab.N_STAGES
_A = tab.A
_B = tab.B
_C = tab.C
_E3 = tab.E3[:_N]
_E5 = tab.E5[:_N]

# PI controller (Gustafsson); beta as in Hairer's DOP853.
_BETA = 0.04
_ALPHA = 1.0 / 8.0 - 0.2 * _BETA
_SAFETY = 0.9
_FAC_MIN = 0.333
_FAC_MAX = 6.0


@dataclass
class Event:
    """Scalar event function ``fn(t, y)`` whose zeros are tracked.

    ``direction`` restricts detection to increasing (+1) or decreasing (-1)
    crossings; ``terminal`` stops the integration after that many hits
    (0 means never stop).
    """

    name: str
    fn: Callable[[float, np.ndarray], float]
    direction: int = 0
    terminal: int = 0


@dataclass(frozen=True)
class EventHit:
    name: str
    t: float
    y: np.ndarray


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray
    events: list[EventHit] = field(default_factory=list)
    status: str = "complete"
    n_steps: int = 0
    n_rejected: int = 0


def rk_step(fun, t: float, y: np.ndarray, h: float, f0: np.ndarray | None = None):
    """One DOP853 step; returns ``(y_new, K)`` with the 12 stage slopes."""
    K = np.empty((_N, y.size))
    K[0] = fun(t, y) if f0 is None else f0
    for s in range(1, _N):
        K[s] = fun(t + _C[s] * h, y + h * (_A[s, :s] @ K[:s]))
    return y + h * (_B @ K), K


def _error_norm(K, h, scale):
    err5 = (_E5 @ K) / scale
    err3 = (_E3 @ K) / scale
    e5 = float(err5 @ err5)
    e3 = float(err3 @ err3)
    if e5 == 0.0 and e3 == 0.0:
        return 0.0
    return abs(h) * e5 / math.sqrt((e5 + 0.01 * e3) * scale.size)


def _initial_step(fun, t0, y0, f0, direction, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.linalg.norm(y0 / scale) / math.sqrt(y0.size)
    d1 = np.linalg.norm(f0 / scale) / math.sqrt(y0.size)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = fun(t0 + h0 * direction, y1)
    d2 = np.linalg.norm((f1 - f0) / scale) / math.sqrt(y0.size) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1)


def _locate(fun, ev, t, y, f0, h, g0, g1):
    """Illinois regula falsi on the step size inside a bracketing step."""
    a, b = 0.0, h
    ga, gb = g0, g1
    yb = None
    side = 0
    tol = 4e-16 * max(1.0, abs(t) + abs(h))
    for _ in range(80):
        r = (a * gb - b * ga) / (gb - ga)
        if not (min(a, b) < r < max(a, b)):
            r = 0.5 * (a + b)
        yr, _ = rk_step(fun, t, y, r, f0)
        gr = ev.fn(t + r, yr)
        if gr == 0.0:
            return t + r, yr
        if gr * gb > 0:
            b, gb, yb = r, gr, yr
            if side == -1:
                ga *= 0.5
            side = -1
        else:
            a, ga = r, gr
            if side == 1:
                gb *= 0.5
            side = 1
        if abs(b - a) <= tol:
            break
    if yb is None:
        yb, _ = rk_step(fun, t, y, b, f0)
    return t + b, yb


def _crossed(ev, g0, g1):
    if g0 == 0.0 or g0 * g1 > 0:
        return False
    if g1 == 0.0:
        up = g0 < 0
    else:
        up = g1 > g0
    if ev.direction > 0 and not up:
        return False
    if ev.direction < 0 and up:
        return False
    return True


def solve(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t_span: tuple[float, float],
    y0: Sequence[float],
    rtol: float = 1e-10,
    atol: float | None = None,
    events: Sequence[Event] = (),
    t_eval: Sequence[float] | None = None,
    max_steps: int = 200_000,
    h_init: float | None = None,
    stop: Callable[[float, np.ndarray], bool] | None = None,
) -> Solution:
    """Integrate ``y' = fun(t, y)`` over ``t_span`` (either direction).

    Without ``t_eval`` every accepted step is recorded; with ``t_eval`` the
    steps are clipped to land exactly on the requested times and only those
    are recorded.  ``stop(t, y)`` is polled after each step and ends the run
    with status ``"stopped"`` when true.  Step-size underflow ends the run
    with status ``"step_underflow"`` instead of raising.
    """
    if atol is None:
        atol = rtol
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.array(y0, dtype=float)
    direction = 1.0 if t1 >= t0 else -1.0
    out_t = [t0]
    out_y = [y.copy()]
    targets = None
    if t_eval is not None:
        targets = [float(s) for s in t_eval]
        if targets and targets[0] == t0:
            targets = targets[1:]
        else:
            out_t, out_y = [], []
        targets.reverse()
    sol = Solution(t=np.empty(0), y=np.empty((0, y.size)))
    if t1 == t0:
        sol.t = np.array(out_t)
        sol.y = np.array(out_y).reshape(-1, y.size)
        return sol

    t = t0
    f = fun(t, y)
    h = abs(h_init) if h_init else _initial_step(fun, t, y, f, direction, rtol, atol)
    g_prev = [ev.fn(t, y) for ev in events]
    counts = [0] * len(events)
    err_prev = 1e-4
    status = "complete"

    while direction * (t1 - t) > 0:
        if sol.n_steps >= max_steps:
            status = "max_steps"
            break
        h_min = 10 * np.spacing(abs(t)) + 1e-300
        if h < h_min:
            status = "step_underflow"
            break
        h_try = min(h, abs(t1 - t))
        clipped = False
        if targets:
            gap = abs(targets[-1] - t)
            if gap <= h_try:
                h_try = gap
                clipped = True
        step = direction * h_try
        y_new, K = rk_step(fun, t, y, step, f)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _error_norm(K, step, scale)
        if not np.isfinite(err):
            h *= 0.25
            sol.n_rejected += 1
            continue
        if err > 1.0:
            h = h_try * max(_FAC_MIN, _SAFETY * err ** (-_ALPHA))
            sol.n_rejected += 1
            continue
        sol.n_steps += 1
        t_new = t1 if (not clipped and h_try == abs(t1 - t)) else t + step
        if clipped:
            t_new = targets[-1]
        f_new = fun(t_new, y_new)

        g_new = [ev.fn(t_new, y_new) for ev in events]
        hits = []
        for i, ev in enumerate(events):
            if _crossed(ev, g_prev[i], g_new[i]):
                te, ye = _locate(fun, ev, t, y, f, step, g_prev[i], g_new[i])
                hits.append((direction * (te - t), i, te, ye))
        hits.sort(key=lambda item: item[0])
        terminal_hit = False
        for _, i, te, ye in hits:
            sol.events.append(EventHit(events[i].name, te, ye))
            counts[i] += 1
            if events[i].terminal and counts[i] >= events[i].terminal:
                terminal_hit = True
                out_t.append(te)
                out_y.append(ye.copy())
                status = f"event:{events[i].name}"
                break
        if terminal_hit:
            break

        fac = _SAFETY * (max(err, 1e-10) ** (-_ALPHA)) * (err_prev ** _BETA)
        fac = min(_FAC_MAX, max(_FAC_MIN, fac))
        err_prev = max(err, 1e-4)
        h = h_try * fac if not clipped else max(h, h_try * fac)
        t, y, f, g_prev = t_new, y_new, f_new, g_new
        if targets is None:
            out_t.append(t)
            out_y.append(y.copy())
        elif clipped:
            out_t.append(t)
            out_y.append(y.copy())
            targets.pop()
        if stop is not None and stop(t, y):
            status = "stopped"
            break

    sol.t = np.array(out_t)
    sol.y = np.array(out_y).reshape(-1, y.size)
    sol.status = status
    return sol
