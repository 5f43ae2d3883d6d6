import json
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from pcr3bp.dynamics import DomainError, SystemConfig, Trajectory, apply_involution, hamiltonian, integrate_flow
from pcr3bp.equilibria import critical_values, lagrange_points, lift_to_phase
from pcr3bp.orbits import (
    ChordSpec,
    chord_action,
    double_chord,
    find_cross_chord,
    find_symmetric_consecutive_collision,
    find_symmetric_periodic_orbit,
    fix_momentum,
    shoot_from_collision,
    shoot_from_fix,
    window_energy,
    write_orbit,
)


def kepler_crossings(c, theta0, n):
    """Axis crossings of the rectilinear rotating-Kepler ejection orbit."""
    a = -1.0 / (2.0 * c)
    period = 2 * math.pi * a**1.5
    out = []
    k = 0
    while len(out) < n:
        t = (theta0 % math.pi) + k * math.pi
        k += 1
        m = (t % period) / a**1.5
        eta = brentq(lambda e: e - math.sin(e) - m, 0.0, 2 * math.pi)
        rdot = math.sin(eta) / (math.sqrt(a) * (1 - math.cos(eta)))
        side = 1.0 if round((theta0 - t) / math.pi) % 2 == 0 else -1.0
        out.append((t, side * rdot))
    return out


def test_kepler_crossing_oracle():
    cfg = SystemConfig(0.0)
    c, th0 = -1.2, 0.7
    tr = shoot_from_collision(cfg, "earth", c, th0, n_crossings=3)
    assert tr.status == "complete"
    assert len(tr.collisions) >= 2
    for cr, (t, p1) in zip(tr.crossings, kepler_crossings(c, th0, 3)):
        assert abs(cr.t - t) <= 1e-8
        assert abs(cr.p1 - p1) <= 1e-8


@pytest.mark.parametrize("angle", [0.4, 1.3, 2.9, 4.4])
def test_mirror_trace(angle):
    # rho maps the forward orbit at -angle onto the backward orbit at angle
    cfg = SystemConfig(0.3)
    c = critical_values(cfg)["L1"] - 0.05
    fwd = shoot_from_collision(cfg, "earth", c, -angle)
    bwd = shoot_from_collision(cfg, "earth", c, angle, direction=-1)
    assert len(fwd.crossings) == len(bwd.crossings) == 3
    for a, b in zip(fwd.crossings, bwd.crossings):
        assert abs(a.t + b.t) <= 1e-8
        assert abs(a.p1 + b.p1) <= 1e-8 * max(1.0, abs(a.p1))
        assert abs(a.q1 - b.q1) <= 1e-8


def test_truncated_trace_flagged():
    cfg = SystemConfig(0.0)
    tr = shoot_from_collision(cfg, "earth", -1.2, 0.7, n_crossings=3, t_max=1.0)
    assert tr.truncated and tr.status == "truncated"
    assert len(tr.crossings) == 1


@pytest.fixture(scope="module")
def collision_search():
    cfg = SystemConfig(0.5)
    c = critical_values(cfg)["L1"] - 0.05
    return cfg, c, find_symmetric_consecutive_collision(cfg, "earth", c, grid_size=360)


def test_collision_search_results(collision_search):
    cfg, c, res = collision_search
    assert len(res) >= 1
    assert not res.polish_failures
    for o in res:
        assert o.found and o.verified
        assert all(o.revalidated[k] <= 1e-7 for k in o.residuals)
        assert o.spec == ChordSpec("collision_e", "collision_e", 0.5, c)
        # both ends at the earth
        assert math.hypot(*o.chart[0, 1:3]) == 0.0
        assert math.hypot(*o.chart[-1, 1:3]) <= 1e-7
        # doubling: the action of the whole orbit is twice that of the half
        assert abs(o.action - 2 * o.partial_action) <= 1e-7
        assert abs(o.trajectory.max_energy_error(cfg)) <= 1e-6


def test_collision_result_symmetry(collision_search):
    cfg, c, res = collision_search
    o = res[0]
    tr = o.trajectory
    T = o.length
    # x(T - t) = rho(x(t)) on the Cartesian samples, by interpolation-free pairing
    t = tr.t
    x = tr.states
    pairs = 0
    for i in range(len(t)):
        j = np.flatnonzero(np.abs(t - (T - t[i])) <= 1e-9)
        if j.size:
            pairs += 1
            assert np.max(np.abs(x[j[0]] - apply_involution("rho", x[i]))) <= 1e-8 * max(1.0, np.max(np.abs(x[i])))
    assert pairs >= 10


def test_collision_search_bracket_persistence(collision_search):
    cfg, c, coarse = collision_search
    fine = find_symmetric_consecutive_collision(cfg, "earth", c, grid_size=720)
    found = [(o.parameter, o.crossing) for o in fine]
    for o in coarse:
        assert any(abs(o.parameter - a) <= 1e-7 and k == o.crossing for a, k in found)


def test_collision_search_reflected(collision_search):
    # backward ejection at angle is rho of forward ejection at -angle: the reflected data reproduce the roots
    cfg, c, res = collision_search
    for o in res:
        tr = shoot_from_collision(cfg, "earth", c, -o.parameter, direction=-1)
        assert abs(tr.crossings[o.crossing - 1].p1) <= 1e-7


def test_search_rejects_critical_level():
    cfg = SystemConfig(0.5)
    with pytest.raises(DomainError):
        find_symmetric_consecutive_collision(cfg, "earth", lagrange_points(cfg)[0].value, grid_size=8)


def test_fix_momentum_branches():
    cfg = SystemConfig(0.3)
    c = window_energy(cfg)
    for br, sign in (("prograde", 1), ("retrograde", -1)):
        p2 = fix_momentum(cfg, c, 0.2, br)
        assert np.sign(p2 - 0.2) == sign
        assert abs(hamiltonian(cfg, [0.2, 0.0, 0.0, p2]) - c) <= 1e-14
    assert fix_momentum(cfg, c, 1.2, "prograde") is None
    assert shoot_from_fix(cfg, c, 1.2, "prograde") is None


@pytest.fixture(scope="module")
def periodic_search():
    cfg = SystemConfig(0.5)
    c = window_energy(cfg)
    return cfg, c, find_symmetric_periodic_orbit(cfg, c, grid_size=120, k_max=1)


def test_periodic_orbits(periodic_search):
    cfg, c, res = periodic_search
    assert len(res) >= 1
    assert not res.polish_failures
    best = min(res, key=lambda o: o.residuals["closure"])
    assert best.residuals["closure"] <= 1e-8
    for o in res:
        assert o.verified
        tr = o.trajectory
        assert np.max(np.abs(tr.states[-1] - tr.states[0])) <= 1e-7
        # invariant as a set under rho
        mirrored = apply_involution("rho", tr.states)
        d = np.min(np.linalg.norm(mirrored[:, None, :2] - tr.states[None, :, :2], axis=-1), axis=1)
        assert np.max(d) <= 1e-6


def test_periodic_kepler_circles():
    cfg = SystemConfig(0.0)
    # circular orbit of radius r has inertial speed 1/sqrt(r) and c = -1/(2r) - r * (rotation term)
    r = 0.5
    v = 1 / math.sqrt(r)
    s = [r, 0.0, 0.0, v]
    c = hamiltonian(cfg, s)
    assert abs(fix_momentum(cfg, c, r, "prograde") - v) <= 1e-12
    tr = shoot_from_fix(cfg, c, r, "prograde", n_crossings=1)
    assert abs(tr.crossings[0].p1) <= 1e-9
    res = find_symmetric_periodic_orbit(cfg, c, x_range=(r - 0.01, r + 0.01), grid_size=11, k_max=1,
                                        branches=("prograde",))
    assert any(abs(o.parameter - r) <= 1e-8 and o.residuals["closure"] <= 1e-8 for o in res)


def test_double_chord():
    cfg = SystemConfig(0.5)
    c = window_energy(cfg)
    res = find_symmetric_periodic_orbit(cfg, c, x_range=(0.3, 0.4), grid_size=20, k_max=1)
    o = res[0]
    p2 = fix_momentum(cfg, c, o.parameter, o.branch)
    half = integrate_flow(cfg, [o.parameter, 0.0, 0.0, p2], (0.0, o.half_length), tol=1e-12,
                          t_eval=np.linspace(0, o.half_length, 401))
    full = double_chord(half, tol=1e-8)
    assert full.duration == pytest.approx(2 * half.duration, abs=1e-14)
    mid = len(half) - 1
    # junction continuity and the pointwise symmetry x(2T - t) = rho(x(t))
    assert np.max(np.abs(full.states[mid] - apply_involution("rho", full.states[mid]))) <= 2e-8
    assert np.max(np.abs(full.states[::-1] - apply_involution("rho", full.states))) <= 2e-8
    assert np.max(np.abs(full.states[-1] - full.states[0])) <= 1e-8
    assert full.max_energy_error(cfg) <= 1e-9
    a_half = chord_action(half, cfg)
    a_full = chord_action(full, cfg)
    assert a_half["quadrature_error"] <= 1e-6
    assert abs(a_full["p_dq"] - 2 * a_half["p_dq"]) <= 1e-6
    assert abs(a_full["p_dq"] - o.action) <= 1e-6
    with pytest.raises(DomainError):
        double_chord(Trajectory([0, 1], [[0.3, 0.1, 0, 1], [0.3, 0.2, 0.1, 1]], c))


def test_action_constant_orbit():
    cfg = SystemConfig(0.3)
    l4 = lift_to_phase(lagrange_points(cfg)[3].q).as_array()
    tr = Trajectory(np.linspace(0, 1, 5), np.tile(l4, (5, 1)), hamiltonian(cfg, l4))
    a = chord_action(tr)
    assert a["p_dq"] == 0.0
    # the Simpson path integrates p . dH/dp, which vanishes at an equilibrium only up to roundoff
    assert abs(chord_action(tr, cfg)["p_dq"]) <= 1e-14
    assert a["action"] == pytest.approx(-tr.energy)


def test_cross_chord_report():
    cfg = SystemConfig(0.5)
    res = find_cross_chord(cfg, grid_size=24, t_max=4.0)
    rep = res.report()
    assert rep["homology_rank"] == 0
    assert rep["parity"] in ("even", "odd")
    assert rep["count"] == len(res)
    with pytest.raises(DomainError):
        find_cross_chord(cfg, critical_values(cfg)["L1"] - 0.05, grid_size=4)


def test_write_orbit(tmp_path, periodic_search):
    cfg, c, res = periodic_search
    out = write_orbit(res[0], tmp_path, "orbit", cfg)
    data = json.loads((tmp_path / "orbit.json").read_text())
    assert set(["spec", "angle_or_x0", "period_or_length", "action", "residuals", "trajectory_csv_path"]) <= set(data)
    assert (tmp_path / data["trajectory_csv_path"]).exists()
    assert out == data
