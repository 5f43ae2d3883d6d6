import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from pcr3bp.dynamics import (
    DomainError,
    PhaseState,
    SingularityError,
    SystemConfig,
    Trajectory,
    apply_involution,
    effective_potential,
    hamiltonian,
    hamiltonian_expanded,
    hamiltonian_vector_field,
    integrate_flow,
)


def random_states(rng, cfg, n, min_dist=0.2):
    out = []
    while len(out) < n:
        q = rng.uniform(-1.5, 1.5, 2)
        if min(np.hypot(*(q - cfg.earth_pos)), np.hypot(*(q - cfg.moon_pos))) < min_dist:
            continue
        p = np.array([-q[1], q[0]]) + rng.normal(0, 0.2, 2)
        out.append(np.concatenate([q, p]))
    return np.array(out)


def test_potential_values():
    assert effective_potential(SystemConfig(0.5), (0.0, 0.0)) == pytest.approx(-2.0, abs=1e-15)
    for mu in (0.1, 0.3, 0.5):
        cfg = SystemConfig(mu)
        l4 = (0.5 - mu, math.sqrt(3) / 2)
        assert effective_potential(cfg, l4) == pytest.approx(-(3 - mu * (1 - mu)) / 2, abs=1e-12)


def test_potential_diverges_at_primary():
    cfg = SystemConfig(0.3)
    vals = [effective_potential(cfg, (-0.3 + 10.0**-k, 0.0)) for k in range(1, 8)]
    assert np.all(np.diff(vals) < 0) and vals[-1] < -1e6
    with pytest.raises(SingularityError):
        effective_potential(cfg, (-0.3, 0.0))
    with pytest.raises(SingularityError):
        hamiltonian(cfg, (0.7, 0.0, 1.0, 1.0))


def test_config_domain():
    with pytest.raises(DomainError):
        SystemConfig(0.6)
    with pytest.raises(DomainError):
        SystemConfig(-0.1)
    cfg = SystemConfig(0.25)
    assert tuple(cfg.earth_pos) == (-0.25, 0.0) and tuple(cfg.moon_pos) == (0.75, 0.0)


def test_hamiltonian_forms_agree():
    rng = np.random.default_rng(0)
    cfg = SystemConfig(0.3)
    for x in random_states(rng, cfg, 200):
        assert hamiltonian(cfg, x) == pytest.approx(hamiltonian_expanded(cfg, x), abs=1e-13)
        q = x[:2]
        assert hamiltonian(cfg, [*q, -q[1], q[0]]) == pytest.approx(effective_potential(cfg, q), abs=1e-15)


def test_rho_invariance_many_states():
    rng = np.random.default_rng(1)
    cfg = SystemConfig(0.2)
    xs = random_states(rng, cfg, 10_000, min_dist=0.05)
    ys = apply_involution("rho", xs)
    err = max(abs(hamiltonian(cfg, a) - hamiltonian(cfg, b)) for a, b in zip(xs, ys))
    assert err <= 1e-12


def test_sigma_symmetry_only_for_equal_masses():
    rng = np.random.default_rng(2)
    half = SystemConfig(0.5)
    for x in random_states(rng, half, 50):
        assert hamiltonian(half, apply_involution("sigma", x)) == pytest.approx(hamiltonian(half, x), abs=1e-12)
    cfg = SystemConfig(0.3)
    witness = np.array([0.2, 0.5, -0.5, 0.2])
    assert abs(hamiltonian(cfg, apply_involution("sigma", witness)) - hamiltonian(cfg, witness)) > 1e-3
    with pytest.raises(DomainError):
        apply_involution("sigma", witness, cfg)


def test_involution_formulas():
    s = PhaseState((1, 2), (3, 4))
    assert apply_involution("rho", s).as_array().tolist() == [1, -2, -3, 4]
    assert apply_involution("rho_sigma", s).as_array().tolist() == [-1, -2, -3, -4]
    assert apply_involution("sigma", s).as_array().tolist() == [-1, 2, 3, -4]
    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 4))
    assert np.array_equal(apply_involution("rho", apply_involution("rho", x)), x)


def test_vector_field_components_and_fd_slope():
    cfg = SystemConfig(0.3)
    rng = np.random.default_rng(4)
    x = random_states(rng, cfg, 1)[0]
    f = hamiltonian_vector_field(cfg, x)
    assert f[0] == pytest.approx(x[2] + x[1], abs=1e-15)
    J = np.array([[0, 0, 1, 0], [0, 0, 0, 1], [-1, 0, 0, 0], [0, -1, 0, 0]], float)
    errs = []
    hs = [1e-3, 1e-4, 1e-5, 1e-6]
    for h in hs:
        grad = np.array([(hamiltonian(cfg, x + h * e) - hamiltonian(cfg, x - h * e)) / (2 * h) for e in np.eye(4)])
        errs.append(np.max(np.abs(J @ grad - f)))
    # O(h^2) until roundoff (~eps/h) takes over
    slope = math.log10(errs[0] / errs[1])
    assert 1.7 < slope < 2.3
    assert errs[2] < errs[0] * 1e-3


def test_vector_field_equivariance():
    cfg = SystemConfig(0.4)
    rng = np.random.default_rng(5)
    R = np.diag([1.0, -1.0, -1.0, 1.0])
    for x in random_states(rng, cfg, 50):
        lhs = hamiltonian_vector_field(cfg, R @ x)
        rhs = -R @ hamiltonian_vector_field(cfg, x)
        assert np.allclose(lhs, rhs, atol=1e-14)


def test_equilibrium_stays_put():
    from pcr3bp.equilibria import lagrange_points, lift_to_phase

    cfg = SystemConfig(0.3)
    l1 = lagrange_points(cfg)[0]
    s0 = lift_to_phase(l1.q)
    assert np.max(np.abs(hamiltonian_vector_field(cfg, s0))) <= 1e-10
    # L1 is hyperbolic, so roundoff grows like exp(lambda t); keep the span short
    traj = integrate_flow(cfg, s0, (0.0, 2.0))
    assert np.max(np.abs(traj.states - traj.states[0])) < 1e-9


@pytest.mark.parametrize("r,sign", [(0.5, 1), (0.8, -1), (1.3, 1)])
def test_kepler_circular_orbits(r, sign):
    cfg = SystemConfig(0.0)
    omega = sign * r**-1.5
    traj = integrate_flow(cfg, (r, 0.0, 0.0, omega * r), (0.0, 20.0), tol=1e-11,
                          t_eval=np.linspace(0, 20, 201))
    radius = np.hypot(traj.states[:, 0], traj.states[:, 1])
    assert np.max(np.abs(radius - r)) < 1e-9
    # rotating-frame angle advances at omega - 1
    ang = np.unwrap(np.arctan2(traj.states[:, 1], traj.states[:, 0]))
    assert np.allclose(ang, (omega - 1) * traj.t, atol=1e-8)


def test_flow_against_scipy_reference():
    cfg = SystemConfig(0.3)
    x0 = np.array([0.3, 0.4, -0.4, 0.6])
    ts = np.linspace(0, 3, 7)
    ours = integrate_flow(cfg, x0, (0, 3), tol=1e-11, t_eval=ts).states
    from pcr3bp.dynamics import _make_rhs

    ref = solve_ivp(_make_rhs(cfg), (0, 3), x0, method="DOP853", rtol=1e-13, atol=1e-13, t_eval=ts).y.T
    assert np.max(np.abs(ours - ref)) < 1e-8


def test_energy_drift_and_equivariance_random_orbits():
    cfg = SystemConfig(0.3)
    rng = np.random.default_rng(6)
    tol = 1e-10
    R = np.diag([1.0, -1.0, -1.0, 1.0])
    ts = np.linspace(0, 2.0, 21)
    for x in random_states(rng, cfg, 20):
        fwd = integrate_flow(cfg, x, (0, 2.0), tol=tol, t_eval=ts)
        assert fwd.max_energy_error(cfg) <= 10 * tol
        if fwd.status != "complete":
            continue
        back = integrate_flow(cfg, R @ x, (0, -2.0), tol=tol, t_eval=-ts)
        assert np.max(np.abs(back.states @ R - fwd.states)) <= 1e-8


def test_collision_event_instead_of_crash():
    cfg = SystemConfig(0.3)
    # p is the inertial velocity; at rest relative to the earth it falls in
    x0 = np.array([-0.1, 0.0, 0.0, -0.3])
    traj = integrate_flow(cfg, x0, (0, 5.0))
    assert traj.status == "event:collision:earth"
    last = traj.states[-1]
    assert np.hypot(last[0] + 0.3, last[1]) == pytest.approx(1e-3, rel=1e-6)


def test_trajectory_roundtrip(tmp_path):
    cfg = SystemConfig(0.3)
    traj = integrate_flow(cfg, (0.3, 0.4, -0.4, 0.6), (0, 1), t_eval=np.linspace(0, 1, 11))
    back = Trajectory.from_csv(traj.to_csv(tmp_path / "t.csv", cfg))
    assert np.array_equal(back.t, traj.t) and np.array_equal(back.states, traj.states)
    import json

    data = json.loads(traj.write_json(tmp_path / "t.json", cfg).read_text())
    assert data["columns"] == ["t", "q1", "q2", "p1", "p2", "H"] and len(data["samples"]) == 11
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0, 0.5], np.zeros((3, 4)), 0.0)
