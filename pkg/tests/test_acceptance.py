"""Acceptance suite: one test per criterion, each reported in the terminal summary."""

import filecmp
import math
import time

import numpy as np
from scipy.optimize import brentq

from pcr3bp import cli, contact, handle, homology
from pcr3bp.dynamics import SystemConfig, hamiltonian, integrate_flow
from pcr3bp.equilibria import critical_values, gradient_norm, lagrange_points
from pcr3bp.hill import component_count
from pcr3bp.orbits import find_symmetric_consecutive_collision, find_symmetric_periodic_orbit, window_energy
from pcr3bp.regularization import (
    RegularizedState,
    chart_hamiltonian,
    chart_to_phase,
    collision_ejection_state,
    integrate_chart,
    moser_map,
    pushforward_residual,
    starshaped_check,
)

# acceptance tolerances
GRAD_TOL = 1e-10
CHAIN_TOL = 1e-12
L4_TOL = 1e-12
EQUILIBRIA_SECONDS = 1.0
HILL_GRID = 1000
HILL_SECONDS = 10.0
DRIFT_TOL = 1e-9
FLOW_TOL = 1e-10
EQUIVARIANCE_TOL = 1e-8
SYMPLECTIC_TOL = 1e-12
PUSHFORWARD_TOL = 1e-6
PUSHFORWARD_DISTANCE = 1e-2
KEPLER_TOL = 1e-6
STARSHAPED_SECONDS = 60.0
RESIDUAL_TOL = 1e-7
CLOSURE_TOL = 1e-8
ORBIT_SECONDS = 300.0
HANDLE_MIN = 1e-3
IDENTITY_TOL = 1e-12
HANDLE_SECONDS = 30.0
ANTI_TOL = 1e-14
LEGENDRIAN_TOL = 1e-8
CONTACT_SAMPLES = 10_000

OMEGA = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]])
RHO = np.diag([1.0, -1.0, -1.0, 1.0])
MUS = [0.05 * k for k in range(1, 11)]


def test_equilibria(criterion):
    with criterion(1, "equilibria") as cr:
        t0 = time.perf_counter()
        worst_grad = worst_l4 = worst_eq = 0.0
        for mu in MUS:
            cfg = SystemConfig(mu)
            pts = lagrange_points(cfg)
            cv = critical_values(cfg, pts, equal_tol=CHAIN_TOL)
            assert [p.label for p in pts] == ["L1", "L2", "L3", "L4", "L5"]
            worst_grad = max(worst_grad, *(gradient_norm(cfg, p.q) for p in pts))
            assert cv.positions_ok, f"collinear ordering fails at mu={mu}"
            assert cv.ordering_ok, f"critical-value chain fails at mu={mu}: {cv.relations}"
            if mu < 0.5:
                assert cv["L2"] < cv["L3"], f"U(L2) < U(L3) not strict at mu={mu}"
            else:
                worst_eq = abs(cv["L2"] - cv["L3"])
            worst_l4 = max(worst_l4, abs(cv["L4"] + (3 - mu * (1 - mu)) / 2))
        elapsed = time.perf_counter() - t0
        cr.check(worst_grad <= GRAD_TOL, f"max |grad U| = {worst_grad:.1e}")
        cr.check(worst_eq <= CHAIN_TOL, f"|U(L2) - U(L3)| at mu=1/2 = {worst_eq:.1e}")
        cr.check(worst_l4 <= L4_TOL, f"U(L4) error = {worst_l4:.1e}")
        cr.check(elapsed < EQUILIBRIA_SECONDS, f"{elapsed:.2f} s")


def test_hill_regions(criterion):
    with criterion(2, "hill regions") as cr:
        cfg = SystemConfig(0.5)
        cv = critical_values(cfg)
        cases = [(cv["L1"] - 0.01, 3), (cv["L1"] + 0.01, 2), (cv["L4"] + 0.1, 1)]
        t0 = time.perf_counter()
        coarse = [component_count(cfg, c, resolution=(HILL_GRID, HILL_GRID)).n_components for c, _ in cases]
        elapsed = time.perf_counter() - t0
        fine = [component_count(cfg, c, resolution=(2 * HILL_GRID, 2 * HILL_GRID)).n_components for c, _ in cases]
        cr.check(coarse == [n for _, n in cases], f"counts {coarse} on {HILL_GRID}^2")
        cr.check(fine == coarse, f"counts {fine} on {2 * HILL_GRID}^2")
        cr.check(elapsed < HILL_SECONDS, f"{elapsed:.2f} s")


def _random_noncollision_orbits(cfg, rng, n, ts):
    out = []
    while len(out) < n:
        q = rng.uniform(-1.5, 1.5, 2)
        if min(np.hypot(*(q - cfg.earth_pos)), np.hypot(*(q - cfg.moon_pos))) < 0.2:
            continue
        x = np.concatenate([q, np.array([-q[1], q[0]]) + rng.normal(0, 0.2, 2)])
        fwd = integrate_flow(cfg, x, (0.0, ts[-1]), tol=FLOW_TOL, t_eval=ts)
        if fwd.status != "complete":
            continue
        out.append((x, fwd))
    return out


def test_dynamics(criterion):
    with criterion(3, "dynamics") as cr:
        cfg = SystemConfig(0.3)
        ts = np.linspace(0.0, 10.0, 101)
        orbits = _random_noncollision_orbits(cfg, np.random.default_rng(0), 100, ts)
        drift = max(f.max_energy_error(cfg) for _, f in orbits)
        equiv = 0.0
        n_eq = 0
        for x, fwd in orbits:
            back = integrate_flow(cfg, RHO @ x, (0.0, -ts[-1]), tol=FLOW_TOL, t_eval=-ts)
            if back.status != "complete":
                continue
            n_eq += 1
            # Phi_t(rho x) = rho Phi_{-t}(x), compared at every sample
            equiv = max(equiv, float(np.max(np.abs(back.states - fwd.states @ RHO))))
        cr.check(len(orbits) == 100, f"{len(orbits)} orbits")
        cr.check(drift <= DRIFT_TOL, f"max energy drift {drift:.1e}")
        cr.check(n_eq == 100 and equiv <= EQUIVARIANCE_TOL, f"equivariance {equiv:.1e} on {n_eq} orbits")


def _kepler_position(c, theta0, t):
    a = -1.0 / (2.0 * c)
    period = 2 * math.pi * a**1.5
    m = (t % period) / a**1.5
    eta = brentq(lambda e: e - math.sin(e) - m, 0.0, 2 * math.pi) if m > 0 else 0.0
    r = a * (1.0 - math.cos(eta))
    return r * np.array([math.cos(theta0 - t), math.sin(theta0 - t)])


def test_regularization(criterion):
    with criterion(4, "regularization") as cr:
        rng = np.random.default_rng(1)
        b = rng.normal(size=(10_000, 2))
        s = rng.normal(size=(10_000, 4))
        h = 1e-2
        cols = []
        for e in np.eye(4):
            plus = np.concatenate(moser_map(b, s + h * e), axis=1)
            minus = np.concatenate(moser_map(b, s - h * e), axis=1)
            cols.append((plus - minus) / (2 * h))
        J = np.stack(cols, axis=2)
        sym = float(np.max(np.abs(np.einsum("nji,jk,nkl->nil", J, OMEGA, J) - OMEGA)))
        cr.check(sym <= SYMPLECTIC_TOL, f"symplecticity {sym:.1e} at 10^4 points")

        # through z = 0: start before a collision and integrate across it
        cfg = SystemConfig(0.3)
        c = critical_values(cfg)["L1"] - 0.05
        worst_push = worst_energy = 0.0
        crossed = 0
        for angle in (0.5, 2.0, 4.0):
            y0 = collision_ejection_state(cfg, "earth", c, angle)
            pre = integrate_chart(cfg, c, "earth", y0, (0.0, -0.3)).y[-1]
            sol = integrate_chart(cfg, c, "earth", pre, (0.0, 1.5), tau_eval=np.linspace(0, 1.5, 601))
            zn = np.hypot(sol.y[:, 0], sol.y[:, 1])
            t = sol.y[:, 4]
            crossed += int(zn.min() < 1e-3 and t[0] < 0 < t[-1] and sol.status == "complete")
            for y in sol.y:
                x = chart_to_phase(cfg, "earth", y)
                if np.hypot(*(x[:2] - cfg.earth_pos)) < PUSHFORWARD_DISTANCE:
                    continue
                r = RegularizedState(tuple(y[:2]), tuple(y[2:4]), 0.0, "earth", c, cfg.mu)
                # chart time runs |z|^2 slower than physical time
                n2 = y[0] ** 2 + y[1] ** 2
                worst_push = max(worst_push, pushforward_residual(r) / n2)
                worst_energy = max(worst_energy, abs(hamiltonian(cfg, x) - c))
        cr.check(crossed == 3, f"{crossed}/3 orbits integrated through z = 0")
        cr.check(worst_push <= PUSHFORWARD_TOL and worst_energy <= PUSHFORWARD_TOL,
                 f"pushforward residual {worst_push:.1e}, energy {worst_energy:.1e}")

        kep = SystemConfig(0.0)
        ck, th0 = -1.2, 0.7
        sol = integrate_chart(kep, ck, "earth", collision_ejection_state(kep, "earth", ck, th0), (0.0, 6.0))
        period = 2 * math.pi * (-1 / (2 * ck)) ** 1.5
        X = chart_to_phase(kep, "earth", sol.y)
        err = max(float(np.max(np.abs(x[:2] - _kepler_position(ck, th0, t)))) for t, x in zip(sol.y[:, 4], X))
        cr.check(sol.y[-1, 4] > period and err <= KEPLER_TOL, f"Kepler oracle error {err:.1e}")
        assert max(abs(chart_hamiltonian(kep, ck, "earth", y)) for y in sol.y) <= 1e-9


def test_starshapedness(criterion):
    with criterion(5, "starshapedness") as cr:
        t0 = time.perf_counter()
        worst = math.inf
        bad = []
        for mu in (0.1, 0.3, 0.5):
            cfg = SystemConfig(mu)
            l1 = critical_values(cfg)["L1"]
            for d in (0.2, 0.1, 0.01):
                rep = starshaped_check(cfg, l1 - d, "earth", n_fibers=200, n_rays=200)
                worst = min(worst, rep.min_transversality)
                if not rep.each_ray_single_crossing:
                    bad.append((mu, d))
        elapsed = time.perf_counter() - t0
        cr.check(not bad, f"single crossing fails at {bad}" if bad else "single crossing on all 9 levels")
        cr.check(worst > 0, f"min radial transversality {worst:.3g}")
        cr.check(elapsed < STARSHAPED_SECONDS, f"{elapsed:.1f} s")


def test_orbit_searches(criterion):
    with criterion(6, "orbit searches") as cr:
        cfg = SystemConfig(0.5)
        t0 = time.perf_counter()
        col = find_symmetric_consecutive_collision(cfg, "earth", critical_values(cfg)["L1"] - 0.05,
                                                   grid_size=720, k_max=3)
        good = [o for o in col if o.found and o.verified
                and max(o.residuals.values()) <= RESIDUAL_TOL
                and max(o.revalidated[k] for k in o.residuals) <= RESIDUAL_TOL]
        cr.check(not col.polish_failures, f"collision polish failures {len(col.polish_failures)}")
        cr.check(len(good) >= 1, f"{len(good)} collision orbits with residuals <= 1e-7 at tol and tol/10")
        per = find_symmetric_periodic_orbit(cfg, window_energy(cfg), grid_size=400, k_max=3)
        best = min((o.residuals["closure"] for o in per), default=math.inf)
        cr.check(not per.polish_failures, f"periodic polish failures {len(per.polish_failures)}")
        cr.check(best <= CLOSURE_TOL, f"{len(per)} periodic orbits, best closure {best:.1e}")
        elapsed = time.perf_counter() - t0
        cr.check(elapsed < ORBIT_SECONDS, f"{elapsed:.0f} s")


def test_handle(criterion):
    with criterion(7, "handle") as cr:
        t0 = time.perf_counter()
        reps = handle.parameter_sweep(n_samples=10_000)
        elapsed = time.perf_counter() - t0
        mx = min(r.min_Xphi for r in reps)
        mp = min(r.min_Xpsi for r in reps)
        ident = max(r.max_identity_error for r in reps)
        cr.check(mx >= HANDLE_MIN and mp >= HANDLE_MIN, f"min X.phi {mx:.3g}, min X.psi {mp:.3g} over {len(reps)}")
        cr.check(ident <= IDENTITY_TOL, f"identities {ident:.1e}")
        cr.check(elapsed < HANDLE_SECONDS, f"{elapsed:.1f} s")


def test_contact(criterion):
    with criterion(8, "contact") as cr:
        rng = np.random.default_rng(2)
        P = rng.standard_normal((CONTACT_SAMPLES, 6))
        V = rng.standard_normal((CONTACT_SAMPLES, 6))
        lk = contact.perturbed_primitive(0.1)
        anti = max(contact.anti_invariance_error(contact.antisymmetrize(contact.canonical_one_form), P, V),
                   contact.anti_invariance_error(contact.antisymmetrize(lk), P, V))
        cr.check(anti <= ANTI_TOL, f"anti-invariance {anti:.1e}")
        cfg = SystemConfig(0.5)
        c = critical_values(cfg)["L1"] - 0.05
        reps = contact.contact_condition_check(cfg, c, "earth", n_samples=CONTACT_SAMPLES)
        by = {r.form: r for r in reps}
        needed = ["lambda"] + [f"lambda_t={t:g}" for t in contact.T_SWEEP] + \
                 [f"lambda_kappa_t={t:g}" for t in contact.T_SWEEP]
        mins = {k: by[k].min_value for k in needed}
        cr.check(all(by[k].n_samples == CONTACT_SAMPLES for k in needed), f"{CONTACT_SAMPLES} frames")
        cr.check(all(by[k].max_tangency_residual <= contact.TANGENCY_TOL for k in needed), "frames tangent")
        cr.check(all(v > 0 for v in mins.values()), f"min contact value {min(mins.values()):.3g}")
        Pc, T = contact.collision_circle(cfg, "earth", 1024)
        leg = max(contact.legendrian_check(f, Pc, T).max_abs for f in (contact.canonical_one_form,
                                                                       contact.antisymmetrize(lk)))
        cr.check(leg <= LEGENDRIAN_TOL, f"Legendrian max {leg:.1e}")


def test_homology(criterion):
    with criterion(9, "homology oracle") as cr:
        N = 50
        loop = homology.betti_loop_s2(N)
        # independent oracle for the loop space: S^1 times the loop space of S^3
        hopf = homology.brute_force_convolve(homology.betti_loop_sphere(3, N), homology.RankSequence((1, 1)))
        cr.check(hopf == loop, "loop space of S^2 from the Hopf splitting")
        em = homology.predicted_ranks("Le_Lm", N)
        cr.check(em.total() == 0, "Le_Lm identically zero")
        lf = homology.predicted_ranks("Le_Fix", N)
        cr.check(lf == homology.brute_force_convolve(loop, homology.RankSequence((1, 1))), "Le_Fix")
        ff = homology.predicted_ranks("Fix_Fix", N)
        cr.check(ff == homology.brute_force_convolve(loop, homology.RankSequence((1, 2, 1))).scale(2), "Fix_Fix")


RUNS = [
    ["lagrange", "--mu", "0.3"],
    ["hill", "--mu", "0.5", "--energy", "L1-0.01", "--resolution", "300"],
    ["orbit-search", "--mu", "0.5", "--energy", "L1-0.05", "--grid", "120"],
    ["orbit-search", "--mu", "0.5", "--energy", "L1+window", "--type", "symmetric-periodic", "--grid", "40",
     "--crossings", "1"],
    ["handle-check", "--samples", "2000", "--seed", "7"],
    ["contact-check", "--mu", "0.5", "--samples", "2000", "--seed", "7"],
    ["homology", "--pair", "all", "--degree", "10"],
]


def test_reproducibility(criterion, tmp_path):
    with criterion(10, "reproducibility") as cr:
        n_files = 0
        for i, argv in enumerate(RUNS):
            dirs = [tmp_path / f"run{i}_{k}" for k in (0, 1)]
            for d in dirs:
                assert cli.main([*argv, "--output-dir", str(d)]) == 0, argv
            a = sorted(p.name for p in dirs[0].iterdir())
            b = sorted(p.name for p in dirs[1].iterdir())
            assert a == b and a, argv
            _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], a, shallow=False)
            assert not mismatch and not errors, (argv, mismatch)
            n_files += len(a)
        cr.check(n_files > 0, f"{n_files} files byte-identical across {len(RUNS)} commands")
