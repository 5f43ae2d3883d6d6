"""One-forms on ``T*S^2`` and numerical contact checks on regularized levels.

Points of ``T*S^2`` are rows ``P = (xi, eta)`` of ``R^6`` with ``|xi| = 1``
and ``xi . eta = 0``; tangent vectors are rows ``V = (dxi, deta)`` of
``R^6``.  A one-form is any callable ``form(P, V) -> (N,)``; forms are
written as ambient formulas, so they can be differentiated in ``R^6``.
The canonical form is ``lambda = eta . dxi`` with ``d lambda = omega``,
``omega(U, V) = U_eta . V_xi - V_eta . U_xi``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .dynamics import DomainError, SystemConfig
from .equilibria import lagrange_points
from .regularization import (
    NORTH_POLE,
    POLE_EPS,
    _Component,
    _ray_crossings,
    fibonacci_sphere,
    moser_hamiltonian,
    moser_to_phase,
    tangent_frame,
)

__all__ = [
    "RHO_BAR",
    "FormEvaluation",
    "ContactReport",
    "LegendrianReport",
    "canonical_one_form",
    "symplectic_form",
    "exact_perturbation",
    "perturbed_primitive",
    "pullback",
    "antisymmetrize",
    "interpolated_form",
    "exterior_derivative",
    "sample_surface",
    "surface_frames",
    "evaluate_forms",
    "contact_values",
    "contact_condition_check",
    "collision_circle",
    "reeb_tangents",
    "legendrian_check",
    "d_lambda_check",
    "anti_invariance_error",
]

Form = Callable[[np.ndarray, np.ndarray], np.ndarray]

# d rho_bar: reflection at the meridian xi1 = 0 on the base, minus its transpose on covectors
RHO_BAR = np.diag([-1.0, 1.0, 1.0, 1.0, -1.0, -1.0])
TANGENCY_TOL = 1e-9
FD_STEP = 1e-5
DEFAULT_KAPPA = 0.1
T_SWEEP = (0.0, 0.25, 0.5, 0.75, 1.0)


def canonical_one_form(P, V):
    """``lambda(V) = <eta, d pi(V)>``."""
    P = np.asarray(P)
    V = np.asarray(V)
    return np.sum(P[..., 3:] * V[..., :3], axis=-1)


def symplectic_form(U, V):
    U = np.asarray(U)
    V = np.asarray(V)
    return np.sum(U[..., 3:] * V[..., :3], axis=-1) - np.sum(V[..., 3:] * U[..., :3], axis=-1)


def _f_base(P):
    xi = np.asarray(P)[..., :3]
    return xi[..., 1] + xi[..., 0] * xi[..., 2]


def exact_perturbation(P, V):
    """``df`` for ``f(xi) = xi2 + xi1 xi3``: neither even nor odd under ``rho_bar``, zero on fibers."""
    P = np.asarray(P)
    V = np.asarray(V)
    xi = P[..., :3]
    return V[..., 1] + xi[..., 2] * V[..., 0] + xi[..., 0] * V[..., 2]


def perturbed_primitive(kappa: float = DEFAULT_KAPPA) -> Form:
    """``lambda + kappa df``: another primitive of ``omega``, not anti-invariant under ``rho_bar``."""

    def form(P, V):
        return canonical_one_form(P, V) + kappa * exact_perturbation(P, V)

    return form


def pullback(form: Form, M: np.ndarray = RHO_BAR) -> Form:
    """Pullback under the linear map ``P -> M P``."""

    def pulled(P, V):
        return form(np.asarray(P) @ M.T, np.asarray(V) @ M.T)

    return pulled


def antisymmetrize(form: Form, M: np.ndarray = RHO_BAR) -> Form:
    """``(form - rho^* form) / 2``."""
    return interpolated_form(form, 0.5, M)


def interpolated_form(form: Form, t: float, M: np.ndarray = RHO_BAR) -> Form:
    """``(1 - t) form - t rho^* form``."""
    back = pullback(form, M)

    def lt(P, V):
        return (1.0 - t) * form(P, V) - t * back(P, V)

    return lt


def anti_invariance_error(form: Form, P, V, M: np.ndarray = RHO_BAR) -> float:
    """``max |rho^* form + form|`` on the given pairs."""
    return float(np.max(np.abs(pullback(form, M)(P, V) + form(P, V))))


def exterior_derivative(form: Form, P, U, V, h: float = FD_STEP) -> np.ndarray:
    """``d form(U, V) = D_U[form(., V)] - D_V[form(., U)]`` by central differences with one Richardson step."""
    P = np.asarray(P, dtype=float)

    def deriv(W, Z, step):
        return (form(P + step * W, Z) - form(P - step * W, Z)) / (2 * step)

    def d(step):
        return deriv(U, V, step) - deriv(V, U, step)

    return (4.0 * d(h / 2) - d(h)) / 3.0


# ---------------------------------------------------------------------------
# surfaces and frames


def sample_surface(cfg: SystemConfig, c: float, primary: str = "earth", n: int = 10_000,
                   chunk: int = 500, include_pole: bool = True) -> np.ndarray:
    """Points of the regularized level ``K = 0`` as ``(n, 6)`` rows.

    One ray per base point of a Fibonacci lattice, directions rotated by the
    golden angle; with ``include_pole`` a share of the rows lies on the
    collision circle.
    """
    comp = _Component(cfg, c, primary)
    m = max(8, n // 50) if include_pole else 0
    nb = n - m
    bases = fibonacci_sphere(nb)
    e1, e2 = tangent_frame(bases)
    th = math.pi * (3.0 - math.sqrt(5.0)) * np.arange(nb) * 1.618
    dirs = np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2
    rows = []
    for start in range(0, nb, chunk):
        sl = slice(start, start + chunk)
        counts, rs, _ = _ray_crossings(cfg, c, primary, comp, bases[sl], dirs[sl, None, :], 256, 1e6)
        ok = counts[:, 0] >= 1
        rows.append(np.hstack([bases[sl][ok], rs[ok, 0:1] * dirs[sl][ok]]))
    pts = np.vstack(rows)
    if m:
        pts = np.vstack([pts, collision_circle(cfg, primary, m)[0]])
    return pts


def _constraint_gradients(cfg, c, primary, P):
    """Rows ``(grad K, grad |xi|^2, grad xi.eta)`` at each point, shape ``(N, 3, 6)``."""
    P = np.asarray(P, dtype=float)
    N = P.shape[0]
    G = np.zeros((N, 3, 6))
    h = 1e-20
    for j in range(6):
        Q = P.astype(complex)
        Q[:, j] += 1j * h
        G[:, 0, j] = np.imag(moser_hamiltonian(cfg, c, primary, Q[:, :3], Q[:, 3:])) / h
    G[:, 1, :3] = 2.0 * P[:, :3]
    G[:, 2, :3] = P[:, 3:]
    G[:, 2, 3:] = P[:, :3]
    return G


def _four_form(N, F):
    """``(omega ^ omega)(N, f1, f2, f3) / 2``."""
    w = symplectic_form
    return (w(N, F[:, 0]) * w(F[:, 1], F[:, 2]) - w(N, F[:, 1]) * w(F[:, 0], F[:, 2])
            + w(N, F[:, 2]) * w(F[:, 0], F[:, 1]))


def surface_frames(cfg: SystemConfig, c: float, primary: str, P) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal tangent frames ``(N, 3, 6)`` of the level inside ``T*S^2``, and tangency residuals.

    The frame spans the null space of the constraint gradients.  It carries
    the boundary orientation of ``{K <= 0}``: with ``N`` the outward normal
    inside ``T*S^2``, ``(N, frame)`` is positive for ``omega ^ omega``.
    """
    G = _constraint_gradients(cfg, c, primary, P)
    Gn = G / np.linalg.norm(G, axis=2, keepdims=True)
    _, _, vt = np.linalg.svd(Gn)
    F = vt[:, 3:, :].copy()
    # outward normal: grad K projected onto the tangent space of T*S^2
    Q, _ = np.linalg.qr(np.transpose(Gn[:, 1:], (0, 2, 1)))
    gk = Gn[:, 0]
    N = gk - np.einsum("nij,nj->ni", Q, np.einsum("nji,nj->ni", Q, gk))
    sign = np.sign(_four_form(N, F))
    F[:, 2, :] *= sign[:, None]
    resid = np.max(np.abs(np.einsum("nij,nkj->nik", Gn, F)), axis=(1, 2))
    return F, resid


@dataclass
class FormEvaluation:
    point: np.ndarray  # (6,)
    frame: np.ndarray  # (3, 6)
    lambda_vals: np.ndarray  # (3,)
    omega_matrix: np.ndarray  # (3, 3)

    @property
    def wedge(self) -> float:
        lv, om = self.lambda_vals, self.omega_matrix
        return float(lv[0] * om[1, 2] - lv[1] * om[0, 2] + lv[2] * om[0, 1])


def evaluate_forms(form: Form, P, F) -> tuple[np.ndarray, np.ndarray]:
    """``lambda`` on each frame vector ``(N, 3)`` and ``omega`` on frame pairs ``(N, 3, 3)``."""
    P = np.asarray(P)
    N = P.shape[0]
    lv = np.stack([form(P, F[:, i]) for i in range(3)], axis=1)
    om = np.zeros((N, 3, 3))
    for i in range(3):
        for j in range(i + 1, 3):
            w = symplectic_form(F[:, i], F[:, j])
            om[:, i, j] = w
            om[:, j, i] = -w
    return lv, om


def contact_values(form: Form, P, F, normalize: bool = True) -> np.ndarray:
    """``(form ^ omega)(f1, f2, f3)``; normalized by the sizes of ``form`` and ``omega`` on the frame."""
    lv, om = evaluate_forms(form, P, F)
    val = lv[:, 0] * om[:, 1, 2] - lv[:, 1] * om[:, 0, 2] + lv[:, 2] * om[:, 0, 1]
    if not normalize:
        return val
    ln = np.linalg.norm(lv, axis=1)
    on = np.sqrt(om[:, 0, 1] ** 2 + om[:, 0, 2] ** 2 + om[:, 1, 2] ** 2)
    return val / (ln * on)


@dataclass
class ContactReport:
    mu: float
    c: float
    primary: str
    form: str
    n_samples: int
    min_value: float
    max_value: float
    max_tangency_residual: float
    witness: list
    region: str = "full"

    @property
    def passed(self) -> bool:
        return self.min_value > 0 and self.max_tangency_residual <= TANGENCY_TOL

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "c": self.c,
            "primary": self.primary,
            "form": self.form,
            "region": self.region,
            "n_samples": self.n_samples,
            "min_value": self.min_value,
            "max_value": self.max_value,
            "max_tangency_residual": self.max_tangency_residual,
            "witness": list(self.witness),
            "passed": self.passed,
        }


def _forms(kappa: float) -> dict[str, Form]:
    lam = canonical_one_form
    pert = perturbed_primitive(kappa)
    out = {"lambda": lam, "lambda_rho": antisymmetrize(lam), "lambda_kappa": pert,
           "lambda_kappa_rho": antisymmetrize(pert)}
    for t in T_SWEEP:
        out[f"lambda_t={t:g}"] = interpolated_form(lam, t)
    for t in T_SWEEP:
        out[f"lambda_kappa_t={t:g}"] = interpolated_form(pert, t)
    return out


def _neck_mask(cfg, primary, P, radius):
    """Rows whose configuration point lies within ``radius`` of the first Lagrange point."""
    l1 = np.array(lagrange_points(cfg)[0].q)
    off = (1.0 - P[:, 2]) > POLE_EPS
    near = np.zeros(len(P), dtype=bool)
    X = moser_to_phase(cfg, primary, P[off, :3], P[off, 3:])
    near[off] = np.hypot(X[:, 0] - l1[0], X[:, 1] - l1[1]) < radius
    return near


def contact_condition_check(cfg: SystemConfig, c: float, primary: str = "earth", n_samples: int = 10_000,
                            kappa: float = DEFAULT_KAPPA, forms: dict | None = None,
                            include_neck: bool = False, neck_radius: float = 0.15) -> list[ContactReport]:
    """Minimum of the normalized ``form ^ omega`` over sampled tangent frames.

    Below the first critical value the whole regularized component is
    sampled.  ``kappa`` is relative to the primary's mass.  Above it, rows near the first Lagrange point are excluded;
    ``include_neck`` adds a separate report on them for the canonical
    antisymmetric form, which is informational only.
    """
    above = cfg.mu > 0 and c > lagrange_points(cfg)[0].value
    P = sample_surface(cfg, c, primary, n_samples)
    F, resid = surface_frames(cfg, c, primary, P)
    # the perturbation is measured against the fiber radius, which is the primary's mass
    forms = forms if forms is not None else _forms(kappa * cfg.mass(primary))
    neck = _neck_mask(cfg, primary, P, neck_radius) if above else np.zeros(len(P), dtype=bool)
    reports = []
    for name, form in forms.items():
        v = contact_values(form, P, F)
        keep = ~neck
        i = int(np.argmin(np.where(keep, v, np.inf)))
        reports.append(ContactReport(cfg.mu, float(c), primary, name, int(keep.sum()), float(v[keep].min()),
                                     float(v[keep].max()), float(resid[keep].max()), P[i].tolist(),
                                     "away_from_neck" if above else "full"))
    if above and include_neck and neck.any():
        v = contact_values(antisymmetrize(canonical_one_form), P[neck], F[neck])
        i = int(np.argmin(v))
        reports.append(ContactReport(cfg.mu, float(c), primary, "lambda_rho", int(neck.sum()), float(v.min()),
                                     float(v.max()), float(resid[neck].max()), P[neck][i].tolist(), "neck"))
    return reports


def frame_change_error(form: Form, P, F, rng) -> float:
    """Relative error of ``value(F A) = det(A) value(F)`` for random ``A``."""
    A = rng.standard_normal((len(P), 3, 3))
    FA = np.einsum("nij,njk->nik", A, F)
    v0 = contact_values(form, P, F, normalize=False)
    v1 = contact_values(form, P, FA, normalize=False)
    det = np.linalg.det(A)
    return float(np.max(np.abs(v1 - det * v0) / (np.abs(det * v0) + 1e-300)))


# ---------------------------------------------------------------------------
# Legendrian curves and the Reeb direction


def collision_circle(cfg: SystemConfig, primary: str = "earth", n: int = 256):
    """Points and unit tangents of the collision circle over the north pole."""
    th = 2 * math.pi * np.arange(n) / n
    r = cfg.mass(primary)
    P = np.zeros((n, 6))
    P[:, :3] = NORTH_POLE
    P[:, 3] = r * np.cos(th)
    P[:, 4] = r * np.sin(th)
    T = np.zeros((n, 6))
    T[:, 3] = -np.sin(th)
    T[:, 4] = np.cos(th)
    return P, T


def reeb_tangents(form: Form, P, F) -> np.ndarray:
    """Reeb vectors: kernel of ``omega`` on the frame, scaled so that ``form(R) = 1``."""
    lv, om = evaluate_forms(form, P, F)
    # kernel of a 3x3 antisymmetric matrix is its axial vector
    k = np.stack([om[:, 1, 2], -om[:, 0, 2], om[:, 0, 1]], axis=1)
    scale = np.sum(k * lv, axis=1)
    coef = k / scale[:, None]
    return np.einsum("ni,nij->nj", coef, F)


@dataclass
class LegendrianReport:
    curve: str
    form: str
    n_samples: int
    max_abs: float
    on_surface: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def legendrian(self) -> bool:
        return self.max_abs <= 1e-8

    def as_dict(self) -> dict:
        return {"curve": self.curve, "form": self.form, "n_samples": self.n_samples, "max_abs": self.max_abs,
                "on_surface": self.on_surface, "legendrian": self.legendrian, **self.extra}


def legendrian_check(form: Form, P, T, name: str = "curve", form_name: str = "lambda",
                     cfg: SystemConfig | None = None, c: float | None = None,
                     primary: str = "earth") -> LegendrianReport:
    """``max |form(tangent)|`` along a sampled curve, with unit tangents."""
    vals = np.abs(form(P, T))
    on = 0.0
    if cfg is not None:
        on = float(np.max(np.abs(moser_hamiltonian(cfg, c, primary, P[:, :3], P[:, 3:]))))
    return LegendrianReport(name, form_name, int(len(P)), float(vals.max()), on)


def d_lambda_check(form: Form, P, F) -> float:
    """``max |d form - omega|`` on frame pairs, by finite differences."""
    worst = 0.0
    for i in range(3):
        for j in range(i + 1, 3):
            fd = exterior_derivative(form, P, F[:, i], F[:, j])
            worst = max(worst, float(np.max(np.abs(fd - symplectic_form(F[:, i], F[:, j])))))
    return worst


def write_reports(reports, path) -> Path:
    path = Path(path)
    data = [r.as_dict() for r in reports]
    path.write_text(json.dumps(data, sort_keys=True, indent=1) + "\n")
    return path


def check_domain(cfg: SystemConfig, c: float):
    if cfg.mu > 0:
        for p in lagrange_points(cfg):
            if abs(p.value - c) < 1e-9:
                raise DomainError(f"c is within 1e-9 of the critical value at {p.label}")
