"""Model Weinstein handle on ``R^{2n}`` and checks of its transversality.

Coordinates are ``(x_1..x_n, y_1..y_n)`` with ``omega = sum dx_i ^ dy_i``.
The first ``k`` pairs carry the expanding/contracting part of the Liouville
field, the remaining ``n - k`` pairs the radial part.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "HandleParams",
    "HandleReport",
    "SubhandleReport",
    "aux_xyz",
    "phi",
    "psi_delta",
    "cutoff_g",
    "cutoff_g_prime",
    "liouville_form",
    "liouville_field",
    "symplectic_matrix",
    "grad_phi",
    "grad_psi",
    "in_handle",
    "sample_sigma_minus",
    "sample_sigma_plus",
    "transversality_check",
    "identity_check",
    "lagrangian_subhandle_check",
    "parameter_sweep",
]

SWEEP = {
    "nk": ((1, 1), (2, 1), (2, 2), (3, 1)),
    "eps": (0.05, 0.1),
    "delta": (0.01, 0.1),
}
NEWTON_TOL = 1e-13


@dataclass(frozen=True)
class HandleParams:
    n: int = 1
    k: int = 1
    eps: float = 0.1
    delta: float = 0.01

    def __post_init__(self):
        if self.n < 1 or not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        if self.eps <= 0 or self.delta <= 0:
            raise ValueError("eps and delta must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


def _split(p, params: HandleParams):
    p = np.asarray(p, dtype=float)
    n, k = params.n, params.k
    if p.shape[-1] != 2 * n:
        raise ValueError(f"points must have {2 * n} coordinates, got {p.shape[-1]}")
    xs, ys = p[..., :n], p[..., n:]
    return xs[..., :k], ys[..., :k], xs[..., k:], ys[..., k:]


def aux_xyz(p, params: HandleParams):
    """``x = sum_{i<=k} x_i^2``, ``y = sum_{i<=k} y_i^2 / 2``, ``z = sum_{i>k} (x_i^2 + y_i^2) / 4``."""
    xa, ya, xb, yb = _split(p, params)
    x = np.sum(xa**2, axis=-1)
    y = 0.5 * np.sum(ya**2, axis=-1)
    z = 0.25 * (np.sum(xb**2, axis=-1) + np.sum(yb**2, axis=-1))
    return x, y, z


def cutoff_g(t, eps: float):
    """Monotone C^1 cutoff: ``t/(1+2eps)`` up to 1, then a cubic Hermite join, then 1 from ``1+3eps``.

    On the join ``g' = (1 - u^2)/(1+2eps)`` with ``u = (t-1)/(3eps)``, so the
    slope bound ``0 <= g' <= 1/(1+2eps)`` holds everywhere.
    """
    t = np.asarray(t, dtype=float)
    m0 = 1.0 / (1.0 + 2.0 * eps)
    L = 3.0 * eps
    u = np.clip((t - 1.0) / L, 0.0, 1.0)
    join = m0 + m0 * L * (u - u**3 / 3.0)
    out = np.where(t <= 1.0, m0 * t, np.where(t >= 1.0 + L, 1.0, join))
    return out if out.ndim else float(out)


def cutoff_g_prime(t, eps: float):
    t = np.asarray(t, dtype=float)
    m0 = 1.0 / (1.0 + 2.0 * eps)
    u = np.clip((t - 1.0) / (3.0 * eps), 0.0, 1.0)
    out = np.where(t <= 1.0, m0, m0 * (1.0 - u**2))
    return out if out.ndim else float(out)


def phi(p, params: HandleParams):
    x, y, z = aux_xyz(p, params)
    return x - y + z


def _s(x, y, z, params):
    return y + (x + z) / params.delta


def psi_delta(p, params: HandleParams):
    x, y, z = aux_xyz(p, params)
    e = params.eps
    return x - y + z - (1.0 + e) + (1.0 + e) * cutoff_g(_s(x, y, z, params), e)


def in_handle(p, params: HandleParams, tol: float = 1e-12):
    """``phi >= -1`` and ``psi_delta <= -1``; boundary points within ``tol`` count as inside."""
    return np.logical_and(phi(p, params) >= -1.0 - tol, psi_delta(p, params) <= -1.0 + tol)


def _grad_aux(p, params):
    """Gradients of ``x``, ``y``, ``z`` in ambient coordinates."""
    p = np.asarray(p, dtype=float)
    n, k = params.n, params.k
    gx = np.zeros_like(p)
    gy = np.zeros_like(p)
    gz = np.zeros_like(p)
    gx[..., :k] = 2.0 * p[..., :k]
    gy[..., n:n + k] = p[..., n:n + k]
    gz[..., k:n] = 0.5 * p[..., k:n]
    gz[..., n + k:] = 0.5 * p[..., n + k:]
    return gx, gy, gz


def grad_phi(p, params: HandleParams):
    gx, gy, gz = _grad_aux(p, params)
    return gx - gy + gz


def grad_psi(p, params: HandleParams):
    x, y, z = aux_xyz(p, params)
    gx, gy, gz = _grad_aux(p, params)
    gp = (1.0 + params.eps) * np.asarray(cutoff_g_prime(_s(x, y, z, params), params.eps))[..., None]
    return gx - gy + gz + gp * (gy + (gx + gz) / params.delta)


def liouville_field(p, params: HandleParams):
    """``X = sum_{i<=k} (2x_i d/dx_i - y_i d/dy_i) + 1/2 sum_{i>k} (x_i d/dx_i + y_i d/dy_i)``."""
    p = np.asarray(p, dtype=float)
    n, k = params.n, params.k
    scale = np.concatenate([np.full(k, 2.0), np.full(n - k, 0.5), np.full(k, -1.0), np.full(n - k, 0.5)])
    return p * scale


def liouville_form(p, params: HandleParams):
    """Coefficients of ``lambda`` in the basis ``(dx_1..dx_n, dy_1..dy_n)``.

    ``lambda = sum_{i<=k} (2x_i dy_i + y_i dx_i) + 1/2 sum_{i>k} (x_i dy_i - y_i dx_i)``.
    """
    p = np.asarray(p, dtype=float)
    n, k = params.n, params.k
    xs, ys = p[..., :n], p[..., n:]
    dx = np.concatenate([ys[..., :k], -0.5 * ys[..., k:]], axis=-1)
    dy = np.concatenate([2.0 * xs[..., :k], 0.5 * xs[..., k:]], axis=-1)
    return np.concatenate([dx, dy], axis=-1)


def symplectic_matrix(n: int) -> np.ndarray:
    """``omega(u, v) = u^T J v`` for ``omega = sum dx_i ^ dy_i``."""
    return np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])


def _unit_rows(rng, m, d):
    v = rng.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_sigma_minus(params: HandleParams, n_samples: int, rng, spread: float = 1.5) -> np.ndarray:
    """Exact samples of ``{phi = -1}``: free ``x``- and ``z``-blocks, ``|y_block|^2 = 2(1 + x + z)``."""
    n, k = params.n, params.k
    p = np.zeros((n_samples, 2 * n))
    # radii of the free blocks from a mixture of scales to reach both S and the far field
    scales = spread * np.exp(rng.uniform(np.log(1e-3), 0.0, size=(n_samples, 1)))
    p[:, :k] = scales * rng.standard_normal((n_samples, k))
    p[:, k:n] = scales * rng.standard_normal((n_samples, n - k))
    p[:, n + k:] = scales * rng.standard_normal((n_samples, n - k))
    x, _, z = aux_xyz(p, params)
    p[:, n:n + k] = np.sqrt(2.0 * (1.0 + x + z))[:, None] * _unit_rows(rng, n_samples, k)
    return p


def sample_sigma_plus(params: HandleParams, n_samples: int, rng, max_iter: int = 60):
    """Samples of ``{psi_delta = -1}`` by Newton projection along ``grad psi``.

    Seeds concentrate near ``S`` (small ``x``, ``z`` blocks, ``y`` near 1),
    where ``psi_delta`` differs from ``phi``, plus a share of far-field seeds.
    Returns the converged points and the number of seeds that failed.
    """
    n, k = params.n, params.k
    p = np.zeros((n_samples, 2 * n))
    near = rng.uniform(size=n_samples) < 0.8
    mag = np.where(near, 3.0 * np.sqrt(params.delta), 1.5)[:, None]
    mag = mag * np.exp(rng.uniform(np.log(1e-2), 0.0, size=(n_samples, 1)))
    p[:, :k] = mag * rng.standard_normal((n_samples, k))
    p[:, k:n] = mag * rng.standard_normal((n_samples, n - k))
    p[:, n + k:] = mag * rng.standard_normal((n_samples, n - k))
    radius = np.sqrt(2.0 * rng.uniform(0.8, 1.0 + 4.0 * params.eps, size=n_samples))
    p[:, n:n + k] = radius[:, None] * _unit_rows(rng, n_samples, k)
    done = np.zeros(n_samples, dtype=bool)
    for _ in range(max_iter):
        f = psi_delta(p, params) + 1.0
        done = np.abs(f) <= NEWTON_TOL
        if done.all():
            break
        g = grad_psi(p, params)
        step = (f / np.maximum(np.sum(g * g, axis=1), 1e-300))[:, None] * g
        p = np.where(done[:, None], p, p - step)
    ok = np.abs(psi_delta(p, params) + 1.0) <= NEWTON_TOL
    return p[ok], int(np.sum(~ok))


@dataclass
class HandleReport:
    params: HandleParams
    min_Xphi: float
    min_Xpsi: float
    samples: dict
    witnesses: list
    max_identity_error: float

    @property
    def passed(self) -> bool:
        return self.min_Xphi > 0 and self.min_Xpsi > 0

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "min_Xphi": self.min_Xphi,
            "min_Xpsi": self.min_Xpsi,
            "samples": dict(self.samples),
            "witnesses": list(self.witnesses),
            "max_identity_error": self.max_identity_error,
            "passed": self.passed,
        }

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.as_dict(), sort_keys=True, indent=1) + "\n")
        return path


def _directional(grad, field):
    return np.sum(grad * field, axis=-1)


def transversality_check(params: HandleParams, n_samples: int = 10_000, seed: int = 0) -> HandleReport:
    """Minima of ``X phi`` on ``Sigma_-`` and of ``X psi_delta`` on ``Sigma_+`` (inside the handle)."""
    rng = np.random.default_rng(seed)
    sm = sample_sigma_minus(params, n_samples, rng)
    xphi = _directional(grad_phi(sm, params), liouville_field(sm, params))
    sp, failed = sample_sigma_plus(params, n_samples, rng)
    sp = sp[phi(sp, params) >= -1.0 - 1e-12]
    xpsi = _directional(grad_psi(sp, params), liouville_field(sp, params))
    x, y, z = aux_xyz(sm, params)
    err = float(np.max(np.abs(xphi - (4 * x + 2 * y + z))))
    i, j = int(np.argmin(xphi)), int(np.argmin(xpsi))
    witnesses = [
        {"surface": "sigma_minus", "point": sm[i].tolist(), "value": float(xphi[i])},
        {"surface": "sigma_plus", "point": sp[j].tolist(), "value": float(xpsi[j])},
    ]
    s_plus = _s(*aux_xyz(sp, params), params)
    samples = {
        "sigma_minus": int(len(sm)),
        "sigma_plus": int(len(sp)),
        "sigma_plus_failed": failed,
        "sigma_plus_in_cutoff": int(np.sum(s_plus < 1.0 + 3.0 * params.eps)),
    }
    return HandleReport(params, float(xphi[i]), float(xpsi[j]), samples, witnesses, err)


def identity_check(params: HandleParams, n_points: int = 10_000, seed: int = 0) -> dict:
    """Worst errors of ``i_X omega = lambda``, ``d lambda = omega``, ``X phi = 4x + 2y + z`` and ``psi = phi`` off the cutoff."""
    rng = np.random.default_rng(seed)
    d = 2 * params.n
    p = 2.0 * rng.standard_normal((n_points, d))
    v = rng.standard_normal((n_points, d))
    J = symplectic_matrix(params.n)
    X = liouville_field(p, params)
    lam = liouville_form(p, params)
    contraction = float(np.max(np.abs(np.einsum("ij,jk,ik->i", X, J, v) - np.sum(lam * v, axis=1))))
    # lambda is linear, so d lambda(u, v) = u . (A v) - v . (A u) with A its coefficient matrix
    A = np.stack([liouville_form(e, params) for e in np.eye(d)], axis=1)
    dlam = float(np.max(np.abs((A.T - A) - J)))
    x, y, z = aux_xyz(p, params)
    xphi = float(np.max(np.abs(_directional(grad_phi(p, params), X) - (4 * x + 2 * y + z))))
    # compare the analytic gradient with central differences on a subset
    h = 1e-6
    fd = 0.0
    for q in p[:100]:
        g = np.array([(psi_delta(q + h * e, params) - psi_delta(q - h * e, params)) / (2 * h) for e in np.eye(d)])
        fd = max(fd, float(np.max(np.abs(g - grad_psi(q, params)))) / (1 + float(np.max(np.abs(g)))))
    s = _s(x, y, z, params)
    far = s >= 1.0 + 3.0 * params.eps
    coincide = float(np.max(np.abs(psi_delta(p[far], params) - phi(p[far], params)))) if far.any() else 0.0
    return {
        "contraction": contraction,
        "d_lambda": dlam,
        "x_phi": xphi,
        "grad_psi_fd": fd,
        "psi_minus_phi_far": coincide,
        "far_points": int(far.sum()),
    }


@dataclass
class SubhandleReport:
    omega_on_plane: float
    x_components_of_X: float
    lambda_on_plane: float
    plane_points_in_handle: int
    n_samples: int

    def as_dict(self) -> dict:
        return asdict(self)


def lagrangian_subhandle_check(params: HandleParams, n_samples: int = 1000, seed: int = 0) -> SubhandleReport:
    """``omega`` and ``lambda`` vanish on the ``y``-plane, and ``X`` is tangent to it."""
    rng = np.random.default_rng(seed)
    n = params.n
    J = symplectic_matrix(n)
    E = np.eye(2 * n)[n:]
    om = float(np.max(np.abs(E @ J @ E.T)))
    p = np.zeros((n_samples, 2 * n))
    scales = 1.5 * np.exp(rng.uniform(np.log(1e-2), 0.0, size=(n_samples, 1)))
    p[:, n:] = scales * rng.standard_normal((n_samples, n))
    X = liouville_field(p, params)
    xcomp = float(np.max(np.abs(X[:, :n])))
    lam = liouville_form(p, params)
    lam_plane = float(np.max(np.abs(lam[:, n:])))
    inside = int(np.sum(in_handle(p, params)))
    return SubhandleReport(om, xcomp, lam_plane, inside, n_samples)


def parameter_sweep(n_samples: int = 10_000, seed: int = 0) -> list[HandleReport]:
    out = []
    for n, k in SWEEP["nk"]:
        for eps in SWEEP["eps"]:
            for delta in SWEEP["delta"]:
                out.append(transversality_check(HandleParams(n, k, eps, delta), n_samples, seed))
    return out
