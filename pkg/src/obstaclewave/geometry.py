"""Pointwise Riemannian algebra and discrete differential operators.

A metric is a map x -> g(x) on R^n together with its first derivatives
``dg[..., j, k, l] = d_j g_{kl}``.  All pointwise routines broadcast over
leading axes of ``x`` so a whole mesh is evaluated in one call.

The discrete operators act on fields sampled on an :class:`~obstaclewave.domain.AnnularMesh`
(shape ``(..., n_r, n_theta)``, leading axes usually time).  Radial
derivatives are second-order centered in the interior and second-order
one-sided on the two boundary circles; the angular direction is periodic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, EllipticityError, StencilError

FD_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class MetricField:
    """Riemannian metric on R^n.

    ``g_fn(x)`` returns ``(..., n, n)`` for points ``(..., n)``; ``dg_fn`` returns
    ``(..., n, n, n)`` with the differentiation index first.  When ``dg_fn`` is
    None derivatives fall back to centered differences with step ``FD_STEP``.
    """

    name: str
    g_fn: Callable[[np.ndarray], np.ndarray]
    dg_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kappa: float = 1.0
    lipschitz_budget: float = 0.0
    dim: int = 2
    params: dict = field(default_factory=dict)

    def eval(self, x) -> np.ndarray:
        return self.g_fn(np.asarray(x, dtype=float))

    def deriv(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dg_fn is not None:
            return self.dg_fn(x)
        return _fd_metric_derivative(self.g_fn, x, self.dim)

    @property
    def analytic(self) -> bool:
        return self.dg_fn is not None

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def _fd_metric_derivative(g_fn, x, n, h=FD_STEP):
    out = np.empty(x.shape[:-1] + (n, n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out[..., j, :, :] = (g_fn(x + e) - g_fn(x - e)) / (2 * h)
    return out


@dataclass(frozen=True)
class MetricValue:
    g: np.ndarray
    g_inv: np.ndarray
    det: np.ndarray
    sqrt_det: np.ndarray


@dataclass(frozen=True)
class ChristoffelValue:
    # gamma[..., m, k, l] = Gamma^m_{kl}
    gamma: np.ndarray


# ---------------------------------------------------------------------------
# metric registry

def _eye_like(x, n):
    return np.broadcast_to(np.eye(n), x.shape[:-1] + (n, n)).copy()


def identity_metric(n: int = 2) -> MetricField:
    return MetricField(
        name="identity",
        g_fn=lambda x: _eye_like(x, n),
        dg_fn=lambda x: np.zeros(x.shape[:-1] + (n, n, n)),
        kappa=1.0,
        lipschitz_budget=1.0,
        dim=n,
    )


def scaled_metric(c: float, n: int = 2) -> MetricField:
    if c <= 0:
        raise EllipticityError(None, f"scaled metric needs c > 0, got {c}")
    return MetricField(
        name="scaled",
        g_fn=lambda x: c * _eye_like(x, n),
        dg_fn=lambda x: np.zeros(x.shape[:-1] + (n, n, n)),
        kappa=float(c),
        lipschitz_budget=float(c),
        dim=n,
        params={"c": c},
    )


def _conformal(name, lam, dlam, n, kappa, budget, params):
    def g_fn(x):
        return np.exp(2 * lam(x))[..., None, None] * _eye_like(x, n)

    def dg_fn(x):
        e2 = np.exp(2 * lam(x))
        grad = dlam(x)
        return (2 * e2[..., None] * grad)[..., :, None, None] * np.eye(n)

    return MetricField(name, g_fn, dg_fn, kappa=kappa, lipschitz_budget=budget,
                       dim=n, params=params)


def conformal_trig_metric(amp: float = 0.1, k1: float = 1.0, k2: float = 1.0,
                          phase: float = 0.0) -> MetricField:
    """g = exp(2*lam) I with lam(x) = amp*sin(k1*x1 + k2*x2 + phase)."""
    k = np.array([k1, k2], dtype=float)

    def lam(x):
        return amp * np.sin(x @ k + phase)

    def dlam(x):
        return amp * np.cos(x @ k + phase)[..., None] * k

    kappa = float(np.exp(-2 * abs(amp)))
    budget = float(np.exp(2 * abs(amp)) * (1 + 2 * abs(amp) * np.linalg.norm(k)))
    return _conformal("conformal_trig", lam, dlam, 2, kappa, budget,
                      {"amp": amp, "k1": k1, "k2": k2, "phase": phase})


def conformal_poly_metric(b1: float = 0.0, b2: float = 0.0, c2: float = 0.0,
                          rmax: float = 4.0) -> MetricField:
    """g = exp(2*lam) I with lam(x) = b.x + c2*|x|^2.

    ``kappa`` and the Lipschitz budget are certified on the ball |x| <= rmax only.
    """
    b = np.array([b1, b2], dtype=float)

    def lam(x):
        return x @ b + c2 * np.sum(x * x, axis=-1)

    def dlam(x):
        return b + 2 * c2 * x

    lam_min = -np.linalg.norm(b) * rmax - abs(min(c2, 0.0)) * rmax ** 2
    lam_max = np.linalg.norm(b) * rmax + max(c2, 0.0) * rmax ** 2
    kappa = float(np.exp(2 * lam_min))
    budget = float(np.exp(2 * lam_max) * (1 + 2 * (np.linalg.norm(b) + 2 * abs(c2) * rmax)))
    return _conformal("conformal_poly", lam, dlam, 2, kappa, budget,
                      {"b1": b1, "b2": b2, "c2": c2, "rmax": rmax})


def bump_metric(eps: float = 0.2, cx: float = 1.5, cy: float = 0.0, radius: float = 0.4,
                m11: float = 1.0, m12: float = 0.3, m22: float = 0.5) -> MetricField:
    """g = I + eps*psi(x)*M with psi the standard C-infinity bump of given radius."""
    c = np.array([cx, cy], dtype=float)
    M = np.array([[m11, m12], [m12, m22]], dtype=float)
    rho2 = radius ** 2

    def psi_and_grad(x):
        d = x - c
        q = np.sum(d * d, axis=-1) / rho2
        inside = q < 1.0
        qi = np.where(inside, q, 0.0)
        psi = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - qi)), 0.0)
        dpsi_dq = np.where(inside, -psi / (1.0 - qi) ** 2, 0.0)
        return psi, dpsi_dq[..., None] * 2 * d / rho2

    def g_fn(x):
        psi, _ = psi_and_grad(x)
        return _eye_like(x, 2) + eps * psi[..., None, None] * M

    def dg_fn(x):
        _, dpsi = psi_and_grad(x)
        return eps * dpsi[..., :, None, None] * M

    lam_min = float(np.linalg.eigvalsh(M)[0])
    kappa = 1.0 + min(0.0, eps * lam_min, eps * float(np.linalg.eigvalsh(M)[-1]))
    if kappa <= 0:
        raise EllipticityError(c, f"bump metric with eps={eps} is not elliptic")
    qs = np.linspace(0, 1, 2001, endpoint=False)
    grad_max = np.max(np.exp(1 - 1 / (1 - qs)) / (1 - qs) ** 2 * 2 * np.sqrt(qs) / radius)
    budget = 1.0 + abs(eps) * np.linalg.norm(M, 2) * (1.0 + grad_max)
    return MetricField("bump", g_fn, dg_fn, kappa=kappa, lipschitz_budget=float(budget), dim=2,
                       params={"eps": eps, "cx": cx, "cy": cy, "radius": radius,
                               "m11": m11, "m12": m12, "m22": m22})


def callable_metric(g_fn, kappa: float, name: str = "custom", dim: int = 2) -> MetricField:
    """Wrap an arbitrary metric; derivatives by centered differences."""
    return MetricField(name, g_fn, None, kappa=kappa, lipschitz_budget=float("nan"), dim=dim)


METRICS = {
    "identity": identity_metric,
    "scaled": scaled_metric,
    "conformal_trig": conformal_trig_metric,
    "conformal_poly": conformal_poly_metric,
    "bump": bump_metric,
}


def make_metric(name: str, **params) -> MetricField:
    try:
        factory = METRICS[name]
    except KeyError:
        raise KeyError(f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# pointwise algebra

def metric_eval(metric: MetricField, x) -> MetricValue:
    x = np.asarray(x, dtype=float)
    g = metric.eval(x)
    eig = np.linalg.eigvalsh(g)
    bad = eig[..., 0] <= 0
    if np.any(bad):
        where = x[bad][0] if x.ndim > 1 else x
        raise EllipticityError(where)
    g_inv = np.linalg.inv(g)
    g_inv = 0.5 * (g_inv + np.swapaxes(g_inv, -1, -2))
    det = np.linalg.det(g)
    return MetricValue(g=g, g_inv=g_inv, det=det, sqrt_det=np.sqrt(det))


def christoffel_from(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    # T[j,k,l] = d_k g_{jl} + d_l g_{jk} - d_j g_{kl}
    T = (np.einsum("...kjl->...jkl", dg) + np.einsum("...ljk->...jkl", dg) - dg)
    gamma = 0.5 * np.einsum("...mj,...jkl->...mkl", g_inv, T)
    return 0.5 * (gamma + np.swapaxes(gamma, -1, -2))


def christoffel_eval(metric: MetricField, x) -> ChristoffelValue:
    mv = metric_eval(metric, x)
    return ChristoffelValue(christoffel_from(mv.g_inv, metric.deriv(x)))


def inverse_metric_derivative(g_inv: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """d_j g^{kl} = -g^{ka} d_j g_{ab} g^{bl}, differentiation index first."""
    return -np.einsum("...ka,...jab,...bl->...jkl", g_inv, dg, g_inv)


# ---------------------------------------------------------------------------
# node geometry on a polar mesh

@dataclass(frozen=True, eq=False)
class NodeGeometry:
    g: np.ndarray          # (n_r, n_t, 2, 2)
    g_inv: np.ndarray
    sqrt_det: np.ndarray   # (n_r, n_t)
    gamma: np.ndarray      # (n_r, n_t, 2, 2, 2)
    cos: np.ndarray        # (1, n_t)
    sin: np.ndarray
    r: np.ndarray          # (n_r, 1)


@lru_cache(maxsize=64)
def node_geometry(metric: MetricField, mesh) -> NodeGeometry:
    pts = mesh.points
    mv = metric_eval(metric, pts)
    gamma = christoffel_from(mv.g_inv, metric.deriv(pts))
    return NodeGeometry(
        g=mv.g, g_inv=mv.g_inv, sqrt_det=mv.sqrt_det, gamma=gamma,
        cos=np.cos(mesh.theta)[None, :], sin=np.sin(mesh.theta)[None, :],
        r=mesh.r[:, None],
    )


def _polar_coefficients(metric, r, theta):
    """Divergence-form coefficients sqrt|g_polar| * g_polar^{-1} at (r, theta).

    Returns (A_rr, A_rt, A_tt), each broadcast to ``np.broadcast(r, theta)``.
    """
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    c, s = np.cos(theta), np.sin(theta)
    pts = np.stack([r * c, r * s], axis=-1)
    mv = metric_eval(metric, pts)
    G = mv.g_inv
    er = np.stack([c, s], axis=-1)
    et = np.stack([-s, c], axis=-1)
    grr = np.einsum("...i,...ij,...j->...", er, G, er)
    grt = np.einsum("...i,...ij,...j->...", er, G, et)
    gtt = np.einsum("...i,...ij,...j->...", et, G, et)
    sq = mv.sqrt_det
    return r * sq * grr, sq * grt, sq * gtt / r


@lru_cache(maxsize=64)
def laplacian_matrix(metric: MetricField, mesh) -> sp.csr_matrix:
    """Sparse divergence-form Laplace-Beltrami on the polar mesh.

    Rows of the two boundary circles are empty; interior rows use a 9-point
    stencil with half-point coefficients for the diagonal terms and centered
    differences for the mixed terms, so the operator is symmetric with respect
    to the weight r*sqrt|g|.
    """
    nr, nt = mesh.n_r, mesh.n_theta
    hr, ht = mesh.h_r, mesh.h_theta
    r, th = mesh.r, mesh.theta

    Arr_half, _, _ = _polar_coefficients(metric, (r[:-1] + 0.5 * hr)[:, None], th[None, :])
    _, _, Att_half = _polar_coefficients(metric, r[:, None], (th + 0.5 * ht)[None, :])
    _, Art, _ = _polar_coefficients(metric, r[:, None], th[None, :])
    sqrt_det = node_geometry(metric, mesh).sqrt_det

    I, J = np.meshgrid(np.arange(1, nr - 1), np.arange(nt), indexing="ij")
    Jp, Jm = (J + 1) % nt, (J - 1) % nt
    w = 1.0 / (r[I] * sqrt_det[I, J])
    c = w / (4 * hr * ht)

    def idx(i, j):
        return (i * nt + j).ravel()

    rows, cols, vals = [], [], []

    def add(ci, cj, v):
        rows.append(idx(I, J))
        cols.append(idx(ci, cj))
        vals.append(np.broadcast_to(v, I.shape).ravel())

    a_p = Arr_half[I, J]
    a_m = Arr_half[I - 1, J]
    t_p = Att_half[I, J]
    t_m = Att_half[I, Jm]
    add(I + 1, J, w * a_p / hr ** 2)
    add(I - 1, J, w * a_m / hr ** 2)
    add(I, Jp, w * t_p / ht ** 2)
    add(I, Jm, w * t_m / ht ** 2)
    add(I, J, -w * ((a_p + a_m) / hr ** 2 + (t_p + t_m) / ht ** 2))
    # d_r(A_rt d_theta u)
    add(I + 1, Jp, c * Art[I + 1, J])
    add(I + 1, Jm, -c * Art[I + 1, J])
    add(I - 1, Jp, -c * Art[I - 1, J])
    add(I - 1, Jm, c * Art[I - 1, J])
    # d_theta(A_rt d_r u)
    add(I + 1, Jp, c * Art[I, Jp])
    add(I - 1, Jp, -c * Art[I, Jp])
    add(I + 1, Jm, -c * Art[I, Jm])
    add(I - 1, Jm, c * Art[I, Jm])

    N = nr * nt
    L = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    L.sum_duplicates()
    return L


# ---------------------------------------------------------------------------
# difference stencils

def d_theta(u, h):
    return (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / (2 * h)


def d2_theta(u, h):
    return (np.roll(u, -1, axis=-1) - 2 * u + np.roll(u, 1, axis=-1)) / h ** 2


def d_axis(u, h, axis):
    return np.gradient(u, h, axis=axis, edge_order=2)


def d2_axis(u, h, axis):
    """Second derivative: centered interior, 4-point one-sided at both ends."""
    u = np.moveaxis(u, axis, 0)
    if u.shape[0] < 4:
        raise StencilError("second derivative needs at least 4 samples along the axis")
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h ** 2
    out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h ** 2
    out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h ** 2
    return np.moveaxis(out, 0, axis)


def _check_field(field, mesh):
    field = np.asarray(field, dtype=float)
    if field.shape[-2:] != (mesh.n_r, mesh.n_theta):
        raise StencilError(
            f"field trailing shape {field.shape[-2:]} does not match mesh "
            f"({mesh.n_r}, {mesh.n_theta})")
    if not np.all(np.isfinite(field)):
        raise StencilError("field has missing (non-finite) values; boundary values must be supplied")
    return field


# ---------------------------------------------------------------------------
# discrete operators

@dataclass(frozen=True)
class GradHess:
    du: np.ndarray        # covector d_k u, (..., n_r, n_t, 2)
    grad: np.ndarray      # contravariant grad_g u
    hess: np.ndarray      # covariant Hessian, (..., n_r, n_t, 2, 2)
    grad_sq: np.ndarray   # |grad_g u|_g^2
    hess_sq: np.ndarray   # |Hess_g u|_g^2


def cartesian_gradient(field, mesh):
    """Euclidean partial derivatives (d_1 u, d_2 u) from polar differences."""
    ur = d_axis(field, mesh.h_r, -2)
    ut = d_theta(field, mesh.h_theta)
    c, s = np.cos(mesh.theta), np.sin(mesh.theta)
    r = mesh.r[:, None]
    return np.stack([c * ur - s / r * ut, s * ur + c / r * ut], axis=-1)


def _assemble(ur, ut, urr, utt, urt, r, c, s, gamma, ginv) -> GradHess:
    du = np.stack([c * ur - s / r * ut, s * ur + c / r * ut], axis=-1)
    # flat covariant Hessian in polar components
    Hrr = urr
    Hrt = urt - ut / r
    Htt = utt + r * ur
    # d(r, theta)/dx1 = (c, -s/r), d(r, theta)/dx2 = (s, c/r)
    H11 = c * c * Hrr - 2 * c * s / r * Hrt + s * s / r ** 2 * Htt
    H22 = s * s * Hrr + 2 * s * c / r * Hrt + c * c / r ** 2 * Htt
    H12 = c * s * Hrr + (c * c - s * s) / r * Hrt - s * c / r ** 2 * Htt
    hess = np.stack([np.stack([H11, H12], -1), np.stack([H12, H22], -1)], -2)
    hess = hess - np.einsum("...mkl,...m->...kl", gamma, du)
    grad = np.einsum("...kl,...l->...k", ginv, du)
    grad_sq = np.einsum("...k,...k->...", grad, du)
    hess_sq = np.einsum("...ab,...bc,...cd,...da->...", ginv, hess, ginv, hess)
    return GradHess(du=du, grad=grad, hess=hess, grad_sq=grad_sq, hess_sq=hess_sq)


def gradient_and_hessian(metric: MetricField, field, mesh) -> GradHess:
    """Metric gradient, covariant Hessian and their squared g-norms at every node."""
    field = _check_field(field, mesh)
    geo = node_geometry(metric, mesh)
    hr, ht = mesh.h_r, mesh.h_theta
    ur = d_axis(field, hr, -2)
    return _assemble(ur, d_theta(field, ht), d2_axis(field, hr, -2), d2_theta(field, ht),
                     d_theta(ur, ht), geo.r, geo.cos, geo.sin, geo.gamma, geo.g_inv)


def gradient_squared(metric, field, mesh) -> np.ndarray:
    """|grad_g u|_g^2 at every node, without the Hessian."""
    geo = node_geometry(metric, mesh)
    du = cartesian_gradient(field, mesh)
    return np.einsum("...k,...kl,...l->...", du, geo.g_inv, du)


def _one_sided_radial(field, row, h):
    if row == 0:
        u0, u1, u2, u3 = (field[..., k, :] for k in range(4))
        sign = 1.0
    else:
        u0, u1, u2, u3 = (field[..., -1 - k, :] for k in range(4))
        sign = -1.0
    ur = sign * (-3 * u0 + 4 * u1 - u2) / (2 * h)
    urr = (2 * u0 - 5 * u1 + 4 * u2 - u3) / h ** 2
    return ur, urr


def boundary_gradient_and_hessian(metric, field, mesh, row) -> GradHess:
    """Same as :func:`gradient_and_hessian` restricted to one boundary circle."""
    geo = node_geometry(metric, mesh)
    ht = mesh.h_theta
    ur, urr = _one_sided_radial(field, row, mesh.h_r)
    w = field[..., row, :]
    return _assemble(ur, d_theta(w, ht), urr, d2_theta(w, ht), d_theta(ur, ht),
                     mesh.r[row], geo.cos[0], geo.sin[0], geo.gamma[row], geo.g_inv[row])


def laplace_beltrami(metric: MetricField, field, mesh) -> np.ndarray:
    """Delta_g of a grid field.

    Interior nodes use the divergence-form stencil of :func:`laplacian_matrix`.
    The two boundary circles, where that stencil is incomplete, get the trace
    of the covariant Hessian built from one-sided radial differences.
    """
    field = _check_field(field, mesh)
    L = laplacian_matrix(metric, mesh)
    flat = field.reshape(-1, mesh.n_r * mesh.n_theta)
    out = np.asarray(L @ flat.T).T.reshape(field.shape)
    geo = node_geometry(metric, mesh)
    for row in (0, mesh.n_r - 1):
        gh = boundary_gradient_and_hessian(metric, field, mesh, row)
        out[..., row, :] = np.einsum("...kl,...kl->...", geo.g_inv[row], gh.hess)
    return out


# ---------------------------------------------------------------------------
# boundary decomposition

@dataclass(frozen=True)
class BoundaryDecomposition:
    nu_g: np.ndarray      # (..., n_t, 2) contravariant unit normal
    dnu: np.ndarray       # (..., n_t) normal derivative d_{nu_g} w
    grad_tau: np.ndarray  # (..., n_t, 2)
    grad_tau_sq: np.ndarray
    grad_sq: np.ndarray
    grad: np.ndarray | None = None   # full contravariant gradient


def boundary_row(mesh, which: str) -> int:
    if which in ("Gamma", "inner", "gamma"):
        return 0
    if which in ("Gamma0", "outer", "gamma0"):
        return mesh.n_r - 1
    raise DomainError(f"{which!r} is not a mesh boundary; use 'Gamma' or 'Gamma0'")


def euclidean_normal(mesh, which: str) -> np.ndarray:
    """Outward Euclidean unit normal of D on the chosen circle, shape (n_t, 2)."""
    sign = -1.0 if boundary_row(mesh, which) == 0 else 1.0
    return sign * np.stack([np.cos(mesh.theta), np.sin(mesh.theta)], axis=-1)


def metric_normal(metric, mesh, which):
    """(nu_g, g^{ij} nu_i nu_j) on a boundary circle."""
    row = boundary_row(mesh, which)
    ginv = node_geometry(metric, mesh).g_inv[row]
    nu = euclidean_normal(mesh, which)
    raised = np.einsum("tkl,tl->tk", ginv, nu)
    q = np.einsum("tk,tk->t", raised, nu)
    return raised / np.sqrt(q)[:, None], q


def boundary_decompose(metric: MetricField, field, mesh, which: str) -> BoundaryDecomposition:
    row = boundary_row(mesh, which)
    field = _check_field(field, mesh)
    nu_g, _ = metric_normal(metric, mesh, which)
    g = node_geometry(metric, mesh).g[row]
    idx = [0, 1, 2] if row == 0 else [-3, -2, -1]
    strip = field[..., idx, :]
    hr = mesh.h_r
    if row == 0:
        ur = (-3 * strip[..., 0, :] + 4 * strip[..., 1, :] - strip[..., 2, :]) / (2 * hr)
    else:
        ur = (3 * strip[..., 2, :] - 4 * strip[..., 1, :] + strip[..., 0, :]) / (2 * hr)
    wb = field[..., row, :]
    ut = d_theta(wb, mesh.h_theta)
    c, s = np.cos(mesh.theta), np.sin(mesh.theta)
    rb = mesh.r[row]
    du = np.stack([c * ur - s / rb * ut, s * ur + c / rb * ut], axis=-1)
    ginv = node_geometry(metric, mesh).g_inv[row]
    grad = np.einsum("tkl,...tl->...tk", ginv, du)
    dnu = np.einsum("tk,...tk->...t", nu_g, du)
    grad_tau = grad - dnu[..., None] * nu_g
    grad_tau_sq = np.einsum("...tk,tkl,...tl->...t", grad_tau, g, grad_tau)
    grad_sq = np.einsum("...tk,...tk->...t", grad, du)
    return BoundaryDecomposition(nu_g=nu_g, dnu=dnu, grad_tau=grad_tau,
                                 grad_tau_sq=grad_tau_sq, grad_sq=grad_sq, grad=grad)


def tangential_metric_factor(metric, mesh, which):
    """g(e_theta, e_theta) on the circle; |grad_tau w|_g^2 = (d_theta w)^2 / factor."""
    row = boundary_row(mesh, which)
    g = node_geometry(metric, mesh).g[row]
    rb = mesh.r[row]
    et = rb * np.stack([-np.sin(mesh.theta), np.cos(mesh.theta)], axis=-1)
    return np.einsum("tk,tkl,tl->t", et, g, et)
