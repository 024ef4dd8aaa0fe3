"""Weight functions, their admissibility, and the Carleman constant pipeline."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import geometry
from .errors import DegeneracyError, InfeasibleError, ParameterError, SamplingError

EXP_LIMIT = 700.0


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Scalar weight with analytic gradient and Hessian (all vectorized over points)."""

    name: str
    phi: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    radial_center: np.ndarray | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.phi(np.asarray(x, dtype=float))

    def scaled(self, c: float) -> "WeightFunction":
        return WeightFunction(
            f"{c}*{self.name}",
            lambda x: c * self.phi(x), lambda x: c * self.grad(x), lambda x: c * self.hess(x),
            self.radial_center, {**self.params, "scale": c * self.params.get("scale", 1.0)},
        )

    def describe(self) -> dict:
        return {"name": self.name, **self.params}


def quadratic_weight(r0: float = 1.0, cx: float = 0.0, cy: float = 0.0, scale: float = 1.0) -> WeightFunction:
    """scale * (|x - c|^2 - r0^2); with c = 0 the obstacle is the disk of radius r0."""
    c = np.array([cx, cy], dtype=float)

    def phi(x):
        d = x - c
        return scale * (np.sum(d * d, axis=-1) - r0 ** 2)

    def grad(x):
        return scale * 2 * (x - c)

    def hess(x):
        return scale * 2 * np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()

    return WeightFunction("quadratic", phi, grad, hess, c,
                          {"r0": r0, "cx": cx, "cy": cy, "scale": scale})


def concave_weight(scale: float = 1.0) -> WeightFunction:
    """-scale*|x|^2."""
    return WeightFunction(
        "concave",
        lambda x: -scale * np.sum(x * x, axis=-1),
        lambda x: -2 * scale * x,
        lambda x: -2 * scale * np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy(),
        np.zeros(2), {"scale": scale},
    )


def linear_weight(a1: float = 1.0, a2: float = 0.0, b: float = 0.0) -> WeightFunction:
    a = np.array([a1, a2], dtype=float)
    return WeightFunction(
        "linear",
        lambda x: x @ a + b,
        lambda x: np.broadcast_to(a, x.shape).copy(),
        lambda x: np.zeros(x.shape[:-1] + (2, 2)),
        None, {"a1": a1, "a2": a2, "b": b},
    )


WEIGHTS = {"quadratic": quadratic_weight, "concave": concave_weight, "linear": linear_weight}


def make_weight(name: str, **params) -> WeightFunction:
    try:
        return WEIGHTS[name](**params)
    except KeyError:
        raise KeyError(f"unknown weight {name!r}; choose from {sorted(WEIGHTS)}") from None


# ---------------------------------------------------------------------------
# pointwise quantities

def grad_norm(phi: WeightFunction, metric, x) -> np.ndarray:
    """|grad_g phi|_g."""
    x = np.asarray(x, dtype=float)
    mv = geometry.metric_eval(metric, x)
    d = phi.grad(x)
    return np.sqrt(np.einsum("...k,...kl,...l->...", d, mv.g_inv, d))


def covariant_hessian(phi: WeightFunction, metric, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    gamma = geometry.christoffel_eval(metric, x).gamma
    return phi.hess(x) - np.einsum("...mkl,...m->...kl", gamma, phi.grad(x))


def laplace_beltrami_weight(phi: WeightFunction, metric, x) -> np.ndarray:
    """Delta_g phi = g^{kl} (Hess_g phi)_{kl}, analytic."""
    mv = geometry.metric_eval(metric, x)
    return np.einsum("...kl,...kl->...", mv.g_inv, covariant_hessian(phi, metric, x))


def min_generalized_eigenvalue(H, g) -> np.ndarray:
    """Smallest lambda with det(H - lambda g) = 0, batched."""
    L = np.linalg.cholesky(g)
    Li = np.linalg.inv(L)
    M = Li @ H @ np.swapaxes(Li, -1, -2)
    M = 0.5 * (M + np.swapaxes(M, -1, -2))
    return np.linalg.eigvalsh(M)[..., 0]


# ---------------------------------------------------------------------------
# admissibility

@dataclass
class AdmissibilityReport:
    grad_inf: float
    hess_inf: float
    sublevel_bounded: bool
    certification_radius: float
    certified: bool
    admissible: bool
    sample_count: int
    positive_set_empty: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _sublevel_check(phi, half_width, cert_radius):
    if phi.radial_center is not None:
        c = phi.radial_center
        ang = np.linspace(0, 2 * np.pi, 720, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
        on_sphere = c + cert_radius * dirs
        if np.any(phi(on_sphere) <= 0):
            return False, True
        rs = np.linspace(cert_radius, 10 * cert_radius, 200)
        pts = c + rs[:, None, None] * dirs[None]
        dr = np.einsum("rak,ak->ra", phi.grad(pts), dirs)
        return bool(np.all(dr > 0)), True
    # non-radial: sampled check that {phi < 0} does not reach the box boundary
    s = np.linspace(-half_width, half_width, 801)
    edges = np.concatenate([
        np.stack([s, np.full_like(s, -half_width)], -1), np.stack([s, np.full_like(s, half_width)], -1),
        np.stack([np.full_like(s, -half_width), s], -1), np.stack([np.full_like(s, half_width), s], -1),
    ])
    return bool(np.all(phi(edges) > 0)), False


def check_admissible(phi: WeightFunction, metric, half_width: float = 3.0, n_grid: int = 200,
                     cert_radius: float | None = None) -> AdmissibilityReport:
    """Sample the two infimum conditions on {phi > 0} within the box [-w, w]^2.

    The Hessian infimum over unit directions is the smallest generalized
    eigenvalue of (Hess_g phi, g).  If the box holds no point of {phi > 0} the
    infima are taken over the whole box and the weight is rejected.
    """
    if n_grid <= 0 or half_width <= 0:
        raise SamplingError(f"empty sample set (n_grid={n_grid}, half_width={half_width})")
    s = np.linspace(-half_width, half_width, n_grid)
    X = np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)
    pos = phi(X) > 0
    empty = not np.any(pos)
    pts = X if empty else X[pos]
    gn = grad_norm(phi, metric, pts)
    H = covariant_hessian(phi, metric, pts)
    g = geometry.metric_eval(metric, pts).g
    hmin = min_generalized_eigenvalue(H, g)
    if cert_radius is None:
        cert_radius = 0.9 * half_width
    bounded, certified = _sublevel_check(phi, half_width, cert_radius)
    grad_inf, hess_inf = float(gn.min()), float(hmin.min())
    admissible = (not empty) and grad_inf > 0 and hess_inf > 0 and bounded
    return AdmissibilityReport(grad_inf, hess_inf, bounded, float(cert_radius), certified,
                               bool(admissible), int(len(pts)), empty)


# ---------------------------------------------------------------------------
# constants

@dataclass(frozen=True)
class CarlemanParams:
    m_frak: float
    delta: float
    t_star: float
    T: float
    tau: float
    gamma: float
    mu: float

    def to_dict(self) -> dict:
        return asdict(self)


def geometric_constants(phi: WeightFunction, metric, mesh) -> tuple[float, float, float]:
    """(max phi, min |grad_g phi|_g, their ratio) over all nodes of the closed annulus."""
    pts = mesh.points
    m = float(np.max(phi(pts)))
    delta = float(np.min(grad_norm(phi, metric, pts)))
    if delta <= 0:
        raise DegeneracyError(f"min |grad_g phi|_g = {delta} <= 0 on the closed domain")
    return m, delta, m / delta


def carleman_params(constants, T: float, tau: float, gamma_rule="midpoint") -> CarlemanParams:
    """Choose gamma in (m/(T - tau), delta) and form mu = gamma (T - tau) - m.

    ``gamma_rule`` is "midpoint", "near_delta" or an explicit float.
    """
    m, delta = constants[0], constants[1]
    t_star = m / delta
    if not T > t_star:
        raise InfeasibleError(f"T <= T* = {t_star:.6g} (T = {T})")
    if not 0 < tau < T - t_star:
        raise InfeasibleError(f"tau = {tau} outside (0, T - T*) = (0, {T - t_star:.6g}); T* = {t_star:.6g}")
    lower = m / (T - tau)
    if gamma_rule == "midpoint":
        gamma = 0.5 * (lower + delta)
    elif gamma_rule == "near_delta":
        gamma = delta - 0.05 * (delta - lower)
    else:
        try:
            gamma = float(gamma_rule)
        except (TypeError, ValueError):
            raise ParameterError(f"unknown gamma rule {gamma_rule!r}") from None
        if not lower < gamma < delta:
            raise InfeasibleError(f"gamma = {gamma} outside ({lower:.6g}, {delta:.6g})")
    mu = gamma * (T - tau) - m
    return CarlemanParams(m, delta, t_star, T, tau, gamma, mu)


@dataclass(frozen=True)
class WeightValue:
    varphi: np.ndarray
    exp2s: np.ndarray
    overflow: bool


def weight_eval(phi: WeightFunction, params: CarlemanParams, x, t, s: float) -> WeightValue:
    """varphi = phi(x) - gamma t and exp(2 s varphi), with an explicit overflow flag."""
    if s < 0:
        raise ParameterError(f"s must be >= 0, got {s}")
    varphi = phi(np.asarray(x, dtype=float)) - params.gamma * np.asarray(t, dtype=float)
    expo = 2 * s * varphi
    overflow = bool(np.any(expo > EXP_LIMIT))
    exp2s = np.exp(np.minimum(expo, EXP_LIMIT))
    return WeightValue(varphi, exp2s, overflow)
