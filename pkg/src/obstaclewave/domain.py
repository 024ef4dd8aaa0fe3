"""Polar mesh of the annulus D = {r0 < |x| < R}, quadrature and discrete norms.

Volume integrals use the trapezoid rule in r and the periodic trapezoid rule
in theta against dV_g = sqrt|g| dx = sqrt|g| r dr dtheta.  Boundary integrals
default to the measure dS_g = sqrt|g| dS (Euclidean arc length dS); the
induced Riemannian length element is available as ``measure="induced"``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import geometry
from .errors import DomainError, GeometryError, ParameterError, ResolutionError, ShapeError

MIN_NODES = 16


@dataclass(frozen=True, eq=False)
class AnnularMesh:
    r0: float
    R: float
    n_r: int
    n_theta: int

    @cached_property
    def r(self) -> np.ndarray:
        r = np.linspace(self.r0, self.R, self.n_r)
        r[0], r[-1] = self.r0, self.R
        return r

    @cached_property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_theta) / self.n_theta

    @property
    def h_r(self) -> float:
        return (self.R - self.r0) / (self.n_r - 1)

    @property
    def h_theta(self) -> float:
        return 2 * np.pi / self.n_theta

    @property
    def h_min(self) -> float:
        return min(self.h_r, self.r0 * self.h_theta)

    @cached_property
    def points(self) -> np.ndarray:
        """Cartesian node coordinates, shape (n_r, n_theta, 2)."""
        r = self.r[:, None]
        return np.stack([r * np.cos(self.theta), r * np.sin(self.theta)], axis=-1)

    @cached_property
    def boundary_index(self) -> dict:
        flat = np.arange(self.n_r * self.n_theta).reshape(self.n_r, self.n_theta)
        return {"Gamma": flat[0].copy(), "Gamma0": flat[-1].copy()}

    def extended(self, R_new: float) -> "AnnularMesh":
        """Same spacing, outer radius moved out to the first node >= R_new."""
        extra = int(np.ceil((R_new - self.R) / self.h_r - 1e-9))
        extra = max(extra, 0)
        return AnnularMesh(self.r0, self.R + extra * self.h_r, self.n_r + extra, self.n_theta)

    def refined(self, factor: int = 2) -> "AnnularMesh":
        return AnnularMesh(self.r0, self.R, factor * (self.n_r - 1) + 1, factor * self.n_theta)

    def descriptor(self) -> dict:
        return {"r0": self.r0, "R": self.R, "n_r": self.n_r, "n_theta": self.n_theta,
                "layout": "row-major (r, theta)"}


def build_annulus_mesh(r0: float, R: float, n_r: int, n_theta: int) -> AnnularMesh:
    if not (0 < r0 < R):
        raise GeometryError(f"need 0 < r0 < R, got r0={r0}, R={R}")
    if n_r < MIN_NODES or n_theta < MIN_NODES:
        raise ResolutionError(
            f"mesh {n_r}x{n_theta} below the {MIN_NODES}-node floor in each direction")
    return AnnularMesh(float(r0), float(R), int(n_r), int(n_theta))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    T: float
    n_t: int

    def __post_init__(self):
        if self.T <= 0 or self.n_t < 3:
            raise ParameterError(f"time grid needs T > 0 and n_t >= 3, got T={self.T}, n_t={self.n_t}")

    @property
    def dt(self) -> float:
        return self.T / self.n_t

    @cached_property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_t + 1)

    def descriptor(self) -> dict:
        return {"T": self.T, "n_t": self.n_t, "dt": self.dt}


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Scalar field on D x [0, T]; ``values`` has shape (n_t + 1, n_r, n_theta)."""

    mesh: AnnularMesh
    tgrid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        want = (self.tgrid.n_t + 1, self.mesh.n_r, self.mesh.n_theta)
        if self.values.shape != want:
            raise ShapeError(f"values shape {self.values.shape} != {want}")

    def slice(self, k: int) -> np.ndarray:
        return self.values[k]

    def trace(self, which: str) -> np.ndarray:
        return self.values[:, geometry.boundary_row(self.mesh, which), :]

    def scaled(self, c: float) -> "SpaceTimeField":
        return SpaceTimeField(self.mesh, self.tgrid, c * self.values)


# ---------------------------------------------------------------------------
# quadrature weights

def radial_weights(mesh) -> np.ndarray:
    w = np.full(mesh.n_r, mesh.h_r)
    w[0] = w[-1] = 0.5 * mesh.h_r
    return w


def volume_weights(metric, mesh) -> np.ndarray:
    """Node weights for integrals against dV_g."""
    sq = geometry.node_geometry(metric, mesh).sqrt_det
    return (radial_weights(mesh) * mesh.r)[:, None] * mesh.h_theta * sq


def surface_weights(metric, mesh, which: str, measure: str = "volume_density") -> np.ndarray:
    row = geometry.boundary_row(mesh, which)
    w = geometry.node_geometry(metric, mesh).sqrt_det[row] * mesh.r[row] * mesh.h_theta
    if measure == "volume_density":
        return w
    if measure == "induced":
        _, q = geometry.metric_normal(metric, mesh, which)
        return w * np.sqrt(q)
    raise ParameterError(f"unknown surface measure {measure!r}")


def time_weights(tgrid: TimeGrid, t_end: float | None = None) -> np.ndarray:
    """Trapezoid weights on [0, t_end] for samples on the grid.

    A partial last interval integrates the linear interpolant exactly.
    """
    n, dt = tgrid.n_t, tgrid.dt
    w = np.zeros(n + 1)
    if t_end is None or t_end >= tgrid.T:
        w[:] = dt
        w[0] = w[-1] = 0.5 * dt
        return w
    if t_end <= 0:
        return w
    k = int(np.floor(t_end / dt + 1e-12))
    if k > 0:
        w[:k + 1] += dt
        w[0] -= 0.5 * dt
        w[k] -= 0.5 * dt
    rem = t_end - k * dt
    if rem > 1e-14 * dt and k < n:
        a = rem / dt
        # integral over [t_k, t_k + rem] of F_k (1 - s/dt) + F_{k+1} s/dt
        w[k] += rem * (1 - 0.5 * a)
        w[k + 1] += rem * 0.5 * a
    return w


# ---------------------------------------------------------------------------
# integration

def integrate_volume(field, metric, mesh) -> float | np.ndarray:
    field = np.asarray(field, dtype=float)
    if field.shape[-2:] != (mesh.n_r, mesh.n_theta):
        raise ShapeError(f"field shape {field.shape} does not match mesh ({mesh.n_r}, {mesh.n_theta})")
    return np.sum(field * volume_weights(metric, mesh), axis=(-2, -1))


def integrate_surface(trace, metric, mesh, which: str, measure: str = "volume_density"):
    w = surface_weights(metric, mesh, which, measure)
    trace = np.asarray(trace, dtype=float)
    if trace.shape[-1] != mesh.n_theta:
        raise ShapeError(f"trace length {trace.shape[-1]} != n_theta {mesh.n_theta}")
    return np.sum(trace * w, axis=-1)


def integrate_spacetime(values, metric, mesh, tgrid) -> float:
    """Integral over Q = D x (0, T) against dV_g dt."""
    return float(np.sum(time_weights(tgrid) * integrate_volume(values, metric, mesh)))


def integrate_boundary_time(trace, metric, mesh, tgrid, which, measure="volume_density", t_end=None) -> float:
    per_t = integrate_surface(trace, metric, mesh, which, measure)
    return float(np.sum(time_weights(tgrid, t_end) * per_t))


# ---------------------------------------------------------------------------
# norms

VOLUME_KINDS = ("L2_volume", "H1_volume", "H2_volume")
BOUNDARY_KINDS = ("L2_boundary_time", "H1_boundary_time", "L2_time_H1_gamma")


def tangential_gradient_sq(trace, metric, mesh, which) -> np.ndarray:
    """|grad_tau w|_g^2 from the trace alone: (d_theta w)^2 / g(e_theta, e_theta)."""
    wt = geometry.d_theta(trace, mesh.h_theta)
    return wt ** 2 / geometry.tangential_metric_factor(metric, mesh, which)


def sobolev_norms(obj, metric, mesh, kind: str, tgrid: TimeGrid | None = None,
                  which: str = "Gamma", tau: float | None = None, measure: str = "volume_density"):
    """Discrete norms of a volume slice or a boundary-time trace.

    Volume kinds take a field of shape (n_r, n_theta) (leading axes allowed,
    one norm per leading index).  Boundary kinds take a trace of shape
    (n_t + 1, n_theta) on ``which``, or a :class:`SpaceTimeField` whose trace
    is extracted.  ``L2_time_H1_gamma`` integrates over (0, tau) on Gamma.
    """
    if kind in VOLUME_KINDS:
        if isinstance(obj, SpaceTimeField):
            raise ShapeError(f"{kind} needs a single time slice, got a space-time field")
        w = np.asarray(obj, dtype=float)
        if w.shape[-2:] != (mesh.n_r, mesh.n_theta):
            raise ShapeError(f"{kind} needs shape (..., {mesh.n_r}, {mesh.n_theta}), got {w.shape}")
        dens = w ** 2
        if kind != "L2_volume":
            gh = geometry.gradient_and_hessian(metric, w, mesh)
            dens = dens + gh.grad_sq
            if kind == "H2_volume":
                dens = dens + gh.hess_sq
        return np.sqrt(integrate_volume(dens, metric, mesh))

    if kind not in BOUNDARY_KINDS:
        raise DomainError(f"unknown norm kind {kind!r}")
    if tgrid is None:
        raise ParameterError(f"{kind} needs a time grid")
    if kind == "L2_time_H1_gamma":
        which = "Gamma"
        if tau is None:
            raise ParameterError("L2_time_H1_gamma needs tau")
    if isinstance(obj, SpaceTimeField):
        tr = obj.trace(which)
    else:
        tr = np.asarray(obj, dtype=float)
    if tr.shape != (tgrid.n_t + 1, mesh.n_theta):
        raise ShapeError(f"{kind} needs a trace of shape ({tgrid.n_t + 1}, {mesh.n_theta}), got {tr.shape}")
    dens = tr ** 2
    if kind == "H1_boundary_time":
        dens = dens + geometry.d_axis(tr, tgrid.dt, 0) ** 2
    if kind in ("H1_boundary_time", "L2_time_H1_gamma"):
        dens = dens + tangential_gradient_sq(tr, metric, mesh, which)
    t_end = tau if kind == "L2_time_H1_gamma" else None
    return float(np.sqrt(integrate_boundary_time(dens, metric, mesh, tgrid, which, measure, t_end)))


def boundary_h1_norm(trace, metric, mesh, which, measure="volume_density") -> float:
    """||a||_{H^1} of a time-independent trace on one circle."""
    dens = trace ** 2 + tangential_gradient_sq(trace, metric, mesh, which)
    return float(np.sqrt(integrate_surface(dens, metric, mesh, which, measure)))


def boundary_l2_norm(trace, metric, mesh, which, measure="volume_density") -> float:
    return float(np.sqrt(integrate_surface(np.asarray(trace) ** 2, metric, mesh, which, measure)))
