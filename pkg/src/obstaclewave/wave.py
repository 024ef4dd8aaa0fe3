"""Leapfrog solver for (d_t^2 - Delta_g) u = 0 outside the obstacle.

The unbounded exterior is replaced by an annulus r0 < |x| < R_trunc whose
outer radius is large enough that nothing reflected at R_trunc reaches the
measurement circle |x| = R before the final time.  The returned field is the
restriction of the discrete solution to D = {r0 < |x| < R}.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from . import domain, geometry
from .domain import AnnularMesh, SpaceTimeField, TimeGrid
from .errors import CFLError, DomainError, PreconditionError, TruncationError

SAFETY = 0.7

__all__ = ["SpaceTimeField", "SolveStats", "WaveSolver", "solve_forward", "energy",
           "pde_residual", "max_wave_speed", "required_truncation"]


def max_wave_speed(metric, mesh) -> float:
    """sup over nodes of sqrt(largest eigenvalue of g^{-1})."""
    ginv = geometry.node_geometry(metric, mesh).g_inv
    return float(np.sqrt(np.max(np.linalg.eigvalsh(ginv)[..., -1])))


def required_truncation(metric, mesh, T, margin=None) -> tuple[float, float]:
    """Smallest certified R_trunc = R + c_max T / 2 + margin, and c_max.

    The default margin, 0.1 c_max T + 5 h_r, also absorbs the faster-than-c
    numerical precursor of the explicit scheme.
    """
    c = max_wave_speed(metric, mesh)
    for _ in range(20):
        m = 0.1 * c * T + 5 * mesh.h_r if margin is None else margin
        R_req = mesh.R + 0.5 * c * T + m
        c_new = max(c, max_wave_speed(metric, mesh.extended(R_req)))
        if c_new <= c:
            break
        c = c_new
    return R_req, c


@dataclass
class SolveStats:
    cfl_ratio: float
    max_abs: float
    residual_norm: float
    truncation_certificate: bool
    R_trunc: float
    c_max: float
    dt_max: float

    def to_dict(self) -> dict:
        return asdict(self)


def _as_trace(f, mesh, tgrid):
    shape = (tgrid.n_t + 1, mesh.n_theta)
    if f is None:
        return np.zeros(shape)
    if hasattr(f, "boundary_trace"):
        return f.boundary_trace(mesh, tgrid)
    if callable(f):
        return np.asarray(f(mesh.theta[None, :], tgrid.times[:, None]), dtype=float) * np.ones(shape)
    arr = np.asarray(f, dtype=float)
    if arr.shape != shape:
        raise DomainError(f"boundary trace shape {arr.shape} != {shape}")
    return arr


class WaveSolver:
    """Discrete forward map for one (metric, mesh, time grid) triple.

    ``L`` holds Delta_g on the truncated mesh with empty rows on the
    two Dirichlet circles, so one leapfrog step is
    ``U+ = 2U - U- + dt^2 L U`` followed by overwriting the boundary rows.
    """

    def __init__(self, metric, mesh: AnnularMesh, tgrid: TimeGrid, truncation=None, margin=None,
                 safety: float = SAFETY):
        self.metric, self.mesh, self.tgrid = metric, mesh, tgrid
        R_req, c_trunc = required_truncation(metric, mesh, tgrid.T, margin)
        if truncation is not None and truncation < R_req:
            raise TruncationError(R_req, truncation)
        self.R_required = R_req
        self.ext = mesh.extended(R_req if truncation is None else truncation)
        self.c_max = max(c_trunc, max_wave_speed(metric, self.ext))
        self.L = geometry.laplacian_matrix(metric, self.ext)
        # Gershgorin bound on the spectrum of L guards the leapfrog limit dt^2 rho(L) < 4
        rowsum = np.asarray(abs(self.L).sum(axis=1)).ravel()
        dt_spec = 0.98 * 2.0 / np.sqrt(rowsum.max())
        self.dt_max = min(safety * mesh.h_min / self.c_max, dt_spec)
        self.cfl_ratio = tgrid.dt / self.dt_max
        if tgrid.dt > self.dt_max * (1 + 1e-12):
            raise CFLError(f"dt = {tgrid.dt:.6g} exceeds dt_max = {self.dt_max:.6g} "
                           f"(safety {safety}, h_min {mesh.h_min:.4g}, c_max {self.c_max:.4g})")
        self.n_ext = self.ext.n_r
        self.N = self.n_ext * mesh.n_theta

    @cached_property
    def certificate(self) -> bool:
        # a signal leaving Gamma0 must not return from R_trunc before T
        return bool(2 * (self.ext.R - self.mesh.R) / self.c_max > self.tgrid.T)

    def run(self, trace, outer=None, u0=None, u1=None, keep="D"):
        """March the leapfrog scheme.  Returns values (n_t+1, n_keep, n_theta)."""
        nt, n_th = self.tgrid.n_t, self.mesh.n_theta
        dt2 = self.tgrid.dt ** 2
        n_keep = self.mesh.n_r if keep == "D" else self.n_ext
        out = np.empty((nt + 1, n_keep, n_th))
        outer_tr = np.zeros((nt + 1, n_th)) if outer is None else outer

        prev = np.zeros((self.n_ext, n_th)) if u0 is None else np.array(u0, dtype=float)
        prev[0], prev[-1] = trace[0], outer_tr[0]
        out[0] = prev[:n_keep]
        Lp = (self.L @ prev.ravel()).reshape(prev.shape)
        vel = 0.0 if u1 is None else u1
        cur = prev + self.tgrid.dt * vel + 0.5 * dt2 * Lp
        cur[0], cur[-1] = trace[1], outer_tr[1]
        out[1] = cur[:n_keep]
        for n in range(1, nt):
            nxt = 2 * cur - prev + dt2 * (self.L @ cur.ravel()).reshape(cur.shape)
            nxt[0], nxt[-1] = trace[n + 1], outer_tr[n + 1]
            prev, cur = cur, nxt
            out[n + 1] = cur[:n_keep]
        return out


def solve_forward(f, metric, mesh, tgrid, truncation=None, outer=None, initial=None,
                  margin=None, safety: float = SAFETY, check_compat: bool = True):
    """Solve the exterior IBVP with Dirichlet data ``f`` on Gamma.

    ``f`` may be an object with ``boundary_trace(mesh, tgrid)``, a callable
    ``f(theta, t)`` or an array of shape (n_t + 1, n_theta).  ``outer`` is an
    optional callable ``outer(x1, x2, t)`` imposed on the truncation circle
    (zero by default); ``initial`` an optional pair of callables ``(u0(x), u1(x))``.
    """
    solver = WaveSolver(metric, mesh, tgrid, truncation, margin, safety)
    trace = _as_trace(f, mesh, tgrid)
    if check_compat and initial is None:
        scale = max(1.0, float(np.max(np.abs(trace))))
        if np.max(np.abs(trace[0])) > 1e-10 * scale:
            raise PreconditionError("zero initial data needs f(., 0) = 0 on Gamma")
    outer_tr = None
    if outer is not None:
        xy = solver.ext.points[-1]
        outer_tr = np.asarray(outer(xy[None, :, 0], xy[None, :, 1], tgrid.times[:, None]), dtype=float)
        outer_tr = outer_tr * np.ones((tgrid.n_t + 1, mesh.n_theta))
    u0 = u1 = None
    if initial is not None:
        pts = solver.ext.points
        u0 = initial[0](pts)
        u1 = initial[1](pts)
    values = solver.run(trace, outer_tr, u0, u1)
    if not np.all(np.isfinite(values)):
        raise CFLError("non-finite values in the solution; scheme is unstable for these parameters")
    u = SpaceTimeField(mesh, tgrid, values)
    stats = SolveStats(
        cfl_ratio=float(solver.cfl_ratio), max_abs=float(np.max(np.abs(values))),
        residual_norm=pde_residual(u, metric, mesh, tgrid),
        truncation_certificate=solver.certificate, R_trunc=float(solver.ext.R),
        c_max=solver.c_max, dt_max=float(solver.dt_max))
    return u, stats


def time_derivative(values, tgrid):
    return geometry.d_axis(values, tgrid.dt, 0)


def energy(u: SpaceTimeField, metric, mesh, t_index: int) -> float:
    """E(u)(t) = int_D |u_t|^2 + |grad_g u|_g^2 + |u|^2 dV_g at one time index."""
    n = u.tgrid.n_t
    if not 0 <= t_index <= n:
        raise DomainError(f"time index {t_index} outside [0, {n}]")
    vals, dt = u.values, u.tgrid.dt
    k = t_index
    if k == 0:
        ut = (-3 * vals[0] + 4 * vals[1] - vals[2]) / (2 * dt)
    elif k == n:
        ut = (3 * vals[n] - 4 * vals[n - 1] + vals[n - 2]) / (2 * dt)
    else:
        ut = (vals[k + 1] - vals[k - 1]) / (2 * dt)
    gsq = geometry.gradient_squared(metric, vals[k], mesh)
    return float(domain.integrate_volume(ut ** 2 + gsq + vals[k] ** 2, metric, mesh))


def energy_series(u: SpaceTimeField, metric, mesh, with_mass: bool = True) -> np.ndarray:
    vals = u.values
    ut = time_derivative(vals, u.tgrid)
    dens = ut ** 2 + geometry.gradient_squared(metric, vals, mesh)
    if with_mass:
        dens = dens + vals ** 2
    return domain.integrate_volume(dens, metric, mesh)


def pde_residual(u: SpaceTimeField, metric, mesh, tgrid) -> float:
    """max |D_tt u - Delta_g u| over interior nodes and interior time steps."""
    v = u.values
    if v.shape[0] < 3:
        return 0.0
    utt = (v[2:] - 2 * v[1:-1] + v[:-2]) / tgrid.dt ** 2
    L = geometry.laplacian_matrix(metric, mesh)
    lap = (L @ v[1:-1].reshape(v.shape[0] - 2, -1).T).T.reshape(utt.shape)
    return float(np.max(np.abs(utt - lap)[:, 1:-1, :]))
