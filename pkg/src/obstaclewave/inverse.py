"""Recovery of the boundary profile a from outer-boundary data with b known.

The discrete forward map a -> (u|Sigma0, d_nu u|Sigma0) is linear; the
misfit gradient is the exact transpose of the leapfrog recursion, obtained by
marching the adjoint recursion backwards in time.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from . import domain, geometry
from .errors import LineSearchError, ParameterError, ShapeError
from .wave import WaveSolver

log = logging.getLogger(__name__)


@dataclass
class OuterData:
    u_trace: np.ndarray    # (n_t + 1, n_theta) on Gamma0
    du_trace: np.ndarray   # d_nu u on Gamma0, same shape
    noise_level: float = 0.0

    def __post_init__(self):
        if self.u_trace.shape != self.du_trace.shape:
            raise ShapeError(f"trace shapes differ: {self.u_trace.shape} vs {self.du_trace.shape}")

    def to_dict(self) -> dict:
        return {"shape": list(self.u_trace.shape), "noise_level": self.noise_level}


@dataclass
class ReconstructionResult:
    a_hat: np.ndarray
    objective_history: list
    rel_error: float | None
    reg_lambda: float
    iterations: int
    grad_norm_history: list = field(default_factory=list)
    stop_reason: str = ""
    class_check: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a_hat"] = self.a_hat.tolist()
        return d


def _periodic_dtheta(n: int, h: float) -> sp.csr_matrix:
    e = np.ones(n)
    D = sp.diags([e[:-1], -e[:-1]], [1, -1], shape=(n, n), format="lil")
    D[0, n - 1] = -1
    D[n - 1, 0] = 1
    return (D.tocsr() / (2 * h)).tocsr()


def outer_measurement_operators(metric, mesh, n_rows: int):
    """Sparse maps from a field on ``n_rows`` radial rows to u and d_nu u on Gamma0.

    The radial derivative is the one-sided three-point formula used by
    ``geometry.boundary_decompose``, so both routes agree exactly.
    """
    nt = mesh.n_theta
    R = mesh.n_r - 1
    N = n_rows * nt
    idx = lambda row: row * nt + np.arange(nt)  # noqa: E731
    Mtr = sp.csr_matrix((np.ones(nt), (np.arange(nt), idx(R))), shape=(nt, N))
    nu_g, _ = geometry.metric_normal(metric, mesh, "Gamma0")
    c, s = np.cos(mesh.theta), np.sin(mesh.theta)
    rb = mesh.r[R]
    al = nu_g[:, 0] * c + nu_g[:, 1] * s          # coefficient of u_r
    be = (-nu_g[:, 0] * s + nu_g[:, 1] * c) / rb   # coefficient of u_theta
    h = mesh.h_r
    Ur = sp.hstack([sp.csr_matrix((nt, (R - 2) * nt)),
                    sp.hstack([sp.identity(nt), -4 * sp.identity(nt), 3 * sp.identity(nt)]) / (2 * h),
                    sp.csr_matrix((nt, (n_rows - R - 1) * nt))]).tocsr()
    Ut = _periodic_dtheta(nt, mesh.h_theta) @ Mtr
    Mdn = (sp.diags(al) @ Ur + sp.diags(be) @ Ut).tocsr()
    return Mtr, Mdn


def h1_gamma_matrix(metric, mesh) -> sp.csr_matrix:
    """Gram matrix of the H^1(Gamma) norm for node values of a."""
    w = domain.surface_weights(metric, mesh, "Gamma")
    fac = geometry.tangential_metric_factor(metric, mesh, "Gamma")
    D = _periodic_dtheta(mesh.n_theta, mesh.h_theta)
    return (sp.diags(w) + D.T @ sp.diags(w / fac) @ D).tocsr()


class InverseProblem:
    """Misfit J(a) for fixed b on one discretization, with its adjoint gradient."""

    def __init__(self, metric, mesh, tgrid, b, data: OuterData, reg_lambda: float = 0.0, truncation=None):
        if reg_lambda < 0:
            raise ParameterError(f"reg_lambda must be >= 0, got {reg_lambda}")
        self.metric, self.mesh, self.tgrid = metric, mesh, tgrid
        self.solver = WaveSolver(metric, mesh, tgrid, truncation)
        want = (tgrid.n_t + 1, mesh.n_theta)
        if data.u_trace.shape != want:
            raise ShapeError(f"data shape {data.u_trace.shape} != {want}")
        self.data, self.reg_lambda = data, float(reg_lambda)
        self.b = np.asarray(b(tgrid.times) if callable(b) else b, dtype=float)
        n_ext, nt = self.solver.n_ext, mesh.n_theta
        self.Mtr, self.Mdn = outer_measurement_operators(metric, mesh, n_ext)
        self.ws = domain.surface_weights(metric, mesh, "Gamma0")
        self.wt = domain.time_weights(tgrid)
        self.H = h1_gamma_matrix(metric, mesh)
        self.L = self.solver.L
        mask = np.ones((n_ext, nt))
        mask[0] = mask[-1] = 0
        self.interior = mask.ravel()
        self.shape = (n_ext, nt)

    # forward ---------------------------------------------------------------
    def states(self, a):
        """Full extended-grid states, shape (n_t + 1, N)."""
        trace = np.outer(self.b, a)
        vals = self.solver.run(trace, keep="all")
        return vals.reshape(vals.shape[0], -1)

    def predict(self, a):
        U = self.states(a)
        return (self.Mtr @ U.T).T, (self.Mdn @ U.T).T

    def objective(self, a) -> float:
        return self.objective_and_gradient(a)[0]

    def objective_and_gradient(self, a):
        a = np.asarray(a, dtype=float)
        U = self.states(a)
        ru = (self.Mtr @ U.T).T - self.data.u_trace
        rd = (self.Mdn @ U.T).T - self.data.du_trace
        W = self.wt[:, None] * self.ws[None, :]
        Ha = self.H @ a
        J = 0.5 * np.sum(W * (ru ** 2 + rd ** 2)) + 0.5 * self.reg_lambda * a @ Ha
        # dJ/dU^n
        src = (self.Mtr.T @ (W * ru).T + self.Mdn.T @ (W * rd).T).T
        lam = self._adjoint(src)
        # U^n = P(...) + b_n E a with E injecting a into radial row 0
        grad = self.b @ lam[:, :self.mesh.n_theta] + self.reg_lambda * Ha
        return float(J), grad

    def _adjoint(self, src):
        """Reverse sweep of the leapfrog recursion.

        U^1 = P (I + dt^2/2 L) U^0 + ..., U^{n+1} = P (2I + dt^2 L) U^n - P U^{n-1} + ...
        """
        n = src.shape[0] - 1
        dt2 = self.tgrid.dt ** 2
        P = self.interior
        LT = self.L.T.tocsr()
        lam = np.zeros_like(src)
        lam[n] = src[n]
        for k in range(n - 1, -1, -1):
            p1 = P * lam[k + 1]
            if k >= 1:
                v = 2 * p1 + dt2 * (LT @ p1)
            else:
                v = p1 + 0.5 * dt2 * (LT @ p1)
            if k + 2 <= n:
                v = v - P * lam[k + 2]
            lam[k] = src[k] + v
        return lam


# ---------------------------------------------------------------------------
# synthetic data

def synthesize_data(a_true, b, metric, mesh, tgrid, refine: int = 2, noise_level: float = 0.0,
                    rng=None) -> OuterData:
    """Outer data from a solve on a ``refine``-times finer grid, subsampled to (mesh, tgrid).

    Noise is Gaussian, per node, scaled by ``noise_level`` times the sup-norm
    of each channel.
    """
    from .domain import TimeGrid

    fine = mesh.refined(refine)
    ftg = TimeGrid(tgrid.T, refine * tgrid.n_t)
    a_fine = a_true(fine.theta) if callable(a_true) else np.repeat(np.asarray(a_true), refine)
    b_fine = b(ftg.times) if callable(b) else None
    if b_fine is None:
        raise ParameterError("synthetic data needs b as a callable")
    solver = WaveSolver(metric, fine, ftg)
    vals = solver.run(np.outer(b_fine, a_fine))
    tr = vals[:, -1, :]
    dn = geometry.boundary_decompose(metric, vals, fine, "Gamma0").dnu
    u_tr = tr[::refine, ::refine].copy()
    du_tr = dn[::refine, ::refine].copy()
    if noise_level > 0:
        if rng is None:
            raise ParameterError("noisy data needs an explicit rng")
        u_tr += noise_level * np.max(np.abs(u_tr)) * rng.standard_normal(u_tr.shape)
        du_tr += noise_level * np.max(np.abs(du_tr)) * rng.standard_normal(du_tr.shape)
    return OuterData(u_tr, du_tr, noise_level)


def load_outer_data(path) -> OuterData:
    with np.load(path) as z:
        return OuterData(z["u_trace"], z["du_trace"], float(z["noise_level"]) if "noise_level" in z else 0.0)


# ---------------------------------------------------------------------------
# optimization

def rel_l2_error(a_hat, a_true, metric, mesh) -> float:
    num = domain.boundary_l2_norm(a_hat - a_true, metric, mesh, "Gamma")
    return num / domain.boundary_l2_norm(a_true, metric, mesh, "Gamma")


def reconstruct(problem: InverseProblem, max_iter: int = 200, a0=None, a_true=None,
                grad_rtol: float = 1e-8) -> ReconstructionResult:
    """L-BFGS (scipy, with its Wolfe line search) from a0 = 0 by default."""
    mesh = problem.mesh
    a0 = np.zeros(mesh.n_theta) if a0 is None else np.asarray(a0, dtype=float)
    J0, g0 = problem.objective_and_gradient(a0)
    hist, ghist = [J0], [float(np.linalg.norm(g0))]
    stop = {"reason": "max_iter"}
    if ghist[0] == 0:
        stop["reason"] = "zero gradient at start"
        return _finish(problem, a0, hist, ghist, 0, stop["reason"], a_true)
    cache = {}

    def fun(a):
        J, g = problem.objective_and_gradient(a)
        cache["last"] = (a.copy(), J, g)
        return J, g

    def callback(intermediate_result):
        J = float(intermediate_result.fun)
        a = intermediate_result.x
        last = cache.get("last")
        g = last[2] if last is not None and np.array_equal(last[0], a) else problem.objective_and_gradient(a)[1]
        if J > hist[-1] * (1 + 1e-12) + 1e-300:
            raise LineSearchError(f"objective increased from {hist[-1]:.6e} to {J:.6e}")
        hist.append(J)
        ghist.append(float(np.linalg.norm(g)))
        if ghist[-1] <= grad_rtol * ghist[0]:
            stop["reason"] = "gradient tolerance"
            raise StopIteration

    res = minimize(fun, a0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 0.0, "maxcor": 20})
    if stop["reason"] == "max_iter" and res.nit < max_iter:
        stop["reason"] = f"optimizer: {res.message}"
    return _finish(problem, res.x, hist, ghist, int(res.nit), stop["reason"], a_true)


def _finish(problem, a_hat, hist, ghist, nit, reason, a_true):
    mesh, metric = problem.mesh, problem.metric
    err = None
    if a_true is not None:
        at = a_true(mesh.theta) if callable(a_true) else np.asarray(a_true)
        err = rel_l2_error(a_hat, at, metric, mesh)
    a_min = float(np.min(np.abs(a_hat)))
    dtheta = geometry.d_theta(a_hat, mesh.h_theta) / np.sqrt(geometry.tangential_metric_factor(metric, mesh, "Gamma"))
    check = {"alpha_hat": a_min, "beta_hat": float(np.max(np.abs(dtheta))),
             "sign_constant": bool(np.min(a_hat) * np.max(a_hat) > 0)}
    return ReconstructionResult(np.asarray(a_hat), [float(h) for h in hist], err, problem.reg_lambda, nit,
                                ghist, reason, check)


@dataclass
class NoiseSweep:
    levels: list
    errors: list
    slope: float
    rank_correlation: float

    def to_dict(self) -> dict:
        return asdict(self)


def noise_sweep(a_true, b, metric, mesh, tgrid, levels, reg_lambda, max_iter, rng, refine: int = 2) -> NoiseSweep:
    from scipy.stats import spearmanr

    errors = []
    for lev in levels:
        data = synthesize_data(a_true, b, metric, mesh, tgrid, refine, float(lev), rng)
        prob = InverseProblem(metric, mesh, tgrid, b, data, reg_lambda)
        errors.append(reconstruct(prob, max_iter, a_true=a_true).rel_error)
    slope = float(np.polyfit(np.log(levels), np.log(errors), 1)[0])
    rho = float(spearmanr(levels, errors).statistic)
    return NoiseSweep([float(x) for x in levels], [float(e) for e in errors], slope, rho)
