"""Admissible sources f = a(x) b(t), the boundary data norms, and the empirical
Hölder-stability harness."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np

from . import domain, geometry
from .domain import SpaceTimeField
from .errors import ClassViolationError, ParameterError, RegressionError
from .wave import WaveSolver

log = logging.getLogger(__name__)

THETA_GRID = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))
UNIFORM_SPREAD = 10.0


# ---------------------------------------------------------------------------
# profiles

@dataclass(frozen=True)
class BoundaryProfile:
    """a(theta) = c0 + sum_k cos[k] cos((k+1) theta) + sin[k] sin((k+1) theta)."""

    c0: float = 1.0
    cos: tuple = ()
    sin: tuple = ()

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full(theta.shape, float(self.c0))
        for k, c in enumerate(self.cos, start=1):
            out = out + c * np.cos(k * theta)
        for k, c in enumerate(self.sin, start=1):
            out = out + c * np.sin(k * theta)
        return out

    def d_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(theta.shape)
        for k, c in enumerate(self.cos, start=1):
            out = out - k * c * np.sin(k * theta)
        for k, c in enumerate(self.sin, start=1):
            out = out + k * c * np.cos(k * theta)
        return out

    def scaled(self, c: float) -> "BoundaryProfile":
        return BoundaryProfile(c * self.c0, tuple(c * x for x in self.cos), tuple(c * x for x in self.sin))

    def describe(self) -> str:
        terms = [f"{self.c0:g}"]
        terms += [f"{c:+g}cos{k}" for k, c in enumerate(self.cos, 1) if c]
        terms += [f"{c:+g}sin{k}" for k, c in enumerate(self.sin, 1) if c]
        return "".join(terms)


def _smoothstep5(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10 - 15 * x + 6 * x ** 2)


def _smoothstep5_d(x):
    inside = (x > 0) & (x < 1)
    return np.where(inside, 30 * x ** 2 * (1 - x) ** 2, 0.0)


@dataclass(frozen=True)
class TimeProfile:
    """Time factor b(t) with its derivative; ``kind`` names the generator."""

    kind: str
    T: float
    onset: float = 0.0
    width: float = 1.0
    amplitude: float = 1.0

    def _eval(self, t):
        t = np.asarray(t, dtype=float)
        T = self.T
        if self.kind == "t2":
            return t ** 2, 2 * t
        if self.kind == "t3":
            return t ** 3, 3 * t ** 2
        if self.kind == "sin_ramp":
            w = np.pi / (2 * T)
            return np.sin(w * t) ** 2, 2 * w * np.sin(w * t) * np.cos(w * t)
        if self.kind == "t2_smoothstep":
            x = t / T
            S = 3 * x ** 2 - 2 * x ** 3
            dS = (6 * x - 6 * x ** 2) / T
            return t ** 2 * S, 2 * t * S + t ** 2 * dS
        if self.kind == "delayed":
            x = (t - self.onset) / self.width
            return _smoothstep5(x), _smoothstep5_d(x) / self.width
        raise ParameterError(f"unknown time profile {self.kind!r}; choose from {sorted(TIME_PROFILES)}")

    def __call__(self, t):
        return self.amplitude * self._eval(t)[0]

    def derivative(self, t):
        return self.amplitude * self._eval(t)[1]

    def scaled(self, c: float) -> "TimeProfile":
        return TimeProfile(self.kind, self.T, self.onset, self.width, c * self.amplitude)


TIME_PROFILES = ("t2", "t3", "sin_ramp", "t2_smoothstep", "delayed")


@dataclass(frozen=True)
class SumProfile:
    """Linear combination of time profiles."""

    parts: tuple   # ((coef, TimeProfile), ...)
    kind: str = "sum"

    @property
    def onset(self) -> float:
        return min(p.onset for _, p in self.parts)

    def __call__(self, t):
        return sum(c * p(t) for c, p in self.parts)

    def derivative(self, t):
        return sum(c * p.derivative(t) for c, p in self.parts)

    def scaled(self, c: float) -> "SumProfile":
        return SumProfile(tuple((c * k, p) for k, p in self.parts))


# ---------------------------------------------------------------------------
# admissible source

@dataclass(frozen=True, eq=False)
class AdmissibleSource:
    a: BoundaryProfile
    b: TimeProfile
    a_nodes: np.ndarray
    b_values: np.ndarray
    b_derivative: np.ndarray
    alpha: float
    beta: float
    name: str = "f"

    @property
    def ratio(self) -> float:
        return self.beta / self.alpha

    def boundary_trace(self, mesh, tgrid) -> np.ndarray:
        return np.outer(self.b(tgrid.times), self.a(mesh.theta))

    def scaled(self, c: float, name: str | None = None) -> "AdmissibleSource":
        return AdmissibleSource(self.a.scaled(c), self.b, c * self.a_nodes, self.b_values, self.b_derivative,
                                abs(c) * self.alpha, abs(c) * self.beta, name or f"{c:g}*{self.name}")

    def describe(self) -> dict:
        return {"name": self.name, "a": self.a.describe(), "b": self.b.kind, "onset": self.b.onset,
                "alpha": self.alpha, "beta": self.beta}


def tangential_a(a: BoundaryProfile, metric, mesh) -> np.ndarray:
    """|grad_tau a|_g on Gamma nodes from the analytic angular derivative."""
    fac = geometry.tangential_metric_factor(metric, mesh, "Gamma")
    return np.abs(a.d_theta(mesh.theta)) / np.sqrt(fac)


def make_admissible_source(a_spec, b_spec, mesh, tgrid, metric, name: str = "f") -> AdmissibleSource:
    """Certify f = a b against the class: a bounded away from 0, b(0) = b'(0) = 0."""
    a = a_spec if isinstance(a_spec, BoundaryProfile) else BoundaryProfile(**a_spec)
    b = b_spec if isinstance(b_spec, TimeProfile) else TimeProfile(T=tgrid.T, **b_spec)
    a_nodes = a(mesh.theta)
    if np.min(a_nodes) * np.max(a_nodes) <= 0 or np.min(np.abs(a_nodes)) == 0:
        raise ClassViolationError(f"a = {a.describe()} vanishes or changes sign on Gamma")
    b0, db0 = float(b(0.0)), float(b.derivative(0.0))
    if abs(b0) > 1e-12 or abs(db0) > 1e-12:
        raise ClassViolationError(f"time profile needs b(0) = b'(0) = 0, got {b0:.3g}, {db0:.3g}")
    return AdmissibleSource(a, b, a_nodes, b(tgrid.times), b.derivative(tgrid.times),
                            float(np.min(np.abs(a_nodes))), float(np.max(tangential_a(a, metric, mesh))), name)


def recheck_class(f: AdmissibleSource, metric, mesh) -> bool:
    a_nodes = f.a(mesh.theta)
    return bool(np.min(np.abs(a_nodes)) >= f.alpha * (1 - 1e-12)
                and np.max(tangential_a(f.a, metric, mesh)) <= f.beta * (1 + 1e-12))


def random_profile(rng, modes: int = 2, c0_range=(2.0, 3.0), margin: float = 0.5) -> BoundaryProfile:
    """Trigonometric profile with min a >= margin guaranteed by the coefficient budget."""
    c0 = rng.uniform(*c0_range)
    coef = rng.normal(size=2 * modes) / np.repeat(np.arange(1, modes + 1), 2)
    budget = c0 - margin
    coef *= rng.uniform(0.3, 1.0) * budget / np.sum(np.abs(coef))
    return BoundaryProfile(float(c0), tuple(map(float, coef[0::2])), tuple(map(float, coef[1::2])))


# ---------------------------------------------------------------------------
# norms

@dataclass
class DataNorms:
    D_full: float     # a-priori term on Sigma
    D_outer: float    # measurement term on Sigma0
    f_norm: float
    a_norm: float
    b_norm: float

    def to_dict(self) -> dict:
        return asdict(self)


def _d_norm(u: SpaceTimeField, metric, which) -> float:
    mesh, tgrid = u.mesh, u.tgrid
    h1 = domain.sobolev_norms(u, metric, mesh, "H1_boundary_time", tgrid, which)
    dnu = geometry.boundary_decompose(metric, u.values, mesh, which).dnu
    l2 = np.sqrt(domain.integrate_boundary_time(dnu ** 2, metric, mesh, tgrid, which))
    return float(h1 + l2)


def compute_data_norms(u: SpaceTimeField, f: AdmissibleSource, params, metric) -> DataNorms:
    tau = getattr(params, "tau", params)
    if tau is None:
        raise ParameterError("data norms need tau")
    mesh, tgrid = u.mesh, u.tgrid
    trace = f.boundary_trace(mesh, tgrid)
    f_norm = domain.sobolev_norms(trace, metric, mesh, "L2_time_H1_gamma", tgrid, tau=tau)
    a_norm = domain.boundary_h1_norm(f.a(mesh.theta), metric, mesh, "Gamma")
    b_norm = float(np.sqrt(np.sum(domain.time_weights(tgrid, tau) * f.b(tgrid.times) ** 2)))
    return DataNorms(_d_norm(u, metric, "Gamma"), _d_norm(u, metric, "Gamma0"), float(f_norm), a_norm, b_norm)


# ---------------------------------------------------------------------------
# theorem harness

@dataclass
class StabilityReport:
    members: list              # source descriptions
    norms: list                # DataNorms dicts, same order
    theta_grid: list
    fitted_C: list             # max over family, per theta
    C_min: list
    spread: list               # max / min, per theta
    best_theta: float
    uniform_thetas: list       # thetas with spread <= UNIFORM_SPREAD
    implied_c: float           # mu (1 - theta) / theta at best_theta
    s_balance: list            # per member, log(D/D0)/(c + mu); None when undefined
    corollary_ok: bool
    corollary_ratios: list
    tangential_bound_ok: bool
    tangential_excess: float   # max over members and nodes of |grad_tau u| - (beta/alpha)|f|
    lower_bound_ok: bool
    class_ok: bool
    anomalies: list
    success: bool
    d_full_label: str = "a-priori term (Sigma)"

    def to_dict(self) -> dict:
        return asdict(self)


def solve_family(family, metric, mesh, tgrid, truncation=None):
    """Forward solves sharing one solver instance."""
    solver = WaveSolver(metric, mesh, tgrid, truncation)
    out = []
    for f in family:
        vals = solver.run(f.boundary_trace(mesh, tgrid))
        out.append(SpaceTimeField(mesh, tgrid, vals))
    return out, solver


def _sigma_lower_bound(f, params, metric, mesh, tgrid, phi, s_values) -> bool:
    """int_Sigma e^{2 s varphi} |f|^2 >= e^{-2 gamma tau s} ||f||^2_{L2(Gamma x (0, tau))}."""
    tr = f.boundary_trace(mesh, tgrid)
    phi_g = phi(mesh.points[0])
    full = domain.integrate_boundary_time(tr ** 2, metric, mesh, tgrid, "Gamma", t_end=params.tau)
    for s in s_values:
        w = np.exp(2 * s * (phi_g[None, :] - params.gamma * tgrid.times[:, None]))
        lhs = domain.integrate_boundary_time(w * tr ** 2, metric, mesh, tgrid, "Gamma")
        if lhs < np.exp(-2 * params.gamma * params.tau * s) * full * (1 - 1e-12):
            return False
    return True


def verify_theorem(family, params, metric, mesh, tgrid, phi=None, theta_grid=THETA_GRID,
                   solutions=None, s_values=(0.1, 1.0, 10.0), min_members: int = 5) -> StabilityReport:
    if len(family) == 0:
        raise ParameterError("empty source family")
    if len(family) < min_members:
        log.warning("family of %d members; the harness expects at least %d", len(family), min_members)
    if solutions is None:
        solutions, _ = solve_family(family, metric, mesh, tgrid)
    norms = [compute_data_norms(u, f, params, metric) for u, f in zip(solutions, family)]
    anomalies = []
    for f, n in zip(family, norms):
        if n.D_outer <= 1e-14 * max(n.D_full, 1e-300) and n.f_norm > 0:
            anomalies.append(f"{f.name}: D0 = 0 with f != 0")
    thetas = [float(t) for t in theta_grid]
    usable = [n for n in norms if n.D_outer > 0]
    fitted, cmin, spread = [], [], []
    for th in thetas:
        ratios = np.array([n.f_norm / (n.D_outer + n.D_full ** (1 - th) * n.D_outer ** th) for n in usable])
        fitted.append(float(ratios.max()) if len(ratios) else float("inf"))
        cmin.append(float(ratios.min()) if len(ratios) else 0.0)
        spread.append(float(ratios.max() / ratios.min()) if len(ratios) and ratios.min() > 0 else float("inf"))
    k = int(np.argmin(spread))
    best = thetas[k]
    uniform = [th for th, sp in zip(thetas, spread) if sp <= UNIFORM_SPREAD]
    c_impl = params.mu * (1 - best) / best
    s_bal = [float(np.log(n.D_full / n.D_outer) / (c_impl + params.mu)) if n.D_outer > 0 and n.D_full > 0 else None
             for n in norms]
    cor = [n.a_norm * n.b_norm / (n.D_outer + n.D_full ** (1 - best) * n.D_outer ** best) for n in usable]
    cor_ok = bool(all(c <= fitted[k] * (1 + 1e-9) for c in cor))

    excess = -np.inf
    for u, f in zip(solutions, family):
        tr = u.trace("Gamma")
        gt = np.sqrt(domain.tangential_gradient_sq(tr, metric, mesh, "Gamma"))
        bound = f.ratio * np.abs(tr)
        scale = max(1.0, float(np.max(np.abs(tr))))
        # centred differences of a trigonometric profile never exceed the analytic slope
        excess = max(excess, float(np.max(gt - bound)) / scale)
    tang_ok = bool(excess <= 5 * mesh.h_theta ** 2)

    lower_ok = True
    if phi is not None:
        lower_ok = all(_sigma_lower_bound(f, params, metric, mesh, tgrid, phi, s_values) for f in family)
    class_ok = all(recheck_class(f, metric, mesh) for f in family)
    success = bool(uniform) and not anomalies and cor_ok and tang_ok and lower_ok and class_ok
    return StabilityReport(
        members=[f.describe() for f in family], norms=[n.to_dict() for n in norms], theta_grid=thetas,
        fitted_C=fitted, C_min=cmin, spread=spread, best_theta=best, uniform_thetas=uniform,
        implied_c=float(c_impl), s_balance=s_bal, corollary_ok=cor_ok, corollary_ratios=[float(c) for c in cor],
        tangential_bound_ok=tang_ok, tangential_excess=float(excess), lower_bound_ok=lower_ok,
        class_ok=class_ok, anomalies=anomalies, success=success)


@dataclass
class HolderProbe:
    slope: float
    intercept: float
    f_norms: list
    d_outer: list
    d_full: list
    used: int

    def to_dict(self) -> dict:
        return asdict(self)


def holder_exponent_probe(f0, perturbations, params, metric, mesh, tgrid, noise=None,
                          norms=None) -> HolderProbe:
    """Regression slope of log f_norm against log D_outer over {f0 + p : p in perturbations}.

    With f0 switched on too late to reach Gamma0 before T and small early
    perturbations p, D_outer shrinks with p while D_full stays of order one.
    ``noise`` is accepted for interface symmetry; only noiseless probes are run.
    """
    if noise:
        raise ParameterError("the probe runs on noiseless norms")
    if norms is None:
        family = [combine(f0, p) for p in perturbations]
        solutions, _ = solve_family(family, metric, mesh, tgrid)
        norms = [compute_data_norms(u, f, params, metric) for u, f in zip(solutions, family)]
    pts = [(n.D_outer, n.f_norm) for n in norms if n.D_outer > 0 and n.f_norm > 0]
    x = np.log([p[0] for p in pts]) if pts else np.array([])
    y = np.log([p[1] for p in pts]) if pts else np.array([])
    if len(pts) < 3 or np.ptp(x) < 1e-12:
        raise RegressionError(f"need 3 distinct usable points, have {len(pts)} (spread {np.ptp(x) if len(x) else 0:.3g})")
    slope, icpt = np.polyfit(x, y, 1)
    return HolderProbe(float(slope), float(icpt), [n.f_norm for n in norms], [n.D_outer for n in norms],
                       [n.D_full for n in norms], len(pts))


def combine(f: AdmissibleSource, g: AdmissibleSource, name: str | None = None) -> AdmissibleSource:
    """f + g for two sources sharing the same boundary profile a."""
    if f.a != g.a:
        raise ClassViolationError("sum of sources with different boundary profiles is not of product form")
    parts = []
    for h in (f, g):
        parts.extend(h.b.parts if isinstance(h.b, SumProfile) else [(1.0, h.b)])
    b = SumProfile(tuple(parts))
    return AdmissibleSource(f.a, b, f.a_nodes, f.b_values + g.b_values, f.b_derivative + g.b_derivative,
                            f.alpha, f.beta, name or f"{f.name}+{g.name}")


def late_onset(params, mesh, c_max: float) -> float:
    """Earliest onset whose signal cannot reach Gamma0 before T."""
    return params.T - (mesh.R - mesh.r0) / c_max


def delayed_source(tgrid, metric, mesh, onset: float, width: float, a=None, amplitude: float = 1.0,
                   name: str | None = None) -> AdmissibleSource:
    a = a or BoundaryProfile(1.0)
    b = TimeProfile("delayed", tgrid.T, onset=onset, width=width, amplitude=amplitude)
    return make_admissible_source(a, b, mesh, tgrid, metric, name=name or f"delayed@{onset:.3g}")


def probe_family(params, metric, mesh, tgrid, c_max: float, eps=None, width: float = 0.2, a=None,
                 delay: float | None = None):
    """(f0, perturbations) for the Hölder probe: a late step plus eps-scaled early steps.

    The late step starts ``delay`` (one ramp width by default) after
    ``late_onset`` so that the dispersive precursor of the scheme does not
    reach Gamma0 either.
    """
    eps = np.logspace(-3, 0, 6) if eps is None else np.asarray(eps)
    delay = width if delay is None else delay
    f0 = delayed_source(tgrid, metric, mesh, late_onset(params, mesh, c_max) + delay, width, a, name="late")
    perts = [delayed_source(tgrid, metric, mesh, 0.0, width, a, amplitude=float(e), name=f"early*{e:.3g}")
             for e in eps]
    return f0, perts
