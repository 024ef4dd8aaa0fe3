"""Conjugated wave operator, the integration-by-parts ledger behind the
Carleman estimate, the estimate itself on a corpus, and the energy bound.

Throughout, the space-time weight is ``varphi(x, t) = phi(x) - gamma t`` so
that ``varphi' = -gamma``, ``varphi'' = 0`` and ``box varphi = -Delta_g phi``;
these are substituted analytically.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import domain, geometry
from .domain import SpaceTimeField
from .errors import ParameterError, PreconditionError
from .weight import CarlemanParams, WeightFunction, covariant_hessian, laplace_beltrami_weight

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# weight data on the mesh

@dataclass(frozen=True, eq=False)
class WeightNodes:
    phi: np.ndarray        # (n_r, n_t)
    dphi: np.ndarray       # covector, (n_r, n_t, 2)
    N: np.ndarray          # grad_g phi, contravariant
    Nsq: np.ndarray        # |grad_g phi|_g^2
    lap: np.ndarray        # Delta_g phi
    hessNN: np.ndarray     # Hess_g phi (N, N)
    dNsq_N: np.ndarray     # <grad_g |grad_g phi|^2, grad_g phi>, via d g^{kl}
    hess: np.ndarray       # Hess_g phi


def inverse_metric_route(phi: WeightFunction, metric, x) -> np.ndarray:
    """<grad_g(|grad_g phi|_g^2), grad_g phi> from d_m g^{kl} and the Euclidean Hessian."""
    x = np.asarray(x, dtype=float)
    mv = geometry.metric_eval(metric, x)
    d = phi.grad(x)
    H = phi.hess(x)
    dginv = geometry.inverse_metric_derivative(mv.g_inv, metric.deriv(x))
    dNsq = np.einsum("...mkl,...k,...l->...m", dginv, d, d) + 2 * np.einsum("...kl,...km,...l->...m", mv.g_inv, H, d)
    N = np.einsum("...kl,...l->...k", mv.g_inv, d)
    return np.einsum("...m,...m->...", dNsq, N)


def hessian_route(phi: WeightFunction, metric, x) -> np.ndarray:
    """2 Hess_g phi(grad_g phi, grad_g phi) via Christoffel symbols."""
    x = np.asarray(x, dtype=float)
    mv = geometry.metric_eval(metric, x)
    N = np.einsum("...kl,...l->...k", mv.g_inv, phi.grad(x))
    Hc = covariant_hessian(phi, metric, x)
    return 2 * np.einsum("...k,...kl,...l->...", N, Hc, N)


def weight_nodes(phi: WeightFunction, metric, mesh) -> WeightNodes:
    pts = mesh.points
    geo = geometry.node_geometry(metric, mesh)
    d = phi.grad(pts)
    N = np.einsum("...kl,...l->...k", geo.g_inv, d)
    Hc = covariant_hessian(phi, metric, pts)
    return WeightNodes(
        phi=phi(pts), dphi=d, N=N, Nsq=np.einsum("...k,...k->...", N, d),
        lap=laplace_beltrami_weight(phi, metric, pts),
        hessNN=np.einsum("...k,...kl,...l->...", N, Hc, N),
        dNsq_N=inverse_metric_route(phi, metric, pts), hess=Hc)


def box(values, metric, mesh, tgrid):
    """Discrete d_t^2 - Delta_g at every node of Q (one-sided stencils on the faces)."""
    return geometry.d2_axis(values, tgrid.dt, 0) - geometry.laplace_beltrami(metric, values, mesh)


def _exponent(wn, params, tgrid, s):
    return 2 * s * (wn.phi[None] - params.gamma * tgrid.times[:, None, None])


def pointwise_identities(x, phi: WeightFunction, params: CarlemanParams, metric, zt=None):
    """Residuals of the two pointwise identities used to extract convexity.

    First: varphi' d_t K - <grad K, grad phi> = 2 Hess phi(grad phi, grad phi)
    with K = |varphi'|^2 - |grad_g phi|^2; the time part vanishes since
    varphi' = -gamma is constant.  Second: varphi'' |z'|^2 = 0.
    """
    lhs = -params.gamma * 0.0 + inverse_metric_route(phi, metric, x)
    rhs = hessian_route(phi, metric, x)
    zt = np.ones(np.shape(lhs)) if zt is None else np.asarray(zt)
    varphi_tt = 0.0
    return np.abs(lhs - rhs), np.abs(varphi_tt * zt ** 2)


# ---------------------------------------------------------------------------
# conjugation

@dataclass
class ConjugatedDecomposition:
    P: np.ndarray
    P_plus: np.ndarray
    P_minus: np.ndarray
    s: float
    overflow: bool = False

    def relative_residual(self, z: SpaceTimeField, metric) -> float:
        """||P - (P+ + P-)||_2 / ||z||_2 over Q."""
        num = domain.integrate_spacetime((self.P - self.P_plus - self.P_minus) ** 2, metric, z.mesh, z.tgrid)
        den = domain.integrate_spacetime(z.values ** 2, metric, z.mesh, z.tgrid)
        return float(np.sqrt(num / den))


def conjugate_decompose(z: SpaceTimeField, phi: WeightFunction, params: CarlemanParams, s: float,
                        metric) -> ConjugatedDecomposition:
    mesh, tgrid = z.mesh, z.tgrid
    wn = weight_nodes(phi, metric, mesh)
    expo = 0.5 * _exponent(wn, params, tgrid, s)   # s * varphi
    overflow = bool(np.max(np.abs(expo)) > 350)
    zv = z.values
    P = np.exp(expo) * box(np.exp(-expo) * zv, metric, mesh, tgrid)
    gam = params.gamma
    P_plus = box(zv, metric, mesh, tgrid) + s ** 2 * (gam ** 2 - wn.Nsq) * zv
    zt = geometry.d_axis(zv, tgrid.dt, 0)
    dz = geometry.cartesian_gradient(zv, mesh)
    G = np.einsum("...k,...k->...", wn.N, dz)
    P_minus = 2 * s * gam * zt + 2 * s * G + s * wn.lap * zv
    return ConjugatedDecomposition(P, P_plus, P_minus, s, overflow)


# ---------------------------------------------------------------------------
# integration-by-parts ledger

@dataclass
class IbpLedger:
    s: float
    inner_product: float
    i_terms: list           # I_1..I_9 by their defining volume integrals
    i_terms_ibp: list       # the same after integration by parts
    volume_terms: list      # the three assembled volume integrals
    boundary_B: dict        # Sigma0, Sigma, T, and the t = 0 face
    vanishing_terms: dict   # terms with d_t box varphi etc., identically zero here
    residual: float         # |inner + B - volume| / |inner|
    residual_sum_ik: float  # |sum I_k (after IBP) - inner| / |inner|
    residual_definitions: float
    b_sigma_quadratic_max_excess: float

    @property
    def B_total(self) -> float:
        return float(sum(self.boundary_B.values()))

    def to_dict(self) -> dict:
        return asdict(self)


def _boundary_pieces(zv, wn, params, s, metric, mesh, tgrid, which):
    """Integrand pieces of the Upsilon boundary terms on one circle, induced measure."""
    row = geometry.boundary_row(mesh, which)
    bd = geometry.boundary_decompose(metric, zv, mesh, which)
    nu_g, _ = geometry.metric_normal(metric, mesh, which)
    dnu_phi = np.einsum("tk,tkl,tl->t", nu_g, geometry.node_geometry(metric, mesh).g[row], wn.N[row])
    zb = zv[:, row, :]
    ztb = geometry.d_axis(zb, tgrid.dt, 0)
    Gb = np.einsum("tk,...tk->...t", wn.dphi[row], bd.grad)
    L = wn.lap[row]
    K = params.gamma ** 2 - wn.Nsq[row]

    def integ(dens):
        return domain.integrate_boundary_time(dens, metric, mesh, tgrid, which, measure="induced")

    return dict(zb=zb, ztb=ztb, dnu=bd.dnu, G=Gb, L=L, K=K, dnu_phi=dnu_phi,
                grad_sq=bd.grad_sq, grad_tau_sq=bd.grad_tau_sq, integ=integ)


def verify_ibp_identity(z: SpaceTimeField, phi: WeightFunction, params: CarlemanParams, s: float,
                        metric) -> IbpLedger:
    """Evaluate every piece of the identity (P+ z, P- z) + B = volume terms."""
    mesh, tgrid = z.mesh, z.tgrid
    wn = weight_nodes(phi, metric, mesh)
    gam = params.gamma
    zv = z.values
    zt = geometry.d_axis(zv, tgrid.dt, 0)
    ztt = geometry.d2_axis(zv, tgrid.dt, 0)
    lapz = geometry.laplace_beltrami(metric, zv, mesh)
    dz = geometry.cartesian_gradient(zv, mesh)
    ginv = geometry.node_geometry(metric, mesh).g_inv
    gradz = np.einsum("...kl,...l->...k", ginv, dz)
    gsq = np.einsum("...k,...k->...", gradz, dz)
    G = np.einsum("...k,...k->...", wn.N, dz)
    L, K = wn.lap, gam ** 2 - wn.Nsq

    def Q(dens):
        return domain.integrate_spacetime(dens, metric, mesh, tgrid)

    def D(dens_t):
        return float(domain.integrate_volume(dens_t, metric, mesh))

    P_plus = ztt - lapz + s ** 2 * K * zv
    P_minus = 2 * s * gam * zt + 2 * s * G + s * L * zv
    inner = Q(P_plus * P_minus)

    i_def = [
        Q(2 * s * gam * zt * ztt),
        Q(2 * s * G * ztt),
        Q(s * L * zv * ztt),
        Q(-2 * s * gam * zt * lapz),
        Q(-2 * s * lapz * G),
        Q(-s * L * zv * lapz),
        Q(2 * s ** 3 * gam * K * zv * zt),
        Q(2 * s ** 3 * K * G * zv),
        Q(s ** 3 * L * K * zv ** 2),
    ]

    dL = geometry.cartesian_gradient(L, mesh)
    gradL_gradz = np.einsum("...k,...kl,...l->...", dL, ginv, dz)
    hess_zz = np.einsum("...k,...kl,...l->...", gradz, wn.hess, gradz)
    gradK_N = -wn.dNsq_N

    bg = _boundary_pieces(zv, wn, params, s, metric, mesh, tgrid, "Gamma")
    bo = _boundary_pieces(zv, wn, params, s, metric, mesh, tgrid, "Gamma0")

    def ups(fn):
        return bg["integ"](fn(bg)) + bo["integ"](fn(bo))

    def ends(dens):
        return D(dens[-1]) - D(dens[0])

    i_ibp = [
        ends(s * gam * zt ** 2),
        Q(s * L * zt ** 2) - ups(lambda b: s * b["dnu_phi"] * b["ztb"] ** 2) + ends(2 * s * zt * G),
        ends(s * L * zv * zt) - Q(s * L * zt ** 2),
        ends(s * gam * gsq) - ups(lambda b: 2 * s * gam * b["ztb"] * b["dnu"]),
        Q(2 * s * hess_zz - s * L * gsq)
        - ups(lambda b: 2 * s * b["dnu"] * b["G"] - s * b["dnu_phi"] * b["grad_sq"]),
        Q(s * L * gsq + s * zv * gradL_gradz) - ups(lambda b: s * b["L"] * b["zb"] * b["dnu"]),
        ends(s ** 3 * gam * K * zv ** 2),
        -Q(s ** 3 * (gradK_N + K * L) * zv ** 2) + ups(lambda b: s ** 3 * b["K"] * b["dnu_phi"] * b["zb"] ** 2),
        Q(s ** 3 * L * K * zv ** 2),
    ]

    volume = [
        Q(2 * s * hess_zz),                       # 2s [varphi''|z'|^2 + Hess phi(grad z, grad z)]
        Q(s * gradL_gradz * zv),                  # -s <grad box varphi, grad z> z
        Q(2 * s ** 3 * wn.hessNN * zv ** 2),      # s^3 * 2 Hess phi(grad phi, grad phi) |z|^2
    ]

    def b_circle(b):
        return (s ** 3 * (-b["K"]) * b["dnu_phi"] * b["zb"] ** 2
                + (2 * s * gam * b["ztb"] + 2 * s * b["G"] + s * b["L"] * b["zb"]) * b["dnu"]
                + s * b["dnu_phi"] * b["ztb"] ** 2 - s * b["dnu_phi"] * b["grad_sq"])

    def f_time(k):
        return (s * gam * zt[k] ** 2 + 2 * s * zt[k] * G[k] + s * L * zv[k] * zt[k]
                + s * gam * gsq[k] + s ** 3 * gam * K * zv[k] ** 2)

    B = {
        "Sigma0": bo["integ"](b_circle(bo)),
        "Sigma": bg["integ"](b_circle(bg)),
        "T": -D(f_time(-1)),
        "initial": D(f_time(0)),
    }

    # quadratic form of B_Sigma in (z', d_nu z): bounded by C |z|^2 by completing the square
    delta = params.delta
    boxphi = -bg["L"]
    Cq = delta * boxphi ** 2 / (4 * (delta ** 2 - gam ** 2))
    qform = (-delta * bg["ztb"] ** 2 + (2 * gam * bg["ztb"] - boxphi * bg["zb"]) * bg["dnu"]
             - delta * bg["dnu"] ** 2)
    excess = float(np.max(qform - Cq * bg["zb"] ** 2))

    scale = abs(inner) if inner != 0 else 1.0
    B_total = sum(B.values())
    return IbpLedger(
        s=s, inner_product=inner, i_terms=i_def, i_terms_ibp=i_ibp, volume_terms=volume,
        boundary_B=B,
        vanishing_terms={"d_t box varphi": 0.0, "d_t^2 box varphi": 0.0, "varphi''": 0.0},
        residual=abs(inner + B_total - sum(volume)) / scale,
        residual_sum_ik=abs(sum(i_ibp) - inner) / scale,
        residual_definitions=abs(sum(i_def) - inner) / scale,
        b_sigma_quadratic_max_excess=excess,
    )


# ---------------------------------------------------------------------------
# Carleman inequality

@dataclass
class CarlemanSides:
    """The six integrals of the estimate at one s, all multiplied by exp(-log_scale).

    ``lhs_grad`` and ``lhs_mass`` split ``lhs_volume``; the ``w_*`` entries are
    the same weighted integrals without their power of s.
    """

    s: float
    lhs_volume: float
    lhs_sigma: float
    rhs_source: float
    rhs_sigma_tangential: float
    rhs_sigma0: float
    rhs_final_time: float
    log_scale: float = 0.0
    lhs_grad: float = 0.0
    lhs_mass: float = 0.0
    w_grad: float = 0.0
    w_mass: float = 0.0
    w_sigma: float = 0.0
    gradient_norm: str = "metric |grad_g u|_g^2"

    @property
    def lhs_total(self) -> float:
        return self.lhs_volume + self.lhs_sigma

    @property
    def rhs_total(self) -> float:
        return self.rhs_source + self.rhs_sigma_tangential + self.rhs_sigma0 + self.rhs_final_time

    def to_dict(self) -> dict:
        return asdict(self)


def check_zero_initial(u: SpaceTimeField):
    """u(., 0) = 0 to 1e-10 max|u|; d_t u(., 0) = 0 up to the one-sided stencil error."""
    v = u.values
    scale = float(np.max(np.abs(v)))
    if scale == 0:
        return
    if np.max(np.abs(v[0])) > 1e-10 * scale:
        raise PreconditionError("u(., 0) != 0")
    dt = u.tgrid.dt
    ut0 = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt)
    d3 = np.max(np.abs(v[3] - 3 * v[2] + 3 * v[1] - v[0])) / dt ** 3
    if np.max(np.abs(ut0)) > 1e-10 * scale + dt ** 2 * d3:
        raise PreconditionError("d_t u(., 0) != 0")


def assemble_carleman_sides(u: SpaceTimeField, phi: WeightFunction, params: CarlemanParams, s: float,
                            metric, wn: WeightNodes | None = None, check: bool = True) -> CarlemanSides:
    if check:
        check_zero_initial(u)
    mesh, tgrid = u.mesh, u.tgrid
    wn = wn or weight_nodes(phi, metric, mesh)
    E = _exponent(wn, params, tgrid, s)
    shift = float(np.max(E))
    W = np.exp(E - shift)
    v = u.values
    ut = geometry.d_axis(v, tgrid.dt, 0)
    gsq = geometry.gradient_squared(metric, v, mesh)
    bx = box(v, metric, mesh, tgrid)

    def Q(d):
        return domain.integrate_spacetime(W * d, metric, mesh, tgrid)

    def S(d, which):
        row = geometry.boundary_row(mesh, which)
        return domain.integrate_boundary_time(W[:, row, :] * d, metric, mesh, tgrid, which)

    w_grad, w_mass = Q(gsq), Q(v ** 2)
    ug = v[:, 0, :]
    w_sigma = S(ug ** 2, "Gamma")
    tang = domain.tangential_gradient_sq(ug, metric, mesh, "Gamma")
    bo = geometry.boundary_decompose(metric, v, mesh, "Gamma0")
    uo = v[:, -1, :]
    rhs_sigma0 = S(s * ut[:, -1, :] ** 2 + s * bo.grad_sq + s ** 3 * uo ** 2, "Gamma0")
    final = float(domain.integrate_volume(W[-1] * (s * ut[-1] ** 2 + s * gsq[-1] + s ** 3 * v[-1] ** 2),
                                          metric, mesh))
    return CarlemanSides(
        s=s, lhs_volume=s * w_grad + s ** 3 * w_mass, lhs_sigma=s ** 3 * w_sigma,
        rhs_source=Q(bx ** 2), rhs_sigma_tangential=S(s * tang, "Gamma"),
        rhs_sigma0=rhs_sigma0, rhs_final_time=final, log_scale=shift,
        lhs_grad=s * w_grad, lhs_mass=s ** 3 * w_mass,
        w_grad=w_grad, w_mass=w_mass, w_sigma=w_sigma)


@dataclass
class CarlemanReport:
    s_values: list
    ratios: list               # per member, per s: rhs_total / lhs_total
    min_ratio: list            # over the corpus, per s
    empirical_s_star: float
    fitted_C: float
    tail_slope: float          # log-log slope of min_ratio over the top third of the sweep
    scaling_exponents: dict
    excluded: list
    success: bool
    gradient_norm: str = "metric |grad_g u|_g^2 on both sides"
    members: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def default_s_sweep(m_frak: float, n: int = 25, lo: float = 0.1, hi: float = 100.0) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n) / m_frak


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def verify_carleman(corpus, phi: WeightFunction, params: CarlemanParams, s_sweep, metric,
                    names=None, stable_slope: float = -0.1, collapse: float = 0.1) -> CarlemanReport:
    """Sweep s over every member and fit the constant of the estimate.

    ``empirical_s_star`` is the smallest swept s after which the corpus-wide
    minimum ratio never falls below ``collapse`` times its value there;
    ``fitted_C`` is the minimum ratio over s >= s*.  Success also asks that
    the ratio is not decaying at the top of the sweep (log-log slope over the
    last third >= ``stable_slope``).
    """
    if len(corpus) == 0:
        raise ParameterError("empty corpus")
    s_sweep = np.asarray(s_sweep, dtype=float)
    names = names or [f"u{k}" for k in range(len(corpus))]
    wn = weight_nodes(phi, metric, corpus[0].mesh)
    ratios, kept, excluded, sides_all = [], [], [], []
    for name, u in zip(names, corpus):
        if not np.any(u.values):
            log.warning("corpus member %s is identically zero; excluded (0/0 ratio)", name)
            excluded.append(name)
            continue
        sides = [assemble_carleman_sides(u, phi, params, float(s), metric, wn) for s in s_sweep]
        ratios.append([sd.rhs_total / sd.lhs_total for sd in sides])
        sides_all.append(sides)
        kept.append(name)
    if not ratios:
        return CarlemanReport(list(s_sweep), [], [], float("nan"), 0.0, float("nan"), {}, excluded, False)
    R = np.array(ratios)
    mins = R.min(axis=0)
    k_star = next(k for k in range(len(s_sweep)) if mins[k:].min() >= collapse * mins[k])
    fitted_C = float(mins[k_star:].min())
    top = max(3, len(s_sweep) // 3)
    tail = _slope(s_sweep[-top:], mins[-top:])

    def slopes(num, den):
        return [_slope(s_sweep, [getattr(x, num) / getattr(x, den) for x in sides]) for sides in sides_all
                if all(getattr(x, den) > 0 for x in sides)]

    scaling = {}
    for key, num, den in (("gradient_term", "lhs_grad", "w_grad"), ("mass_s3_term", "lhs_mass", "w_mass"),
                          ("sigma_s3_term", "lhs_sigma", "w_sigma")):
        sl = slopes(num, den)
        scaling[key] = float(np.mean(sl)) if sl else float("nan")
        scaling[key + "_range"] = [float(np.min(sl)), float(np.max(sl))] if sl else []
    # diagnostic: the whole volume side against the weighted mass, upper half of the sweep
    half = s_sweep >= np.sqrt(s_sweep[0] * s_sweep[-1])
    scaling["volume_total_over_mass_upper_half"] = float(np.mean([
        _slope(s_sweep[half], [x.lhs_volume / x.w_mass for x, h in zip(sides, half) if h])
        for sides in sides_all]))
    success = bool(fitted_C > 0 and np.isfinite(fitted_C) and tail >= stable_slope)
    return CarlemanReport(
        s_values=[float(s) for s in s_sweep], ratios=R.tolist(), min_ratio=mins.tolist(),
        empirical_s_star=float(s_sweep[k_star]), fitted_C=fitted_C, tail_slope=tail,
        scaling_exponents=scaling, excluded=excluded, success=success, members=kept)


# ---------------------------------------------------------------------------
# energy estimate

@dataclass
class EnergyReport:
    times: list
    energy: list
    bound: list
    margins: list
    margins_sharp: list    # same with the boundary norms over (0, t) only
    eps_tol: float
    ok: bool

    def to_dict(self) -> dict:
        return asdict(self)


def verify_energy_estimate(u: SpaceTimeField, metric, residual_tol: float = 1e-6) -> EnergyReport:
    """Check E(u)(t) <= e^t (||u||_{H1(Ups)}^2 + ||d_nu u||_{L2(Ups)}^2) at every step."""
    from .wave import energy_series, pde_residual

    mesh, tgrid = u.mesh, u.tgrid
    scale = float(np.max(np.abs(u.values)))
    res = pde_residual(u, metric, mesh, tgrid)
    if scale > 0 and res > residual_tol * max(1.0, scale / tgrid.dt ** 2):
        raise PreconditionError(f"field is not a discrete wave solution (residual {res:.3e})")
    E = energy_series(u, metric, mesh)
    v = u.values
    dens = np.zeros(tgrid.n_t + 1)
    for which in ("Gamma", "Gamma0"):
        row = geometry.boundary_row(mesh, which)
        tr = v[:, row, :]
        bd = geometry.boundary_decompose(metric, v, mesh, which)
        d = (tr ** 2 + geometry.d_axis(tr, tgrid.dt, 0) ** 2 + bd.grad_tau_sq + bd.dnu ** 2)
        dens = dens + domain.integrate_surface(d, metric, mesh, which)
    w = domain.time_weights(tgrid)
    total = float(np.sum(w * dens))
    # cumulative trapezoid over (0, t_k)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * tgrid.dt * (dens[1:] + dens[:-1]))])
    t = tgrid.times
    bound = np.exp(t) * total
    margins = bound - E
    sharp = np.exp(t) * cum - E
    eps = 1e-6 * float(np.max(E)) if np.max(E) > 0 else 0.0
    return EnergyReport(times=t.tolist(), energy=E.tolist(), bound=bound.tolist(),
                        margins=margins.tolist(), margins_sharp=sharp.tolist(), eps_tol=eps,
                        ok=bool(np.all(margins >= -eps)))


# ---------------------------------------------------------------------------
# corpus generators

def random_smooth_field(mesh, tgrid, rng, modes: int = 3, time_power: int = 2) -> SpaceTimeField:
    """t^p (1 + c t) w(r, theta) with w a random low-order polynomial-trigonometric profile."""
    rho = (mesh.r - mesh.r0) / (mesh.R - mesh.r0)
    th = mesh.theta
    w = np.zeros((mesh.n_r, mesh.n_theta))
    for m in range(modes + 1):
        radial = rng.normal(size=3) @ np.stack([np.ones_like(rho), rho, rho ** 2])
        a, b = rng.normal(size=2) / (1 + m)
        w += radial[:, None] * (a * np.cos(m * th) + b * np.sin(m * th))[None, :]
    t = tgrid.times / tgrid.T
    c = rng.uniform(-0.5, 0.5)
    prof = t ** time_power * (1 + c * t)
    return SpaceTimeField(mesh, tgrid, prof[:, None, None] * w[None])


def _bump(x, a, b):
    out = np.zeros_like(x, dtype=float)
    m = (x > a) & (x < b)
    y = (x[m] - a) / (b - a)
    out[m] = np.exp(4.0 - 1.0 / (y * (1 - y)))
    return out


def interior_bump_field(mesh, tgrid, m: int = 2) -> SpaceTimeField:
    """Smooth field vanishing near both circles and near t = 0 and t = T."""
    span = mesh.R - mesh.r0
    rad = _bump(mesh.r, mesh.r0 + 0.15 * span, mesh.R - 0.15 * span)
    tim = _bump(tgrid.times, 0.1 * tgrid.T, 0.8 * tgrid.T)
    ang = 1.0 + 0.5 * np.cos(m * mesh.theta)
    return SpaceTimeField(mesh, tgrid, tim[:, None, None] * rad[None, :, None] * ang[None, None, :])
