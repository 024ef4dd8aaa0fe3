import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from obstaclewave import domain, geometry
from obstaclewave.domain import AnnularMesh
from obstaclewave.errors import DomainError, EllipticityError, StencilError


def annulus_points(rng, n, r0=1.0, R=2.0):
    r = rng.uniform(r0, R, n)
    a = rng.uniform(0, 2 * np.pi, n)
    return np.stack([r * np.cos(a), r * np.sin(a)], -1)


def sympy_christoffel(gs, pts):
    G = O.christoffel(gs)
    return np.stack([np.stack([np.stack([O.lambdify_points(G[m][k][l])(pts) for l in range(2)], -1)
                               for k in range(2)], -2) for m in range(2)], -3)


def bump_sympy(eps=0.2, cx=1.5, cy=0.0, radius=0.4, m11=1.0, m12=0.3, m22=0.5):
    q = ((O.x - cx) ** 2 + (O.y - cy) ** 2) / radius ** 2
    psi = sp.exp(1 - 1 / (1 - q))
    return sp.eye(2) + eps * psi * sp.Matrix([[m11, m12], [m12, m22]])


# -- pointwise algebra -------------------------------------------------------

@given(amp=st.floats(0.0, 0.3), k1=st.floats(-2, 2), k2=st.floats(-2, 2), phase=st.floats(0, 6.3))
def test_conformal_christoffel_closed_form(amp, k1, k2, phase):
    # g = e^{2 lam} I  =>  Gamma^m_kl = d_k lam delta_ml + d_l lam delta_mk - d_m lam delta_kl
    met = geometry.conformal_trig_metric(amp, k1, k2, phase)
    pts = annulus_points(np.random.default_rng(0), 20)
    arg = k1 * pts[:, 0] + k2 * pts[:, 1] + phase
    dlam = amp * np.cos(arg)[:, None] * np.array([k1, k2])
    I = np.eye(2)
    want = (np.einsum("pk,ml->pmkl", dlam, I) + np.einsum("pl,mk->pmkl", dlam, I)
            - np.einsum("pm,kl->pmkl", dlam, I))
    got = geometry.christoffel_eval(met, pts).gamma
    assert np.max(np.abs(got - want)) <= 1e-8


@pytest.mark.parametrize("gs,met", [
    (O.conformal_trig(0.2, 1.0, -0.5, 0.3), geometry.conformal_trig_metric(0.2, 1.0, -0.5, 0.3)),
    (bump_sympy(), geometry.bump_metric()),
])
def test_christoffel_matches_sympy(gs, met):
    pts = np.array([[1.5, 0.1], [1.3, -0.2], [1.6, 0.2], [1.7, 0.05]])   # inside the bump support
    assert np.max(np.abs(geometry.christoffel_eval(met, pts).gamma - sympy_christoffel(gs, pts))) <= 1e-10


def test_conformal_poly_metric_matches_sympy():
    b1, b2, c2 = 0.1, -0.05, 0.02
    lam = b1 * O.x + b2 * O.y + c2 * (O.x ** 2 + O.y ** 2)
    gs = sp.exp(2 * lam) * sp.eye(2)
    met = geometry.conformal_poly_metric(b1, b2, c2)
    pts = annulus_points(np.random.default_rng(1), 10)
    assert np.max(np.abs(geometry.christoffel_eval(met, pts).gamma - sympy_christoffel(gs, pts))) <= 1e-10


def test_finite_difference_fallback_close_to_analytic():
    ana = geometry.conformal_trig_metric()
    fd = geometry.callable_metric(ana.g_fn, kappa=ana.kappa)
    assert not fd.analytic and ana.analytic
    pts = annulus_points(np.random.default_rng(2), 15)
    assert np.max(np.abs(fd.deriv(pts) - ana.deriv(pts))) <= 1e-8


@given(amp=st.floats(0.0, 0.3), phase=st.floats(0, 6.3))
def test_christoffel_symmetric_and_metric_compatible(amp, phase):
    met = geometry.conformal_trig_metric(amp, 1.0, 1.0, phase)
    pts = annulus_points(np.random.default_rng(3), 8)
    mv = geometry.metric_eval(met, pts)
    gam = geometry.christoffel_eval(met, pts).gamma
    assert np.allclose(gam, np.swapaxes(gam, -1, -2))
    # metric compatibility: d_j g_kl = Gamma^m_jk g_ml + Gamma^m_jl g_km
    dg = met.deriv(pts)
    rhs = np.einsum("pmjk,pml->pjkl", gam, mv.g) + np.einsum("pmjl,pkm->pjkl", gam, mv.g)
    assert np.max(np.abs(dg - rhs)) <= 1e-12


def test_inverse_metric_derivative_consistent():
    met = geometry.bump_metric()
    x = np.array([1.45, 0.1])
    h = 1e-6
    e = np.eye(2)
    mv = geometry.metric_eval(met, x)
    got = geometry.inverse_metric_derivative(mv.g_inv, met.deriv(x))
    for j in range(2):
        fd = (np.linalg.inv(met.eval(x + h * e[j])) - np.linalg.inv(met.eval(x - h * e[j]))) / (2 * h)
        assert np.allclose(got[j], fd, atol=1e-8)


def test_metric_eval_rejects_non_elliptic():
    bad = geometry.callable_metric(lambda x: np.broadcast_to(np.diag([1.0, -1.0]), x.shape[:-1] + (2, 2)), 1.0)
    with pytest.raises(EllipticityError):
        geometry.metric_eval(bad, np.zeros((3, 2)))
    with pytest.raises(EllipticityError):
        geometry.scaled_metric(0.0)


def test_unknown_metric_name():
    with pytest.raises(KeyError, match="unknown metric"):
        geometry.make_metric("nope")


# -- discrete operators ------------------------------------------------------

def _errors(gs, met, levels=(16, 32, 64)):
    u = O.TEST_FUNCTION
    lap = O.lambdify_points(O.laplace_beltrami(gs, u))
    gr = [O.lambdify_points(e) for e in O.gradient(gs, u)]
    H = [[O.lambdify_points(e) for e in row] for row in O.hessian(gs, u)]
    uf = O.lambdify_points(u)
    out = []
    for n in levels:
        mesh = AnnularMesh(1.0, 2.0, n + 1, 4 * n)
        p = mesh.points
        gh = geometry.gradient_and_hessian(met, uf(p), mesh)
        out.append((np.max(np.abs(geometry.laplace_beltrami(met, uf(p), mesh) - lap(p))),
                    max(np.max(np.abs(gh.grad[..., k] - gr[k](p))) for k in range(2)),
                    max(np.max(np.abs(gh.hess[..., k, l] - H[k][l](p))) for k in range(2) for l in range(2))))
    e = np.array(out)
    return np.log2(e[:-1] / e[1:])


@pytest.mark.parametrize("name", ["scaled", "anisotropic"])
def test_operator_orders_extra_metrics(name):
    if name == "scaled":
        gs, met = 1.7 * sp.eye(2), geometry.scaled_metric(1.7)
    else:
        gs = O.anisotropic()
        met = O.metric_field_from(gs)
    assert np.min(_errors(gs, met)) >= 1.9


def test_gradient_squared_matches_full_assembly():
    met = geometry.bump_metric()
    mesh = AnnularMesh(1.0, 2.0, 17, 32)
    u = O.lambdify_points(O.TEST_FUNCTION)(mesh.points)
    assert np.allclose(geometry.gradient_squared(met, u, mesh),
                       geometry.gradient_and_hessian(met, u, mesh).grad_sq, atol=1e-12)


@given(amp=st.floats(0.0, 0.3), eps=st.floats(0.0, 0.3), seed=st.integers(0, 2 ** 16))
def test_laplacian_kills_constants_and_is_self_adjoint(amp, eps, seed):
    mesh = AnnularMesh(1.0, 2.0, 12, 20)
    rng = np.random.default_rng(seed)
    for met in (geometry.conformal_trig_metric(amp), geometry.bump_metric(eps)):
        L = geometry.laplacian_matrix(met, mesh)
        one = (L @ np.ones(mesh.n_r * mesh.n_theta)).reshape(mesh.n_r, -1)
        assert np.max(np.abs(one[1:-1])) <= 1e-10
        w = domain.volume_weights(met, mesh).ravel()
        u, v = rng.normal(size=(2, mesh.n_r, mesh.n_theta))
        u[[0, -1]] = v[[0, -1]] = 0
        a = (w * (L @ u.ravel())) @ v.ravel()
        b = (w * (L @ v.ravel())) @ u.ravel()
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_d2_axis_exact_on_cubics():
    h = 0.1
    x = np.arange(10) * h
    u = 1 + 2 * x - x ** 2 + 0.5 * x ** 3
    assert np.allclose(geometry.d2_axis(u, h, 0), -2 + 3 * x, atol=1e-10)
    assert np.allclose(geometry.d_axis(1 + 2 * x - x ** 2, h, 0), 2 - 2 * x, atol=1e-12)


def test_stencil_errors():
    mesh = AnnularMesh(1.0, 2.0, 17, 32)
    with pytest.raises(StencilError):
        geometry.laplace_beltrami(geometry.identity_metric(), np.zeros((5, 5)), mesh)
    u = np.zeros((17, 32))
    u[3, 3] = np.nan
    with pytest.raises(StencilError, match="non-finite"):
        geometry.laplace_beltrami(geometry.identity_metric(), u, mesh)
    with pytest.raises(StencilError):
        geometry.d2_axis(np.zeros(3), 0.1, 0)


# -- boundary decomposition --------------------------------------------------

def test_normal_derivative_of_radial_quadratic():
    mesh = AnnularMesh(1.0, 2.0, 17, 32)
    u = np.sum(mesh.points ** 2, -1)      # r^2, d_r u = 2r
    met = geometry.identity_metric()
    inner = geometry.boundary_decompose(met, u, mesh, "Gamma")
    outer = geometry.boundary_decompose(met, u, mesh, "Gamma0")
    assert np.allclose(inner.dnu, -2.0) and np.allclose(outer.dnu, 4.0)
    assert np.allclose(inner.grad_tau_sq, 0.0, atol=1e-20)


@given(eps=st.floats(0.0, 0.3), seed=st.integers(0, 2 ** 16))
def test_boundary_decomposition_pythagoras(eps, seed):
    mesh = AnnularMesh(1.0, 2.0, 12, 24)
    met = geometry.bump_metric(eps, cx=1.1, radius=0.5)
    u = np.random.default_rng(seed).normal(size=(mesh.n_r, mesh.n_theta))
    for which in ("Gamma", "Gamma0"):
        d = geometry.boundary_decompose(met, u, mesh, which)
        assert np.allclose(d.grad_sq, d.dnu ** 2 + d.grad_tau_sq, rtol=1e-10, atol=1e-12)
        nu_len = np.einsum("tk,tkl,tl->t", d.nu_g, geometry.node_geometry(met, mesh).g[
            geometry.boundary_row(mesh, which)], d.nu_g)
        assert np.allclose(nu_len, 1.0)


def test_boundary_row_rejects_other_names():
    with pytest.raises(DomainError):
        geometry.boundary_row(AnnularMesh(1.0, 2.0, 17, 32), "middle")
