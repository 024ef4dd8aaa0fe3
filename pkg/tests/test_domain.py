import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstaclewave import domain, geometry
from obstaclewave.domain import AnnularMesh, SpaceTimeField, TimeGrid, build_annulus_mesh
from obstaclewave.errors import DomainError, GeometryError, ParameterError, ResolutionError, ShapeError


def test_mesh_layout_and_boundaries():
    mesh = build_annulus_mesh(1.0, 2.0, 17, 32)
    assert mesh.points.shape == (17, 32, 2)
    assert np.allclose(np.linalg.norm(mesh.points[0], axis=-1), 1.0)
    assert np.allclose(np.linalg.norm(mesh.points[-1], axis=-1), 2.0)
    assert mesh.boundary_index["Gamma0"][0] == 16 * 32
    ref = mesh.refined()
    assert (ref.n_r, ref.n_theta) == (33, 64) and ref.h_r == pytest.approx(mesh.h_r / 2)


def test_extended_mesh_keeps_spacing():
    mesh = AnnularMesh(1.0, 2.0, 17, 32)
    ext = mesh.extended(2.3)
    assert ext.h_r == pytest.approx(mesh.h_r)
    assert ext.R >= 2.3 and ext.R - mesh.h_r < 2.3
    assert np.allclose(ext.r[:17], mesh.r)


@pytest.mark.parametrize("args,exc", [((2.0, 1.0, 17, 32), GeometryError), ((0.0, 1.0, 17, 32), GeometryError),
                                      ((1.0, 2.0, 8, 32), ResolutionError), ((1.0, 2.0, 17, 15), ResolutionError)])
def test_mesh_rejects_bad_input(args, exc):
    with pytest.raises(exc):
        build_annulus_mesh(*args)


def test_time_grid_and_field_shapes():
    with pytest.raises(ParameterError):
        TimeGrid(0.0, 10)
    with pytest.raises(ParameterError):
        TimeGrid(1.0, 2)
    mesh, tg = AnnularMesh(1.0, 2.0, 17, 32), TimeGrid(1.0, 10)
    with pytest.raises(ShapeError):
        SpaceTimeField(mesh, tg, np.zeros((10, 17, 32)))
    f = SpaceTimeField(mesh, tg, np.ones((11, 17, 32)))
    assert f.trace("Gamma").shape == (11, 32) and f.scaled(3.0).values.max() == 3.0


def test_area_and_circumference():
    met = geometry.identity_metric()
    errs = []
    for n in (16, 32, 64):
        mesh = AnnularMesh(1.0, 2.0, n + 1, 2 * n)
        # area is exact (r dr is linear); int |x|^2 dV = 7.5 pi converges at second order
        assert domain.integrate_volume(np.ones((n + 1, 2 * n)), met, mesh) == pytest.approx(3 * np.pi, rel=1e-14)
        errs.append(abs(domain.integrate_volume(np.sum(mesh.points ** 2, -1), met, mesh) - 7.5 * np.pi))
        # the periodic trapezoid rule integrates the circle exactly
        assert domain.integrate_surface(np.ones(2 * n), met, mesh, "Gamma0") == pytest.approx(4 * np.pi, rel=1e-14)
    assert min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])) >= 1.9


def test_surface_measures_for_conformal_metric():
    # g = e^{2 lam} I: sqrt|g| = e^{2 lam}, induced length element e^{lam}
    met = geometry.conformal_trig_metric(amp=0.2)
    mesh = AnnularMesh(1.0, 2.0, 17, 64)
    p = mesh.points[0]
    lam = 0.2 * np.sin(p[:, 0] + p[:, 1])
    base = mesh.r[0] * mesh.h_theta
    assert np.allclose(domain.surface_weights(met, mesh, "Gamma"), base * np.exp(2 * lam))
    assert np.allclose(domain.surface_weights(met, mesh, "Gamma", "induced"), base * np.exp(lam))
    with pytest.raises(ParameterError):
        domain.surface_weights(met, mesh, "Gamma", "other")


@given(n=st.integers(3, 40), frac=st.floats(0.0, 1.2), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_time_weights_exact_on_linear(n, frac, a, b):
    tg = TimeGrid(2.0, n)
    t_end = frac * tg.T
    w = domain.time_weights(tg, t_end)
    te = min(max(t_end, 0.0), tg.T)
    assert np.sum(w * (a + b * tg.times)) == pytest.approx(a * te + 0.5 * b * te ** 2, abs=1e-12)
    assert np.all(w >= -1e-15)


def test_sobolev_norms_of_known_fields():
    met = geometry.identity_metric()
    mesh = AnnularMesh(1.0, 2.0, 65, 128)
    r2 = np.sum(mesh.points ** 2, -1)
    # ||r^2||^2 = 2 pi int r^5 dr = 21 pi; |grad|^2 = 4 r^2; |Hess|^2 = 8
    l2 = domain.sobolev_norms(r2, met, mesh, "L2_volume")
    h1 = domain.sobolev_norms(r2, met, mesh, "H1_volume")
    h2 = domain.sobolev_norms(r2, met, mesh, "H2_volume")
    assert l2 ** 2 == pytest.approx(21 * np.pi, rel=1e-3)
    assert h1 ** 2 - l2 ** 2 == pytest.approx(4 * 7.5 * np.pi, rel=1e-3)
    assert h2 ** 2 - h1 ** 2 == pytest.approx(8 * 3 * np.pi, rel=1e-3)

    tg = TimeGrid(1.0, 200)
    tr = np.outer(tg.times, np.cos(mesh.theta))
    # int_0^tau t^2 dt * (int cos^2 + int sin^2) on the unit circle
    tau = 0.5
    want = tau ** 3 / 3 * 2 * np.pi
    got = domain.sobolev_norms(tr, met, mesh, "L2_time_H1_gamma", tgrid=tg, tau=tau)
    assert got ** 2 == pytest.approx(want, rel=1e-3)


def test_sobolev_norm_errors():
    met = geometry.identity_metric()
    mesh, tg = AnnularMesh(1.0, 2.0, 17, 32), TimeGrid(1.0, 10)
    f = SpaceTimeField(mesh, tg, np.zeros((11, 17, 32)))
    with pytest.raises(ShapeError):
        domain.sobolev_norms(f, met, mesh, "L2_volume")
    with pytest.raises(DomainError):
        domain.sobolev_norms(f.values[0], met, mesh, "W1p")
    with pytest.raises(ParameterError):
        domain.sobolev_norms(f, met, mesh, "H1_boundary_time")
    with pytest.raises(ParameterError):
        domain.sobolev_norms(f, met, mesh, "L2_time_H1_gamma", tgrid=tg)
    with pytest.raises(ShapeError):
        domain.sobolev_norms(np.zeros((5, 32)), met, mesh, "L2_boundary_time", tgrid=tg)


@given(c=st.floats(0.1, 10.0))
def test_norms_are_homogeneous(c):
    met = geometry.conformal_trig_metric()
    mesh, tg = AnnularMesh(1.0, 2.0, 17, 32), TimeGrid(1.0, 10)
    rng = np.random.default_rng(0)
    f = SpaceTimeField(mesh, tg, rng.normal(size=(11, 17, 32)))
    for kind in domain.BOUNDARY_KINDS:
        a = domain.sobolev_norms(f, met, mesh, kind, tgrid=tg, tau=0.3)
        b = domain.sobolev_norms(f.scaled(c), met, mesh, kind, tgrid=tg, tau=0.3)
        assert b == pytest.approx(c * a, rel=1e-12)
