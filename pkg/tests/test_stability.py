import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstaclewave import geometry, stability
from obstaclewave.domain import AnnularMesh, TimeGrid
from obstaclewave.errors import ClassViolationError, ParameterError, RegressionError
from obstaclewave.stability import BoundaryProfile, TimeProfile

MESH = AnnularMesh(1.0, 2.0, 17, 32)
TG = TimeGrid(2.0, 50)
IDENT = geometry.identity_metric()


@pytest.mark.parametrize("kind", stability.TIME_PROFILES)
def test_time_profiles_vanish_to_first_order_and_derivative_is_consistent(kind):
    b = TimeProfile(kind, 2.0, onset=0.3, width=0.5)
    assert b(0.0) == 0.0 and b.derivative(0.0) == 0.0
    t = np.linspace(0.05, 1.95, 40)
    h = 1e-6
    assert np.allclose(b.derivative(t), (b(t + h) - b(t - h)) / (2 * h), atol=1e-6)
    assert np.allclose(b.scaled(3.0)(t), 3 * b(t))


def test_unknown_time_profile():
    with pytest.raises(ParameterError):
        TimeProfile("t4", 1.0)(0.5)


@given(c0=st.floats(1.0, 3.0), c=st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=3),
       s=st.lists(st.floats(-0.3, 0.3), max_size=3))
def test_boundary_profile_derivative(c0, c, s):
    a = BoundaryProfile(c0, tuple(c), tuple(s))
    th = np.linspace(0, 2 * np.pi, 50)
    h = 1e-6
    assert np.allclose(a.d_theta(th), (a(th + h) - a(th - h)) / (2 * h), atol=1e-6)


@given(seed=st.integers(0, 2 ** 32 - 1), modes=st.integers(1, 4))
def test_random_profile_stays_away_from_zero(seed, modes):
    a = stability.random_profile(np.random.default_rng(seed), modes)
    assert np.min(a(np.linspace(0, 2 * np.pi, 721))) >= 0.5


def test_class_constants_for_reference_profile():
    f = stability.make_admissible_source(BoundaryProfile(2.0, (1.0,)), TimeProfile("t2", 2.0), MESH, TG, IDENT)
    # a = 2 + cos: min a = 1, |grad_tau a| = |sin| / r0 sampled on the grid
    assert f.alpha == pytest.approx(1.0)
    assert f.beta == pytest.approx(np.max(np.abs(np.sin(MESH.theta))))
    assert stability.recheck_class(f, IDENT, MESH)


def test_class_violations():
    with pytest.raises(ClassViolationError, match="vanishes or changes sign"):
        stability.make_admissible_source(BoundaryProfile(0.5, (1.0,)), TimeProfile("t2", 2.0), MESH, TG, IDENT)
    with pytest.raises(ClassViolationError, match="b\\(0\\)"):
        stability.make_admissible_source(BoundaryProfile(1.0), TimeProfile("delayed", 2.0, onset=-0.1, width=0.5),
                                         MESH, TG, IDENT)
    f = stability.make_admissible_source(BoundaryProfile(2.0), TimeProfile("t2", 2.0), MESH, TG, IDENT)
    g = stability.make_admissible_source(BoundaryProfile(3.0), TimeProfile("t3", 2.0), MESH, TG, IDENT)
    with pytest.raises(ClassViolationError):
        stability.combine(f, g)


def test_combined_source_is_the_sum():
    a = BoundaryProfile(2.0, (0.5,))
    f = stability.make_admissible_source(a, TimeProfile("t2", 2.0), MESH, TG, IDENT)
    g = stability.make_admissible_source(a, TimeProfile("t3", 2.0), MESH, TG, IDENT)
    h = stability.combine(f, g)
    assert np.allclose(h.boundary_trace(MESH, TG), f.boundary_trace(MESH, TG) + g.boundary_trace(MESH, TG))


@pytest.fixture(scope="module")
def family(quick_ctx):
    rng = np.random.default_rng(5)
    return [stability.make_admissible_source(stability.random_profile(rng), TimeProfile("t2_smoothstep", 2.0),
                                             quick_ctx.mesh, quick_ctx.tgrid, quick_ctx.metric, f"m{k}")
            for k in range(5)]


@given(c=st.floats(0.01, 100.0))
def test_data_norms_are_homogeneous(quick_ctx, family, c):
    f = family[0]
    sols, _ = stability.solve_family([f, f.scaled(c)], quick_ctx.metric, quick_ctx.mesh, quick_ctx.tgrid)
    n1 = stability.compute_data_norms(sols[0], f, quick_ctx.params, quick_ctx.metric)
    n2 = stability.compute_data_norms(sols[1], f.scaled(c), quick_ctx.params, quick_ctx.metric)
    for k in ("D_full", "D_outer", "f_norm", "a_norm"):
        assert getattr(n2, k) == pytest.approx(c * getattr(n1, k), rel=1e-10)


def test_theorem_harness_on_small_family(quick_ctx, family):
    ctx = quick_ctx
    rep = stability.verify_theorem(family, ctx.params, ctx.metric, ctx.mesh, ctx.tgrid, ctx.phi)
    assert rep.success and rep.uniform_thetas
    assert rep.tangential_bound_ok and rep.class_ok and rep.lower_bound_ok and rep.corollary_ok
    assert all(sp >= 1.0 for sp in rep.spread)
    # scaled copies give spread one at every theta
    hom = stability.verify_theorem([family[0].scaled(c) for c in (1.0, 3.0, 0.2)], ctx.params, ctx.metric,
                                   ctx.mesh, ctx.tgrid, min_members=2)
    assert max(abs(sp - 1) for sp in hom.spread) <= 1e-10


def test_theorem_harness_input_checks(quick_ctx, family, caplog):
    ctx = quick_ctx
    with pytest.raises(ParameterError):
        stability.verify_theorem([], ctx.params, ctx.metric, ctx.mesh, ctx.tgrid)
    with caplog.at_level(logging.WARNING):
        stability.verify_theorem(family[:2], ctx.params, ctx.metric, ctx.mesh, ctx.tgrid)
    assert "at least 5" in caplog.text


def test_late_source_is_invisible_on_the_outer_circle(quick_ctx):
    ctx = quick_ctx
    f0, perts = stability.probe_family(ctx.params, ctx.metric, ctx.mesh, ctx.tgrid, ctx.solver.c_max,
                                       [1e-2, 1e-1, 1.0], delay=0.4)
    (u0,), _ = stability.solve_family([f0], ctx.metric, ctx.mesh, ctx.tgrid)
    n0 = stability.compute_data_norms(u0, f0, ctx.params, ctx.metric)
    # zero up to the dispersive precursor of the explicit scheme
    assert n0.D_outer <= 1e-6 * n0.D_full
    probe = stability.holder_exponent_probe(f0, perts, ctx.params, ctx.metric, ctx.mesh, ctx.tgrid)
    assert probe.used == 3 and 0 < probe.slope <= 1 + 1e-3


def test_probe_needs_three_points(quick_ctx):
    ctx = quick_ctx
    f0, perts = stability.probe_family(ctx.params, ctx.metric, ctx.mesh, ctx.tgrid, ctx.solver.c_max, [0.1, 1.0])
    with pytest.raises(RegressionError):
        stability.holder_exponent_probe(f0, perts, ctx.params, ctx.metric, ctx.mesh, ctx.tgrid)
    with pytest.raises(ParameterError):
        stability.holder_exponent_probe(f0, perts, ctx.params, ctx.metric, ctx.mesh, ctx.tgrid, noise=0.01)
