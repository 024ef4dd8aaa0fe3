import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from obstaclewave import domain, geometry, inverse
from obstaclewave.domain import AnnularMesh, TimeGrid
from obstaclewave.errors import ParameterError, ShapeError
from obstaclewave.stability import BoundaryProfile, TimeProfile

MESH = AnnularMesh(1.0, 2.0, 17, 32)
TG = TimeGrid(2.0, 50)
B = TimeProfile("t2_smoothstep", 2.0)
A_TRUE = BoundaryProfile(2.0, (1.0,))


@pytest.fixture(scope="module", params=["identity", "conformal_trig"])
def problem(request):
    met = geometry.make_metric(request.param)
    tg = TG if request.param == "identity" else TimeGrid(2.0, 60)
    data = inverse.synthesize_data(A_TRUE, B, met, MESH, tg, refine=2)
    return inverse.InverseProblem(met, MESH, tg, B, data, reg_lambda=1e-6)


def test_measurement_operators_match_boundary_decomposition(problem):
    u = np.random.default_rng(0).normal(size=problem.shape)
    Mtr, Mdn = inverse.outer_measurement_operators(problem.metric, MESH, problem.shape[0])
    assert np.array_equal(Mtr @ u.ravel(), u[MESH.n_r - 1])
    dn = geometry.boundary_decompose(problem.metric, u[:MESH.n_r], MESH, "Gamma0").dnu
    assert np.allclose(Mdn @ u.ravel(), dn, atol=1e-12)


def test_h1_matrix_reproduces_boundary_norm(problem):
    a = A_TRUE(MESH.theta) + 0.3 * np.sin(3 * MESH.theta)
    H = inverse.h1_gamma_matrix(problem.metric, MESH)
    assert a @ (H @ a) == pytest.approx(domain.boundary_h1_norm(a, problem.metric, MESH, "Gamma") ** 2, rel=1e-12)


@given(seed=st.integers(0, 2 ** 16))
def test_adjoint_is_the_exact_transpose(problem, seed):
    # <A a, w> = <a, A^T w> for the linear map a -> all states
    rng = np.random.default_rng(seed)
    a = rng.normal(size=MESH.n_theta)
    w = rng.normal(size=(problem.tgrid.n_t + 1, problem.shape[0] * MESH.n_theta))
    lhs = np.sum(problem.states(a) * w)
    rhs = a @ (problem.b @ problem._adjoint(w)[:, :MESH.n_theta])
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_gradient_matches_finite_differences(problem):
    rng = np.random.default_rng(1)
    a = rng.normal(size=MESH.n_theta)
    _, g = problem.objective_and_gradient(a)
    for _ in range(3):
        d = rng.normal(size=a.size)
        h = 1e-4
        fd = (problem.objective(a + h * d) - problem.objective(a - h * d)) / (2 * h)
        # J is quadratic, so central differences are exact up to round-off
        assert fd == pytest.approx(g @ d, rel=1e-6)


def test_twin_experiment_recovers_profile(problem):
    res = inverse.reconstruct(problem, 100, a_true=A_TRUE)
    assert res.rel_error <= 0.05
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res.objective_history, res.objective_history[1:]))
    assert res.class_check["sign_constant"] and res.class_check["alpha_hat"] > 0.5


def test_inverse_crime_is_nearly_exact():
    met = geometry.identity_metric()
    data = inverse.synthesize_data(A_TRUE, B, met, MESH, TG, refine=1)
    res = inverse.reconstruct(inverse.InverseProblem(met, MESH, TG, B, data), 200, a_true=A_TRUE)
    assert res.rel_error <= 1e-5


def test_zero_data_stops_immediately():
    met = geometry.identity_metric()
    z = np.zeros((TG.n_t + 1, MESH.n_theta))
    res = inverse.reconstruct(inverse.InverseProblem(met, MESH, TG, B, inverse.OuterData(z, z)))
    assert res.iterations == 0 and res.stop_reason == "zero gradient at start"


def test_noise_requires_rng_and_is_seeded():
    met = geometry.identity_metric()
    with pytest.raises(ParameterError):
        inverse.synthesize_data(A_TRUE, B, met, MESH, TG, noise_level=0.01)
    d1 = inverse.synthesize_data(A_TRUE, B, met, MESH, TG, noise_level=0.01, rng=np.random.default_rng(7))
    d2 = inverse.synthesize_data(A_TRUE, B, met, MESH, TG, noise_level=0.01, rng=np.random.default_rng(7))
    assert np.array_equal(d1.u_trace, d2.u_trace) and d1.noise_level == 0.01


def test_input_validation():
    met = geometry.identity_metric()
    z = np.zeros((TG.n_t + 1, MESH.n_theta))
    with pytest.raises(ShapeError):
        inverse.OuterData(z, z[:-1])
    with pytest.raises(ShapeError):
        inverse.InverseProblem(met, MESH, TG, B, inverse.OuterData(z[:-1], z[:-1]))
    with pytest.raises(ParameterError):
        inverse.InverseProblem(met, MESH, TG, B, inverse.OuterData(z, z), reg_lambda=-1.0)


def test_outer_data_file_roundtrip(tmp_path):
    met = geometry.identity_metric()
    d = inverse.synthesize_data(A_TRUE, B, met, MESH, TG)
    p = tmp_path / "outer.npz"
    np.savez(p, u_trace=d.u_trace, du_trace=d.du_trace, noise_level=np.array(0.0))
    e = inverse.load_outer_data(p)
    assert np.array_equal(e.u_trace, d.u_trace) and np.array_equal(e.du_trace, d.du_trace)
