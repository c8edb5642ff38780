import numpy as np
import pytest

from boltzflow.errors import ConvergenceError, InvalidArgumentError, OutOfDomainError
from boltzflow.grid import Grid
from boltzflow.pde import NeumannProblem, laplacian, node_gradient, sample_gradient, solve_neumann
from boltzflow.potential import GridDensity
from boltzflow.targets import two_gaussians_1d


def manufactured(n):
    g = Grid.box((0.0, 0.0), (1.0, 1.0), n)
    x = g.nodes()
    exact = np.cos(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])
    return g, exact, 2.0 * np.pi**2 * exact


def l2_error(g, u, exact):
    err = (u - u.mean()) - (exact - exact.mean())
    return np.sqrt(g.integrate(err**2))


def test_zero_rhs_gives_zero():
    g = Grid.box((0.0, 0.0), (1.0, 1.0), 17)
    fld = solve_neumann(NeumannProblem(g, np.zeros(g.shape)))
    assert np.all(fld.u == 0) and np.all(fld.grad_u == 0)


def test_manufactured_solution_second_order():
    errs = []
    for n in (33, 65, 129):
        g, exact, f = manufactured(n)
        fld = solve_neumann(NeumannProblem(g, f, compatibility_tol=1e-6), tol=1e-11)
        assert abs(fld.u.mean()) < 1e-12
        assert fld.residual_norm <= 1e-11
        errs.append(l2_error(g, fld.u, exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.7) & (orders < 2.3)), orders


def test_boundary_normal_derivative_is_zero():
    g, _, f = manufactured(33)
    fld = solve_neumann(NeumannProblem(g, f, compatibility_tol=1e-6))
    assert np.all(fld.grad_u[0, :, 0] == 0) and np.all(fld.grad_u[-1, :, 0] == 0)
    assert np.all(fld.grad_u[:, 0, 1] == 0) and np.all(fld.grad_u[:, -1, 1] == 0)


def test_weighted_operator_is_symmetric():
    g = Grid.box((0.0, 0.0), (2.0, 1.0), (9, 7))
    w = g.weights()
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    assert np.sum(a * w * laplacian(b, g)) == pytest.approx(np.sum(b * w * laplacian(a, g)), rel=1e-12)


def test_one_dimensional_cdf_difference():
    r0, r1 = two_gaussians_1d()
    g = Grid.box((0.0,), (1.0,), 1025)
    rho0 = GridDensity.from_function(g, r0.pdf)
    rho1 = GridDensity.from_function(g, r1.pdf)
    fld = solve_neumann(NeumannProblem.from_densities(rho1, rho0), tol=1e-9)
    x = g.axes[0]
    # -u'' = rho0 - rho1 with u'(0) = 0 integrates to u' = F1 - F0
    np.testing.assert_allclose(fld.grad_u[:, 0], r1.cdf_1d(x) - r0.cdf_1d(x), atol=2e-5)


def test_incompatible_data_rejected():
    g = Grid.box((0.0, 0.0), (1.0, 1.0), 9)
    with pytest.raises(InvalidArgumentError, match="integral"):
        solve_neumann(NeumannProblem(g, np.ones(g.shape)))
    with pytest.raises(InvalidArgumentError):
        solve_neumann(NeumannProblem(g, np.zeros((3, 3))))


def test_convergence_error_carries_residual():
    g, _, f = manufactured(65)
    with pytest.raises(ConvergenceError) as info:
        solve_neumann(NeumannProblem(g, f, compatibility_tol=1e-6), tol=1e-12, max_iter=5)
    assert info.value.residual > 1e-12


def test_constant_shift_is_projected_away():
    g, _, f = manufactured(33)
    a = solve_neumann(NeumannProblem(g, f, compatibility_tol=1e-6), tol=1e-12)
    b = solve_neumann(NeumannProblem(g, f + 1e-9, compatibility_tol=1e-6), tol=1e-12)
    assert np.max(np.abs(a.u - b.u)) < 1e-10


def test_symmetric_rhs_gives_symmetric_solution():
    g = Grid.box((0.0, 0.0), (1.0, 1.0), 33)
    x = g.nodes()
    f = np.exp(-20 * ((x[..., 0] - 0.3) ** 2 + (x[..., 1] - 0.3) ** 2))
    f = f - g.integrate(f)
    fld = solve_neumann(NeumannProblem(g, f), tol=1e-12)
    assert np.max(np.abs(fld.u - fld.u.T)) < 1e-10


def test_sample_gradient_interpolation():
    g, _, f = manufactured(17)
    fld = solve_neumann(NeumannProblem(g, f, compatibility_tol=1e-6))
    node = g.nodes()[3, 5]
    assert np.array_equal(sample_gradient(fld, node), fld.grad_u[3, 5])
    mid = 0.5 * (g.nodes()[3, 5] + g.nodes()[4, 5])
    np.testing.assert_allclose(sample_gradient(fld, mid), 0.5 * (fld.grad_u[3, 5] + fld.grad_u[4, 5]), rtol=1e-12)
    zero = solve_neumann(NeumannProblem(g, np.zeros(g.shape)))
    assert np.all(sample_gradient(zero, [0.31, 0.77]) == 0)
    with pytest.raises(OutOfDomainError):
        sample_gradient(fld, [1.5, 0.5])


def test_node_gradient_exact_for_linear_interior():
    g = Grid.box((0.0, 0.0), (1.0, 1.0), 11)
    u = 3.0 * g.nodes()[..., 0] - 2.0 * g.nodes()[..., 1]
    grad = node_gradient(u, g)
    np.testing.assert_allclose(grad[1:-1, 1:-1, 0], 3.0)
    np.testing.assert_allclose(grad[1:-1, 1:-1, 1], -2.0)
