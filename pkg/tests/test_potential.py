import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from boltzflow.errors import InvalidArgumentError, OverflowDomainError, SingularityError
from boltzflow.grid import Grid
from boltzflow.potential import (
    GridDensity,
    PotentialSpec,
    boltzmann_grid,
    diatomic,
    double_well,
    l1_distance,
    lower_bound,
    regularize,
    regularized_value,
    smoothstep_cutoff,
)


def fd_gradient(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def small_molecule():
    # four atoms in 3D forming a chain with one torsion
    return PotentialSpec(
        kind="composite",
        lower=(-3.0,) * 12,
        upper=(3.0,) * 12,
        charges=(0.3, -0.2, 0.1, -0.2),
        lj_a=1.0,
        lj_b=1.0,
        bonds=((0, 1, 10.0, 1.1), (1, 2, 10.0, 1.1), (2, 3, 10.0, 1.1)),
        angles=((0, 1, 2, 5.0, 1.9), (1, 2, 3, 5.0, 1.9)),
        torsions=((0, 1, 2, 3, ((1, 0.5, 0.1), (3, 0.2, -0.4))),),
    )


def test_double_well_values():
    dw = double_well()
    assert dw.energy([1.0, 0.0]) == 0.0
    assert dw.energy([-1.0, 0.0]) == 0.0
    assert dw.energy([0.0, 0.0]) == pytest.approx(0.25)
    np.testing.assert_allclose(dw.gradient([1.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(dw.gradient([2.0, 3.0]), [2.0 * 3.0, 3.0])


def test_diatomic_minimum_and_singularity():
    spec = diatomic(a=1.0, b=1.0)
    r_min = 2.0 ** (1.0 / 6.0)
    assert spec.energy([r_min, 0.0]) == pytest.approx(-0.25)
    assert lower_bound(spec) == pytest.approx(-0.25)
    assert spec.energy([0.0, 0.0]) == np.inf
    with pytest.raises(SingularityError):
        spec.gradient([0.0, 0.0])


def test_diatomic_attractive_coulomb_bound():
    spec = diatomic(a=1.0, b=1.0, charges=(1.0, -1.0))
    r = np.linspace(0.3, 20.0, 200001)
    pts = np.stack([r, np.zeros_like(r)], axis=1)
    assert lower_bound(spec) <= spec.energy(pts).min() + 1e-9


def test_invalid_pair_parameters():
    with pytest.raises(InvalidArgumentError):
        diatomic(a=0.0, b=1.0)
    with pytest.raises(InvalidArgumentError):
        diatomic(a=0.0, b=0.0, charges=(1.0, -1.0))
    with pytest.raises(InvalidArgumentError):
        PotentialSpec("double_well", (0.0, 0.0), (-1.0, 1.0))


@pytest.mark.parametrize("make", [double_well, lambda: diatomic(a=1.0, b=1.0, charges=(0.5, 0.5)), small_molecule])
def test_gradient_matches_finite_differences(make):
    spec = make()
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = rng.uniform(0.6, 1.4, spec.dim) * rng.choice([-1, 1], spec.dim)
        if spec.kind == "composite":
            x = np.array([[0, 0, 0], [1.1, 0, 0], [1.5, 1.0, 0], [2.6, 1.1, 0.7]], dtype=float).ravel()
            x += 0.05 * rng.standard_normal(x.size)
        g = spec.gradient(x)
        fd = fd_gradient(spec.energy, x)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-6)


def test_batch_and_single_agree():
    spec = diatomic()
    pts = np.random.default_rng(1).uniform(0.5, 2.0, (7, 2))
    batch = spec.energy(pts)
    for p, e in zip(pts, batch):
        assert spec.energy(p) == e


def test_smoothstep_profile_is_c1_and_monotone():
    u = np.linspace(0.0, 3.0, 30001)
    chi = smoothstep_cutoff(u)
    assert np.all(chi[u <= 1] == 0) and np.all(chi[u >= 2] == 1)
    assert np.all(np.diff(chi) >= 0)
    slope = np.diff(chi) / np.diff(u)
    assert np.max(np.abs(np.diff(slope))) < 1e-3


@settings(max_examples=200, deadline=None)
@given(st.floats(-5.0, 50.0, allow_nan=False), st.sampled_from([1.0, 0.5, 0.25, 0.125]))
def test_regularized_value_properties(u, eps):
    v = regularized_value(u, eps)
    if u <= 1.0 / eps:
        assert v == u
    assert v <= max(u, 2.0 / eps) + 1e-12
    assert v <= 2.0 / eps + 1e-12


def test_regularized_energy_finite_and_capped():
    spec = diatomic()
    reg = regularize(spec, 0.25)
    assert reg.energy([0.0, 0.0]) == 8.0
    assert reg.energy([1e-3, 0.0]) == 8.0
    x = np.array([1.3, 0.4])
    assert reg.energy(x) == spec.energy(x)
    assert reg.lower_bound == pytest.approx(-0.25)
    with pytest.raises(InvalidArgumentError):
        regularize(spec, 0.0)


def test_regularized_gradient_matches_finite_differences():
    reg = regularize(diatomic(), 0.5)
    # radii straddling the transition band 1/eps < U < 2/eps
    for r in (0.92, 0.95, 0.98, 1.05, 1.5):
        x = np.array([r, 0.1])
        np.testing.assert_allclose(reg.gradient(x), fd_gradient(reg.energy, x), rtol=1e-5, atol=1e-6)


def test_boltzmann_grid_normalized():
    g = Grid.box((-4, -4), (4, 4), 201)
    rho = boltzmann_grid(double_well(), 1.0, g)
    assert rho.total_mass() == pytest.approx(1.0, abs=1e-12)
    # the double well separates, so Z is a product of two 1D integrals
    z1 = quad(lambda t: np.exp(-0.25 * (t * t - 1) ** 2), -4, 4)[0]
    z2 = quad(lambda t: np.exp(-0.5 * t * t), -4, 4)[0]
    assert rho.Z == pytest.approx(z1 * z2, rel=1e-4)


def test_boltzmann_overflow_error():
    g = Grid.box((-4, -4), (4, 4), 21)
    with pytest.raises(OverflowDomainError):
        boltzmann_grid(lambda x: np.full(len(x), 1e6), 1000.0, g)
    with pytest.raises(InvalidArgumentError):
        boltzmann_grid(double_well(), -1.0, g)


def test_l1_distance_and_grid_density():
    g = Grid.box((0.0,), (1.0,), 101)
    a = GridDensity.from_values(g, np.ones(101))
    b = GridDensity.from_function(g, lambda x: 2.0 * x[:, 0])
    assert a.total_mass() == pytest.approx(1.0)
    assert l1_distance(a, a) == 0.0
    assert l1_distance(a, b) == pytest.approx(0.5, abs=1e-3)
    assert b(np.array([0.5])) == pytest.approx(1.0)
