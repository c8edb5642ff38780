import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boltzflow.errors import InvalidArgumentError
from boltzflow.grid import Grid
from boltzflow.langevin import LangevinConfig, count_transitions, simulate
from boltzflow.potential import boltzmann_grid, diatomic, double_well


class Quadratic:
    """U = |x|^2 / 2 without a box."""

    def gradient(self, x):
        return np.asarray(x, dtype=float)


def test_zero_noise_descends_into_nearest_well():
    cfg = LangevinConfig(dt=0.01, n_steps=5000, beta=np.inf, x0=(0.3, 0.7))
    traj = simulate(double_well(), cfg)
    np.testing.assert_allclose(traj.points[-1], [1.0, 0.0], atol=1e-4)


def test_ou_stationary_variance():
    # many short chains instead of one long one; the variance oracle is 1/beta
    cfg = LangevinConfig(dt=1e-3, n_steps=6000, beta=2.0, seed=3, burn_in=3000, thin=100, n_chains=400)
    pts = simulate(Quadratic(), cfg).points
    assert pts.var(axis=0).mean() == pytest.approx(0.5, rel=0.05)


def test_deterministic_given_seed():
    cfg = LangevinConfig(dt=0.01, n_steps=300, beta=1.0, seed=11, n_chains=3)
    a = simulate(double_well(), cfg).points
    b = simulate(double_well(), cfg).points
    assert np.array_equal(a, b)
    c = simulate(double_well(), LangevinConfig(dt=0.01, n_steps=300, beta=1.0, seed=12, n_chains=3)).points
    assert not np.array_equal(a, c)


def test_chains_are_independent_of_chain_count():
    one = simulate(double_well(), LangevinConfig(dt=0.01, n_steps=200, beta=1.0, seed=5, n_chains=1)).points
    many = simulate(double_well(), LangevinConfig(dt=0.01, n_steps=200, beta=1.0, seed=5, n_chains=4)).points
    assert np.array_equal(one, many[:200])


def test_frames_burn_in_and_thinning():
    cfg = LangevinConfig(dt=0.01, n_steps=1000, beta=1.0, burn_in=400, thin=6, n_chains=2)
    assert cfg.n_frames == 100
    assert len(simulate(double_well(), cfg)) == 200
    with pytest.raises(InvalidArgumentError):
        LangevinConfig(dt=0.01, n_steps=10, beta=1.0, burn_in=10)
    with pytest.raises(InvalidArgumentError):
        LangevinConfig(dt=-0.01, n_steps=10, beta=1.0)


def test_stays_in_box_and_avoids_singularity():
    spec = diatomic()
    cfg = LangevinConfig(dt=1e-3, n_steps=3000, beta=1.0, x0=(1.2, 0.0), n_chains=8, seed=2)
    pts = simulate(spec, cfg).points
    assert np.all(pts >= -2.5) and np.all(pts <= 2.5)
    assert np.all(np.isfinite(spec.energy(pts)))


@pytest.mark.slow
def test_double_well_marginals_match_boltzmann():
    cfg = LangevinConfig(dt=1e-3, n_steps=12000, beta=1.0, seed=7, burn_in=2000, thin=50, n_chains=500)
    pts = simulate(double_well(), cfg).points
    g = Grid.box((-4, -4), (4, 4), 161)
    rho = boltzmann_grid(double_well(), 1.0, g)
    h = g.spacing
    for axis in (0, 1):
        marg = rho.values.sum(axis=1 - axis) * h[1 - axis]
        edges = np.concatenate([[-4.0], 0.5 * (g.axes[axis][1:] + g.axes[axis][:-1]), [4.0]])
        hist, _ = np.histogram(pts[:, axis], edges, density=True)
        widths = np.diff(edges)
        assert np.sum(np.abs(hist - marg) * widths) < 0.05


def test_transition_examples():
    const = np.tile([1.0, 0.0], (50, 1))
    assert count_transitions(const) == 0
    assert count_transitions(np.array([-1.0, -1.0, 1.0, 1.0])) == 1
    assert count_transitions(np.array([-1.0, 0.4, -1.0, 1.0, -1.0]), lo=-0.5, hi=0.5) == 2
    with pytest.raises(InvalidArgumentError):
        count_transitions(np.zeros((0, 2)))
    with pytest.raises(InvalidArgumentError):
        count_transitions(np.zeros(3), lo=1.0, hi=0.0)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=1, max_size=40),
    st.lists(st.tuples(st.integers(0, 40), st.floats(-0.5, 0.5)), max_size=10),
)
def test_counter_ignores_points_inside_the_band(seq, inserts):
    base = count_transitions(np.array(seq))
    ext = list(seq)
    for pos, val in inserts:
        ext.insert(min(pos, len(ext)), val)
    assert count_transitions(np.array(ext)) == base
