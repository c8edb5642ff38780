import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.stats import kstest, norm

from boltzflow import autograd as ag
from boltzflow.errors import InvalidArgumentError, NumericalError, TrainingDivergedError
from boltzflow.flow import (
    FlowModel,
    TrainConfig,
    alternating_masks,
    build_flow,
    forward,
    grad_nll,
    inverse,
    load_checkpoint,
    log_prob,
    loss_table,
    nll_loss,
    param_count,
    random_flow,
    sample,
    save_checkpoint,
    train,
)
from boltzflow.samples import SampleSet

ENTROPY_2D = 1.0 + np.log(2.0 * np.pi)


def zero_model(dim=2, n_layers=3, hidden=8, convention="masked_full_input", **kw):
    model = build_flow(dim, n_layers, hidden, convention, **kw)
    model.theta[:] = 0.0
    return model


def fd_logdet(model, x, h=1e-6):
    jac = np.empty((x.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        jac[:, j] = (forward(model, x + e)[0] - forward(model, x - e)[0]) / (2 * h)
    return np.linalg.slogdet(jac)[1]


@pytest.mark.parametrize("convention", ["masked_full_input", "partition_input"])
def test_zero_parameters_give_identity(convention):
    model = zero_model(convention=convention)
    x = np.random.default_rng(0).standard_normal((20, 2))
    y, ld = forward(model, x)
    assert np.array_equal(y, x) and np.all(ld == 0)
    z, ldi = inverse(model, x)
    assert np.array_equal(z, x) and np.all(ldi == 0)


def test_fresh_model_is_identity_despite_random_hidden_weights():
    model = build_flow(2, 6, 16, seed=3)
    assert np.any(model.theta != 0)
    x = np.random.default_rng(1).standard_normal((10, 2))
    y, ld = forward(model, x)
    assert np.array_equal(y, x) and np.all(ld == 0)


@pytest.mark.parametrize("convention", ["masked_full_input", "partition_input"])
def test_constant_s_gives_logdet_c(convention):
    c = 0.37
    model = zero_model(n_layers=1, convention=convention)
    b2 = model.blocks()[0]["s"]["b2"]
    active = np.asarray(model.masks[0]) == 0
    if convention == "masked_full_input":
        b2[active] = 5.0 * np.arctanh(c / 5.0)
    else:
        b2[:] = 5.0 * np.arctanh(c / 5.0)
    _, ld = forward(model, np.array([0.3, -1.2]))
    assert ld == pytest.approx(c, abs=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("convention", ["masked_full_input", "partition_input"])
def test_logdet_matches_finite_difference_jacobian(dim, convention):
    rng = np.random.default_rng(dim)
    for trial in range(10):
        model = random_flow(dim, 4, 8, convention, seed=trial, scale=0.4)
        x = rng.standard_normal(dim)
        _, ld = forward(model, x)
        ref = fd_logdet(model, x)
        assert abs(ld - ref) <= 1e-4 * max(abs(ref), 1e-3)


@pytest.mark.parametrize("convention", ["masked_full_input", "partition_input"])
def test_inverse_roundtrip(convention):
    model = random_flow(3, 5, 16, convention, seed=7)
    x = 2.0 * np.random.default_rng(8).standard_normal((10_000, 3))
    y, ld = forward(model, x)
    back, ldi = inverse(model, y)
    assert np.max(np.abs(back - x)) < 1e-9
    assert np.max(np.abs(ld + ldi)) < 1e-10


def test_log_prob_examples():
    assert log_prob(zero_model(), np.zeros(2)) == pytest.approx(-np.log(2 * np.pi), abs=1e-15)
    uni = zero_model(prior="uniform", prior_lower=(0.0, 0.0), prior_upper=(1.0, 1.0))
    assert log_prob(uni, np.array([0.3, 0.6])) == 0.0
    assert log_prob(uni, np.array([1.3, 0.6])) == -np.inf
    assert nll_loss(uni, np.array([[0.2, 0.2], [2.0, 0.0]])) == np.inf


def test_log_prob_normalizes():
    model = random_flow(2, 4, 8, seed=2, scale=0.3)
    # the box is sized from the model's own samples so it covers the bulk
    pts = sample(model, 100_000, seed=0).points
    lo, hi = 1.5 * pts.min(axis=0), 1.5 * pts.max(axis=0)
    gx, gy = np.linspace(lo[0], hi[0], 256), np.linspace(lo[1], hi[1], 256)
    xx, yy = np.meshgrid(gx, gy, indexing="ij")
    dens = np.exp(log_prob(model, np.stack([xx.ravel(), yy.ravel()], 1))).reshape(256, 256)
    total = trapezoid(trapezoid(dens, gy, axis=1), gx)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_sampling():
    s = sample(zero_model(), 10_000, seed=1)
    assert isinstance(s, SampleSet) and len(s) == 10_000 and s.provenance == "flow"
    for k in range(2):
        assert kstest(s.points[:, k], norm.cdf).statistic < 0.02
    assert np.array_equal(s.points, sample(zero_model(), 10_000, seed=1).points)
    uni = zero_model(prior="uniform", prior_lower=(-1.0, 2.0), prior_upper=(1.0, 3.0))
    pts = sample(uni, 2000, seed=0).points
    assert np.all((pts >= [-1.0, 2.0]) & (pts <= [1.0, 3.0]))
    with pytest.raises(InvalidArgumentError):
        sample(uni, 0)


def test_param_count():
    assert param_count(6, 128, 2, "masked_full_input") == 7704
    assert param_count(6, 64, 2, "partition_input") == 2316
    assert param_count(1, 1, 2, "partition_input") == 8
    assert build_flow(2, 6, 128).n_params == 7704
    assert build_flow(2, 6, 64, "partition_input").n_params == 2316


def test_masks_alternate():
    for dim, n in ((2, 6), (3, 5), (5, 4)):
        masks = alternating_masks(dim, n)
        assert all(a != b for a, b in zip(masks, masks[1:]))
        assert all(set(m) == {0, 1} for m in masks)
    with pytest.raises(InvalidArgumentError):
        FlowModel(2, 4, [(1, 0), (1, 0)], np.zeros(param_count(2, 4, 2)))
    with pytest.raises(InvalidArgumentError):
        FlowModel(2, 4, [(1, 1)], np.zeros(param_count(1, 4, 2)))


def test_nll_examples():
    model = zero_model()
    assert nll_loss(model, np.zeros((1, 2))) == pytest.approx(np.log(2 * np.pi), abs=1e-15)
    rm = random_flow(2, 3, 6, seed=4)
    batch = np.random.default_rng(0).standard_normal((17, 2))
    assert nll_loss(rm, np.vstack([batch, batch])) == pytest.approx(nll_loss(rm, batch), rel=1e-14)


def test_t_bias_gradient_vanishes_on_symmetric_batch():
    model = zero_model(n_layers=2, hidden=5)
    x = np.random.default_rng(1).standard_normal((6, 2))
    g = grad_nll(model, np.vstack([x, -x]))
    for k, net, name, shape, off in model.layout():
        if net == "t" and name == "b2":
            assert np.all(np.abs(g[off : off + int(np.prod(shape))]) < 1e-15)


@pytest.mark.parametrize("convention", ["masked_full_input", "partition_input"])
def test_gradient_matches_central_differences(convention):
    model = random_flow(2, 2, 4, convention, seed=5, scale=0.5)
    batch = np.random.default_rng(6).standard_normal((8, 2))
    g = grad_nll(model, batch)
    h = 1e-5
    for i in range(model.n_params):
        mp, mm = model.copy(), model.copy()
        mp.theta[i] += h
        mm.theta[i] -= h
        fd = (nll_loss(mp, batch) - nll_loss(mm, batch)) / (2 * h)
        assert abs(g[i] - fd) <= 1e-5 * max(abs(fd), 1e-3), (i, g[i], fd)


def test_shifted_loss_has_same_gradient():
    model = random_flow(2, 2, 4, seed=1)
    leaf = ag.Tensor(np.array([0.3, -0.2]), requires_grad=True)
    (ag.sum_(ag.tanh(leaf) * leaf)).backward()
    base = leaf.grad.copy()
    leaf2 = ag.Tensor(np.array([0.3, -0.2]), requires_grad=True)
    (ag.sum_(ag.tanh(leaf2) * leaf2) + 7.5).backward()
    assert np.array_equal(base, leaf2.grad)
    batch = np.random.default_rng(2).standard_normal((5, 2))
    shifted = model.copy()
    shifted.prior_lower = None
    assert np.array_equal(grad_nll(model, batch), grad_nll(shifted, batch))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gradient_error_names_layer():
    model = random_flow(2, 2, 4, seed=1)
    with pytest.raises(NumericalError):
        grad_nll(model.copy(), np.array([[np.inf, 0.0]]))
    uni = zero_model(prior="uniform", prior_lower=(0.0, 0.0), prior_upper=(1.0, 1.0))
    with pytest.raises(NumericalError, match="not finite"):
        grad_nll(uni, np.array([[2.0, 2.0]]))


@pytest.mark.slow
def test_training_reaches_gaussian_entropy():
    data = np.random.default_rng(0).standard_normal((10_000, 2))
    model = build_flow(2, 4, 16, seed=0)
    cfg = TrainConfig(batch_size=256, n_epochs=15, learning_rate=3e-3, seed=1, validation_fraction=0.1)
    trained, hist = train(model, data, cfg)
    assert len(hist) == 15
    final = nll_loss(trained, data)
    assert abs(final - ENTROPY_2D) < 0.05
    # a log-det sign error would push the loss below the entropy of the data
    emp = 0.5 * np.linalg.slogdet(np.cov(data.T))[1] + ENTROPY_2D
    assert min(r.train_nll for r in hist) >= emp - 0.1
    assert loss_table(hist).startswith("# epoch train_nll val_nll\n1 ")


def test_training_is_deterministic_and_zero_epochs_is_identity():
    data = np.random.default_rng(3).standard_normal((300, 2))
    model = build_flow(2, 2, 4, seed=0)
    cfg = TrainConfig(batch_size=64, n_epochs=2, seed=4)
    a, ha = train(model, data, cfg)
    b, hb = train(model, data, cfg)
    assert np.array_equal(a.theta, b.theta) and ha == hb
    same, hist = train(model, data, TrainConfig(n_epochs=0))
    assert hist == [] and np.array_equal(same.theta, model.theta)
    assert np.array_equal(same.shift, model.shift) and np.array_equal(same.mix, model.mix)


def test_early_stopping_restores_best():
    data = np.random.default_rng(3).standard_normal((400, 2))
    cfg = TrainConfig(batch_size=32, n_epochs=200, learning_rate=5e-2, seed=0, patience=2, validation_fraction=0.25)
    trained, hist = train(build_flow(2, 2, 8, seed=0), data, cfg)
    assert len(hist) < 200
    best = min(r.val_nll for r in hist)
    val_pts = data[np.sort(np.random.default_rng(0).permutation(400)[:100])]
    assert nll_loss(trained, val_pts) == pytest.approx(best, rel=1e-12)


def overflowing_model():
    # a huge translation bias in the outermost layer overflows y - t for negative data
    model = zero_model(n_layers=2, hidden=4)
    b2 = model.blocks()[1]["t"]["b2"]
    b2[:] = 1.5e308
    return model


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_intermediate_names_layer():
    with pytest.raises(NumericalError, match="layer 1") as info:
        inverse(overflowing_model(), np.array([-1.5e308, -1.5e308]))
    assert info.value.where == "layer 1"


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_reports_epoch():
    data = np.full((20, 2), -1.5e308)
    cfg = TrainConfig(batch_size=5, n_epochs=3, seed=0, whiten=False, validation_fraction=0.0)
    with pytest.raises(TrainingDivergedError, match="layer 1") as info:
        train(overflowing_model(), data, cfg)
    assert info.value.epoch == 1
    with pytest.raises(InvalidArgumentError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(InvalidArgumentError):
        TrainConfig(validation_fraction=1.0)


def test_checkpoint_roundtrip(tmp_path):
    data = np.random.default_rng(3).standard_normal((200, 2)) + [1.0, -2.0]
    cfg = TrainConfig(batch_size=50, n_epochs=2, seed=0)
    model, hist = train(build_flow(2, 3, 6, "partition_input", seed=0), data, cfg)
    path = tmp_path / "m.json"
    save_checkpoint(path, model, cfg, hist, seed=0)
    loaded, doc = load_checkpoint(path)
    assert np.array_equal(loaded.theta, model.theta)
    assert np.array_equal(loaded.mix, model.mix) and np.array_equal(loaded.shift, model.shift)
    assert loaded.convention == "partition_input" and loaded.masks == model.masks
    x = np.random.default_rng(1).standard_normal((50, 2))
    assert np.array_equal(log_prob(loaded, x), log_prob(model, x))
    assert len(doc["loss_history"]) == 2 and doc["seed"] == 0
