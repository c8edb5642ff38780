"""RealNVP normalizing flow with affine coupling layers.

The model maps prior space to data space. One coupling layer with mask ``m``
(ones mark the pass-through partition ``a``) acts as

    y = x * exp(s(x_a)) + t(x_a)

on the active partition ``b`` and leaves ``x_a`` unchanged, so
``log|det J| = sum_j s_j``. Both ``s`` and ``t`` are one-hidden-layer tanh
perceptrons. Two conditioner conventions are supported:

``masked_full_input``
    the subnet sees the masked full vector ``x * m`` and emits ``d`` outputs,
    of which only the active ones are used;
``partition_input``
    the subnet sees only ``x_a`` and emits ``d_b`` outputs.

An affine whitening ``y -> shift + scale * (mix @ y)`` closes the stack, with
``mix`` orthogonal. Its default is the identity; :func:`train` fits ``shift``
and ``scale`` to the data's per-axis mean and spread and, by default, sets
``mix`` to the orthonormal DCT-II matrix. The rotation matters for data whose
coordinates are independent (the double well): there every single-layer
coupling update has zero expected gradient at the identity, and training from
the identity start stalls on that saddle.

Every numerical routine is written against :mod:`boltzflow.autograd`'s
dispatching helpers, so the same code path runs on plain arrays for
evaluation and on tensors for gradients.
"""

from __future__ import annotations

import base64
import copy
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dct

from . import autograd as ag
from .errors import InvalidArgumentError, NumericalError, TrainingDivergedError
from .samples import SampleSet

CONVENTIONS = ("masked_full_input", "partition_input")
PRIORS = ("normal", "uniform")
BLOCKS = ("W1", "b1", "W2", "b2")
CHECKPOINT_FORMAT = "boltzflow-realnvp"
CHECKPOINT_VERSION = 1

_LOG_2PI = float(np.log(2.0 * np.pi))


def alternating_masks(dim: int, n_layers: int) -> list[tuple[int, ...]]:
    """Checkerboard masks that flip from one layer to the next."""
    if dim < 2:
        raise InvalidArgumentError("coupling flows need dim >= 2")
    return [tuple(int((j + k) % 2 == 0) for j in range(dim)) for k in range(n_layers)]


def _subnet_io(mask, convention: str) -> tuple[int, int]:
    d = len(mask)
    if convention == "masked_full_input":
        return d, d
    d_a = int(sum(mask))
    return d_a, d - d_a


def _block_shapes(mask, hidden: int, convention: str) -> list[tuple[str, str, tuple]]:
    n_in, n_out = _subnet_io(mask, convention)
    shapes = {"W1": (n_in, hidden), "b1": (hidden,), "W2": (hidden, n_out), "b2": (n_out,)}
    return [(net, name, shapes[name]) for net in ("s", "t") for name in BLOCKS]


def param_count(n_layers: int, hidden: int, dim: int, convention: str = "masked_full_input") -> int:
    """Trainable weights: per subnet ``n_in*h + h + h*n_out + n_out``, two
    subnets per layer; the whitening transform is not trained."""
    if convention not in CONVENTIONS:
        raise InvalidArgumentError(f"unknown convention {convention!r}")
    if n_layers < 1 or hidden < 1 or dim < 2:
        raise InvalidArgumentError("need n_layers >= 1, hidden >= 1, dim >= 2")
    total = 0
    for mask in alternating_masks(dim, n_layers):
        n_in, n_out = _subnet_io(mask, convention)
        total += 2 * (n_in * hidden + hidden + hidden * n_out + n_out)
    return total


@dataclass
class CouplingLayerSpec:
    mask: tuple[int, ...]
    subnet_convention: str
    hidden_units: int
    s_weights: dict
    t_weights: dict
    s_clamp: float


@dataclass
class FlowModel:
    """Parameters live in one flat vector ``theta``; per-layer views are
    produced by :meth:`blocks`."""

    dim: int
    hidden: int
    masks: list[tuple[int, ...]]
    theta: np.ndarray
    convention: str = "masked_full_input"
    prior: str = "normal"
    prior_lower: tuple[float, ...] | None = None
    prior_upper: tuple[float, ...] | None = None
    s_clamp: float = 5.0
    shift: np.ndarray | None = None
    scale: np.ndarray | None = None
    mix: np.ndarray | None = None

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise InvalidArgumentError(f"unknown convention {self.convention!r}")
        if self.prior not in PRIORS:
            raise InvalidArgumentError(f"unknown prior {self.prior!r}")
        if not self.s_clamp > 0:
            raise InvalidArgumentError("s_clamp must be positive")
        self.masks = [tuple(int(v) for v in m) for m in self.masks]
        for k, m in enumerate(self.masks):
            if len(m) != self.dim or set(m) != {0, 1}:
                raise InvalidArgumentError(f"mask {k} must be a 0/1 vector of length {self.dim} with both values")
            if k > 0 and m == self.masks[k - 1]:
                raise InvalidArgumentError(f"masks {k - 1} and {k} are identical")
        self.theta = np.asarray(self.theta, dtype=float)
        n = sum(int(np.prod(shape)) for m in self.masks for _, _, shape in _block_shapes(m, self.hidden, self.convention))
        if self.theta.shape != (n,):
            raise InvalidArgumentError(f"theta has shape {self.theta.shape}, expected ({n},)")
        if not np.all(np.isfinite(self.theta)):
            raise InvalidArgumentError("non-finite weights")
        self.shift = np.zeros(self.dim) if self.shift is None else np.asarray(self.shift, dtype=float)
        self.scale = np.ones(self.dim) if self.scale is None else np.asarray(self.scale, dtype=float)
        if np.any(self.scale <= 0):
            raise InvalidArgumentError("whitening scale must be positive")
        self.mix = np.eye(self.dim) if self.mix is None else np.asarray(self.mix, dtype=float)
        if self.mix.shape != (self.dim, self.dim) or not np.allclose(self.mix @ self.mix.T, np.eye(self.dim), atol=1e-12):
            raise InvalidArgumentError("whitening mix must be an orthogonal d x d matrix")
        if self.prior == "uniform":
            if self.prior_lower is None or self.prior_upper is None:
                raise InvalidArgumentError("uniform prior needs prior_lower and prior_upper")
            self.prior_lower = tuple(float(v) for v in self.prior_lower)
            self.prior_upper = tuple(float(v) for v in self.prior_upper)
            if len(self.prior_lower) != self.dim or any(lo >= hi for lo, hi in zip(self.prior_lower, self.prior_upper)):
                raise InvalidArgumentError("invalid uniform-prior box")

    @property
    def n_layers(self) -> int:
        return len(self.masks)

    @property
    def n_params(self) -> int:
        return self.theta.size

    def layout(self):
        """Yield ``(layer, net, block, shape, offset)`` in storage order."""
        off = 0
        for k, m in enumerate(self.masks):
            for net, name, shape in _block_shapes(m, self.hidden, self.convention):
                yield k, net, name, shape, off
                off += int(np.prod(shape))

    def blocks(self, theta=None) -> list[dict]:
        """Per-layer dictionaries ``{"s": {...}, "t": {...}}`` of array views."""
        theta = self.theta if theta is None else theta
        out = [{"s": {}, "t": {}} for _ in self.masks]
        for k, net, name, shape, off in self.layout():
            out[k][net][name] = theta[off : off + int(np.prod(shape))].reshape(shape)
        return out

    @property
    def layers(self) -> list[CouplingLayerSpec]:
        return [
            CouplingLayerSpec(m, self.convention, self.hidden, b["s"], b["t"], self.s_clamp)
            for m, b in zip(self.masks, self.blocks())
        ]

    def copy(self) -> "FlowModel":
        return copy.deepcopy(self)


def build_flow(
    dim: int,
    n_layers: int,
    hidden: int,
    convention: str = "masked_full_input",
    prior: str = "normal",
    prior_lower=None,
    prior_upper=None,
    s_clamp: float = 5.0,
    seed: int | None = 0,
    init_scale: float = 1.0,
    output_init_scale: float = 0.0,
) -> FlowModel:
    """Fresh model that starts as, or close to, the identity map.

    Hidden weights are uniform in ``+-init_scale * sqrt(6 / (n_in + h))``;
    output weights are ``N(0, output_init_scale^2)`` and biases are zero.
    With the default ``output_init_scale=0`` the model is exactly the
    identity. A small positive value breaks the symmetry that otherwise
    leaves the output weights with a rank-one gradient when the coordinates
    of the data are independent.
    """
    if output_init_scale < 0 or init_scale < 0:
        raise InvalidArgumentError("initialization scales must be nonnegative")
    masks = alternating_masks(dim, n_layers)
    n = param_count(n_layers, hidden, dim, convention)
    model = FlowModel(dim, hidden, masks, np.zeros(n), convention, prior, prior_lower, prior_upper, s_clamp)
    rng = np.random.default_rng(seed)
    for _, _, name, shape, off in model.layout():
        size = int(np.prod(shape))
        if name == "W1":
            bound = init_scale * np.sqrt(6.0 / (shape[0] + shape[1]))
            model.theta[off : off + size] = rng.uniform(-bound, bound, size)
        elif name == "W2" and output_init_scale > 0:
            model.theta[off : off + size] = output_init_scale * rng.standard_normal(size)
    return model


def random_flow(dim, n_layers, hidden, convention="masked_full_input", seed=0, scale=0.5, **kw) -> FlowModel:
    """Model with every weight drawn from ``N(0, scale^2)``; for tests and demos."""
    model = build_flow(dim, n_layers, hidden, convention, seed=seed, **kw)
    rng = np.random.default_rng(seed)
    model.theta = scale * rng.standard_normal(model.n_params)
    return model


# --------------------------------------------------------------------------
# coupling algebra shared by the array and tensor paths


def _selectors(mask, convention):
    """Matrices that gather the conditioner input and scatter subnet output."""
    m = np.asarray(mask, dtype=float)
    if convention == "masked_full_input":
        return None, np.diag(1.0 - m)
    a = np.flatnonzero(m)
    b = np.flatnonzero(1.0 - m)
    gather = np.zeros((m.size, a.size))
    gather[a, np.arange(a.size)] = 1.0
    scatter = np.zeros((b.size, m.size))
    scatter[np.arange(b.size), b] = 1.0
    return gather, scatter


def _mlp(net: dict, x):
    h = ag.tanh(x @ net["W1"] + net["b1"])
    return h @ net["W2"] + net["b2"]


def _coupling_st(mask, convention, s_clamp, params, x):
    gather, scatter = _selectors(mask, convention)
    inp = x * np.asarray(mask, dtype=float) if gather is None else x @ gather
    s_raw = _mlp(params["s"], inp)
    s = ag.tanh(s_raw * (1.0 / s_clamp)) * s_clamp
    return s @ scatter, _mlp(params["t"], inp) @ scatter


def _check(arr, where):
    if not np.all(np.isfinite(ag.value(arr))):
        raise NumericalError(f"non-finite value in {where}", where=where)


def _forward_pass(model: FlowModel, x, blocks):
    logdet = 0.0
    for k, (mask, params) in enumerate(zip(model.masks, blocks)):
        s, t = _coupling_st(mask, model.convention, model.s_clamp, params, x)
        x = x * ag.exp(s) + t
        logdet = logdet + ag.sum_(s, axis=1)
        _check(x, f"layer {k}")
    x = (x @ model.mix.T) * model.scale + model.shift
    return x, logdet + float(np.sum(np.log(model.scale)))


def _inverse_pass(model: FlowModel, y, blocks):
    y = ((y - model.shift) * (1.0 / model.scale)) @ model.mix
    logdet = -float(np.sum(np.log(model.scale)))
    for k in reversed(range(model.n_layers)):
        s, t = _coupling_st(model.masks[k], model.convention, model.s_clamp, blocks[k], y)
        y = (y - t) * ag.exp(-s)
        logdet = logdet - ag.sum_(s, axis=1)
        _check(y, f"layer {k}")
    return y, logdet


def _prior_log_prob(model: FlowModel, x):
    if model.prior == "normal":
        return ag.sum_(x * x, axis=1) * (-0.5) - 0.5 * model.dim * _LOG_2PI
    lo = np.asarray(model.prior_lower)
    hi = np.asarray(model.prior_upper)
    xv = ag.value(x)
    inside = np.all((xv >= lo) & (xv <= hi), axis=1)
    return np.where(inside, -float(np.sum(np.log(hi - lo))), -np.inf)


def _batch(x, dim):
    single = np.ndim(x) == 1
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    if xb.shape[1] != dim:
        raise InvalidArgumentError(f"expected points of dimension {dim}, got {xb.shape[1]}")
    if not np.all(np.isfinite(xb)):
        raise InvalidArgumentError("non-finite input")
    return xb, single


def forward(model: FlowModel, x):
    """Prior space to data space; returns ``(y, logdet)`` with the exact
    ``log|det dF/dx|``. Accepts one point or an ``(n, d)`` batch."""
    xb, single = _batch(x, model.dim)
    y, ld = _forward_pass(model, xb, model.blocks())
    ld = np.broadcast_to(ld, (xb.shape[0],)).copy()
    return (y[0], float(ld[0])) if single else (y, ld)


def inverse(model: FlowModel, y):
    """Data space to prior space; ``logdet_inv = -logdet`` of the forward map."""
    yb, single = _batch(y, model.dim)
    x, ld = _inverse_pass(model, yb, model.blocks())
    ld = np.broadcast_to(ld, (yb.shape[0],)).copy()
    return (x[0], float(ld[0])) if single else (x, ld)


def log_prob(model: FlowModel, y):
    """``log rho0(F^-1(y)) + log|det dF^-1/dy|``; ``-inf`` outside a uniform prior's box."""
    yb, single = _batch(y, model.dim)
    x, ld = _inverse_pass(model, yb, model.blocks())
    lp = _prior_log_prob(model, x) + ld
    return float(lp[0]) if single else np.asarray(lp, dtype=float)


def _points(data) -> np.ndarray:
    pts = data.points if isinstance(data, SampleSet) else np.atleast_2d(np.asarray(data, dtype=float))
    if pts.shape[0] == 0:
        raise InvalidArgumentError("empty batch")
    return pts


def nll_loss(model: FlowModel, batch) -> float:
    """Mean negative log-likelihood; ``+inf`` if any point has zero density."""
    return float(-np.mean(log_prob(model, _points(batch))))


def _loss_and_grad(model: FlowModel, pts: np.ndarray):
    leaves = [ag.Tensor(model.theta[off : off + int(np.prod(shape))].reshape(shape), requires_grad=True)
              for _, _, _, shape, off in model.layout()]
    blocks = [{"s": {}, "t": {}} for _ in model.masks]
    for leaf, (k, net, name, _, _) in zip(leaves, model.layout()):
        blocks[k][net][name] = leaf
    x, ld = _inverse_pass(model, pts, blocks)
    loss = -(_prior_log_prob(model, x) + ld).mean()
    if not np.isfinite(loss.data):
        return float(loss.data), None
    loss.backward()
    grad = np.empty_like(model.theta)
    for leaf, (k, net, name, shape, off) in zip(leaves, model.layout()):
        g = np.zeros(shape) if leaf.grad is None else leaf.grad
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in layer {k}, block {net}.{name}", where=f"layer {k} {net}.{name}")
        grad[off : off + g.size] = g.ravel()
    return float(loss.data), grad


def grad_nll(model: FlowModel, batch) -> np.ndarray:
    """Reverse-mode gradient of :func:`nll_loss` in ``theta`` layout.

    Raises
    ------
    NumericalError
        If the loss or a gradient block is not finite; the message names the
        layer and block.
    """
    loss, grad = _loss_and_grad(model, _points(batch))
    if grad is None:
        raise NumericalError(f"loss is not finite ({loss})", where="loss")
    return grad


def sample(model: FlowModel, n: int, seed: int | None = 0) -> SampleSet:
    """``n`` i.i.d. prior draws pushed through :func:`forward`."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if model.prior == "normal":
        x = rng.standard_normal((n, model.dim))
    else:
        lo = np.asarray(model.prior_lower)
        hi = np.asarray(model.prior_upper)
        x = lo + (hi - lo) * rng.random((n, model.dim))
    y, _ = forward(model, x)
    return SampleSet(y, "flow", seed, {"n_layers": model.n_layers, "hidden": model.hidden,
                                       "convention": model.convention})


# --------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    """Optimizer and data-split settings for :func:`train`.

    ``weight_init_scale`` and ``output_init_scale`` are applied by
    :func:`build_flow`; they are kept here so a checkpoint records how its
    model was initialized.
    """

    batch_size: int = 256
    n_epochs: int = 200
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    weight_init_scale: float = 1.0
    output_init_scale: float = 0.01
    validation_fraction: float = 0.1
    patience: int = 0
    whiten: bool = True
    whiten_rotation: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be positive")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidArgumentError("validation_fraction must lie in [0, 1)")
        if self.batch_size < 1 or self.n_epochs < 0 or self.patience < 0:
            raise InvalidArgumentError("batch_size >= 1, n_epochs >= 0 and patience >= 0 required")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0 and self.adam_eps > 0):
            raise InvalidArgumentError("invalid Adam constants")
        if self.weight_init_scale < 0 or self.output_init_scale < 0:
            raise InvalidArgumentError("initialization scales must be nonnegative")


@dataclass
class LossRecord:
    epoch: int
    train_nll: float
    val_nll: float | None = None


def fit_whitening(model: FlowModel, pts: np.ndarray, rotation: bool = True) -> None:
    """Set the output affine map to the data's per-axis mean and std, mixed
    by the orthonormal DCT-II matrix when ``rotation`` is true."""
    std = pts.std(axis=0)
    model.shift = pts.mean(axis=0)
    model.scale = np.where(std > 0, std, 1.0)
    model.mix = dct(np.eye(model.dim), norm="ortho", axis=0) if rotation else np.eye(model.dim)


def train(model: FlowModel, data, cfg: TrainConfig | None = None):
    """Minibatch Adam on the negative log-likelihood.

    Returns ``(trained_model, history)``; ``history`` holds one
    :class:`LossRecord` per completed epoch with the full-set train and
    validation losses. With ``patience > 0`` training stops once the
    validation loss has not improved for that many epochs, and the best
    parameters seen are returned. The input model is not modified.

    Raises
    ------
    TrainingDivergedError
        If a loss becomes NaN or a gradient is non-finite.
    """
    cfg = cfg or TrainConfig()
    pts = _points(data)
    if pts.shape[1] != model.dim:
        raise InvalidArgumentError(f"data dimension {pts.shape[1]} does not match model dimension {model.dim}")
    model = model.copy()
    history: list[LossRecord] = []
    if cfg.n_epochs == 0:
        return model, history

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(pts.shape[0])
    n_val = int(round(cfg.validation_fraction * pts.shape[0]))
    val = pts[np.sort(order[:n_val])] if n_val else None
    tr = pts[np.sort(order[n_val:])]
    if tr.shape[0] == 0:
        raise InvalidArgumentError("no training points left after the validation split")
    if cfg.whiten:
        fit_whitening(model, tr, cfg.whiten_rotation)

    m = np.zeros_like(model.theta)
    v = np.zeros_like(model.theta)
    step = 0
    best = (np.inf, model.theta.copy())
    stale = 0
    for epoch in range(1, cfg.n_epochs + 1):
        perm = rng.permutation(tr.shape[0])
        for start in range(0, tr.shape[0], cfg.batch_size):
            batch = tr[perm[start : start + cfg.batch_size]]
            try:
                loss, g = _loss_and_grad(model, batch)
            except NumericalError as exc:
                raise TrainingDivergedError(f"epoch {epoch}: {exc}", epoch=epoch) from exc
            if g is None:
                raise TrainingDivergedError(f"epoch {epoch}: batch loss is {loss}", epoch=epoch)
            step += 1
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
            m_hat = m / (1.0 - cfg.beta1**step)
            v_hat = v / (1.0 - cfg.beta2**step)
            model.theta = model.theta - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        try:
            train_nll = nll_loss(model, tr)
            val_nll = nll_loss(model, val) if val is not None else None
        except NumericalError as exc:
            raise TrainingDivergedError(f"epoch {epoch}: {exc}", epoch=epoch) from exc
        if np.isnan(train_nll) or (val_nll is not None and np.isnan(val_nll)):
            raise TrainingDivergedError(f"epoch {epoch}: loss is NaN", epoch=epoch)
        history.append(LossRecord(epoch, train_nll, val_nll))
        if cfg.patience:
            score = val_nll if val_nll is not None else train_nll
            if score < best[0]:
                best = (score, model.theta.copy())
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    model.theta = best[1]
                    break
    return model, history


def loss_table(history: list[LossRecord]) -> str:
    """Text table ``epoch train_nll [val_nll]``."""
    has_val = any(r.val_nll is not None for r in history)
    lines = ["# epoch train_nll" + (" val_nll" if has_val else "")]
    for r in history:
        row = f"{r.epoch} {r.train_nll!r}"
        if has_val:
            row += f" {r.val_nll!r}"
        lines.append(row)
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# checkpoints


def _encode(arr: np.ndarray) -> str:
    return base64.b64encode(np.asarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").astype(float)


def checkpoint_dict(model: FlowModel, train_cfg: TrainConfig | None = None, history=None, seed=None) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "schema_version": CHECKPOINT_VERSION,
        "architecture": {"dim": model.dim, "n_layers": model.n_layers, "hidden": model.hidden,
                         "convention": model.convention, "s_clamp": model.s_clamp,
                         "n_params": model.n_params},
        "masks": [list(m) for m in model.masks],
        "theta": _encode(model.theta),
        "prior": {"kind": model.prior, "lower": model.prior_lower, "upper": model.prior_upper},
        "whitening": {"shift": _encode(model.shift), "scale": _encode(model.scale), "mix": _encode(model.mix)},
        "train_config": asdict(train_cfg) if train_cfg is not None else None,
        "seed": seed,
        "loss_history": [asdict(r) for r in (history or [])],
    }


def model_from_dict(doc: dict) -> FlowModel:
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("schema_version") != CHECKPOINT_VERSION:
        raise InvalidArgumentError("not a supported flow checkpoint")
    arch = doc["architecture"]
    prior = doc["prior"]
    return FlowModel(
        dim=int(arch["dim"]),
        hidden=int(arch["hidden"]),
        masks=[tuple(m) for m in doc["masks"]],
        theta=_decode(doc["theta"]),
        convention=arch["convention"],
        prior=prior["kind"],
        prior_lower=prior["lower"],
        prior_upper=prior["upper"],
        s_clamp=float(arch["s_clamp"]),
        shift=_decode(doc["whitening"]["shift"]),
        scale=_decode(doc["whitening"]["scale"]),
        mix=_decode(doc["whitening"]["mix"]).reshape(int(arch["dim"]), int(arch["dim"])),
    )


def save_checkpoint(path, model: FlowModel, train_cfg=None, history=None, seed=None, extra: dict | None = None):
    from .io import atomic_write_text

    doc = checkpoint_dict(model, train_cfg, history, seed)
    if extra:
        doc.update(extra)
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_checkpoint(path) -> tuple[FlowModel, dict]:
    """Returns the model and the full checkpoint document."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return model_from_dict(doc), doc
