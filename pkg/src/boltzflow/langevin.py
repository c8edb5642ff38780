"""Overdamped Langevin sampling and metastable-transition counting.

The Euler-Maruyama update is::

    x[k+1] = x[k] - grad U(x[k]) * dt + sqrt(2 * dt / beta) * xi[k]

Several independent chains can be advanced together; each chain owns its own
random streams, derived from the run seed by :func:`split_seeds`, so a chain's
trajectory does not depend on how many chains run beside it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalError, SingularityError
from .samples import SampleSet

log = logging.getLogger(__name__)

_BLOCK = 1024


@dataclass(frozen=True)
class LangevinConfig:
    """Integration settings.

    ``n_steps`` counts every Euler step including the ``burn_in`` ones. After
    burn-in every ``thin``-th state is kept, giving ``(n_steps - burn_in) // thin``
    frames per chain. ``x0`` is one point shared by all chains or one row per chain.
    """

    dt: float
    n_steps: int
    beta: float
    seed: int = 0
    burn_in: int = 0
    x0: tuple = (0.0, 0.0)
    thin: int = 1
    n_chains: int = 1
    grad_cap: float = 1e8
    max_retries: int = 100
    reflect: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgumentError("dt must be positive")
        if not self.beta > 0:
            raise InvalidArgumentError("beta must be positive")
        if not (0 <= self.burn_in < self.n_steps):
            raise InvalidArgumentError("need 0 <= burn_in < n_steps")
        if self.thin < 1 or self.n_chains < 1:
            raise InvalidArgumentError("thin and n_chains must be >= 1")

    @property
    def n_frames(self) -> int:
        return (self.n_steps - self.burn_in) // self.thin


def split_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Per-chain seed sequences: child ``i`` of ``SeedSequence(seed)``."""
    return np.random.SeedSequence(seed).spawn(n)


def _safe_gradient(potential, x):
    try:
        return np.asarray(potential.gradient(x), dtype=float)
    except SingularityError:
        g = np.empty_like(x)
        for i, row in enumerate(x):
            try:
                g[i] = potential.gradient(row)
            except SingularityError:
                g[i] = np.inf
        return g


def _reflect(x, lower, upper):
    width = upper - lower
    # fold into [lower, lower + 2 width) then mirror the upper half
    y = np.mod(x - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return lower + y


def simulate(potential, cfg: LangevinConfig) -> SampleSet:
    """Run overdamped Langevin dynamics with Euler-Maruyama.

    ``potential`` needs a vectorized ``gradient``; if it exposes ``lower``/``upper``
    box bounds and ``cfg.reflect`` is set, coordinates are reflected back into the
    box. Steps that land on a singular point (non-finite gradient or
    ``|grad U| > grad_cap``) are rejected and redrawn, up to ``max_retries`` times.

    Returns the retained frames, chain-major.
    """
    x0 = np.asarray(cfg.x0, dtype=float)
    x = np.array(np.broadcast_to(x0, (cfg.n_chains, x0.shape[-1])))
    d = x.shape[1]
    box = None
    if cfg.reflect and hasattr(potential, "lower") and hasattr(potential, "upper"):
        box = (np.asarray(potential.lower, dtype=float), np.asarray(potential.upper, dtype=float))

    streams = []
    for ss in split_seeds(cfg.seed, cfg.n_chains):
        main, retry = ss.spawn(2)
        streams.append((np.random.default_rng(main), np.random.default_rng(retry)))

    noise_scale = 0.0 if math.isinf(cfg.beta) else math.sqrt(2.0 * cfg.dt / cfg.beta)
    g = _safe_gradient(potential, x)
    if not np.all(np.isfinite(g)):
        raise NumericalError("initial point is singular", where="x0", step=0)

    cap2 = cfg.grad_cap**2
    frames = np.empty((cfg.n_chains, cfg.n_frames, d))
    n_kept = 0
    rejected = 0
    step = 0
    while step < cfg.n_steps:
        block = min(_BLOCK, cfg.n_steps - step)
        noise = np.stack([rng.standard_normal((block, d)) for rng, _ in streams], axis=1)
        for b in range(block):
            step += 1
            drift = x - g * cfg.dt
            prop = drift + noise_scale * noise[b]
            if box is not None and ((prop < box[0]).any() or (prop > box[1]).any()):
                prop = _reflect(prop, *box)
            g_new = _safe_gradient(potential, prop)
            # NaN compares False, so non-finite gradients are caught too
            bad = ~(np.einsum("ij,ij->i", g_new, g_new) <= cap2)
            tries = 0
            while np.any(bad):
                tries += 1
                if tries > cfg.max_retries:
                    raise NumericalError(
                        f"step {step}: {int(bad.sum())} chain(s) still singular after {cfg.max_retries} retries",
                        where="langevin",
                        step=step,
                    )
                idx = np.flatnonzero(bad)
                rejected += idx.size
                redraw = np.stack([streams[i][1].standard_normal(d) for i in idx])
                p = drift[idx] + noise_scale * redraw
                if box is not None:
                    p = _reflect(p, *box)
                prop[idx] = p
                g_new[idx] = _safe_gradient(potential, p)
                sub = ~(np.einsum("ij,ij->i", g_new[idx], g_new[idx]) <= cap2)
                bad = np.zeros(cfg.n_chains, dtype=bool)
                bad[idx[sub]] = True
            if not np.isfinite(prop).all():
                raise NumericalError(f"non-finite state at step {step}", where="langevin", step=step)
            x, g = prop, g_new
            if step > cfg.burn_in and (step - cfg.burn_in) % cfg.thin == 0 and n_kept < cfg.n_frames:
                frames[:, n_kept] = x
                n_kept += 1
    if rejected:
        log.info("rejected %d singular Langevin proposals", rejected)
    meta = {
        "dt": cfg.dt,
        "n_steps": cfg.n_steps,
        "beta": cfg.beta,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "n_chains": cfg.n_chains,
        "rejected": rejected,
    }
    return SampleSet(frames.reshape(-1, d), "langevin", cfg.seed, meta)


def count_transitions(traj, coord: int = 0, lo: float = -0.5, hi: float = 0.5) -> int:
    """Count switches between the LEFT (``< lo``) and RIGHT (``> hi``) states.

    Points inside ``[lo, hi]`` keep the previous state, so jitter around the
    barrier does not count. The first assignment is not a transition.
    """
    pts = traj.points if isinstance(traj, SampleSet) else np.asarray(traj, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise InvalidArgumentError("empty trajectory")
    if not lo < hi:
        raise InvalidArgumentError("need lo < hi")
    state = 0
    count = 0
    for v in pts[:, coord]:
        new = -1 if v < lo else (1 if v > hi else state)
        if new != state:
            if state != 0:
                count += 1
            state = new
    return count
