"""Command-line driver.

Usage::

    boltzflow COMMAND [--config FILE] [--check] [--SECTION.KEY VALUE ...]

Commands: simulate, train, sample, eval, moser-compare, regularize-demo,
lipschitz-sweep. Exit codes: 0 success, 1 invalid configuration or input,
2 numerical failure, 3 acceptance threshold violated in ``--check`` mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .errors import BoltzflowError, InvalidArgumentError
from .flow import TrainConfig, build_flow, load_checkpoint, sample, save_checkpoint, train
from .grid import Grid
from .io import atomic_write_text, digest, format_table, read_density, read_samples, write_samples
from .langevin import LangevinConfig, count_transitions, simulate
from .metrics import hist_l1, w2_exact
from .moser import build_moser_map, integrate, lipschitz_estimate, pushforward
from .potential import GridDensity, boltzmann_grid, diatomic, double_well, l1_distance, regularize
from .samples import SampleSet
from .targets import mixture_pair_2d

COMMANDS = ("simulate", "train", "sample", "eval", "moser-compare", "regularize-demo", "lipschitz-sweep")

# thresholds used by --check
CHECK_JOINT_W2 = 0.2
CHECK_COORD_W2 = 0.05
CHECK_FLOOR_RATIO = 2.0
CHECK_REG_L1 = 0.01
CHECK_IDENTITY_TOL = 1e-10

_STREAMS = {"langevin": 0, "split": 1, "init": 2, "train": 3, "sample": 4, "eval": 5, "moser": 6, "lipschitz": 7}


class CheckFailed(Exception):
    pass


def derive_seed(seed: int, stream: str) -> int:
    """Independent 32-bit seed for a named stream of one run."""
    ss = np.random.SeedSequence(seed, spawn_key=(_STREAMS[stream],))
    return int(ss.generate_state(1)[0])


class Run:
    """Resolved configuration plus output helpers for one command."""

    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["run"]["output_dir"])
        self.config_text = cfgmod.dump_config(cfg)
        self.config_digest = digest(self.config_text)

    def path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else self.out / p

    def stamp(self) -> dict:
        return {"command": self.command, "run_seed": self.cfg["run"]["seed"], "config_digest": self.config_digest}

    def write_config(self) -> None:
        atomic_write_text(self.path(f"{self.command}.config.ini"), self.config_text)

    def write_json(self, name: str, doc: dict) -> Path:
        doc = {"schema_version": 1, **self.stamp(), **doc}
        p = self.path(name)
        atomic_write_text(p, json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return p


def make_potential(cfg: dict):
    p = cfg["potential"]
    box = {}
    if p["lower"] is not None:
        box["lower"] = tuple(p["lower"])
    if p["upper"] is not None:
        box["upper"] = tuple(p["upper"])
    if p["kind"] == "double_well":
        return double_well(**box)
    return diatomic(a=p["lj_a"], b=p["lj_b"], charges=tuple(p["charges"]), **box)


def cmd_simulate(run: Run) -> int:
    c = run.cfg["langevin"]
    lcfg = LangevinConfig(
        dt=c["dt"], n_steps=c["n_steps"], beta=run.cfg["potential"]["beta"],
        seed=derive_seed(run.cfg["run"]["seed"], "langevin"), burn_in=c["burn_in"], x0=tuple(c["x0"]),
        thin=c["thin"], n_chains=c["n_chains"], grad_cap=c["grad_cap"], max_retries=c["max_retries"],
        reflect=c["reflect"],
    )
    s = simulate(make_potential(run.cfg), lcfg)
    write_samples(run.path(c["output"]), s, run.stamp())
    n_tr = count_transitions(s, 0)
    print(f"simulate: {len(s)} frames from {lcfg.n_chains} chains -> {run.path(c['output'])}")
    print(f"simulate: transitions on x1 (chain-major order) = {n_tr}")
    return 0


def _train_config(run: Run) -> TrainConfig:
    t = run.cfg["train"]
    keys = ("batch_size", "n_epochs", "learning_rate", "beta1", "beta2", "adam_eps", "weight_init_scale",
            "output_init_scale", "validation_fraction", "patience", "whiten", "whiten_rotation")
    return TrainConfig(seed=derive_seed(run.cfg["run"]["seed"], "train"), **{k: t[k] for k in keys})


def cmd_train(run: Run) -> int:
    t, f = run.cfg["train"], run.cfg["flow"]
    data = read_samples(run.path(t["data"]))
    rest, held = data.split(t["holdout_fraction"], seed=derive_seed(run.cfg["run"]["seed"], "split"))
    write_samples(run.path("heldout.txt"), held, run.stamp())
    write_samples(run.path("train_data.txt"), rest, run.stamp())
    tcfg = _train_config(run)
    model = build_flow(
        data.dim, f["n_layers"], f["hidden"], f["convention"], f["prior"], f["prior_lower"], f["prior_upper"],
        f["s_clamp"], seed=derive_seed(run.cfg["run"]["seed"], "init"), init_scale=t["weight_init_scale"],
        output_init_scale=t["output_init_scale"],
    )
    model, history = train(model, rest, tcfg)
    save_checkpoint(run.path(t["checkpoint"]), model, tcfg, history, run.cfg["run"]["seed"], extra=run.stamp())
    rows = [[r.epoch, r.train_nll, np.nan if r.val_nll is None else r.val_nll] for r in history]
    atomic_write_text(run.path(t["loss_table"]),
                      format_table({"kind": "loss_history", "columns": "epoch train_nll val_nll", **run.stamp()}, rows))
    last = history[-1] if history else None
    print(f"train: {model.n_params} parameters, {len(rest)} training points, {len(history)} epochs")
    if last is not None:
        print(f"train: final train NLL {last.train_nll:.6f}" + (f", validation NLL {last.val_nll:.6f}" if last.val_nll is not None else ""))
    return 0


def cmd_sample(run: Run) -> int:
    c = run.cfg["sample"]
    model, _ = load_checkpoint(run.path(c["checkpoint"]))
    s = sample(model, c["n"], seed=derive_seed(run.cfg["run"]["seed"], "sample"))
    write_samples(run.path(c["output"]), s, run.stamp())
    print(f"sample: {len(s)} points -> {run.path(c['output'])}")
    return 0


def _floor_from_samples(pts: np.ndarray, n_sub: int, repeats: int, seed: int) -> float | None:
    """W2 between disjoint random halves of one sample set (needs 2*n_sub points)."""
    if pts.shape[0] < 2 * n_sub:
        return None
    rng = np.random.default_rng(seed)
    vals = []
    for _ in range(repeats):
        perm = rng.permutation(pts.shape[0])
        vals.append(w2_exact(pts[perm[:n_sub]], pts[perm[n_sub : 2 * n_sub]], n_sub=None).value)
    return float(np.mean(vals))


def cmd_eval(run: Run) -> int:
    c = run.cfg["eval"]
    a = read_samples(run.path(c["a"]))
    b = read_samples(run.path(c["b"]))
    seed = derive_seed(run.cfg["run"]["seed"], "eval")
    n_sub = min(c["n_sub"], len(a), len(b))
    rep = w2_exact(a, b, n_sub=n_sub, seed=seed, per_coordinate=True)
    floor = _floor_from_samples(b.points, n_sub, c["floor_repeats"], seed)
    trans = {"a": count_transitions(a, c["coord"], c["lo"], c["hi"]),
             "b": count_transitions(b, c["coord"], c["lo"], c["hi"])}
    lo = np.minimum(a.points.min(axis=0), b.points.min(axis=0))
    hi = np.maximum(a.points.max(axis=0), b.points.max(axis=0))
    hist_rows = []
    hist_l1_axes = []
    for k in range(a.dim):
        edges = np.linspace(lo[k], hi[k], c["bins"] + 1)
        ha, _ = np.histogram(a.points[:, k], edges)
        hb, _ = np.histogram(b.points[:, k], edges)
        hist_l1_axes.append(hist_l1(a.points[:, [k]], b.points[:, [k]], [edges]))
        hist_rows += [[k, edges[j], edges[j + 1], ha[j] / len(a), hb[j] / len(b)] for j in range(c["bins"])]
    atomic_write_text(run.path("eval_hist.txt"),
                      format_table({"kind": "histograms", "columns": "axis lo hi freq_a freq_b", **run.stamp()}, hist_rows))
    doc = {"w2": json.loads(rep.to_json()), "self_distance_floor": floor, "transitions": trans,
           "hist_l1_per_axis": hist_l1_axes, "n_a": len(a), "n_b": len(b)}
    run.write_json(c["report"], doc)
    print(f"{'quantity':<28}{'value':>14}")
    print(f"{'joint W2 (n_sub=' + str(n_sub) + ')':<28}{rep.value:>14.6f}")
    for k, v in enumerate(rep.per_coordinate):
        print(f"{'W2 coordinate ' + str(k + 1):<28}{v:>14.6f}")
    print(f"{'self-distance floor':<28}{(floor if floor is not None else float('nan')):>14.6f}")
    print(f"{'transitions a':<28}{trans['a']:>14d}")
    print(f"{'transitions b':<28}{trans['b']:>14d}")
    print(rep.to_json())
    if run.check:
        bad = []
        if rep.value >= CHECK_JOINT_W2:
            bad.append(f"joint W2 {rep.value:.4f} >= {CHECK_JOINT_W2}")
        bad += [f"coordinate {k + 1} W2 {v:.4f} >= {CHECK_COORD_W2}" for k, v in enumerate(rep.per_coordinate)
                if v >= CHECK_COORD_W2]
        if bad:
            raise CheckFailed("; ".join(bad))
    return 0


def _grid_sampler(rho: GridDensity, n: int, rng) -> np.ndarray:
    """Approximate draws from a grid density: pick a node by its quadrature
    mass, then jitter uniformly within half a cell, clipped to the box."""
    g = rho.grid
    mass = (g.weights() * rho.values).ravel()
    idx = rng.choice(mass.size, size=n, p=mass / mass.sum())
    pts = g.nodes().reshape(-1, g.ndim)[idx]
    pts = pts + (rng.random((n, g.ndim)) - 0.5) * g.spacing
    return np.clip(pts, g.lower, g.upper)


def cmd_moser_compare(run: Run) -> int:
    c = run.cfg["moser"]
    seed = derive_seed(run.cfg["run"]["seed"], "moser")
    rng = np.random.default_rng(seed)
    if c["target"] == "files":
        rho0 = read_density(run.path(c["rho0"]))
        rho1 = read_density(run.path(c["rho1"]))
        x0 = _grid_sampler(rho0, c["n_samples"], rng)
        y_ref = _grid_sampler(rho1, c["n_samples"], rng)
    else:
        t0, t1 = mixture_pair_2d()
        if c["target"] == "identity":
            t1 = t0
        grid = Grid.box(t0.lower, t0.upper, c["grid_n"])
        rho0 = GridDensity.from_function(grid, t0.pdf)
        rho1 = GridDensity.from_function(grid, t1.pdf)
        x0 = t0.sample(c["n_samples"], rng)
        y_ref = t1.sample(c["n_samples"], rng)
    m = build_moser_map(rho0, rho1, ell=c["ell"], integrator=c["integrator"], floor_delta=c["floor_delta"], tol=c["tol"])
    pushed = pushforward(m, SampleSet(x0, "prior", seed))
    write_samples(run.path("moser_pushforward.txt"), pushed, run.stamp())
    n_sub = min(c["n_sub"], len(pushed), len(y_ref))
    w_ref = w2_exact(pushed, y_ref, n_sub=n_sub, seed=seed).value
    floor = _floor_from_samples(np.concatenate([y_ref, rng.permutation(y_ref)]) if len(y_ref) < 2 * n_sub else y_ref,
                                n_sub, 4, seed)
    displacement = float(np.max(np.linalg.norm(pushed.points - x0[: len(pushed)], axis=1))) if pushed.meta["n_failed"] == 0 else None
    doc = {"w2_pushforward_vs_target": w_ref, "self_distance_floor": floor, "n_failed": pushed.meta["n_failed"],
           "max_displacement": displacement, "cg_iterations": m.field.iterations,
           "cg_residual": m.field.residual_norm, "identity_within_tol": displacement is not None and displacement < CHECK_IDENTITY_TOL}
    if c["flow_samples"]:
        fs = read_samples(run.path(c["flow_samples"]))
        n_f = min(n_sub, len(fs))
        doc["w2_flow_vs_pushforward"] = w2_exact(fs, pushed, n_sub=n_f, seed=seed).value
    run.write_json(c["report"], doc)
    for key in sorted(doc):
        print(f"{key:<28}{doc[key]}")
    if run.check:
        if c["target"] == "identity":
            if not doc["identity_within_tol"]:
                raise CheckFailed(f"identity map displaced points by {displacement}")
        elif floor is None or w_ref > CHECK_FLOOR_RATIO * floor:
            raise CheckFailed(f"pushforward W2 {w_ref:.4f} exceeds {CHECK_FLOOR_RATIO} x floor {floor}")
    return 0


def cmd_regularize(run: Run) -> int:
    c = run.cfg["regularize"]
    spec = make_potential(run.cfg)
    beta = run.cfg["potential"]["beta"]
    grid = Grid.box(spec.lower, spec.upper, c["grid_n"])
    rho = boltzmann_grid(spec, beta, grid)
    x = grid.nodes().reshape(-1, grid.ndim)
    u = spec.energy(x)
    rows = []
    for eps in c["epsilons"]:
        reg = regularize(spec, eps)
        dist = l1_distance(boltzmann_grid(reg, beta, grid), rho)
        keep = u <= 1.0 / eps
        exact = bool(np.array_equal(reg.energy(x)[keep], u[keep]))
        rows.append([eps, dist, float(exact)])
    atomic_write_text(run.path(c["report"]),
                      format_table({"kind": "regularize_sweep", "columns": "epsilon l1 exact_below_cutoff", **run.stamp()}, rows))
    print(f"{'epsilon':>12}{'L1':>16}{'U_eps == U':>12}")
    for eps, dist, exact in rows:
        print(f"{eps:>12.6g}{dist:>16.6e}{str(bool(exact)):>12}")
    if run.check:
        l1 = [r[1] for r in rows]
        if not all(b < a for a, b in zip(l1, l1[1:])) or l1[-1] >= CHECK_REG_L1 or not all(r[2] for r in rows):
            raise CheckFailed("regularization sweep does not decrease strictly to below the threshold")
    return 0


def cmd_lipschitz(run: Run) -> int:
    c = run.cfg["lipschitz"]
    spec = make_potential(run.cfg)
    beta = run.cfg["potential"]["beta"]
    grid = Grid.box(spec.lower, spec.upper, c["grid_n"])
    base = boltzmann_grid(spec, beta, grid)
    vol = float(np.prod(np.array(spec.upper) - np.array(spec.lower)))
    uniform = GridDensity.from_values(grid, np.ones(grid.shape))
    rows = []
    for delta in c["deltas"]:
        target = GridDensity.from_values(grid, (1.0 - delta) * base.values + delta / vol)
        m = build_moser_map(uniform, target, ell=c["ell"], floor_delta=1e-12)
        est = lipschitz_estimate(lambda x: integrate(m, x), spec.lower, spec.upper, c["n_pairs"],
                                 seed=derive_seed(run.cfg["run"]["seed"], "lipschitz"))
        rows.append([delta, est])
    atomic_write_text(run.path(c["report"]),
                      format_table({"kind": "lipschitz_sweep", "columns": "delta lipschitz_estimate", **run.stamp()}, rows))
    print(f"{'delta':>12}{'Lipschitz':>16}")
    for delta, est in rows:
        print(f"{delta:>12.6g}{est:>16.6f}")
    if run.check:
        ests = [r[1] for r in rows]
        order = np.argsort([-r[0] for r in rows])  # decreasing delta
        ests = [ests[i] for i in order]
        if not all(b > a for a, b in zip(ests, ests[1:])):
            raise CheckFailed("Lipschitz estimates do not increase as the floor shrinks")
    return 0


HANDLERS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "moser-compare": cmd_moser_compare,
    "regularize-demo": cmd_regularize,
    "lipschitz-sweep": cmd_lipschitz,
}


def parse_overrides(extra: list[str]) -> dict:
    """``--section.key value`` or ``--section.key=value`` pairs."""
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--") or "." not in tok:
            raise InvalidArgumentError(f"unrecognized argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise InvalidArgumentError(f"missing value for {tok}")
            val = extra[i + 1]
            i += 2
        out[key] = val
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boltzflow", description="Flow-based Boltzmann sampling experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="INI configuration file")
    ap.add_argument("--output-dir", help="shortcut for --run.output_dir")
    ap.add_argument("--check", action="store_true", help="exit 3 if acceptance thresholds are violated")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    try:
        overrides = parse_overrides(extra)
        if args.output_dir:
            overrides["run.output_dir"] = args.output_dir
        cfg = cfgmod.load_config(args.config, overrides)
    except InvalidArgumentError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 1
    run = Run(args.command, cfg)
    run.check = args.check
    try:
        run.out.mkdir(parents=True, exist_ok=True)
        run.write_config()
        return HANDLERS[args.command](run)
    except CheckFailed as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 3
    except (InvalidArgumentError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BoltzflowError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
