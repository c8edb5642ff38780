"""Experiment configuration: an INI-style file with one section per module.

Every key has a declared type and default; unknown sections or keys are
rejected before any computation starts. Values may be written as plain
scalars, as comma-separated lists, or as JSON. Command-line overrides use
dotted paths, e.g. ``--train.learning_rate 5e-4``.
"""

from __future__ import annotations

import configparser
import json
from pathlib import Path

from .errors import InvalidArgumentError

CONFIG_SCHEMA_VERSION = 1

# (type, default); "floats" is a list of floats, "path" an optional string
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "schema_version": (int, CONFIG_SCHEMA_VERSION),
        "seed": (int, 0),
        "output_dir": (str, "out"),
        "deterministic": (bool, True),
    },
    "potential": {
        "kind": (str, "double_well"),
        "lower": ("floats", None),
        "upper": ("floats", None),
        "charges": ("floats", [0.0, 0.0]),
        "lj_a": (float, 1.0),
        "lj_b": (float, 1.0),
        "beta": (float, 1.0),
    },
    "langevin": {
        "dt": (float, 0.01),
        "n_steps": (int, 2500),
        "burn_in": (int, 500),
        "thin": (int, 100),
        "n_chains": (int, 1000),
        "x0": ("floats", [0.0, 0.0]),
        "grad_cap": (float, 1e8),
        "max_retries": (int, 100),
        "reflect": (bool, True),
        "output": (str, "langevin.txt"),
    },
    "flow": {
        "n_layers": (int, 6),
        "hidden": (int, 128),
        "convention": (str, "masked_full_input"),
        "prior": (str, "normal"),
        "prior_lower": ("floats", None),
        "prior_upper": ("floats", None),
        "s_clamp": (float, 5.0),
    },
    "train": {
        "data": (str, "langevin.txt"),
        "holdout_fraction": (float, 0.5),
        "batch_size": (int, 256),
        "n_epochs": (int, 200),
        "learning_rate": (float, 1e-3),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "adam_eps": (float, 1e-8),
        "weight_init_scale": (float, 1.0),
        "output_init_scale": (float, 0.01),
        "validation_fraction": (float, 0.1),
        "patience": (int, 0),
        "whiten": (bool, True),
        "whiten_rotation": (bool, True),
        "checkpoint": (str, "flow.json"),
        "loss_table": (str, "loss.txt"),
    },
    "sample": {
        "checkpoint": (str, "flow.json"),
        "n": (int, 10000),
        "output": (str, "flow_samples.txt"),
    },
    "eval": {
        "a": (str, "flow_samples.txt"),
        "b": (str, "heldout.txt"),
        "n_sub": (int, 2000),
        "floor_repeats": (int, 4),
        "coord": (int, 0),
        "lo": (float, -0.5),
        "hi": (float, 0.5),
        "bins": (int, 32),
        "report": (str, "eval.json"),
    },
    "moser": {
        "target": (str, "mixture_pair"),
        "rho0": ("path", None),
        "rho1": ("path", None),
        "flow_samples": ("path", None),
        "grid_n": (int, 257),
        "ell": (int, 256),
        "integrator": (str, "rk4"),
        "floor_delta": (float, 1e-8),
        "tol": (float, 1e-9),
        "n_samples": (int, 10000),
        "n_sub": (int, 1000),
        "report": (str, "moser.json"),
    },
    "regularize": {
        "epsilons": ("floats", [1.0, 0.5, 0.25, 0.125]),
        "grid_n": (int, 513),
        "report": (str, "regularize.txt"),
    },
    "lipschitz": {
        "deltas": ("floats", [0.1, 0.01, 0.001]),
        "grid_n": (int, 129),
        "ell": (int, 256),
        "n_pairs": (int, 4000),
        "report": (str, "lipschitz.txt"),
    },
}


def _coerce(section: str, key: str, raw):
    kind, _ = SCHEMA[section][key]
    where = f"{section}.{key}"
    if isinstance(raw, str):
        text = raw.strip()
        if text.lower() in ("none", "null", ""):
            if kind in ("floats", "path"):
                return None
            raise InvalidArgumentError(f"{where} may not be empty")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            raw = text
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str) and raw.lower() in ("true", "yes", "on", "1", "false", "no", "off", "0"):
                return raw.lower() in ("true", "yes", "on", "1")
            raise ValueError(raw)
        if kind is int:
            if isinstance(raw, bool) or float(raw) != int(float(raw)):
                raise ValueError(raw)
            return int(float(raw))
        if kind is float:
            if isinstance(raw, bool):
                raise ValueError(raw)
            return float(raw)
        if kind is str or kind == "path":
            return None if raw is None and kind == "path" else str(raw)
        if kind == "floats":
            if raw is None:
                return None
            if isinstance(raw, str):
                raw = [tok for tok in raw.replace(",", " ").split()]
            if not isinstance(raw, (list, tuple)):
                raw = [raw]
            return [float(v) for v in raw]
    except (TypeError, ValueError):
        raise InvalidArgumentError(f"{where}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None
    raise InvalidArgumentError(f"{where}: unsupported type")


def defaults() -> dict:
    return {sec: {k: (list(d) if isinstance(d, list) else d) for k, (_, d) in keys.items()}
            for sec, keys in SCHEMA.items()}


def set_value(cfg: dict, dotted: str, raw) -> None:
    section, _, key = dotted.partition(".")
    if section not in SCHEMA:
        raise InvalidArgumentError(f"unknown config section {section!r}")
    if key not in SCHEMA[section]:
        raise InvalidArgumentError(f"unknown config key {dotted!r}")
    cfg[section][key] = _coerce(section, key, raw)


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the file at ``path`` (if any), then dotted ``overrides``."""
    cfg = defaults()
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise InvalidArgumentError(f"cannot read config {path}: {exc}") from None
        for section in parser.sections():
            for key, raw in parser.items(section):
                set_value(cfg, f"{section}.{key}", raw)
    for dotted, raw in (overrides or {}).items():
        set_value(cfg, dotted, raw)
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    if cfg["run"]["schema_version"] != CONFIG_SCHEMA_VERSION:
        raise InvalidArgumentError(f"unsupported config schema_version {cfg['run']['schema_version']}")
    if cfg["potential"]["kind"] not in ("double_well", "diatomic"):
        raise InvalidArgumentError("potential.kind must be double_well or diatomic")
    if cfg["potential"]["beta"] <= 0:
        raise InvalidArgumentError("potential.beta must be positive")
    for key in ("lower", "upper"):
        val = cfg["potential"][key]
        if val is not None and len(val) != 2:
            raise InvalidArgumentError(f"potential.{key} needs two entries")
    lv = cfg["langevin"]
    if lv["dt"] <= 0 or lv["n_steps"] <= lv["burn_in"] or lv["burn_in"] < 0 or lv["thin"] < 1 or lv["n_chains"] < 1:
        raise InvalidArgumentError("langevin: need dt > 0, n_steps > burn_in >= 0, thin >= 1, n_chains >= 1")
    tr = cfg["train"]
    if not 0.0 < tr["holdout_fraction"] < 1.0:
        raise InvalidArgumentError("train.holdout_fraction must lie in (0, 1)")
    if tr["learning_rate"] <= 0 or not 0.0 <= tr["validation_fraction"] < 1.0:
        raise InvalidArgumentError("train: need learning_rate > 0 and validation_fraction in [0, 1)")
    if tr["batch_size"] < 1 or tr["n_epochs"] < 0 or tr["patience"] < 0:
        raise InvalidArgumentError("train: need batch_size >= 1, n_epochs >= 0, patience >= 0")
    if tr["weight_init_scale"] < 0 or tr["output_init_scale"] < 0:
        raise InvalidArgumentError("train: initialization scales must be nonnegative")
    fl = cfg["flow"]
    if fl["convention"] not in ("masked_full_input", "partition_input"):
        raise InvalidArgumentError("flow.convention must be masked_full_input or partition_input")
    if fl["prior"] not in ("normal", "uniform"):
        raise InvalidArgumentError("flow.prior must be normal or uniform")
    if fl["n_layers"] < 1 or fl["hidden"] < 1 or fl["s_clamp"] <= 0:
        raise InvalidArgumentError("flow: need n_layers >= 1, hidden >= 1, s_clamp > 0")
    if cfg["sample"]["n"] < 1:
        raise InvalidArgumentError("sample.n must be >= 1")
    ev = cfg["eval"]
    if ev["n_sub"] < 1 or ev["bins"] < 1 or ev["floor_repeats"] < 2 or not ev["lo"] < ev["hi"]:
        raise InvalidArgumentError("eval: need n_sub >= 1, bins >= 1, floor_repeats >= 2, lo < hi")
    mo = cfg["moser"]
    if mo["integrator"] not in ("rk4", "euler_composition") or mo["ell"] < 1 or mo["grid_n"] < 3:
        raise InvalidArgumentError("moser: integrator rk4|euler_composition, ell >= 1, grid_n >= 3")
    if mo["tol"] <= 0 or mo["floor_delta"] <= 0 or mo["n_samples"] < 2 or mo["n_sub"] < 1:
        raise InvalidArgumentError("moser: need tol > 0, floor_delta > 0, n_samples >= 2, n_sub >= 1")
    if cfg["regularize"]["grid_n"] < 3 or cfg["lipschitz"]["grid_n"] < 3 or cfg["lipschitz"]["n_pairs"] < 1:
        raise InvalidArgumentError("grid_n >= 3 and n_pairs >= 1 required")
    if cfg["moser"]["target"] not in ("mixture_pair", "identity", "files"):
        raise InvalidArgumentError("moser.target must be mixture_pair, identity or files")
    if cfg["moser"]["target"] == "files" and not (cfg["moser"]["rho0"] and cfg["moser"]["rho1"]):
        raise InvalidArgumentError("moser.target = files needs moser.rho0 and moser.rho1")
    for key in ("epsilons",):
        if not cfg["regularize"][key] or any(v <= 0 for v in cfg["regularize"][key]):
            raise InvalidArgumentError("regularize.epsilons must be positive")
    if not cfg["lipschitz"]["deltas"] or any(not 0 < v < 1 for v in cfg["lipschitz"]["deltas"]):
        raise InvalidArgumentError("lipschitz.deltas must lie in (0, 1)")


def dump_config(cfg: dict) -> str:
    """Canonical INI text of a resolved configuration (sorted sections and keys)."""
    lines = []
    for section in SCHEMA:
        lines.append(f"[{section}]")
        for key in SCHEMA[section]:
            lines.append(f"{key} = {json.dumps(cfg[section][key])}")
        lines.append("")
    return "\n".join(lines)


def write_example(path) -> None:
    Path(path).write_text(dump_config(defaults()), encoding="utf-8")
