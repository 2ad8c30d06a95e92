"""Run configuration: one nested JSON document, defaults < file < flags.

Every key must already exist in DEFAULTS; values are type-checked against
the default and then revalidated by building the module parameter objects.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass

from . import bandit as bd
from .errors import ConfigError, ParameterError
from .geometry import GeometryParams, Region, mph_to_kmh
from .mac import MacParams
from .risk import RiskParams
from .sim import CalibratedOracleParams, EpisodeConfig, SimParams

EXPERIMENTS = ("curves", "heatmap", "converge", "tau", "episode")

DEFAULTS: dict = {
    "experiment": "episode",
    "seed": 1,
    "output_dir": "out",
    "svg": False,
    "geometry": {
        "length_m": 1000.0,
        "width_m": 1000.0,
        "density_per_m2": 1e-4,
        "cs_range_m": 100.0,
        "speed_sigma_kmh": 8.0,
        "heading_jitter_rad": math.pi / 8,
    },
    "risk": {
        "k_v": 2.0 / 3.0,
        "k_d": 5.0,
        "reaction_time_s": 1.5,
        "braking_coeff": 170.0,
        "v_ref_mph": 60.0,
        "c_d_max": 4.0,
    },
    "bandit": {
        "n_arm": 100,
        "epsilon": 0.1,
        "horizon_rounds": 200,
        "train_rounds": None,
        "policy": "argmax",
        "cd_bins": 21,
        "cd_range": [0.0, 2.0],
        "cv_bins": 13,
        "cv_range": [0.0, 6.0],
    },
    "mac": {
        "cw": 15,
        "slots_per_interval": 64,
        "tx_duration_slots": 8,
    },
    "env": {
        "kind": "calibrated",
        "p_max": 0.9,
        "sigma_r": 0.1,
    },
    "sim": {
        "contexts": "world",
        "fixed_c_v": 0.0,
        "fixed_c_d": 1.1,
        "n_competitors": 10,
        "round_s": 0.1,
    },
    "curves": {"c_min": 0.0, "c_max": 4.0, "n_points": 401},
    "heatmap": {"horizon_rounds": 100000, "epsilons": [1.0, 0.1]},
    "converge": {"horizon_rounds": 500, "c_v": 0.0, "c_d": 1.1,
                 "epsilons": [1.0, 0.1], "seeds": 1},
    "tau": {"n_cs": list(range(0, 51, 5)), "ar_levels": [0.0, 1.0, 2.0], "trials": 10000},
}

PRESETS = {
    # ~15 000 vehicles on the default square; slow.
    "high_density": {"geometry": {"density_per_m2": 15e-3}},
    "realistic_mac": {"mac": {"cw": 15, "slots_per_interval": 7692, "tx_duration_slots": 31}},
}


def _check_value(path, default, value, errors):
    if default is None:
        if value is not None and not (isinstance(value, int) and not isinstance(value, bool)):
            errors.append(f"{path}: expected integer or null")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            errors.append(f"{path}: expected boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected number")
            return value
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            errors.append(f"{path}: expected string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            errors.append(f"{path}: expected list")
            return value
        out = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                errors.append(f"{path}[{i}]: expected number")
            else:
                out.append(float(v) if default and isinstance(default[0], float) else v)
        return out
    return value


def _merge(base: dict, update: dict, errors: list, prefix=""):
    for key, value in update.items():
        path = f"{prefix}{key}"
        if key not in base:
            errors.append(f"{path}: unknown key")
            continue
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                errors.append(f"{path}: expected object")
                continue
            _merge(base[key], value, errors, path + ".")
        else:
            base[key] = _check_value(path, DEFAULTS_FLAT.get(path, base[key]), value, errors)


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


DEFAULTS_FLAT = _flatten(DEFAULTS)


def parse_assignment(text: str) -> dict:
    """``a.b=value`` to ``{"a": {"b": value}}``; value is JSON if it parses."""
    if "=" not in text:
        raise ConfigError(f"--set expects key=value, got {text!r}", [text])
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    out: dict = {}
    node = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return out


@dataclass
class RunConfig:
    data: dict

    @property
    def experiment(self) -> str:
        return self.data["experiment"]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def output_dir(self) -> str:
        return self.data["output_dir"]

    def section(self, name: str) -> dict:
        return self.data[name]

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def config_hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def episode_config(self, **overrides) -> EpisodeConfig:
        """Module parameter objects for one episode.

        ``overrides`` may set ``seed``, ``epsilon``, ``horizon_rounds``,
        ``contexts``, ``fixed_c_v``, ``fixed_c_d``, ``env``.
        """
        return build_episode(self.data, **overrides)


def build_episode(d: dict, seed=None, epsilon=None, horizon_rounds=None, contexts=None,
                  fixed_c_v=None, fixed_c_d=None, env=None) -> EpisodeConfig:
    g, r, b, m, e, s = (d[k] for k in ("geometry", "risk", "bandit", "mac", "env", "sim"))
    seed = d["seed"] if seed is None else seed
    v_ref = mph_to_kmh(r["v_ref_mph"])
    horizon = b["horizon_rounds"] if horizon_rounds is None else horizon_rounds
    train = b["train_rounds"] if horizon_rounds is None else None
    common = dict(n_arm=b["n_arm"], epsilon=b["epsilon"] if epsilon is None else epsilon,
                  horizon_rounds=horizon, train_rounds=train, policy=b["policy"])
    return EpisodeConfig(
        seed=seed,
        env=e["kind"] if env is None else env,
        region=Region(g["length_m"], g["width_m"]),
        geometry=GeometryParams(density_per_m2=g["density_per_m2"], cs_range_m=g["cs_range_m"],
                                speed_sigma_kmh=g["speed_sigma_kmh"], rng_seed=seed,
                                v_ref_kmh=v_ref, heading_jitter_rad=g["heading_jitter_rad"]),
        risk=RiskParams(k_v=r["k_v"], k_d=r["k_d"], reaction_time_s=r["reaction_time_s"],
                        braking_coeff=r["braking_coeff"], v_ref_kmh=v_ref, c_d_max=r["c_d_max"]),
        bandit_v=bd.BanditParams(n_context_bins=b["cv_bins"], context_range=tuple(b["cv_range"]),
                                 **common),
        bandit_d=bd.BanditParams(n_context_bins=b["cd_bins"], context_range=tuple(b["cd_range"]),
                                 **common),
        mac=MacParams(m["cw"], m["slots_per_interval"], m["tx_duration_slots"]),
        oracle=CalibratedOracleParams(e["p_max"], e["sigma_r"]),
        sim=SimParams(contexts=s["contexts"] if contexts is None else contexts,
                      fixed_c_v=s["fixed_c_v"] if fixed_c_v is None else fixed_c_v,
                      fixed_c_d=s["fixed_c_d"] if fixed_c_d is None else fixed_c_d,
                      n_competitors=s["n_competitors"], round_s=s["round_s"]),
    )


def _validate(d: dict, errors: list):
    if d["experiment"] not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)}")
    if len(d["bandit"]["cd_range"]) != 2:
        errors.append("bandit.cd_range: expected [low, high]")
    if len(d["bandit"]["cv_range"]) != 2:
        errors.append("bandit.cv_range: expected [low, high]")
    if errors:
        return
    try:
        build_episode(d)
    except ParameterError as exc:
        errors.append(str(exc))
    c = d["curves"]
    if not (c["n_points"] >= 2 and c["c_max"] > c["c_min"] >= 0):
        errors.append("curves: need n_points >= 2 and c_max > c_min >= 0")
    for name in ("heatmap", "converge"):
        sec = d[name]
        if sec["horizon_rounds"] < 1:
            errors.append(f"{name}.horizon_rounds: must be >= 1")
        if not sec["epsilons"] or any(not 0 <= x <= 1 for x in sec["epsilons"]):
            errors.append(f"{name}.epsilons: values must lie in [0, 1]")
    if d["converge"]["seeds"] < 1:
        errors.append("converge.seeds: must be >= 1")
    t = d["tau"]
    if t["trials"] < 1:
        errors.append("tau.trials: must be >= 1")
    if any(n < 0 or int(n) != n for n in t["n_cs"]):
        errors.append("tau.n_cs: values must be non-negative integers")
    if any(not 0 <= a <= 2 for a in t["ar_levels"]):
        errors.append("tau.ar_levels: values must lie in [0, 2]")


def load_config(path=None, sets=(), experiment=None, seed=None, output_dir=None,
                preset=None, base: dict | None = None) -> RunConfig:
    errors: list = []
    data = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}", ["preset"])
        _merge(data, PRESETS[preset], errors)
    if base is not None:
        _merge(data, base, errors)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}", ["config"]) from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object", ["config"])
        _merge(data, doc, errors)
    for text in sets:
        _merge(data, parse_assignment(text), errors)
    flags = {"experiment": experiment, "seed": seed, "output_dir": output_dir}
    _merge(data, {k: v for k, v in flags.items() if v is not None}, errors)
    if not errors:
        _validate(data, errors)
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors),
                          [e.split(":")[0] for e in errors])
    return RunConfig(data)
