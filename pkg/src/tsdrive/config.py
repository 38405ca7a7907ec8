"""Run configuration: JSON-loadable, strict-keyed, defaulting to the
published design parameters (vehicle, MPC, MHE, LQR tables).

A config file supplies partial overrides; unknown keys anywhere are
rejected.  `config_hash` covers only the synthesis-relevant sections so
one artifact serves any seed/mode/noise/circuit variation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .models import VehicleParams


class ConfigError(ValueError):
    """Malformed or unknown-keyed configuration."""


DEFAULTS: dict = {
    "vehicle": {
        "a": 0.758, "b": 1.036, "M": 683.0, "I": 560.94, "Cx": 25000.0,
        "Ar": 1.91, "rho_air": 1.184, "Cd_drag": 0.36, "mu0": 0.5, "g": 9.81,
    },
    "rates": {"Tc": 0.1, "Td": 0.01},
    "mpc": {
        "N": 40,
        "Q": [1.133, 0.067, 13.333],
        "R": [5e-6, 5.5],
        "u_min": [0.0, -1.4],
        "u_max": [18.0, 1.4],
        "du_min": [-5.0, -0.3],
        "du_max": [5.0, 0.3],
        "scheduling_mode": "reference",
        "theta_decay": 0.9,
        "terminal_cost": "terminal_set",
        "terminal_scale": 1.0,
    },
    "mhe": {
        "N": 30,
        "Q": [10.0, 10.0, 2.0],
        "R": [0.033, 0.033],
        "P": [2.0, 2.0, 2.0],
        "x_min": [0.0, -0.1, -1.4],
        "x_max": [18.0, 0.1, 1.4],
        "friction_lowpass_pole": 0.9,
    },
    "lqr": {
        "force_limit": 6000.0,
        "integral_clamp": 10.0,
        "feedforward": True,
    },
    "synthesis": {
        "kinematic": {
            "Q_ts": [1.0, 1.5, 3.0],
            "R_ts": [1.0, 3.0],
            "u_bound": [18.0, 1.4],
            "bounds": [[-1.42, 1.42], [0.1, 20.0], [-0.05, 0.05]],
        },
        "dynamic": {
            "Q_ts": [2500.0, 0.1, 0.1, 0.1, 100000.0, 90000.0],
            "R_ts": [0.001, 9.0],
            "bounds": [[-0.45, 0.45], [1.5, 20.0], [-0.1, 0.1]],
            "filter_pole": 0.6,
            "gamma": 0.01,
        },
    },
    "planner": {
        "waypoints": [[0.0, 0.0], [120.0, 0.0], [120.0, 60.0], [0.0, 60.0]],
        "corner_radius": 15.0,
        "speed_cap": 15.0,
        "a_max": 2.0,
        "a_lat_max": 3.0,
    },
    # friction-force deviation segments [start time s, F_fr N]:
    # dry asphalt, wet asphalt, dry earth, ice (0.5 / 0.35 / 0.6 / 0.05
    # total friction coefficient on the default vehicle)
    "friction": {
        "segments": [[0.0, 0.0], [15.0, -1005.0345], [30.0, 670.023], [45.0, -3015.1035]],
        "tau": 0.3,
    },
    "sim": {
        "duration": 60.0,
        "seed": 0,
        "noise_sigma_v": 0.05,
        "noise_sigma_omega": 0.01,
        "warmup": 2.0,
    },
}

SYNTHESIS_HASH_SECTIONS = ("vehicle", "rates", "synthesis")


def _merge(defaults: dict, override: dict, path: str = "") -> dict:
    out = {}
    unknown = set(override) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config key(s) {sorted(unknown)} at '{path or '<root>'}'")
    for key, dval in defaults.items():
        if key not in override:
            out[key] = dval
        elif isinstance(dval, dict):
            if not isinstance(override[key], dict):
                raise ConfigError(f"'{path}{key}' must be an object")
            out[key] = _merge(dval, override[key], f"{path}{key}.")
        else:
            out[key] = override[key]
    return out


@dataclass
class RunConfig:
    """Validated run configuration (plain dict tree + typed accessors)."""

    data: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULTS)))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"invalid JSON in {path}: {e}") from e
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        merged = _merge(DEFAULTS, raw)
        cfg = cls(merged)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        d = self.data
        ratio = d["rates"]["Tc"] / d["rates"]["Td"]
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError(f"Tc/Td must be a positive integer, got {ratio}")
        if d["mpc"]["scheduling_mode"] not in ("frozen", "reference"):
            raise ConfigError(f"bad scheduling_mode {d['mpc']['scheduling_mode']!r}")
        VehicleParams.from_dict(d["vehicle"])  # raises on bad values
        nominal = d["vehicle"]["mu0"] * d["vehicle"]["M"] * d["vehicle"]["g"]
        for t, F in d["friction"]["segments"]:
            if abs(F) >= nominal:
                raise ConfigError(
                    f"friction deviation {F} N at t={t} exceeds the nominal force {nominal:.1f} N")
        if len(d["mhe"]["Q"]) != 3 or len(d["mhe"]["R"]) != 2 or len(d["mhe"]["P"]) != 3:
            raise ConfigError("mhe weights must have lengths 3/2/3")
        if len(d["synthesis"]["dynamic"]["Q_ts"]) != 6:
            raise ConfigError("dynamic synthesis Q_ts must have 6 entries")

    # typed accessors ------------------------------------------------------

    @property
    def vehicle(self) -> VehicleParams:
        return VehicleParams.from_dict(self.data["vehicle"])

    @property
    def Tc(self) -> float:
        return float(self.data["rates"]["Tc"])

    @property
    def Td(self) -> float:
        return float(self.data["rates"]["Td"])

    @property
    def inner_steps(self) -> int:
        return int(round(self.Tc / self.Td))

    def mpc_config(self):
        from .mpc import MpcConfig

        m = self.data["mpc"]
        return MpcConfig(
            N=int(m["N"]), Tc=self.Tc,
            Q=np.diag(m["Q"]), R=np.diag(m["R"]),
            u_min=np.array(m["u_min"]), u_max=np.array(m["u_max"]),
            du_min=np.array(m["du_min"]), du_max=np.array(m["du_max"]),
            scheduling_mode=m["scheduling_mode"], theta_decay=float(m["theta_decay"]),
            terminal_cost=m["terminal_cost"], terminal_scale=float(m["terminal_scale"]),
        )

    def mhe_config(self):
        from .mhe import MheConfig

        m = self.data["mhe"]
        return MheConfig(
            N=int(m["N"]), Td=self.Td,
            Q=np.diag(m["Q"]), R=np.diag(m["R"]), P=np.diag(m["P"]),
            x_min=np.array(m["x_min"]), x_max=np.array(m["x_max"]),
            friction_lowpass_pole=float(m["friction_lowpass_pole"]),
        )

    def lqr_config(self):
        from .lqr import LqrConfig

        l = self.data["lqr"]
        return LqrConfig(
            Td=self.Td,
            filter_pole=float(self.data["synthesis"]["dynamic"]["filter_pole"]),
            force_limit=float(l["force_limit"]),
            integral_clamp=float(l["integral_clamp"]),
            feedforward=bool(l["feedforward"]),
        )

    def circuit(self):
        from .planner import Circuit

        p = self.data["planner"]
        return Circuit(
            waypoints=tuple(tuple(w) for w in p["waypoints"]),
            corner_radius=float(p["corner_radius"]),
            speed_cap=float(p["speed_cap"]),
        )

    def config_hash(self) -> str:
        subset = {k: self.data[k] for k in SYNTHESIS_HASH_SECTIONS}
        canon = json.dumps(subset, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def to_dict(self) -> dict:
        return json.loads(json.dumps(self.data))
