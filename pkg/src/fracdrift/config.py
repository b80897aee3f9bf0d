"""Run configuration: bracketed sections of ``key = value`` lines.

Every key has a declared type and default. Unknown keys are errors that
name the closest valid key; flags given on the command line override the
file. The resolved table (all defaults materialized) is echoed into the
run manifest.
"""

from __future__ import annotations

import configparser
import difflib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .core import FractionalParams
from .errors import InvalidArgument
from .regularity import ExperimentConfig

__all__ = ["SCHEMA", "ConfigError", "ResolvedConfig", "load_config", "resolve"]


class ConfigError(InvalidArgument):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _opt_float(text: str) -> float | None:
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


# section -> key -> (parser, type name, default)
SCHEMA: dict[str, dict[str, tuple[Any, str, Any]]] = {
    "problem": {
        "s": (float, "float", 0.25),
        "alpha": (_opt_float, "float or auto", None),
        "n": (int, "int", 1),
    },
    "grid": {
        "N": (int, "int", 512),
        "L": (float, "float", 2 * math.pi),
        "M": (int, "int", 128),
        "Y": (_opt_float, "float or auto", None),
    },
    "evolution": {
        "T": (float, "float", 1.0),
        "dt": (float, "float", 1.0 / 128),
        "eps": (float, "float", 0.0),
        "delta": (float, "float", 0.1),
        "deltas": (_floats, "list of floats", (0.1, 0.05, 0.025)),
        "forcing": (float, "float", 0.0),
        "u0_modes": (int, "int", 6),
        "u0_slope": (float, "float", 1.0),
        "lam": (int, "int", 2),
        "J": (_opt_int, "int or auto", None),
    },
    "flatness": {
        "r": (float, "float", 0.5),
        "K": (int, "int", 4),
        "ext_M": (int, "int", 64),
        "seeds": (int, "int", 5),
    },
    "barriers": {
        "tag": (str, "string", "sphere_boundary"),
        "h": (float, "float", 1.0 / 32),
        "variant": (str, "string", "corrected"),
    },
    "exponent": {
        "theorem": (str, "string", "1"),
    },
    "tolerances": {
        "exponent_tol": (float, "float", 0.25),
        "slope_slack": (float, "float", 0.2),
        "theorem2_floor": (float, "float", 0.7),
        "holder_floor": (float, "float", 0.05),
        "dtn_rel": (float, "float", 0.02),
    },
    "run": {
        "seed": (int, "int", 7),
        "jobs": (int, "int", 1),
        "quick": (_bool, "bool", False),
    },
}

_SECTION_OF = {key: sec for sec, keys in SCHEMA.items() for key in keys}
THEOREMS = ("1", "2", "holder")
_FLAT = "__flat__"  # a file without section headers: keys from any section


@dataclass(frozen=True)
class ResolvedConfig:
    values: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def params(self) -> FractionalParams:
        al = self["alpha"]
        return FractionalParams(self["s"], al if al is not None and al < 2 * self["s"] else None, self["n"])

    def experiment(self) -> ExperimentConfig:
        v = self.values
        alpha = v["s"] if v["alpha"] is None else v["alpha"]
        return ExperimentConfig(
            s=v["s"], alpha=alpha, n=v["n"], N=v["N"], L=v["L"], seed=v["seed"],
            delta=v["delta"], deltas=tuple(v["deltas"]), lam=v["lam"], J=v["J"],
            u0_modes=v["u0_modes"], u0_slope=v["u0_slope"], forcing=v["forcing"],
            T=v["T"], dt=v["dt"], eps=v["eps"], r=v["r"], K=v["K"], M=v["ext_M"],
            exponent_tol=v["exponent_tol"], slope_slack=v["slope_slack"],
            theorem2_floor=v["theorem2_floor"], holder_floor=v["holder_floor"],
        )

    def as_table(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {}
        for key, val in self.values.items():
            out.setdefault(_SECTION_OF[key], {})[key] = list(val) if isinstance(val, tuple) else val
        return out


def _nearest(key: str) -> str:
    hits = difflib.get_close_matches(key, list(_SECTION_OF), n=1, cutoff=0.0)
    return hits[0] if hits else "?"


def _coerce(key: str, raw: Any) -> Any:
    if key not in _SECTION_OF:
        raise ConfigError(f"unknown key {key!r}; nearest valid key is {_nearest(key)!r}")
    parser, tname, _ = SCHEMA[_SECTION_OF[key]][key]
    if not isinstance(raw, str):
        return raw
    try:
        return parser(raw)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected {tname}, got {raw!r}") from None


def _validate(v: dict[str, Any]) -> None:
    # alpha is shared by the drift (needs (0, 2s)) and the barriers (needs (0, 1));
    # the stricter range is enforced where it applies
    FractionalParams(v["s"], None, v["n"])
    if v["alpha"] is not None and not 0 < v["alpha"] < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {v['alpha']}")
    if v["N"] < 16 or v["N"] & (v["N"] - 1):
        raise ConfigError(f"N must be a power of two >= 16, got {v['N']}")
    if v["jobs"] < 1:
        raise ConfigError(f"jobs must be positive, got {v['jobs']}")
    if v["theorem"] not in THEOREMS:
        raise ConfigError(f"theorem must be one of {', '.join(THEOREMS)}, got {v['theorem']!r}")
    for k in ("T", "dt", "h", "L"):
        if not v[k] > 0:
            raise ConfigError(f"{k} must be positive, got {v[k]}")


def resolve(file_values: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None) -> ResolvedConfig:
    """Defaults, then file values, then overrides; everything type-checked."""
    v = {key: SCHEMA[sec][key][2] for key, sec in _SECTION_OF.items()}
    for src in (file_values or {}, overrides or {}):
        for key, raw in src.items():
            if raw is None and key in v and SCHEMA[_SECTION_OF[key]][key][2] is not None:
                continue
            v[key] = _coerce(key, raw)
    _validate(v)
    return ResolvedConfig(v)


def load_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> ResolvedConfig:
    file_values: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
        cp.optionxform = str  # keys are case-sensitive (N, L, M, Y, K, J, T)
        try:
            cp.read_string(text, source=str(path))
        except configparser.MissingSectionHeaderError:
            cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
            cp.optionxform = str
            cp.read_string(f"[{_FLAT}]\n" + text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for sec in cp.sections():
            if sec == _FLAT:
                file_values.update(cp.items(sec))
                continue
            if sec not in SCHEMA:
                near = difflib.get_close_matches(sec, list(SCHEMA), n=1, cutoff=0.0)
                raise ConfigError(f"unknown section [{sec}]; nearest valid section is [{near[0]}]")
            for key, raw in cp.items(sec):
                if key not in SCHEMA[sec]:
                    if key in _SECTION_OF:
                        raise ConfigError(f"key {key!r} belongs in section [{_SECTION_OF[key]}], not [{sec}]")
                    raise ConfigError(f"unknown key {key!r}; nearest valid key is {_nearest(key)!r}")
                file_values[key] = raw
    return resolve(file_values, overrides)
