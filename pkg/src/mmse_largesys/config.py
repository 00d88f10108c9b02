"""Flat ``key = value`` scenario files.

Blank lines and ``#`` comments are ignored. Keys must come from
:data:`CONFIG_KEYS`; anything else is rejected. Omitted keys keep the
:class:`NetworkConfig` defaults.
"""

from __future__ import annotations

from .network import ConfigError, NetworkConfig

CONFIG_KEYS = {
    "L": int, "K": int, "M": int, "tau_c": int, "r": float, "rho_db": float,
    "rho_tr_factor": float, "cell_side_km": float, "shadow_var_db2": float,
    "min_dist_m": float, "seed": int,
}


def parse_config_text(text: str, **overrides) -> NetworkConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return NetworkConfig(**values)


def load_config(path, **overrides) -> NetworkConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config_text(f.read(), **overrides)


def dump_config(config: NetworkConfig) -> str:
    return "".join(f"{key} = {getattr(config, key)!r}\n" for key in CONFIG_KEYS)
