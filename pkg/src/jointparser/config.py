"""Plain key=value configuration files for hyperparameters.

Lines are `name = value`; blank lines and `#` comments are skipped.  Values
are coerced to the declared type of the matching Hyper field, and unknown
keys are an error so typos fail loudly.
"""

from __future__ import annotations

import dataclasses


class ConfigError(ValueError):
    pass


def read_config(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, "
                                  f"got {raw.strip()!r}")
            key, value = line.split("=", 1)
            pairs[key.strip()] = value.strip()
    return pairs


def _coerce(name: str, text: str, target_type) -> object:
    try:
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
    except ValueError:
        raise ConfigError(f"config value {name}={text!r} is not a valid "
                          f"{target_type.__name__}") from None
    return text


def apply_config(hyper, pairs: dict[str, str]):
    """A copy of `hyper` with `pairs` laid over it.

    Works for any settings dataclass; keys must name its fields.
    """
    types = {f.name: f.type for f in dataclasses.fields(type(hyper))}
    resolved = {"int": int, "float": float, int: int, float: float}
    updates = {}
    for key, text in pairs.items():
        if key not in types:
            valid = ", ".join(sorted(types))
            raise ConfigError(f"unknown config key {key!r} "
                              f"(valid keys: {valid})")
        updates[key] = _coerce(key, text, resolved.get(types[key], str))
    return dataclasses.replace(hyper, **updates)
