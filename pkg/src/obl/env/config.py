"""Environment configuration and construction.

Config files are YAML mappings. Schema::

    env: toy_game | matrix_coord | mini_hanabi
    # mini_hanabi only (all optional, defaults from the preset):
    preset: micro | default
    num_colors: int
    ranks: [int, ...]      # rank multiset per color
    hand_size: int
    hint_tokens: int
    life_tokens: int
    max_turns: int
    # matrix_coord only:
    payoff: [[float, ...], ...]
    order: [int, ...]      # turn order used by the stage-game conversion

Other top-level keys (``seed``, ``solver``, ``learner``...) belong to the
commands that read them and are ignored here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .base import DecPomdp, InvalidConfigError
from .hanabi import PRESETS, MiniHanabi
from .matrix import SimultaneousGame, convert_simultaneous, matrix_game
from .toy import ToyGame

VARIANTS = ("toy_game", "matrix_coord", "mini_hanabi")
HANABI_KEYS = ("num_colors", "ranks", "hand_size", "hint_tokens", "life_tokens", "max_turns")
COORD_PAYOFF = [[1.0, 0.0], [0.0, 1.0]]


@dataclass
class EnvironmentConfig:
    variant: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfigError(f"unknown env {self.variant!r}; expected one of {VARIANTS}", "env")
        allowed = {
            "toy_game": set(),
            "matrix_coord": {"payoff", "order"},
            "mini_hanabi": {"preset", *HANABI_KEYS},
        }[self.variant]
        for key in self.params:
            if key not in allowed:
                raise InvalidConfigError(f"unknown key {key!r} for env {self.variant}", key)

    @classmethod
    def from_mapping(cls, data: dict) -> "EnvironmentConfig":
        if not isinstance(data, dict) or "env" not in data:
            raise InvalidConfigError("config must be a mapping with an 'env' key", "env")
        data = dict(data)
        variant = data.pop("env")
        keep = {"preset", "payoff", "order", *HANABI_KEYS}
        if isinstance(variant, dict):
            # nested form: every key belongs to the env, so unknown ones are errors
            nested = dict(variant)
            variant = nested.pop("name", None)
            params = {k: v for k, v in data.items() if k in keep}
            params.update(nested)
            return cls(variant, params)
        return cls(variant, {k: v for k, v in data.items() if k in keep})


def load_config(path: str | Path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"cannot parse {path}: {exc}", "<file>") from exc
    except OSError as exc:
        raise InvalidConfigError(f"cannot read {path}: {exc}", "<file>") from exc
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{path}: top level must be a mapping", "<file>")
    return data


def _positive_int(params, key):
    value = params[key]
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise InvalidConfigError(f"{key} must be a positive integer, got {value!r}", key)
    return value


def build_env(config: EnvironmentConfig | str | dict) -> DecPomdp | SimultaneousGame:
    """Build an environment. ``matrix_coord`` comes back in simultaneous form."""
    if isinstance(config, str):
        config = EnvironmentConfig(config)
    elif isinstance(config, dict):
        config = EnvironmentConfig.from_mapping(config)
    params = config.params
    if config.variant == "toy_game":
        return ToyGame()
    if config.variant == "matrix_coord":
        payoff = params.get("payoff", COORD_PAYOFF)
        if not payoff or any(len(r) != len(payoff[0]) for r in payoff):
            raise InvalidConfigError("payoff must be a rectangular matrix", "payoff")
        cfg = {"variant": "matrix_coord", "payoff": [[float(x) for x in r] for r in payoff]}
        return matrix_game(payoff, cfg)
    preset = params.get("preset", "micro")
    if preset not in PRESETS:
        raise InvalidConfigError(f"unknown mini_hanabi preset {preset!r}", "preset")
    merged = {**PRESETS[preset], **{k: v for k, v in params.items() if k in HANABI_KEYS}}
    for key in HANABI_KEYS:
        if key == "ranks":
            ranks = merged["ranks"]
            if not isinstance(ranks, (list, tuple)) or not ranks or any(
                not isinstance(r, int) or r <= 0 for r in ranks
            ):
                raise InvalidConfigError("ranks must be a nonempty list of positive ints", "ranks")
        else:
            _positive_int(merged, key)
    return MiniHanabi(**merged)


def build_turn_based(config: EnvironmentConfig | str | dict) -> DecPomdp:
    """Like :func:`build_env`, but converts simultaneous games to stage games."""
    env = build_env(config)
    if isinstance(env, SimultaneousGame):
        if isinstance(config, EnvironmentConfig):
            order = config.params.get("order")
        elif isinstance(config, dict):
            order = config.get("order")
        else:
            order = None
        return convert_simultaneous(env, order)
    return env
