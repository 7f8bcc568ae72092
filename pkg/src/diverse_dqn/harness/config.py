"""Experiment configuration in a sectioned ``key = value`` text format.

Grammar (parsed with :mod:`configparser`)::

    [experiment]
    env = catcher_lite            ; catcher_lite | maxbias_chain
    seeds = 0, 1, 2, 3, 4
    total_steps = 200000
    eval_every = 5000
    out = results
    workers = 1
    final_window = 3              ; evaluation points averaged for "final return"

    [environment]                 ; forwarded to the environment constructor
    fruit_budget = 10

    [agent]                       ; any AgentConfig field
    algorithm = maxmin
    n_members = 2
    hidden = 64, 64

    [matrix]                      ; optional sweep axes
    algorithms = maxmin, ensemble
    regularizers = none, gini, theil
    lambdas = 1e-5, 1e-6

Lists are comma separated. Booleans are true/false. ``none`` is accepted for
optional integers.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field

from ..agents import AgentConfig

ENVIRONMENTS = ("catcher_lite", "maxbias_chain")
_ENV_TYPES = {
    "width": int, "height": int, "fruit_budget": int, "end_on_miss": bool,
    "n_b_actions": int, "mu": float, "sigma": float,
}


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _list(text: str, cast) -> list:
    return [cast(part.strip()) for part in text.split(",") if part.strip()]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _agent_value(name: str, text: str):
    kinds = {f.name: f for f in dataclasses.fields(AgentConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown agent key {name!r}")
    default = kinds[name].default
    if name == "hidden":
        return tuple(_list(text, int))
    if name == "eps_decay_steps":
        return None if text.strip().lower() == "none" else int(float(text))
    if isinstance(default, bool):
        return _bool(text)
    if isinstance(default, int):
        return int(float(text))
    if isinstance(default, float):
        return float(text)
    return text.strip()


@dataclass
class ExperimentConfig:
    env: str = "catcher_lite"
    env_params: dict = field(default_factory=dict)
    agent: AgentConfig = field(default_factory=AgentConfig)
    seeds: list[int] = field(default_factory=lambda: [0])
    total_steps: int = 200_000
    eval_every: int = 5_000
    out: str = "results"
    workers: int = 1
    final_window: int = 3
    algorithms: list[str] = field(default_factory=list)
    regularizers: list[str] = field(default_factory=list)
    lambdas: list[float] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"env must be one of {ENVIRONMENTS}, got {self.env!r}")
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if self.total_steps <= 0:
            raise ConfigError("total_steps must be positive")
        if self.eval_every <= 0:
            raise ConfigError("eval_every must be positive")
        if self.workers < 1 or self.final_window < 1:
            raise ConfigError("workers and final_window must be >= 1")
        for k in self.env_params:
            if k not in _ENV_TYPES:
                raise ConfigError(f"unknown environment key {k!r}")

    # --- text round trip ----------------------------------------------
    @classmethod
    def parse(cls, text: str, overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        """Parse config text. ``overrides`` maps ``section.key`` to a raw value."""
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        for dotted, raw in (overrides or {}).items():
            section, _, key = dotted.partition(".")
            if not cp.has_section(section):
                cp.add_section(section)
            cp.set(section, key, str(raw))
        unknown = set(cp.sections()) - {"experiment", "environment", "agent", "matrix"}
        if unknown:
            raise ConfigError(f"unknown section(s): {sorted(unknown)}")
        try:
            exp = cp["experiment"] if cp.has_section("experiment") else {}
            kwargs: dict = {}
            known = {"env", "seeds", "total_steps", "eval_every", "out", "workers", "final_window"}
            for key in exp:
                if key not in known:
                    raise ConfigError(f"unknown experiment key {key!r}")
            if "env" in exp:
                kwargs["env"] = exp["env"].strip()
            if "seeds" in exp:
                kwargs["seeds"] = _list(exp["seeds"], int)
            for key in ("total_steps", "eval_every", "workers", "final_window"):
                if key in exp:
                    kwargs[key] = int(float(exp[key]))
            if "out" in exp:
                kwargs["out"] = exp["out"].strip()
            if cp.has_section("environment"):
                params = {}
                for key, raw in cp["environment"].items():
                    if key not in _ENV_TYPES:
                        raise ConfigError(f"unknown environment key {key!r}")
                    cast = _ENV_TYPES[key]
                    params[key] = _bool(raw) if cast is bool else cast(raw)
                kwargs["env_params"] = params
            agent_kwargs = {}
            if cp.has_section("agent"):
                for key, raw in cp["agent"].items():
                    agent_kwargs[key] = _agent_value(key, raw)
            kwargs["agent"] = AgentConfig(**agent_kwargs)
            if cp.has_section("matrix"):
                m = cp["matrix"]
                for key in m:
                    if key not in ("algorithms", "regularizers", "lambdas"):
                        raise ConfigError(f"unknown matrix key {key!r}")
                kwargs["algorithms"] = _list(m.get("algorithms", ""), str)
                kwargs["regularizers"] = _list(m.get("regularizers", ""), str)
                kwargs["lambdas"] = _list(m.get("lambdas", ""), float)
            return cls(**kwargs)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def to_text(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {
            "env": self.env, "seeds": _fmt(self.seeds), "total_steps": _fmt(self.total_steps),
            "eval_every": _fmt(self.eval_every), "out": self.out, "workers": _fmt(self.workers),
            "final_window": _fmt(self.final_window),
        }
        cp["environment"] = {k: _fmt(v) for k, v in sorted(self.env_params.items())}
        cp["agent"] = {f.name: _fmt(getattr(self.agent, f.name)) for f in dataclasses.fields(AgentConfig)}
        cp["matrix"] = {
            "algorithms": _fmt(self.algorithms), "regularizers": _fmt(self.regularizers),
            "lambdas": _fmt(self.lambdas),
        }
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def load(cls, path, overrides: dict[str, str] | None = None) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.parse(text, overrides)
