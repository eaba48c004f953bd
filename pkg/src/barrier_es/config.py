"""Run configuration: problem choice, engine hyperparameters and schedules, with
strict JSON I/O and the built-in benchmark suites."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .engine import EngineConfig
from .errors import BarrierESError, ConfigError
from .oracles import AccuracySchedule

# JSON names that differ from the dataclass attribute names.
_ENGINE_ALIASES = {"lambda": "lam", "lambda_prime": "lam_prime"}
_REQUIRED_ENGINE = ("lambda",)
_TOP_KEYS = ("problem", "engine", "schedule", "offspring_schedule", "nu", "seeds")


@dataclass
class RunConfig:
    problem: str | dict = "noisy-sphere-10"
    engine: EngineConfig = field(default_factory=EngineConfig)
    schedule: AccuracySchedule = field(default_factory=AccuracySchedule)
    offspring_schedule: AccuracySchedule | None = None
    nu: float = 0.95
    seeds: int = 10

    def __post_init__(self):
        if not 0.0 < self.nu < 1.0:
            raise ConfigError("nu", "must lie in (0, 1)")
        if self.seeds < 1:
            raise ConfigError("seeds", "must be positive")

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "engine": self.engine.to_dict(),
            "schedule": _schedule_dict(self.schedule),
            "offspring_schedule": (None if self.offspring_schedule is None
                                   else _schedule_dict(self.offspring_schedule)),
            "nu": self.nu,
            "seeds": self.seeds,
        }

    def run_kwargs(self) -> dict:
        return {"schedule": self.schedule, "offspring_schedule": self.offspring_schedule,
                "nu": self.nu}


def _schedule_dict(s: AccuracySchedule) -> dict:
    return {f.name: getattr(s, f.name) for f in fields(s)}


def _check_keys(data: dict, allowed, prefix: str) -> None:
    if not isinstance(data, dict):
        raise ConfigError(prefix.rstrip("."), "expected a JSON object")
    for key in data:
        if key not in allowed:
            raise ConfigError(prefix + key, "unknown key")


def _build(cls, data: dict, prefix: str, aliases=None):
    aliases = aliases or {}
    names = {f.name for f in fields(cls)}
    allowed = {k for k in aliases} | (names - set(aliases.values()))
    _check_keys(data, allowed, prefix)
    kwargs = {aliases.get(k, k): v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (BarrierESError, TypeError, ValueError) as exc:
        raise ConfigError(prefix.rstrip("."), str(exc)) from exc


def engine_from_dict(data: dict) -> EngineConfig:
    for key in _REQUIRED_ENGINE:
        if key not in data:
            raise ConfigError(f"engine.{key}", "missing required key")
    return _build(EngineConfig, data, "engine.", _ENGINE_ALIASES)


def schedule_from_dict(data: dict, prefix: str = "schedule.") -> AccuracySchedule:
    return _build(AccuracySchedule, data, prefix)


def config_from_dict(data: dict) -> RunConfig:
    _check_keys(data, _TOP_KEYS, "")
    if "engine" not in data:
        raise ConfigError("engine", "missing required key")
    problem = data.get("problem", "noisy-sphere-10")
    if not isinstance(problem, (str, dict)):
        raise ConfigError("problem", "expected a registry name or an object")
    off = data.get("offspring_schedule")
    return RunConfig(
        problem=problem,
        engine=engine_from_dict(data["engine"]),
        schedule=schedule_from_dict(data.get("schedule", {})),
        offspring_schedule=None if off is None else schedule_from_dict(off, "offspring_schedule."),
        nu=float(data.get("nu", 0.95)),
        seeds=int(data.get("seeds", 10)),
    )


def read_config(path) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("", f"{path}: invalid JSON: {exc}") from exc
    return config_from_dict(data)


def write_config(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Built-in suites


def _mdp_engine(**kw) -> EngineConfig:
    # Tabular softmax policies need a much larger antithetic step than the
    # control-task default to move within a few hundred iterations.
    base = dict(beta=200.0, budget=200, warmup=20, surrogate="problem")
    base.update(kw)
    return EngineConfig(**base)


def _suites() -> dict[str, RunConfig]:
    fixed40 = AccuracySchedule("fixed", n_fixed=40)
    return {
        "sphere": RunConfig("noisy-sphere-10", EngineConfig(budget=2000), fixed40),
        "constrained": RunConfig("constrained-quadratic", EngineConfig(budget=1000), fixed40),
        "chain-entropy": RunConfig("chain-entropy", _mdp_engine(), fixed40),
        "grid-cmdp": RunConfig("grid-cmdp", _mdp_engine(), fixed40),
        "theory": RunConfig(
            {"name": "noisy-sphere", "n": 10, "noise_sd": 0.01},
            EngineConfig.symmetric(1.01, budget=500),
            AccuracySchedule("capped", eps_f=1e-3, p=0.75, n_cap=200),
            AccuracySchedule("fixed", n_fixed=40), nu=0.95),
        "accuracy": RunConfig(
            {"name": "noisy-sphere", "n": 10, "noise_sd": 1e-4},
            EngineConfig(sigma_min=0.05, budget=1000),
            AccuracySchedule("theoretical", eps_f=1e-3, p=0.75),
            AccuracySchedule("fixed", n_fixed=40), seeds=1),
    }


SUITES = tuple(_suites())


def suite(name: str) -> RunConfig:
    table = _suites()
    if name not in table:
        raise ConfigError("suite", f"unknown suite {name!r}; choose from {', '.join(table)}")
    return table[name]
