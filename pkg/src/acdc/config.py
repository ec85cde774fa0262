"""Run configuration: defaults, YAML parsing, validation, round-trip."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ParseError, ValidationError
from .genome import CrossoverParams, MutationParams
from .population import DnsParams
from .providers import ProviderConfig

PROVIDER_ROLES = ("scientist", "judge", "embedder", "subject", "reward")


@dataclass
class TaskPhaseParams:
    threshold: float = 0.5
    novel_probability: float = 0.5
    max_reflections: int = 3


@dataclass
class SyntheticSetup:
    """Desk-scale run construction: genome shapes and probe statistics."""

    n_seed_genomes: int = 3
    tensor_shapes: dict = field(
        default_factory=lambda: {f"w{i}": [4, 3] for i in range(12)})
    genome_scale: float = 1.0
    embed_dim: int = 32
    probe_threshold: float = 0.12
    probe_spread: float = 0.1
    probe_noise: float = 0.03
    threshold_step: float = 0.1
    gibberish_norm_limit: float = 6.0
    n_axes: int = 6
    axis_mix: float = 0.8
    seed_alignment: float = 0.3


@dataclass
class RunConfig:
    generations: int = 50
    active_models: int = 16
    offspring_per_gen: int = 8
    active_tasks: int = 250
    task_interval: int = 5
    n_gen_tasks: int = 8
    seed_task_count: int = 4
    init_tasks: int = 8
    taskforce_size: int = 8
    taskforce_strategy: str = "coverage"
    crossover: CrossoverParams = field(default_factory=CrossoverParams)
    mutation: MutationParams = field(default_factory=MutationParams)
    dns: DnsParams = field(default_factory=DnsParams)
    task: TaskPhaseParams = field(default_factory=TaskPhaseParams)
    providers: dict = field(default_factory=lambda: {
        role: ProviderConfig() for role in PROVIDER_ROLES})
    synthetic: SyntheticSetup = field(default_factory=SyntheticSetup)
    run_seed: int = 0

    def validate(self) -> None:
        checks = [
            ("generations", self.generations >= 1, ">= 1"),
            ("active_models", self.active_models >= 3, ">= 3"),
            ("offspring_per_gen", self.offspring_per_gen >= 1, ">= 1"),
            ("active_tasks", self.active_tasks >= 1, ">= 1"),
            ("task_interval", self.task_interval >= 1, ">= 1"),
            ("n_gen_tasks", self.n_gen_tasks >= 0, ">= 0"),
            ("seed_task_count", self.seed_task_count >= 1, ">= 1"),
            ("init_tasks", self.init_tasks >= 0, ">= 0"),
            ("taskforce_size", self.taskforce_size >= 1, ">= 1"),
            ("taskforce_strategy",
             self.taskforce_strategy in ("coverage", "fitness", "random"),
             "one of coverage|fitness|random"),
            ("task.threshold", 0.0 <= self.task.threshold <= 1.0, "in [0, 1]"),
            ("task.novel_probability",
             0.0 <= self.task.novel_probability <= 1.0, "in [0, 1]"),
            ("task.max_reflections", self.task.max_reflections >= 0, ">= 0"),
        ]
        for key, ok, requirement in checks:
            if not ok:
                raise ValidationError(key, f"must be {requirement}")
        for section, params in (("crossover", self.crossover),
                                ("mutation", self.mutation),
                                ("dns", self.dns)):
            try:
                params.validate()
            except ValueError as exc:
                raise ValidationError(str(exc).split(" ")[0], str(exc))
        for role, pc in self.providers.items():
            if role not in PROVIDER_ROLES:
                raise ValidationError(f"providers.{role}", "unknown provider role")
            try:
                pc.validate()
            except ValueError as exc:
                raise ValidationError(f"providers.{role}", str(exc))


def _merge_dataclass(instance, data: dict, prefix: str = ""):
    valid = {f.name: f for f in fields(instance)}
    for key, value in data.items():
        full_key = f"{prefix}{key}"
        if key not in valid:
            raise ValidationError(full_key, "unknown configuration key")
        current = getattr(instance, key)
        if dataclasses.is_dataclass(current) and isinstance(value, dict):
            _merge_dataclass(current, value, prefix=f"{full_key}.")
        elif key == "providers":
            if not isinstance(value, dict):
                raise ValidationError(full_key, "must be a mapping of roles")
            for role, role_data in value.items():
                if role not in current:
                    raise ValidationError(f"{full_key}.{role}", "unknown provider role")
                if not isinstance(role_data, dict):
                    raise ValidationError(f"{full_key}.{role}", "must be a mapping")
                _merge_dataclass(current[role], role_data, prefix=f"{full_key}.{role}.")
        else:
            expected = type(current)
            try:
                if expected is bool:
                    if not isinstance(value, bool):
                        raise ValueError("expected a boolean")
                    setattr(instance, key, value)
                elif expected in (int, float, str):
                    setattr(instance, key, expected(value))
                else:
                    setattr(instance, key, value)
            except (TypeError, ValueError):
                raise ValidationError(full_key, f"expected {expected.__name__}")


def parse_config(path: str | Path) -> RunConfig:
    """Load a YAML config; unspecified fields keep their defaults."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}")
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}")
    if not isinstance(data, dict):
        raise ParseError(f"config root must be a mapping, got {type(data).__name__}")
    config = RunConfig()
    _merge_dataclass(config, data)
    config.validate()
    return config


def serialize_config(config: RunConfig) -> str:
    return yaml.safe_dump(dataclasses.asdict(config), sort_keys=True)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()
