import numpy as np
import pytest

from acdc.config import RunConfig
from acdc.genome import ModelGenome


def small_config(**overrides) -> RunConfig:
    """A desk-scale run configuration that finishes in well under a second."""
    cfg = RunConfig(generations=6, active_models=8, offspring_per_gen=4,
                    active_tasks=40, task_interval=3, n_gen_tasks=4,
                    init_tasks=4, taskforce_size=4, run_seed=0)
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def make_genome(gid: str, seed: int, shapes=None) -> ModelGenome:
    shapes = shapes or {"a": (4, 3), "b": (3, 5)}
    rng = np.random.default_rng(seed)
    return ModelGenome(id=gid, tensors={
        name: rng.standard_normal(shape) for name, shape in shapes.items()})


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
