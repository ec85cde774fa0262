"""Model genomes and the two genetic operators.

A genome is an ordered collection of named real matrices standing in for a
model's weights. Crossover mixes the parents' offsets from a shared base
genome with normalized random weights; mutation perturbs the leading
singular values of each weight matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights, SchemaMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Lineage:
    parents: tuple[str, ...]
    operator: str
    weights: tuple[float, ...] = ()
    failed_tensors: tuple[str, ...] = ()


@dataclass
class ModelGenome:
    id: str
    tensors: dict[str, np.ndarray]
    lineage: Lineage | None = None
    generation_born: int = 0

    def validate(self) -> None:
        for name, t in self.tensors.items():
            if not np.all(np.isfinite(t)):
                raise ValueError(f"tensor {name!r} of genome {self.id!r} has non-finite entries")

    def flatten(self) -> np.ndarray:
        """Concatenate all tensors, in schema order, into one float64 vector."""
        return np.concatenate([t.ravel() for t in self.tensors.values()]).astype(np.float64)

    def flat_dim(self) -> int:
        return sum(t.size for t in self.tensors.values())


@dataclass
class TaskVector:
    tensors: dict[str, np.ndarray]


@dataclass
class CrossoverParams:
    mu: float = 0.5
    sigma: float = 0.5
    resample_epsilon: float = 1e-3

    def validate(self) -> None:
        if self.sigma <= 0:
            raise ValueError("crossover.sigma must be > 0")
        if self.resample_epsilon <= 0:
            raise ValueError("crossover.resample_epsilon must be > 0")


@dataclass
class MutationParams:
    k: int = 256
    sigma: float = 0.2
    rate: float = 0.25

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("mutation.k must be >= 1")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError("mutation.rate must be in [0, 1]")
        if self.sigma < 0:
            raise ValueError("mutation.sigma must be >= 0")


def check_schema(a: ModelGenome, b: ModelGenome) -> None:
    names_a, names_b = list(a.tensors), list(b.tensors)
    if names_a != names_b:
        raise SchemaMismatch(f"tensor names differ: {names_a} vs {names_b}")
    for name in names_a:
        if a.tensors[name].shape != b.tensors[name].shape:
            raise SchemaMismatch(
                f"tensor {name!r} shape differs: "
                f"{a.tensors[name].shape} vs {b.tensors[name].shape}"
            )


def task_vector(model: ModelGenome, base: ModelGenome) -> TaskVector:
    """Elementwise offset of a genome from the base genome."""
    check_schema(model, base)
    return TaskVector(
        {name: np.asarray(model.tensors[name], dtype=np.float64) - base.tensors[name]
         for name in model.tensors}
    )


def sample_mixing_weights(rng: np.random.Generator, params: CrossoverParams) -> tuple[float, float]:
    """Draw the two crossover weights, resampling until their sum is usable."""
    while True:
        w1, w2 = rng.normal(params.mu, params.sigma, size=2)
        if abs(w1 + w2) >= params.resample_epsilon:
            return float(w1), float(w2)


def crossover(
    p1: ModelGenome,
    p2: ModelGenome,
    base: ModelGenome,
    omega1: float,
    omega2: float,
    resample_epsilon: float = 1e-3,
    child_id: str = "child",
    generation: int = 0,
) -> ModelGenome:
    """Blend the parents' task vectors with normalized mixing weights."""
    check_schema(p1, base)
    check_schema(p2, base)
    total = omega1 + omega2
    if abs(total) < resample_epsilon:
        raise DegenerateWeights(f"|omega1 + omega2| = {abs(total)} < {resample_epsilon}")
    c1, c2 = omega1 / total, omega2 / total
    t1 = task_vector(p1, base)
    t2 = task_vector(p2, base)
    tensors = {
        name: base.tensors[name] + c1 * t1.tensors[name] + c2 * t2.tensors[name]
        for name in base.tensors
    }
    child = ModelGenome(
        id=child_id,
        tensors=tensors,
        lineage=Lineage(parents=(p1.id, p2.id), operator="crossover",
                        weights=(omega1, omega2)),
        generation_born=generation,
    )
    child.validate()
    return child


def mutate_svd(
    model: ModelGenome,
    params: MutationParams,
    rng: np.random.Generator,
    child_id: str | None = None,
    generation: int | None = None,
) -> ModelGenome:
    """Perturb the leading singular values of each (selected) weight matrix.

    Each matrix is mutated independently with probability ``params.rate``.
    Vectors and 1xN / Mx1 matrices are copied bit-identically (the operator
    is a pass-through for rank-1 tensors). Decomposition failures leave the
    tensor unmutated and are recorded on the lineage.
    """
    tensors: dict[str, np.ndarray] = {}
    failed: list[str] = []
    for name, t in model.tensors.items():
        t = np.asarray(t, dtype=np.float64)
        if t.ndim < 2 or min(t.shape) == 1:
            tensors[name] = t.copy()
            continue
        if rng.random() >= params.rate:
            tensors[name] = t.copy()
            continue
        try:
            u, s, vt = np.linalg.svd(t, full_matrices=False)
        except np.linalg.LinAlgError:
            logger.warning("SVD failed for tensor %r of genome %r; left unmutated",
                           name, model.id)
            failed.append(name)
            tensors[name] = t.copy()
            continue
        n_perturb = min(params.k, s.shape[0])
        noise = rng.normal(0.0, params.sigma, size=n_perturb)
        s_new = s.copy()
        s_new[:n_perturb] += noise
        tensors[name] = (u * s_new) @ vt
    child = ModelGenome(
        id=child_id if child_id is not None else model.id,
        tensors=tensors,
        lineage=Lineage(parents=(model.id,), operator="mutation",
                        failed_tensors=tuple(failed)),
        generation_born=model.generation_born if generation is None else generation,
    )
    child.validate()
    return child
