"""Skill vectors, fitness, difficulty weighting, and dominated-novelty selection.

A skill vector records which active tasks a genome solved. Selection keeps
the single fittest solution plus the solutions whose skill sets are most
distinct from their strictly-fitter competitors, weighted by per-task
difficulty (fraction of the population failing the task).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    EmptyPopulation,
    EmptySkillVector,
    EpochMismatch,
    LengthMismatch,
    Unparseable,
    ZeroTotalWeight,
)

logger = logging.getLogger(__name__)

#: Sentinel marking an evaluation that raised instead of returning a score.
FAILURE = None


@dataclass(frozen=True)
class SkillVector:
    bits: tuple[int, ...]
    task_epoch: int

    def __len__(self) -> int:
        return len(self.bits)


@dataclass
class ScoredSolution:
    genome_id: str
    skill: SkillVector
    fitness: float
    novelty: float | None = None


@dataclass
class DnsParams:
    k: int = 3
    alpha_dom: float = 999.0
    use_difficulty_weights: bool = True

    def validate(self) -> None:
        if self.k < 1:
            raise ValueError("dns.k must be >= 1")


@dataclass
class DifficultyWeights:
    w: tuple[float, ...]


def compute_skill_vector(per_task_scores: Sequence[float | None],
                         task_epoch: int = 0,
                         expected_len: int | None = None) -> SkillVector:
    """One bit per task: 1 iff the score is exactly 1.0; failures count as 0."""
    if expected_len is not None and len(per_task_scores) != expected_len:
        raise LengthMismatch(
            f"got {len(per_task_scores)} scores for {expected_len} active tasks")
    bits = tuple(1 if s == 1.0 else 0 for s in per_task_scores)
    return SkillVector(bits=bits, task_epoch=task_epoch)


def fitness(skill: SkillVector) -> float:
    """Unweighted fraction of active tasks solved."""
    if len(skill) == 0:
        raise EmptySkillVector("fitness of an empty skill vector is undefined")
    return sum(skill.bits) / len(skill)


def difficulty_weights(population_bits: Sequence[Sequence[int]]) -> DifficultyWeights:
    """Per-task weight = fraction of the model population failing that task."""
    if len(population_bits) == 0:
        raise EmptyPopulation("need at least one model row")
    if len({len(row) for row in population_bits}) > 1:
        raise LengthMismatch("population rows have unequal lengths")
    mat = np.asarray(population_bits, dtype=float)
    fail_frac = 1.0 - mat.mean(axis=0)
    return DifficultyWeights(w=tuple(float(x) for x in fail_frac))


def _check_epochs(solutions: Sequence[ScoredSolution]) -> None:
    epochs = {s.skill.task_epoch for s in solutions}
    if len(epochs) > 1:
        raise EpochMismatch(f"mixed task epochs: {sorted(epochs)}")


def unique_skill_score(subject: SkillVector, other: SkillVector,
                       weights: Sequence[float]) -> float:
    """Weighted fraction of tasks the subject solves that `other` does not, x100."""
    total = float(np.sum(weights))
    if total <= 0.0:
        raise ZeroTotalWeight("sum of difficulty weights is zero")
    w = np.asarray(weights, dtype=float)
    vs = np.asarray(subject.bits, dtype=bool)
    vo = np.asarray(other.bits, dtype=bool)
    unique = float(np.sum(w[vs & ~vo]))
    return unique / total * 100.0


def dns_novelty_score(subject: ScoredSolution,
                      pool: Sequence[ScoredSolution],
                      weights: DifficultyWeights,
                      params: DnsParams) -> float:
    """Mean weighted-unique-skill distance to the k nearest strictly-fitter solutions.

    Returns ``params.alpha_dom`` when no pool member is strictly fitter.
    """
    _check_epochs([subject, *pool])
    fitter = [s for s in pool
              if s.genome_id != subject.genome_id and s.fitness > subject.fitness]
    if not fitter:
        return params.alpha_dom
    scores = sorted(unique_skill_score(subject.skill, s.skill, weights.w)
                    for s in fitter)
    kk = min(params.k, len(scores))
    return float(sum(scores[:kk]) / kk)


def _selection_key(s: ScoredSolution) -> tuple:
    # descending novelty, then descending fitness, then older (smaller) id
    return (-s.novelty, -s.fitness, s.genome_id)


def dns_archive_update(archive: Sequence[ScoredSolution],
                       candidates: Sequence[ScoredSolution],
                       m: int,
                       params: DnsParams,
                       weights: DifficultyWeights | None = None) -> list[ScoredSolution]:
    """Select at most ``m`` solutions: the fitness maximum plus the top novelty scores.

    When ``weights`` is omitted they are computed from the combined pool's
    skill bits; an all-solved pool (zero total weight) falls back to uniform
    weights for this update.
    """
    pool = list(archive) + [c for c in candidates
                            if c.genome_id not in {a.genome_id for a in archive}]
    if not pool:
        return []
    _check_epochs(pool)
    if weights is None:
        weights = difficulty_weights([s.skill.bits for s in pool])
        if sum(weights.w) <= 0.0:
            logger.warning("all tasks solved by every model; using uniform weights")
            weights = DifficultyWeights(w=(1.0,) * len(pool[0].skill))
    if not params.use_difficulty_weights:
        weights = DifficultyWeights(w=(1.0,) * len(pool[0].skill))

    for s in pool:
        s.novelty = dns_novelty_score(s, pool, weights, params)

    # elitism: the fitness maximum always survives
    best = min(pool, key=lambda s: (-s.fitness, s.genome_id))
    rest = sorted((s for s in pool if s.genome_id != best.genome_id),
                  key=_selection_key)
    return [best] + rest[:m - 1]


def render_gibberish_prompt(template: str,
                            triples: Sequence[tuple[str, str]]) -> str:
    if len(triples) != 3:
        raise ValueError("gibberish gate requires exactly 3 (instruction, response) pairs")
    return template.format(
        instruction1=triples[0][0], outputs1=triples[0][1],
        instruction2=triples[1][0], outputs2=triples[1][1],
        instruction3=triples[2][0], outputs3=triples[2][1],
    )


def gibberish_gate(genome_id: str,
                   sampled_triples: Sequence[tuple[str, str]],
                   judge,
                   template: str) -> bool:
    """Return True to keep the genome, False to discard it as degenerate.

    Fails open: if the judge transcript has no parseable answer after its
    retry budget, the genome is kept and a warning logged.
    """
    prompt = render_gibberish_prompt(template, sampled_triples)
    try:
        decision = judge.decide("gibberish", prompt)
    except Unparseable:
        logger.warning("gibberish judge unparseable for %s; keeping model", genome_id)
        return True
    return not decision.yes
