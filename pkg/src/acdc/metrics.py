"""Collective-capability metrics and answer aggregation.

Coverage is the fraction of questions solved by at least one model of a
set; task-force selection picks the subset maximizing it greedily. The
Vendi score measures embedding diversity. The Best-of-N strategies reduce
several candidate answers to one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientModels,
    Unparseable,
    UnknownModelId,
)

logger = logging.getLogger(__name__)


@dataclass
class ResponseMatrix:
    correct: np.ndarray  # {0,1}, models x questions
    model_ids: list[str]
    question_ids: list[str]

    def __post_init__(self):
        self.correct = np.asarray(self.correct, dtype=np.int8)
        if self.correct.ndim != 2:
            raise ValueError("response matrix must be 2-D (models x questions)")
        n, q = self.correct.shape
        if n < 1 or q < 1:
            raise ValueError("response matrix needs >= 1 model and >= 1 question")
        if len(self.model_ids) != n or len(self.question_ids) != q:
            raise ValueError("id lists must match matrix dimensions")

    def row(self, model_id: str) -> np.ndarray:
        try:
            return self.correct[self.model_ids.index(model_id)]
        except ValueError:
            raise UnknownModelId(model_id)


@dataclass
class TaskForce:
    member_ids: list[str]
    selection_strategy: str  # coverage | fitness | random
    achieved_coverage: float


def coverage(m: ResponseMatrix, subset: list[str] | None = None) -> float:
    """Fraction of questions solved by at least one selected model."""
    if subset is None:
        rows = m.correct
    else:
        rows = np.stack([m.row(mid) for mid in subset]) if subset else \
            np.zeros((0, m.correct.shape[1]), dtype=np.int8)
    if rows.shape[0] == 0:
        return 0.0
    return float(np.any(rows == 1, axis=0).mean())


def select_task_force(historical_bits: ResponseMatrix, n: int, strategy: str,
                      rng: np.random.Generator | None = None) -> TaskForce:
    """Pick ``n`` models by the requested strategy.

    coverage: greedy marginal-coverage maximization (ties break by higher
    row mean, then lower model index); fitness: top-n rows by mean;
    random: seeded uniform sample without replacement.
    """
    n_models = historical_bits.correct.shape[0]
    if n > n_models:
        raise InsufficientModels(f"requested {n} of {n_models} models")
    ids = historical_bits.model_ids
    if strategy == "coverage":
        chosen: list[int] = []
        covered = np.zeros(historical_bits.correct.shape[1], dtype=bool)
        remaining = list(range(n_models))
        row_means = historical_bits.correct.mean(axis=1)
        for _ in range(n):
            best_i = None
            best_key = None
            for i in remaining:
                gain = int(np.sum(~covered & (historical_bits.correct[i] == 1)))
                key = (gain, row_means[i], -i)
                if best_key is None or key > best_key:
                    best_key, best_i = key, i
            chosen.append(best_i)
            covered |= historical_bits.correct[best_i] == 1
            remaining.remove(best_i)
        members = [ids[i] for i in chosen]
    elif strategy == "fitness":
        means = historical_bits.correct.mean(axis=1)
        order = sorted(range(n_models), key=lambda i: (-means[i], i))
        members = [ids[i] for i in order[:n]]
    elif strategy == "random":
        if rng is None:
            raise ValueError("random strategy requires an rng")
        members = [ids[i] for i in rng.choice(n_models, size=n, replace=False)]
    else:
        raise ValueError(f"unknown task-force strategy {strategy!r}")
    return TaskForce(member_ids=members, selection_strategy=strategy,
                     achieved_coverage=coverage(historical_bits, members))


def vendi_score(embeddings: list[np.ndarray]) -> float:
    """Effective diversity of a set of unit vectors.

    Computed as exp of the Shannon entropy of the eigenvalues of the
    normalized cosine Gram matrix; ranges from 1 (all identical) to n
    (mutually orthogonal).
    """
    if len(embeddings) == 0:
        raise ValueError("need at least one embedding")
    dims = {np.asarray(e).shape for e in embeddings}
    if len(dims) > 1:
        raise DimensionMismatch(f"mixed embedding shapes: {dims}")
    x = np.stack([np.asarray(e, dtype=np.float64) for e in embeddings])
    gram = x @ x.T
    np.fill_diagonal(gram, 1.0)
    eigvals = np.linalg.eigvalsh(gram / len(embeddings))
    eigvals = np.clip(eigvals, 0.0, None)  # Gram matrices are PSD analytically
    nonzero = eigvals[eigvals > 0.0]
    entropy = -float(np.sum(nonzero * np.log(nonzero)))
    return float(np.exp(entropy))


# ---------------------------------------------------------------------------
# Best-of-N aggregation


def _pair_winner(a: str, b: str, instruction: str, judge, prompts) -> str:
    filled = prompts.render("bon_pair", instruction=instruction,
                            answer1=a, answer2=b)
    try:
        decision = judge.decide("bon_pair", filled)
    except Unparseable:
        logger.warning("pair judge unparseable; first answer advances")
        return a
    if decision.index == 2:
        return b
    if decision.index == 1:
        return a
    logger.warning("pair judge returned %r; first answer advances", decision.raw)
    return a


def bon_divide_conquer(answers: list[str], judge, prompts,
                       instruction: str = "") -> str:
    """Single-elimination pairwise tournament; odd answers bye to the next round."""
    if not answers:
        raise ValueError("need at least one answer")
    current = list(answers)
    while len(current) > 1:
        nxt = []
        for i in range(0, len(current) - 1, 2):
            nxt.append(_pair_winner(current[i], current[i + 1],
                                    instruction, judge, prompts))
        if len(current) % 2 == 1:
            nxt.append(current[-1])
        current = nxt
    return current[0]


def bon_monarchical(answers: list[str], judge, prompts,
                    instruction: str = "") -> str:
    """One judge call over all candidates at once; returns the selected answer."""
    if not answers:
        raise ValueError("need at least one answer")
    if len(answers) == 1:
        return answers[0]
    listing = "\n".join(f"[CANDIDATE {i + 1}]\n{a}" for i, a in enumerate(answers))
    filled = prompts.render("bon_monarch", n=str(len(answers)),
                            instruction=instruction, answers=listing)
    try:
        decision = judge.decide("bon_monarch", filled)
    except Unparseable:
        logger.warning("monarch judge unparseable; first answer selected")
        return answers[0]
    if decision.index is None or not 1 <= decision.index <= len(answers):
        logger.warning("monarch judge index %r out of range; first answer selected",
                       decision.index)
        return answers[0]
    return answers[decision.index - 1]


def bon_reward(answers: list[str], reward_provider,
               instruction: str = "") -> str:
    """Highest scalar reward wins; ties break to the lowest index."""
    if not answers:
        raise ValueError("need at least one answer")
    if len(answers) == 1:
        return answers[0]
    scores = [reward_provider.score_answer(instruction, a) for a in answers]
    return answers[int(np.argmax(scores))]
