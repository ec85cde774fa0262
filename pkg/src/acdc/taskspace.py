"""Task archives and the task-evolution pipeline.

Active tasks are the bounded working set models are evaluated on; the
global archive is append-only and feeds novelty comparison and final
task-force selection. New tasks are proposed by a scientist provider from
a parent task's difficulty profile, gated on embedding novelty plus a
judge decision, repaired through reflection rounds, and committed.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ScorerSandboxFailure, SandboxFailure, Unparseable
from .providers import DecodeParams, HttpChatClient, PromptLibrary, TranscriptLog, _digest_seed
from .scoring import ScorerSpec, probe_spec
from . import sandbox

logger = logging.getLogger(__name__)


class AdaptationType(enum.Enum):
    INCREASE_DIFFICULTY = "harder"
    DECREASE_DIFFICULTY = "easier"
    NOVEL = "novel"


@dataclass
class TaskRecord:
    id: str
    name: str
    description: str
    capability_tag: str
    estimated_difficulty: int
    instruction_template: str
    scorer: ScorerSpec
    embedding: np.ndarray | None = None
    parent_id: str | None = None
    adaptation_kind: str = "seed"  # seed | harder | easier | novel
    pass_rate_history: list[tuple[int, float]] = field(default_factory=list)
    reflection_rounds: int = 0
    commit_order: int = -1

    def validate(self) -> None:
        if not 1 <= self.estimated_difficulty <= 5:
            raise ValueError(f"task {self.id}: difficulty must be 1..5")
        if (self.parent_id is None) != (self.adaptation_kind == "seed"):
            raise ValueError(f"task {self.id}: parent_id absent iff seed task")
        if self.embedding is not None:
            norm = float(np.linalg.norm(self.embedding))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"task {self.id}: embedding norm {norm} not unit")

    def summary_payload(self) -> dict:
        return {
            "name_of_task": self.name,
            "description_of_task": self.description,
            "capability_being_measured": self.capability_tag,
            "estimated_human_difficulty": str(self.estimated_difficulty),
            "example_instruction": self.instruction_template,
            "scorer": self.scorer.to_json(),
        }


@dataclass
class CandidateTask:
    name: str
    description: str
    capability_tag: str
    estimated_difficulty: int
    instruction_template: str
    scorer: ScorerSpec
    done: bool
    parent_id: str | None
    adaptation_kind: str
    embedding: np.ndarray | None = None
    raw_payload: dict = field(default_factory=dict)


@dataclass
class TaskArchives:
    active: list[TaskRecord] = field(default_factory=list)
    global_order: list[TaskRecord] = field(default_factory=list)
    epoch: int = 0
    q_max: int = 250

    def __post_init__(self):
        self._by_id = {t.id: t for t in self.global_order}

    def get(self, task_id: str) -> TaskRecord:
        return self._by_id[task_id]

    def has(self, task_id: str) -> bool:
        return task_id in self._by_id

    def check_invariants(self) -> None:
        assert len(self.active) <= self.q_max
        for t in self.active:
            assert self.has(t.id), f"active task {t.id} missing from global archive"
        for t in self.global_order:
            if t.parent_id is not None:
                assert self.has(t.parent_id), f"parent {t.parent_id} not in global archive"


def init_archives(seed_tasks: list[TaskRecord], q_max: int) -> TaskArchives:
    for i, t in enumerate(seed_tasks):
        t.commit_order = i
        t.validate()
    return TaskArchives(active=list(seed_tasks[:q_max]),
                        global_order=list(seed_tasks), epoch=0, q_max=q_max)


# ---------------------------------------------------------------------------
# adaptation classification


def classify_adaptation(pass_rate: float, threshold: float,
                        novel_probability: float,
                        rng: np.random.Generator) -> AdaptationType:
    """Map a task's population pass rate to the kind of variant to generate."""
    if not 0.0 <= pass_rate <= 1.0:
        raise ValueError("pass_rate must be in [0, 1]")
    if pass_rate >= threshold:
        return AdaptationType.INCREASE_DIFFICULTY
    if pass_rate == 0.0:
        return AdaptationType.DECREASE_DIFFICULTY
    if rng.random() < novel_probability:
        return AdaptationType.NOVEL
    return AdaptationType.INCREASE_DIFFICULTY


# ---------------------------------------------------------------------------
# scientist transcript parsing


def parse_scientist_payload(transcript: str) -> dict:
    """Extract the structured JSON block from a scientist transcript."""
    marker = transcript.find("RESPONSE JSON")
    search_from = marker if marker >= 0 else 0
    start = transcript.find("{", search_from)
    if start < 0:
        raise Unparseable("no JSON object in scientist transcript")
    decoder = json.JSONDecoder()
    try:
        payload, _ = decoder.raw_decode(transcript[start:])
    except ValueError as exc:
        raise Unparseable(f"malformed scientist JSON: {exc}")
    if not isinstance(payload, dict):
        raise Unparseable("scientist JSON is not an object")
    return payload


def candidate_from_payload(payload: dict, parent_id: str | None,
                           kind: str) -> CandidateTask:
    try:
        name = str(payload["name_of_task"])
        description = str(payload["description_of_task"])
        capability = str(payload.get("capability_being_measured", ""))
        difficulty = int(str(payload.get("estimated_human_difficulty", "3")))
    except (KeyError, ValueError) as exc:
        raise Unparseable(f"scientist JSON missing required field: {exc}")
    difficulty = min(5, max(1, difficulty))
    if "scorer" in payload:
        scorer = ScorerSpec.from_json(payload["scorer"])
    elif "task_family" in payload:
        scorer = ScorerSpec(kind="function_tests",
                            payload={"source": str(payload["task_family"])})
    else:
        raise Unparseable("scientist JSON has neither 'scorer' nor 'task_family'")
    done = str(payload.get("done", "False")).lower() == "true"
    instruction = str(payload.get("example_instruction") or description)
    return CandidateTask(
        name=name, description=description, capability_tag=capability,
        estimated_difficulty=difficulty, instruction_template=instruction,
        scorer=scorer, done=done, parent_id=parent_id, adaptation_kind=kind,
        raw_payload=payload,
    )


_PROMPT_BY_KIND = {
    AdaptationType.INCREASE_DIFFICULTY: "task_harder",
    AdaptationType.DECREASE_DIFFICULTY: "task_easier",
    AdaptationType.NOVEL: "task_adapt_novel",
}


def propose_task(parent: TaskRecord, references: list[TaskRecord],
                 kind: AdaptationType, scientist, prompts: PromptLibrary,
                 retry_budget: int = 2, rng_seed: int | None = None) -> CandidateTask | None:
    """Ask the scientist for a candidate variant of ``parent``; None on rejection."""
    prompt = prompts.render(
        _PROMPT_BY_KIND[kind],
        original_task_json=json.dumps(parent.summary_payload(), indent=1),
        other_task_jsons="\n".join(
            json.dumps(r.summary_payload()) for r in references),
    )
    context = {"parent": parent.summary_payload(), "kind": kind.value,
               "rng_seed": rng_seed}
    for attempt in range(retry_budget + 1):
        transcript = scientist.generate(prompt, context=context)
        try:
            payload = parse_scientist_payload(transcript)
            return candidate_from_payload(payload, parent.id, kind.value)
        except Unparseable as exc:
            logger.debug("scientist transcript unparseable (attempt %d): %s",
                         attempt + 1, exc)
    logger.warning("candidate rejected: scientist unparseable after %d attempts",
                   retry_budget + 1)
    return None


# ---------------------------------------------------------------------------
# novelty gating


def embedding_text(candidate: CandidateTask) -> str:
    lib = PromptLibrary()
    return lib.render(
        "task_embedding",
        name_of_task=candidate.name,
        description_of_task=candidate.description,
        capability_being_measured=candidate.capability_tag,
        estimated_human_difficulty=str(candidate.estimated_difficulty),
        example_instruction=candidate.instruction_template,
    )


def nearest_tasks(embedding: np.ndarray, tasks: list[TaskRecord],
                  k: int = 3) -> list[tuple[float, TaskRecord]]:
    """Top-k global tasks by cosine similarity (embeddings are unit vectors)."""
    sims = [(float(np.dot(embedding, t.embedding)), t)
            for t in tasks if t.embedding is not None]
    sims.sort(key=lambda pair: (-pair[0], pair[1].id))
    return sims[:k]


def novelty_gate(candidate: CandidateTask, global_tasks: list[TaskRecord],
                 embedder, judge, prompts: PromptLibrary) -> bool:
    """Accept iff the judge deems the candidate interestingly new.

    Fails closed: an unparseable judge rejects, since spurious acceptance
    pollutes the append-only archive. An empty global archive auto-accepts.
    The candidate's embedding is computed here and stored on it.
    """
    candidate.embedding = embedder.embed(embedding_text(candidate))
    comparable = [t for t in global_tasks if t.embedding is not None]
    if not comparable:
        return True
    neighbors = nearest_tasks(candidate.embedding, comparable, k=3)
    filled = prompts.render(
        "novelty_user",
        new_task=json.dumps({
            "name_of_task": candidate.name,
            "description_of_task": candidate.description,
            "capability_being_measured": candidate.capability_tag,
            "estimated_human_difficulty": str(candidate.estimated_difficulty),
        }, indent=1),
        closest_tasks="\n".join(json.dumps(t.summary_payload()) for _, t in neighbors),
    )
    try:
        decision = judge.decide("novelty", filled,
                                context={"similarities": [s for s, _ in neighbors]})
    except Unparseable:
        logger.warning("novelty judge unparseable; rejecting candidate %s",
                       candidate.name)
        return False
    return bool(decision.yes)


# ---------------------------------------------------------------------------
# reflection / validation


def _execute_scorer(candidate: CandidateTask, attempt: str) -> str | None:
    """Run the candidate's scorer once; return error text, or None when clean.

    Wrong answers are not errors -- only compile/run failures of the scoring
    program count. Infrastructure failures raise ScorerSandboxFailure.
    """
    spec = candidate.scorer
    try:
        spec.validate()
    except ValueError as exc:
        return f"invalid scorer spec: {exc}"
    if spec.kind == "function_tests":
        try:
            result = sandbox.run_task_family(spec.payload["source"], attempt,
                                             task_key=spec.payload.get("task_key", "1"))
        except SandboxFailure as exc:
            raise ScorerSandboxFailure(str(exc))
        return result.error
    # the remaining kinds cannot fail to execute on well-formed specs
    return None


def validate_task(candidate: CandidateTask, scientist, max_reflections: int,
                  prompts: PromptLibrary, record_id: str) -> TaskRecord | None:
    """Reflection loop: scientist attempts its own task, scorer must execute.

    Accepts when the scorer runs cleanly and the scientist marks the task
    done; otherwise re-prompts with the error text up to ``max_reflections``
    times and rejects on budget exhaustion.
    """
    current = candidate
    rounds = 0
    while True:
        rounds += 1
        attempt = scientist.solve(current.instruction_template)
        error = _execute_scorer(current, attempt)
        if error is None and current.done:
            record = TaskRecord(
                id=record_id,
                name=current.name,
                description=current.description,
                capability_tag=current.capability_tag,
                estimated_difficulty=current.estimated_difficulty,
                instruction_template=current.instruction_template,
                scorer=current.scorer,
                embedding=current.embedding,
                parent_id=current.parent_id,
                adaptation_kind=current.adaptation_kind,
                reflection_rounds=rounds,
            )
            record.validate()
            return record
        if rounds > max_reflections:
            logger.info("task candidate %s rejected after %d rounds (%s)",
                        current.name, rounds, error or "never marked done")
            return None
        reflection = prompts.render(
            "task_reflection",
            current_round=str(rounds),
            num_rounds=str(max_reflections),
            eval_response=error if error is not None else f"scorer ran cleanly on: {attempt!r}",
        )
        transcript = scientist.generate(
            reflection,
            context={"parent": current.raw_payload, "kind": current.adaptation_kind,
                     "rng_seed": None, "reflection": True, "error": error})
        try:
            payload = parse_scientist_payload(transcript)
            revised = candidate_from_payload(payload, current.parent_id,
                                             current.adaptation_kind)
            revised.embedding = current.embedding
            current = revised
        except Unparseable as exc:
            logger.debug("reflection transcript unparseable: %s", exc)


# ---------------------------------------------------------------------------
# minimal criterion and commit


def impossible_gate(task: TaskRecord, population_bits_for_task: list[int],
                    archives: TaskArchives) -> TaskRecord:
    """Replace a task nobody solves with its parent; seed tasks are kept."""
    if any(population_bits_for_task):
        return task
    if task.parent_id is None:
        return task
    return archives.get(task.parent_id)


def commit_tasks(archives: TaskArchives, accepted: list[TaskRecord]) -> TaskArchives:
    """Append accepted tasks to the global archive and refresh the active set.

    The active set keeps the newest (by commit order) tasks up to capacity;
    the global archive is append-only. The epoch increments on every commit,
    including empty ones.
    """
    next_order = len(archives.global_order)
    for i, task in enumerate(accepted):
        if archives.has(task.id):
            raise ValueError(f"task id {task.id} already committed")
        task.commit_order = next_order + i
        task.validate()
    new_global = archives.global_order + list(accepted)
    merged = {t.id: t for t in archives.active}
    for t in accepted:
        merged[t.id] = t
    new_active = sorted(merged.values(), key=lambda t: t.commit_order)
    if len(new_active) > archives.q_max:
        new_active = new_active[len(new_active) - archives.q_max:]
    result = TaskArchives(active=new_active, global_order=new_global,
                          epoch=archives.epoch + 1, q_max=archives.q_max)
    result.check_invariants()
    return result


# ---------------------------------------------------------------------------
# scientist backends


class SyntheticScientist:
    """Deterministic scientist for desk-scale runs.

    Candidates are inner-product probe tasks over the flattened genome
    space: "harder" raises the parent probe's threshold, "easier" lowers
    it, and "novel" draws a fresh random direction. Transcripts use the
    same THOUGHT / RESPONSE JSON format as a live backend so the parsing
    path is identical.
    """

    def __init__(self, seed: int, flat_dim: int, threshold_step: float = 0.05,
                 novel_threshold: float = 0.0, novel_spread: float = 0.05,
                 probe_noise: float = 0.0, axes: np.ndarray | None = None,
                 axis_mix: float = 0.8):
        self.seed = seed
        self.flat_dim = flat_dim
        self.threshold_step = threshold_step
        self.novel_threshold = novel_threshold
        self.novel_spread = novel_spread
        self.probe_noise = probe_noise
        self.axes = axes
        self.axis_mix = axis_mix
        self._counter = 0

    def _novel_direction(self, rng: np.random.Generator) -> np.ndarray:
        if self.axes is None:
            return rng.standard_normal(self.flat_dim)
        axis = self.axes[int(rng.integers(0, self.axes.shape[0]))]
        noise = rng.standard_normal(self.flat_dim)
        noise /= np.linalg.norm(noise)
        return self.axis_mix * axis + (1.0 - self.axis_mix) * noise

    def _rng(self, rng_seed: int | None) -> np.random.Generator:
        if rng_seed is None:
            self._counter += 1
            rng_seed = _digest_seed(str(self.seed), "call", str(self._counter))
        return np.random.Generator(np.random.PCG64(rng_seed))

    def generate(self, prompt: str, context: dict | None = None) -> str:
        context = context or {}
        kind = context.get("kind", "novel")
        parent = context.get("parent") or {}
        rng = self._rng(context.get("rng_seed"))
        suffix = f"{rng.integers(0, 16**8):08x}"
        parent_scorer = parent.get("scorer") or {}
        parent_payload = parent_scorer.get("payload") or {}
        parent_difficulty = int(str(parent.get("estimated_human_difficulty", "3")))
        if kind == "harder" and "direction" in parent_payload:
            direction = np.asarray(parent_payload["direction"])
            threshold = float(parent_payload["threshold"]) + self.threshold_step
            difficulty = min(5, parent_difficulty + 1)
        elif kind == "easier" and "direction" in parent_payload:
            direction = np.asarray(parent_payload["direction"])
            threshold = float(parent_payload["threshold"]) - self.threshold_step
            difficulty = max(1, parent_difficulty - 1)
        else:
            direction = self._novel_direction(rng)
            threshold = float(rng.normal(self.novel_threshold, self.novel_spread))
            difficulty = 3
        spec = probe_spec(direction, threshold,
                          noise_seed=int(rng.integers(0, 2**31)),
                          noise=self.probe_noise)
        name = f"{kind}_probe_{suffix}"
        payload = {
            "name_of_task": name,
            "description_of_task":
                f"Synthetic probe task ({kind}) with threshold {threshold:.4f}",
            "capability_being_measured": f"probe_direction_{suffix[:4]}",
            "estimated_human_difficulty": str(difficulty),
            "done": "True",
            "example_instruction": f"Solve probe {name}.",
            "scorer": spec.to_json(),
        }
        return ("THOUGHT: synthetic candidate generation\n\n"
                f"RESPONSE JSON: {json.dumps(payload)}")

    def solve(self, instruction: str) -> str:
        tag = _digest_seed(str(self.seed), "solve", instruction) % 10**6
        return f"Answer: {tag}"


class HttpScientist:
    """Scientist backed by a chat-completions endpoint."""

    def __init__(self, client: HttpChatClient, prompts: PromptLibrary,
                 transcripts: TranscriptLog | None = None,
                 decode: DecodeParams | None = None):
        self.client = client
        self.prompts = prompts
        self.transcripts = transcripts or TranscriptLog()
        self.decode = decode or DecodeParams(max_tokens=4096, temperature=0.7)

    def generate(self, prompt: str, context: dict | None = None) -> str:
        messages = [
            {"role": "system",
             "content": self.prompts.render("task_create_system", num_rounds="3")},
            {"role": "user", "content": prompt},
        ]
        text = self.client.chat(messages, self.decode)
        self.transcripts.record("scientist", "generate", prompt, text)
        return text

    def solve(self, instruction: str) -> str:
        messages = [
            {"role": "system", "content": self.prompts.get("eval_system")},
            {"role": "user", "content": instruction},
        ]
        text = self.client.chat(messages, self.decode)
        self.transcripts.record("scientist", "solve", instruction, text)
        return text
