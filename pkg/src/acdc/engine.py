"""Per-generation orchestration of the coupled model/task evolution loop.

Each generation: breed offspring by crossover + mutation, evaluate them on
the active tasks, apply the gibberish gate, and update the model archive
by dominated-novelty selection. Every ``task_interval`` generations a
historical snapshot is taken, the task archive evolves, and every archived
model is re-evaluated on the refreshed active set.

All randomness is derived from (run_seed, generation, stream, index), so
results are independent of evaluation scheduling and resume is exact.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .errors import AcdcError
from .genome import (
    Lineage,
    ModelGenome,
    crossover,
    mutate_svd,
    sample_mixing_weights,
)
from .population import (
    ScoredSolution,
    SkillVector,
    compute_skill_vector,
    dns_archive_update,
    fitness,
    gibberish_gate,
)
from .providers import (
    HttpChatClient,
    HttpJudge,
    HttpEmbedder,
    HttpReward,
    HttpSubject,
    PromptLibrary,
    SyntheticEmbedder,
    SyntheticJudge,
    SyntheticSubject,
    TranscriptLog,
    extract_answer,
)
from .config import RunConfig
from .scoring import ScorerSpec, probe_spec, score
from .taskspace import (
    AdaptationType,
    HttpScientist,
    SyntheticScientist,
    TaskArchives,
    TaskRecord,
    classify_adaptation,
    commit_tasks,
    impossible_gate,
    init_archives,
    novelty_gate,
    propose_task,
    validate_task,
)

logger = logging.getLogger(__name__)

_STREAMS = {"parents": 1, "omega": 2, "mutate": 3, "gibberish": 4,
            "taskphase": 5, "taskforce": 6, "init": 7, "holdout": 8, "axes": 9}


def derived_rng(run_seed: int, generation: int, stream: str,
                index: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence([run_seed, generation, _STREAMS[stream], index])
    return np.random.Generator(np.random.PCG64(seq))


@dataclass
class ProviderBundle:
    scientist: object
    judge: object
    embedder: object
    subject: object
    reward: object | None = None
    prompts: PromptLibrary = field(default_factory=PromptLibrary)
    transcripts: TranscriptLog = field(default_factory=TranscriptLog)


@dataclass
class GenerationStats:
    generation: int
    new_models: int
    best_fitness: float
    mean_fitness: float
    archive_coverage: float


@dataclass
class EpochStats:
    generation: int
    epoch: int
    vendi: float
    accepted_harder: int
    accepted_easier: int
    accepted_novel: int
    replaced_impossible: int


@dataclass
class ArchiveState:
    generation: int
    run_seed: int
    base_id: str
    archive: list[ScoredSolution]
    task_archives: TaskArchives
    genome_store: dict[str, ModelGenome]
    lineage: dict[str, Lineage | None]
    historical: list[tuple[int, list[str]]]
    gen_stats: list[GenerationStats] = field(default_factory=list)
    epoch_stats: list[EpochStats] = field(default_factory=list)
    next_genome_index: int = 0
    next_task_index: int = 0

    def check_invariants(self, config: RunConfig) -> None:
        assert len(self.archive) <= config.active_models
        self.task_archives.check_invariants()
        for sol in self.archive:
            assert sol.genome_id in self.genome_store
        for gen, ids in self.historical:
            assert gen % config.task_interval == 0
            for gid in ids:
                assert gid in self.genome_store

    def resolve_to_seeds(self, genome_id: str) -> set[str]:
        """Walk the lineage DAG from one genome down to its seed ancestors."""
        seeds: set[str] = set()
        stack = [genome_id]
        seen: set[str] = set()
        while stack:
            gid = stack.pop()
            if gid in seen:
                continue
            seen.add(gid)
            lin = self.lineage.get(gid)
            if lin is None or not lin.parents:
                seeds.add(gid)
            else:
                stack.extend(lin.parents)
        return seeds


# ---------------------------------------------------------------------------
# evaluation


def evaluate_genome(genome: ModelGenome, tasks: list[TaskRecord],
                    providers: ProviderBundle) -> list[float | None]:
    """Score one genome on each task; infrastructure failures become None."""
    results: list[float | None] = []
    for task in tasks:
        try:
            if task.scorer.kind == "synthetic_probe":
                results.append(score(task.scorer, genome))
            else:
                raw = providers.subject.answer(genome, task.instruction_template)
                answer = extract_answer(raw)
                results.append(score(task.scorer, answer, judge=providers.judge,
                                     prompts=providers.prompts,
                                     instructions=task.instruction_template))
        except (AcdcError, TypeError) as exc:
            logger.debug("evaluation failure on task %s: %s", task.id, exc)
            results.append(None)
    return results


def score_solution(genome_id: str, per_task: list[float | None],
                   epoch: int) -> ScoredSolution:
    skill = compute_skill_vector(per_task, task_epoch=epoch)
    return ScoredSolution(genome_id=genome_id, skill=skill, fitness=fitness(skill))


# ---------------------------------------------------------------------------
# generation step


def _breed_offspring(state: ArchiveState, config: RunConfig,
                     generation: int) -> list[ModelGenome]:
    base = state.genome_store[state.base_id]
    archive_ids = [s.genome_id for s in state.archive]
    offspring = []
    for i in range(config.offspring_per_gen):
        rng_parents = derived_rng(state.run_seed, generation, "parents", i)
        idx = rng_parents.choice(len(archive_ids), size=2, replace=False)
        p1 = state.genome_store[archive_ids[int(idx[0])]]
        p2 = state.genome_store[archive_ids[int(idx[1])]]
        rng_omega = derived_rng(state.run_seed, generation, "omega", i)
        w1, w2 = sample_mixing_weights(rng_omega, config.crossover)
        child_id = f"g{state.next_genome_index:06d}"
        state.next_genome_index += 1
        child = crossover(p1, p2, base, w1, w2,
                          resample_epsilon=config.crossover.resample_epsilon,
                          child_id=child_id, generation=generation)
        rng_mut = derived_rng(state.run_seed, generation, "mutate", i)
        mutated = mutate_svd(child, config.mutation, rng_mut,
                             child_id=child_id, generation=generation)
        # collapse the operator chain into one lineage edge to both parents
        failed = mutated.lineage.failed_tensors if mutated.lineage else ()
        mutated.lineage = Lineage(parents=(p1.id, p2.id),
                                  operator="crossover+mutation",
                                  weights=(w1, w2), failed_tensors=failed)
        offspring.append(mutated)
    return offspring


def _apply_gibberish_gate(offspring_scored, state: ArchiveState,
                          config: RunConfig, providers: ProviderBundle,
                          generation: int):
    active = state.task_archives.active
    if len(active) < 3:
        return offspring_scored
    template = providers.prompts.get("gibberish_user")
    kept = []
    for i, (genome, sol) in enumerate(offspring_scored):
        rng = derived_rng(state.run_seed, generation, "gibberish", i)
        picks = rng.choice(len(active), size=3, replace=False)
        triples = []
        for j in picks:
            task = active[int(j)]
            response = providers.subject.answer(genome, task.instruction_template)
            triples.append((task.instruction_template, response))
        if gibberish_gate(genome.id, triples, providers.judge, template):
            kept.append((genome, sol))
        else:
            logger.info("gibberish gate discarded %s", genome.id)
    return kept


def _task_phase(state: ArchiveState, config: RunConfig,
                providers: ProviderBundle, generation: int) -> EpochStats:
    archives = state.task_archives
    active = archives.active
    epoch = archives.epoch
    n_archive = len(state.archive)

    # latest pass rate per active task over the archived models
    pass_rates = []
    for j, task in enumerate(active):
        bits = [sol.skill.bits[j] for sol in state.archive]
        rate = sum(bits) / n_archive
        task.pass_rate_history.append((generation, rate))
        pass_rates.append((rate, bits))

    # minimal criterion: replace unsolvable non-seed tasks with their parents
    replaced = 0
    new_active = []
    active_ids = {t.id for t in active}
    for j, task in enumerate(active):
        replacement = impossible_gate(task, pass_rates[j][1], archives)
        if replacement.id != task.id and replacement.id not in active_ids:
            new_active.append(replacement)
            active_ids.add(replacement.id)
            replaced += 1
        else:
            new_active.append(task)
    working = TaskArchives(active=new_active, global_order=archives.global_order,
                           epoch=epoch, q_max=archives.q_max)

    accepted: list[TaskRecord] = []
    counts = {"harder": 0, "easier": 0, "novel": 0}
    for i in range(config.n_gen_tasks):
        rng = derived_rng(state.run_seed, generation, "taskphase", i)
        parent_idx = int(rng.integers(0, len(working.active)))
        parent = working.active[parent_idx]
        parent_rate = parent.pass_rate_history[-1][1] if parent.pass_rate_history else 0.5
        kind = classify_adaptation(parent_rate, config.task.threshold,
                                   config.task.novel_probability, rng)
        others = [t for t in working.active if t.id != parent.id] or [parent]
        ref_idx = rng.choice(len(others), size=min(3, len(others)), replace=False)
        references = [others[int(k)] for k in ref_idx]
        candidate = propose_task(
            parent, references, kind, providers.scientist, providers.prompts,
            retry_budget=config.providers["scientist"].retry_budget,
            rng_seed=int(rng.integers(0, 2**31)))
        if candidate is None:
            continue
        if not novelty_gate(candidate, working.global_order + accepted,
                            providers.embedder, providers.judge, providers.prompts):
            continue
        record_id = f"t{state.next_task_index:06d}"
        record = validate_task(candidate, providers.scientist,
                               config.task.max_reflections, providers.prompts,
                               record_id)
        if record is None:
            continue
        state.next_task_index += 1
        accepted.append(record)
        counts[record.adaptation_kind] += 1

    state.task_archives = commit_tasks(working, accepted)

    embeddings = [t.embedding for t in state.task_archives.global_order
                  if t.embedding is not None]
    vendi = metrics.vendi_score(embeddings) if embeddings else 1.0
    return EpochStats(generation=generation, epoch=state.task_archives.epoch,
                      vendi=vendi, accepted_harder=counts["harder"],
                      accepted_easier=counts["easier"],
                      accepted_novel=counts["novel"],
                      replaced_impossible=replaced)


def run_generation(state: ArchiveState, config: RunConfig,
                   providers: ProviderBundle) -> ArchiveState:
    """Advance the coupled archives by one generation (in place)."""
    generation = state.generation + 1
    epoch = state.task_archives.epoch
    active = state.task_archives.active

    offspring = _breed_offspring(state, config, generation)
    scored = []
    for genome in offspring:
        per_task = evaluate_genome(genome, active, providers)
        scored.append((genome, score_solution(genome.id, per_task, epoch)))
    scored = _apply_gibberish_gate(scored, state, config, providers, generation)

    for genome, _ in scored:
        state.genome_store[genome.id] = genome
        state.lineage[genome.id] = genome.lineage

    prev_ids = {s.genome_id for s in state.archive}
    state.archive = dns_archive_update(
        state.archive, [sol for _, sol in scored],
        config.active_models, config.dns)
    new_ids = {s.genome_id for s in state.archive} - prev_ids

    # genomes that fell out of both the archive and history can be dropped
    keep = {state.base_id} | {s.genome_id for s in state.archive}
    for _, ids in state.historical:
        keep.update(ids)

    if generation % config.task_interval == 0:
        state.historical.append((generation,
                                 [s.genome_id for s in state.archive]))
        epoch_stat = _task_phase(state, config, providers, generation)
        state.epoch_stats.append(epoch_stat)
        # refreshed active set invalidates all skill vectors
        new_epoch = state.task_archives.epoch
        for sol in state.archive:
            genome = state.genome_store[sol.genome_id]
            per_task = evaluate_genome(genome, state.task_archives.active,
                                       providers)
            new_sol = score_solution(sol.genome_id, per_task, new_epoch)
            sol.skill, sol.fitness, sol.novelty = new_sol.skill, new_sol.fitness, None

    keep |= {s.genome_id for s in state.archive}
    for _, ids in state.historical:
        keep.update(ids)
    for gid in [g for g in state.genome_store if g not in keep]:
        del state.genome_store[gid]

    fits = [s.fitness for s in state.archive]
    cov = _archive_coverage(state)
    state.gen_stats.append(GenerationStats(
        generation=generation, new_models=len(new_ids),
        best_fitness=max(fits), mean_fitness=float(np.mean(fits)),
        archive_coverage=cov))
    state.generation = generation
    state.check_invariants(config)
    return state


def _archive_coverage(state: ArchiveState) -> float:
    if not state.archive:
        return 0.0
    bits = np.array([s.skill.bits for s in state.archive], dtype=np.int8)
    if bits.size == 0:
        return 0.0
    return float(np.any(bits == 1, axis=0).mean())


# ---------------------------------------------------------------------------
# initialization and full run


def _synthetic_shapes(config: RunConfig) -> dict[str, tuple[int, ...]]:
    return {name: tuple(shape)
            for name, shape in config.synthetic.tensor_shapes.items()}


def _synthetic_flat_dim(config: RunConfig) -> int:
    return sum(int(np.prod(s)) for s in _synthetic_shapes(config).values())


def _unflatten(vec: np.ndarray, shapes: dict[str, tuple[int, ...]]) -> dict[str, np.ndarray]:
    out = {}
    offset = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        out[name] = vec[offset:offset + size].reshape(shape)
        offset += size
    return out


def capability_axes(config: RunConfig) -> np.ndarray:
    """Orthonormal latent skill directions the synthetic task space clusters on."""
    syn = config.synthetic
    flat_dim = _synthetic_flat_dim(config)
    rng = derived_rng(config.run_seed, 0, "axes")
    raw = rng.standard_normal((flat_dim, syn.n_axes))
    q, _ = np.linalg.qr(raw)
    return q.T.copy()


def probe_direction(rng: np.random.Generator, axes: np.ndarray,
                    axis_mix: float, axis: int | None = None) -> np.ndarray:
    """A task direction: mostly one capability axis plus idiosyncratic noise."""
    if axis is None:
        axis = int(rng.integers(0, axes.shape[0]))
    noise = rng.standard_normal(axes.shape[1])
    noise /= np.linalg.norm(noise)
    d = axis_mix * axes[axis] + (1.0 - axis_mix) * noise
    return d / np.linalg.norm(d)


def make_synthetic_seed_genomes(config: RunConfig) -> tuple[ModelGenome, list[ModelGenome]]:
    """Base genome plus n seed genomes, each aligned with one capability axis."""
    syn = config.synthetic
    shapes = _synthetic_shapes(config)
    flat_dim = _synthetic_flat_dim(config)
    axes = capability_axes(config)
    rng = derived_rng(config.run_seed, 0, "init", 0)
    base = ModelGenome(id="base", tensors={
        name: rng.standard_normal(shape) * (syn.genome_scale / np.sqrt(flat_dim))
        for name, shape in shapes.items()})
    seeds = []
    for i in range(syn.n_seed_genomes):
        rng_i = derived_rng(config.run_seed, 0, "init", i + 1)
        align = _unflatten(syn.seed_alignment * axes[i % axes.shape[0]], shapes)
        tensors = {
            name: base.tensors[name] + align[name] +
            rng_i.standard_normal(shape) * (syn.genome_scale / np.sqrt(flat_dim))
            for name, shape in shapes.items()}
        seeds.append(ModelGenome(id=f"seed{i}", tensors=tensors,
                                 generation_born=0))
    return base, seeds


def make_synthetic_seed_tasks(config: RunConfig) -> list[TaskRecord]:
    syn = config.synthetic
    axes = capability_axes(config)
    tasks = []
    for i in range(config.seed_task_count):
        rng = derived_rng(config.run_seed, 0, "init", 100 + i)
        direction = probe_direction(rng, axes, syn.axis_mix,
                                    axis=i % axes.shape[0])
        threshold = float(rng.normal(syn.probe_threshold, syn.probe_spread))
        tasks.append(TaskRecord(
            id=f"t{i:06d}",
            name=f"seed_probe_{i}",
            description=f"Seed probe task {i} with threshold {threshold:.4f}",
            capability_tag=f"seed_capability_{i % axes.shape[0]}",
            estimated_difficulty=2,
            instruction_template=f"Solve seed probe {i}.",
            scorer=probe_spec(direction, threshold,
                              noise_seed=int(rng.integers(0, 2**31)),
                              noise=syn.probe_noise),
        ))
    return tasks


def make_holdout_tasks(config: RunConfig, n: int,
                       holdout_seed: int = 1) -> list[TaskRecord]:
    """Held-out probes from the same task distribution; never shown to the run."""
    syn = config.synthetic
    axes = capability_axes(config)
    rng = derived_rng(config.run_seed, 0, "holdout", holdout_seed)
    tasks = []
    for i in range(n):
        direction = probe_direction(rng, axes, syn.axis_mix)
        threshold = float(rng.normal(syn.probe_threshold, syn.probe_spread))
        tasks.append(TaskRecord(
            id=f"holdout{i:06d}",
            name=f"holdout_probe_{i}",
            description=f"Held-out probe {i}",
            capability_tag="holdout",
            estimated_difficulty=3,
            instruction_template=f"Solve held-out probe {i}.",
            scorer=probe_spec(direction, threshold,
                              noise_seed=int(rng.integers(0, 2**31)),
                              noise=syn.probe_noise),
        ))
    return tasks


def make_synthetic_providers(config: RunConfig) -> ProviderBundle:
    syn = config.synthetic
    return ProviderBundle(
        scientist=SyntheticScientist(
            seed=config.providers["scientist"].seed ^ config.run_seed,
            flat_dim=_synthetic_flat_dim(config),
            threshold_step=syn.threshold_step,
            novel_threshold=syn.probe_threshold,
            novel_spread=syn.probe_spread,
            probe_noise=syn.probe_noise,
            axes=capability_axes(config),
            axis_mix=syn.axis_mix),
        judge=SyntheticJudge(norm_limit=syn.gibberish_norm_limit),
        embedder=SyntheticEmbedder(dim=syn.embed_dim,
                                   seed=config.providers["embedder"].seed),
        subject=SyntheticSubject(),
    )


def make_http_providers(config: RunConfig,
                        transcripts: TranscriptLog | None = None) -> ProviderBundle:
    prompts = PromptLibrary()
    transcripts = transcripts or TranscriptLog()
    clients = {role: HttpChatClient(config.providers[role])
               for role in ("scientist", "judge", "embedder", "subject")}
    reward_cfg = config.providers.get("reward")
    reward = HttpReward(HttpChatClient(reward_cfg)) \
        if reward_cfg and reward_cfg.backend == "http" else None
    return ProviderBundle(
        scientist=HttpScientist(clients["scientist"], prompts, transcripts),
        judge=HttpJudge(clients["judge"], prompts, transcripts),
        embedder=HttpEmbedder(clients["embedder"]),
        subject=HttpSubject(clients["subject"], prompts, transcripts),
        reward=reward,
        prompts=prompts, transcripts=transcripts,
    )


def make_providers(config: RunConfig,
                   transcripts: TranscriptLog | None = None) -> ProviderBundle:
    backends = {config.providers[r].backend
                for r in ("scientist", "judge", "embedder", "subject")}
    if backends == {"synthetic"}:
        return make_synthetic_providers(config)
    return make_http_providers(config, transcripts)


def init_state(config: RunConfig, providers: ProviderBundle,
               base: ModelGenome | None = None,
               seed_genomes: list[ModelGenome] | None = None,
               seed_tasks: list[TaskRecord] | None = None) -> ArchiveState:
    """Build generation-0 state: seed genomes evaluated on seed + init tasks."""
    config.validate()
    if base is None or seed_genomes is None:
        base, seed_genomes = make_synthetic_seed_genomes(config)
    if len(seed_genomes) < 3:
        raise ValueError("need at least three seed genomes")
    if seed_tasks is None:
        seed_tasks = make_synthetic_seed_tasks(config)

    for t in seed_tasks:
        if t.embedding is None:
            t.embedding = providers.embedder.embed(
                f"Name of task: {t.name}\n\nDescription of task: {t.description}")
    archives = init_archives(seed_tasks, q_max=config.active_tasks)

    state = ArchiveState(
        generation=0, run_seed=config.run_seed, base_id=base.id,
        archive=[], task_archives=archives,
        genome_store={base.id: base, **{g.id: g for g in seed_genomes}},
        lineage={base.id: None, **{g.id: None for g in seed_genomes}},
        historical=[],
        next_task_index=len(seed_tasks),
    )

    # initial task generation runs through the full proposal pipeline
    accepted: list[TaskRecord] = []
    for i in range(config.init_tasks):
        rng = derived_rng(config.run_seed, 0, "taskphase", i)
        parent = archives.active[int(rng.integers(0, len(archives.active)))]
        others = [t for t in archives.active if t.id != parent.id] or [parent]
        ref_idx = rng.choice(len(others), size=min(3, len(others)), replace=False)
        references = [others[int(k)] for k in ref_idx]
        candidate = propose_task(
            parent, references, AdaptationType.NOVEL, providers.scientist,
            providers.prompts,
            retry_budget=config.providers["scientist"].retry_budget,
            rng_seed=int(rng.integers(0, 2**31)))
        if candidate is None:
            continue
        if not novelty_gate(candidate, archives.global_order + accepted,
                            providers.embedder, providers.judge, providers.prompts):
            continue
        record = validate_task(candidate, providers.scientist,
                               config.task.max_reflections, providers.prompts,
                               f"t{state.next_task_index:06d}")
        if record is None:
            continue
        state.next_task_index += 1
        accepted.append(record)
    state.task_archives = commit_tasks(archives, accepted)

    epoch = state.task_archives.epoch
    for genome in seed_genomes:
        per_task = evaluate_genome(genome, state.task_archives.active, providers)
        state.archive.append(score_solution(genome.id, per_task, epoch))
    state.historical.append((0, [g.id for g in seed_genomes]))
    return state


def historical_response_matrix(state: ArchiveState,
                               providers: ProviderBundle,
                               tasks: list[TaskRecord] | None = None) -> metrics.ResponseMatrix:
    """Evaluate every historical model on the given tasks (default: global archive)."""
    tasks = tasks if tasks is not None else state.task_archives.global_order
    ids = sorted({gid for _, snap in state.historical for gid in snap})
    rows = []
    for gid in ids:
        per_task = evaluate_genome(state.genome_store[gid], tasks, providers)
        rows.append([1 if s == 1.0 else 0 for s in per_task])
    return metrics.ResponseMatrix(
        correct=np.array(rows, dtype=np.int8),
        model_ids=ids, question_ids=[t.id for t in tasks])


def select_final_task_force(state: ArchiveState, config: RunConfig,
                            providers: ProviderBundle) -> metrics.TaskForce:
    matrix = historical_response_matrix(state, providers)
    n = min(config.taskforce_size, matrix.correct.shape[0])
    rng = derived_rng(state.run_seed, state.generation + 1, "taskforce")
    return metrics.select_task_force(matrix, n, config.taskforce_strategy, rng)


def run(config: RunConfig, providers: ProviderBundle | None = None,
        snapshot_callback=None, **seed_kwargs) -> tuple[ArchiveState, metrics.TaskForce]:
    """Full coevolution run: init, G generations, final task-force selection."""
    config.validate()
    if providers is None:
        providers = make_providers(config)
    state = init_state(config, providers, **seed_kwargs)
    if snapshot_callback:
        snapshot_callback(state)
    for _ in range(config.generations):
        state = run_generation(state, config, providers)
        if snapshot_callback:
            snapshot_callback(state)
    task_force = select_final_task_force(state, config, providers)
    return state, task_force


# ---------------------------------------------------------------------------
# snapshot serialization


def _task_to_json(t: TaskRecord) -> dict:
    return {
        "id": t.id, "name": t.name, "description": t.description,
        "capability_tag": t.capability_tag,
        "estimated_difficulty": t.estimated_difficulty,
        "instruction_template": t.instruction_template,
        "scorer": t.scorer.to_json(),
        "embedding": None if t.embedding is None else [float(x) for x in t.embedding],
        "parent_id": t.parent_id, "adaptation_kind": t.adaptation_kind,
        "pass_rate_history": [[int(g), float(r)] for g, r in t.pass_rate_history],
        "reflection_rounds": t.reflection_rounds,
        "commit_order": t.commit_order,
    }


def _task_from_json(d: dict) -> TaskRecord:
    return TaskRecord(
        id=d["id"], name=d["name"], description=d["description"],
        capability_tag=d["capability_tag"],
        estimated_difficulty=d["estimated_difficulty"],
        instruction_template=d["instruction_template"],
        scorer=ScorerSpec.from_json(d["scorer"]),
        embedding=None if d["embedding"] is None else np.asarray(d["embedding"]),
        parent_id=d["parent_id"], adaptation_kind=d["adaptation_kind"],
        pass_rate_history=[(g, r) for g, r in d["pass_rate_history"]],
        reflection_rounds=d["reflection_rounds"],
        commit_order=d["commit_order"],
    )


def snapshot(state: ArchiveState) -> bytes:
    """Serialize the full state; restore(snapshot(s)) == s including RNG derivation."""
    from . import persistence

    tensors: dict[str, np.ndarray] = {}
    genome_meta = {}
    for gid in sorted(state.genome_store):
        genome = state.genome_store[gid]
        genome_meta[gid] = {
            "tensor_names": list(genome.tensors),
            "generation_born": genome.generation_born,
        }
        for name, arr in genome.tensors.items():
            tensors[f"{gid}/{name}"] = arr

    meta = {
        "format": "acdc-state",
        "generation": state.generation,
        "run_seed": state.run_seed,
        "base_id": state.base_id,
        "next_genome_index": state.next_genome_index,
        "next_task_index": state.next_task_index,
        "archive": [
            {"genome_id": s.genome_id, "bits": list(s.skill.bits),
             "task_epoch": s.skill.task_epoch, "fitness": s.fitness,
             "novelty": s.novelty}
            for s in state.archive],
        "tasks": {
            "epoch": state.task_archives.epoch,
            "q_max": state.task_archives.q_max,
            "global": [_task_to_json(t) for t in state.task_archives.global_order],
            "active_ids": [t.id for t in state.task_archives.active],
        },
        "historical": [[g, list(ids)] for g, ids in state.historical],
        "lineage": {
            gid: None if lin is None else {
                "parents": list(lin.parents), "operator": lin.operator,
                "weights": list(lin.weights),
                "failed_tensors": list(lin.failed_tensors)}
            for gid, lin in state.lineage.items()},
        "gen_stats": [dataclasses.asdict(s) for s in state.gen_stats],
        "epoch_stats": [dataclasses.asdict(s) for s in state.epoch_stats],
        "genomes": genome_meta,
    }
    return persistence.pack_snapshot(meta, tensors)


def restore(blob: bytes) -> ArchiveState:
    from . import persistence

    meta, tensors = persistence.unpack_snapshot(blob)
    genome_store = {}
    lineage = {}
    for gid, lin in meta["lineage"].items():
        lineage[gid] = None if lin is None else Lineage(
            parents=tuple(lin["parents"]), operator=lin["operator"],
            weights=tuple(lin["weights"]),
            failed_tensors=tuple(lin["failed_tensors"]))
    for gid, gmeta in meta["genomes"].items():
        genome_store[gid] = ModelGenome(
            id=gid,
            tensors={name: tensors[f"{gid}/{name}"]
                     for name in gmeta["tensor_names"]},
            lineage=lineage.get(gid),
            generation_born=gmeta["generation_born"],
        )
    global_order = [_task_from_json(d) for d in meta["tasks"]["global"]]
    by_id = {t.id: t for t in global_order}
    archives = TaskArchives(
        active=[by_id[tid] for tid in meta["tasks"]["active_ids"]],
        global_order=global_order,
        epoch=meta["tasks"]["epoch"], q_max=meta["tasks"]["q_max"])
    archive = [
        ScoredSolution(
            genome_id=s["genome_id"],
            skill=SkillVector(bits=tuple(s["bits"]), task_epoch=s["task_epoch"]),
            fitness=s["fitness"], novelty=s["novelty"])
        for s in meta["archive"]]
    return ArchiveState(
        generation=meta["generation"], run_seed=meta["run_seed"],
        base_id=meta["base_id"], archive=archive, task_archives=archives,
        genome_store=genome_store, lineage=lineage,
        historical=[(g, list(ids)) for g, ids in meta["historical"]],
        gen_stats=[GenerationStats(**s) for s in meta["gen_stats"]],
        epoch_stats=[EpochStats(**s) for s in meta["epoch_stats"]],
        next_genome_index=meta["next_genome_index"],
        next_task_index=meta["next_task_index"],
    )
