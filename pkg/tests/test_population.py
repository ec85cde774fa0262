import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acdc.errors import (
    EmptyPopulation,
    EmptySkillVector,
    EpochMismatch,
    LengthMismatch,
    Unparseable,
    ZeroTotalWeight,
)
from acdc.population import (
    DifficultyWeights,
    DnsParams,
    ScoredSolution,
    SkillVector,
    compute_skill_vector,
    difficulty_weights,
    dns_archive_update,
    dns_novelty_score,
    fitness,
    gibberish_gate,
    render_gibberish_prompt,
    unique_skill_score,
)
from acdc.providers import ScriptedJudge


def sol(gid, bits, epoch=0):
    skill = SkillVector(bits=tuple(bits), task_epoch=epoch)
    return ScoredSolution(genome_id=gid, skill=skill, fitness=fitness(skill))


# ---------------------------------------------------------------------------
# independent brute-force oracle for Algorithm 2 + selection rule


def oracle_unique(subject_bits, other_bits, weights):
    total = sum(weights)
    acc = 0.0
    for i, w in enumerate(weights):
        if subject_bits[i] == 1 and other_bits[i] == 0:
            acc += w
    return acc / total * 100.0


def oracle_novelty(subject, pool, weights, k, alpha_dom):
    fitter = [s for s in pool
              if s.genome_id != subject.genome_id
              and s.fitness > subject.fitness]
    if not fitter:
        return alpha_dom
    dists = sorted(oracle_unique(subject.skill.bits, s.skill.bits, weights)
                   for s in fitter)
    kk = min(k, len(dists))
    return sum(dists[:kk]) / kk


def oracle_select(archive, candidates, m, k, alpha_dom):
    seen = {a.genome_id for a in archive}
    pool = list(archive) + [c for c in candidates if c.genome_id not in seen]
    if not pool:
        return []
    weights = [1.0 - sum(s.skill.bits[j] for s in pool) / len(pool)
               for j in range(len(pool[0].skill.bits))]
    if sum(weights) <= 0.0:
        weights = [1.0] * len(pool[0].skill.bits)
    novelty = {s.genome_id: oracle_novelty(s, pool, weights, k, alpha_dom)
               for s in pool}
    best = min(pool, key=lambda s: (-s.fitness, s.genome_id))
    rest = sorted([s for s in pool if s.genome_id != best.genome_id],
                  key=lambda s: (-novelty[s.genome_id], -s.fitness, s.genome_id))
    return [best.genome_id] + [s.genome_id for s in rest[: m - 1]]


# ---------------------------------------------------------------------------
# basics


def test_compute_skill_vector_bits():
    sv = compute_skill_vector([1.0, 0.0, None, 0.5, 1.0], task_epoch=2)
    assert sv.bits == (1, 0, 0, 0, 1)
    assert sv.task_epoch == 2


def test_compute_skill_vector_length_check():
    with pytest.raises(LengthMismatch):
        compute_skill_vector([1.0, 0.0], expected_len=3)


def test_fitness_empty_rejected():
    with pytest.raises(EmptySkillVector):
        fitness(SkillVector(bits=(), task_epoch=0))


def test_fitness_is_unweighted_mean():
    assert fitness(SkillVector(bits=(1, 0, 1, 1), task_epoch=0)) == 0.75


def test_difficulty_weights():
    w = difficulty_weights([[1, 0, 0], [1, 1, 0]])
    assert w.w == (0.0, 0.5, 1.0)


def test_difficulty_weights_empty():
    with pytest.raises(EmptyPopulation):
        difficulty_weights([])


def test_difficulty_weights_ragged():
    with pytest.raises(LengthMismatch):
        difficulty_weights([[1, 0], [1]])


def test_unique_skill_score_manual():
    # subject solves {0, 2}, other solves {0}; only task 2 is unique
    s = SkillVector(bits=(1, 0, 1), task_epoch=0)
    o = SkillVector(bits=(1, 0, 0), task_epoch=0)
    assert unique_skill_score(s, o, (0.5, 1.0, 0.5)) == pytest.approx(25.0)


def test_unique_skill_score_zero_weights():
    s = SkillVector(bits=(1,), task_epoch=0)
    with pytest.raises(ZeroTotalWeight):
        unique_skill_score(s, s, (0.0,))


def test_epoch_mismatch_detected():
    a, b = sol("a", (1, 0)), sol("b", (1, 1), epoch=1)
    with pytest.raises(EpochMismatch):
        dns_novelty_score(a, [b], DifficultyWeights(w=(1.0, 1.0)), DnsParams())


def test_alpha_dom_when_no_fitter():
    a, b = sol("a", (1, 1)), sol("b", (1, 0))
    score = dns_novelty_score(a, [a, b], DifficultyWeights(w=(0.5, 0.5)),
                              DnsParams(alpha_dom=999.0))
    assert score == 999.0


# ---------------------------------------------------------------------------
# oracle equivalence


@given(data=st.data())
@settings(max_examples=150, deadline=None)
def test_dns_novelty_matches_oracle(data):
    n_tasks = data.draw(st.integers(1, 12))
    n_sols = data.draw(st.integers(1, 8))
    bits = data.draw(st.lists(
        st.lists(st.integers(0, 1), min_size=n_tasks, max_size=n_tasks),
        min_size=n_sols, max_size=n_sols))
    weights = data.draw(st.lists(
        st.floats(0.01, 1.0), min_size=n_tasks, max_size=n_tasks))
    pool = [sol(f"s{i}", b) for i, b in enumerate(bits)]
    params = DnsParams(k=data.draw(st.integers(1, 4)))
    for subject in pool:
        got = dns_novelty_score(subject, pool, DifficultyWeights(tuple(weights)),
                                params)
        want = oracle_novelty(subject, pool, weights, params.k, params.alpha_dom)
        assert got == pytest.approx(want, abs=1e-12)


@given(data=st.data())
@settings(max_examples=150, deadline=None)
def test_archive_update_matches_oracle(data):
    n_tasks = data.draw(st.integers(1, 12))
    n_arch = data.draw(st.integers(0, 5))
    n_cand = data.draw(st.integers(0, 5))
    all_bits = data.draw(st.lists(
        st.lists(st.integers(0, 1), min_size=n_tasks, max_size=n_tasks),
        min_size=n_arch + n_cand, max_size=n_arch + n_cand))
    archive = [sol(f"a{i:02d}", b) for i, b in enumerate(all_bits[:n_arch])]
    cands = [sol(f"c{i:02d}", b) for i, b in enumerate(all_bits[n_arch:])]
    m = data.draw(st.integers(1, 8))
    got = [s.genome_id for s in dns_archive_update(archive, cands, m, DnsParams())]
    want = oracle_select(archive, cands, m, 3, 999.0)
    assert got == want


def test_archive_update_keeps_fitness_maximum():
    archive = [sol("a", (1, 1, 1, 1)), sol("b", (1, 0, 0, 0))]
    cands = [sol("c", (0, 1, 1, 0)), sol("d", (0, 0, 0, 1))]
    kept = dns_archive_update(archive, cands, 2, DnsParams())
    assert kept[0].genome_id == "a"


def test_archive_update_tie_break_prefers_older_id():
    # two identical candidates: the smaller id survives
    archive = [sol("a", (1, 1, 0))]
    cands = [sol("c2", (1, 0, 0)), sol("c1", (1, 0, 0))]
    kept = dns_archive_update(archive, cands, 2, DnsParams())
    assert [s.genome_id for s in kept] == ["a", "c1"]


def test_archive_update_uniform_fallback_on_all_solved():
    archive = [sol("a", (1, 1)), sol("b", (1, 1))]
    kept = dns_archive_update(archive, [], 2, DnsParams())
    assert {s.genome_id for s in kept} == {"a", "b"}


def test_archive_update_empty_pool():
    assert dns_archive_update([], [], 4, DnsParams()) == []


def test_archive_update_sets_novelty():
    archive = [sol("a", (1, 1)), sol("b", (0, 1))]
    kept = dns_archive_update(archive, [], 2, DnsParams())
    assert all(s.novelty is not None for s in kept)


# ---------------------------------------------------------------------------
# gibberish gate


TEMPLATE = ("1 {instruction1} -> {outputs1}\n"
            "2 {instruction2} -> {outputs2}\n"
            "3 {instruction3} -> {outputs3}")

TRIPLES = [("do a", "done a"), ("do b", "done b"), ("do c", "done c")]


def test_render_gibberish_prompt():
    text = render_gibberish_prompt(TEMPLATE, TRIPLES)
    assert "do b -> done b" in text


def test_render_gibberish_prompt_needs_three():
    with pytest.raises(ValueError):
        render_gibberish_prompt(TEMPLATE, TRIPLES[:2])


def test_gibberish_gate_discards_on_yes():
    judge = ScriptedJudge(["Answer: Yes"])
    assert gibberish_gate("g", TRIPLES, judge, TEMPLATE) is False


def test_gibberish_gate_keeps_on_no():
    judge = ScriptedJudge(["Answer: No"])
    assert gibberish_gate("g", TRIPLES, judge, TEMPLATE) is True


def test_gibberish_gate_fails_open_on_unparseable():
    class Broken:
        def decide(self, kind, prompt, context=None):
            raise Unparseable("nonsense")

    assert gibberish_gate("g", TRIPLES, Broken(), TEMPLATE) is True
