import numpy as np
import pytest

from acdc.providers import PromptLibrary, ScriptedJudge
from acdc.scoring import ScorerSpec, probe_spec, score

from conftest import make_genome

PROMPTS = PromptLibrary()


# ---------------------------------------------------------------------------
# spec validation and serialization


def test_spec_round_trip():
    spec = probe_spec(np.arange(1.0, 5.0), 0.3, noise_seed=7, noise=0.01)
    again = ScorerSpec.from_json(spec.to_json())
    assert again.kind == "synthetic_probe"
    assert again.payload == spec.payload


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        ScorerSpec(kind="vibes", payload={}).validate()


def test_missing_payload_key_rejected():
    with pytest.raises(ValueError):
        ScorerSpec(kind="numeric_tolerance", payload={"expected": 1.0}).validate()


def test_probe_direction_must_be_unit():
    spec = ScorerSpec(kind="synthetic_probe",
                      payload={"direction": [3.0, 4.0], "threshold": 0.0})
    with pytest.raises(ValueError):
        spec.validate()


def test_probe_spec_normalizes_direction():
    spec = probe_spec([3.0, 4.0], 0.5)
    np.testing.assert_allclose(spec.payload["direction"], [0.6, 0.8])


# ---------------------------------------------------------------------------
# scorer kinds


def test_exact_match_case_and_whitespace_insensitive():
    spec = ScorerSpec(kind="exact_match", payload={"expected": "Paris"})
    assert score(spec, " paris ") == 1.0
    assert score(spec, "London") == 0.0


def test_numeric_tolerance():
    spec = ScorerSpec(kind="numeric_tolerance",
                      payload={"expected": 3.14, "tol": 0.01})
    assert score(spec, "3.141") == 1.0
    assert score(spec, "3.2") == 0.0
    assert score(spec, "not a number") == 0.0


def test_function_tests_scores_binary():
    source = """
class TaskFamily:
    @staticmethod
    def get_tasks():
        return {"1": {"target": "ok"}}

    @staticmethod
    def score(t, submission):
        return 1.0 if submission == t["target"] else 0.5
"""
    spec = ScorerSpec(kind="function_tests", payload={"source": source})
    assert score(spec, "ok") == 1.0
    # partial credit from the task program is floored to 0
    assert score(spec, "meh") == 0.0


def test_function_tests_error_scores_zero():
    spec = ScorerSpec(kind="function_tests", payload={"source": "def broken(:"})
    assert score(spec, "x") == 0.0


def test_llm_judge_routes_through_judge():
    spec = ScorerSpec(kind="llm_judge", payload={"criteria": ["is polite"]})
    judge = ScriptedJudge(["yes", "no"])
    assert score(spec, "sub", judge=judge, prompts=PROMPTS,
                 instructions="be nice") == 1.0
    assert score(spec, "sub", judge=judge, prompts=PROMPTS) == 0.0
    assert "is polite" in judge.calls[0][1]


def test_llm_judge_requires_judge():
    spec = ScorerSpec(kind="llm_judge", payload={"criteria": []})
    with pytest.raises(ValueError):
        score(spec, "sub")


# ---------------------------------------------------------------------------
# synthetic probes


def test_probe_thresholds_inner_product():
    g = make_genome("g", 0)
    flat = g.flatten()
    direction = flat / np.linalg.norm(flat)
    value = float(np.dot(flat, direction))
    assert score(probe_spec(direction, value - 0.01), g) == 1.0
    assert score(probe_spec(direction, value + 0.01), g) == 0.0


def test_probe_rejects_text_submission():
    with pytest.raises(TypeError):
        score(probe_spec(np.ones(4), 0.0), "a string")


def test_text_scorers_reject_genome_submission():
    spec = ScorerSpec(kind="exact_match", payload={"expected": "x"})
    with pytest.raises(TypeError):
        score(spec, make_genome("g", 0))


def test_probe_jitter_deterministic_per_genome():
    g = make_genome("g", 3, shapes={"w": (4, 4)})
    spec = probe_spec(np.ones(16), 0.0, noise_seed=9, noise=0.5)
    first = score(spec, g)
    assert all(score(spec, g) == first for _ in range(5))


def test_probe_jitter_varies_with_genome_and_seed():
    direction = np.ones(16)
    genomes = [make_genome(f"g{i}", i, shapes={"w": (4, 4)}) for i in range(40)]

    def margin_bits(noise_seed):
        # jitter dwarfs the clean margin, so bits are essentially coin flips
        spec = probe_spec(direction, 0.0, noise_seed=noise_seed, noise=25.0)
        return [score(spec, g) for g in genomes]

    bits_a, bits_b = margin_bits(1), margin_bits(2)
    assert len(set(bits_a)) == 2  # jitter splits the population both ways
    assert bits_a != bits_b


def test_probe_zero_noise_is_exact():
    g = make_genome("g", 5)
    flat = g.flatten()
    direction = flat / np.linalg.norm(flat)
    value = float(np.dot(flat, direction))
    spec = probe_spec(direction, value, noise_seed=123, noise=0.0)
    assert score(spec, g) == 1.0  # >= comparison, no jitter applied
