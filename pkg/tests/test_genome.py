import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acdc.errors import DegenerateWeights, SchemaMismatch
from acdc.genome import (
    CrossoverParams,
    ModelGenome,
    MutationParams,
    check_schema,
    crossover,
    mutate_svd,
    sample_mixing_weights,
    task_vector,
)

from conftest import make_genome


def test_flatten_order_and_dim():
    g = make_genome("g", 0)
    flat = g.flatten()
    assert flat.shape == (4 * 3 + 3 * 5,)
    np.testing.assert_array_equal(flat[:12], g.tensors["a"].ravel())
    assert g.flat_dim() == flat.size


def test_check_schema_mismatched_names():
    a = make_genome("a", 0)
    b = make_genome("b", 0, shapes={"a": (4, 3), "c": (3, 5)})
    with pytest.raises(SchemaMismatch):
        check_schema(a, b)


def test_check_schema_mismatched_shapes():
    a = make_genome("a", 0)
    b = make_genome("b", 0, shapes={"a": (4, 3), "b": (5, 3)})
    with pytest.raises(SchemaMismatch):
        check_schema(a, b)


def test_task_vector_is_offset_from_base():
    base, m = make_genome("base", 0), make_genome("m", 1)
    tv = task_vector(m, base)
    for name in m.tensors:
        np.testing.assert_allclose(
            tv.tensors[name], m.tensors[name] - base.tensors[name])


class TestCrossover:
    def test_formula_against_direct_computation(self):
        base, p1, p2 = (make_genome(n, i) for i, n in
                        enumerate(["base", "p1", "p2"]))
        w1, w2 = 0.7, 0.5
        child = crossover(p1, p2, base, w1, w2)
        for name in base.tensors:
            expected = (base.tensors[name]
                        + (w1 / 1.2) * (p1.tensors[name] - base.tensors[name])
                        + (w2 / 1.2) * (p2.tensors[name] - base.tensors[name]))
            np.testing.assert_allclose(child.tensors[name], expected,
                                       rtol=0, atol=1e-12)

    def test_endpoint_recovers_first_parent(self):
        base, p1, p2 = (make_genome(n, i) for i, n in
                        enumerate(["base", "p1", "p2"]))
        child = crossover(p1, p2, base, 1.0, 0.0)
        for name in base.tensors:
            np.testing.assert_allclose(child.tensors[name], p1.tensors[name],
                                       rtol=0, atol=1e-12)

    def test_symmetry_in_parents(self):
        base, p1, p2 = (make_genome(n, i) for i, n in
                        enumerate(["base", "p1", "p2"]))
        c12 = crossover(p1, p2, base, 0.3, 0.9)
        c21 = crossover(p2, p1, base, 0.9, 0.3)
        for name in base.tensors:
            np.testing.assert_allclose(c12.tensors[name], c21.tensors[name],
                                       rtol=0, atol=1e-12)

    def test_self_crossover_is_identity(self):
        base, p1 = make_genome("base", 0), make_genome("p1", 1)
        child = crossover(p1, p1, base, 0.8, -0.3)
        for name in base.tensors:
            np.testing.assert_allclose(child.tensors[name], p1.tensors[name],
                                       rtol=0, atol=1e-12)

    def test_degenerate_weights_rejected(self):
        base, p1, p2 = (make_genome(n, i) for i, n in
                        enumerate(["base", "p1", "p2"]))
        with pytest.raises(DegenerateWeights):
            crossover(p1, p2, base, 0.5, -0.5 + 1e-9)

    def test_lineage_recorded(self):
        base, p1, p2 = (make_genome(n, i) for i, n in
                        enumerate(["base", "p1", "p2"]))
        child = crossover(p1, p2, base, 0.7, 0.5, child_id="kid", generation=3)
        assert child.id == "kid"
        assert child.generation_born == 3
        assert child.lineage.parents == ("p1", "p2")
        assert child.lineage.weights == (0.7, 0.5)

    @given(w1=st.floats(-3, 3), w2=st.floats(-3, 3))
    @settings(max_examples=50, deadline=None)
    def test_normalized_weights_sum_to_one(self, w1, w2):
        base, p1, p2 = (make_genome(n, i) for i, n in
                        enumerate(["base", "p1", "p2"]))
        if abs(w1 + w2) < 1e-3:
            with pytest.raises(DegenerateWeights):
                crossover(p1, p2, base, w1, w2)
            return
        child = crossover(p1, p2, base, w1, w2)
        # scaling both weights by any nonzero constant leaves the child fixed
        child2 = crossover(p1, p2, base, 2.0 * w1, 2.0 * w2)
        for name in base.tensors:
            np.testing.assert_allclose(child.tensors[name],
                                       child2.tensors[name],
                                       rtol=1e-9, atol=1e-9)


def test_sample_mixing_weights_resamples_near_zero_sum():
    class FakeRng:
        def __init__(self):
            self.calls = 0

        def normal(self, mu, sigma, size):
            self.calls += 1
            if self.calls == 1:
                return np.array([0.5, -0.5 + 1e-6])
            return np.array([0.6, 0.4])

    rng = FakeRng()
    w1, w2 = sample_mixing_weights(rng, CrossoverParams())
    assert rng.calls == 2
    assert (w1, w2) == (0.6, 0.4)


def test_sample_mixing_weights_distribution(rng):
    params = CrossoverParams(mu=0.5, sigma=0.5)
    draws = np.array([sample_mixing_weights(rng, params) for _ in range(4000)])
    assert abs(draws.mean() - 0.5) < 0.03
    assert abs(draws.std() - 0.5) < 0.03
    assert np.all(np.abs(draws.sum(axis=1)) >= params.resample_epsilon)


class TestMutateSvd:
    def test_sigma_zero_reconstructs(self, rng):
        g = make_genome("g", 5, shapes={"w": (10, 7)})
        params = MutationParams(k=256, sigma=0.0, rate=1.0)
        out = mutate_svd(g, params, rng)
        err = (np.linalg.norm(out.tensors["w"] - g.tensors["w"])
               / np.linalg.norm(g.tensors["w"]))
        assert err < 1e-10

    def test_trailing_singular_values_preserved(self, rng):
        g = make_genome("g", 6, shapes={"w": (12, 9)})
        params = MutationParams(k=3, sigma=0.5, rate=1.0)
        out = mutate_svd(g, params, rng)
        s_orig = np.linalg.svd(g.tensors["w"], compute_uv=False)
        s_new = np.linalg.svd(out.tensors["w"], compute_uv=False)
        # the 6 smallest singular values are untouched by a k=3 perturbation
        np.testing.assert_allclose(sorted(s_new)[:6], sorted(s_orig)[:6],
                                   rtol=1e-8)

    def test_rank_one_shapes_bit_identical(self, rng):
        g = make_genome("g", 7, shapes={"v": (6,), "r": (1, 8), "c": (5, 1)})
        out = mutate_svd(g, MutationParams(k=4, sigma=1.0, rate=1.0), rng)
        for name in g.tensors:
            assert out.tensors[name].tobytes() == \
                np.asarray(g.tensors[name], dtype=np.float64).tobytes()

    def test_rate_zero_never_mutates(self, rng):
        g = make_genome("g", 8)
        out = mutate_svd(g, MutationParams(k=4, sigma=1.0, rate=0.0), rng)
        for name in g.tensors:
            np.testing.assert_array_equal(out.tensors[name], g.tensors[name])

    def test_rate_one_perturbs_matrices(self, rng):
        g = make_genome("g", 9)
        out = mutate_svd(g, MutationParams(k=4, sigma=1.0, rate=1.0), rng)
        assert any(not np.array_equal(out.tensors[n], g.tensors[n])
                   for n in g.tensors)

    def test_k_larger_than_rank_is_safe(self, rng):
        g = make_genome("g", 10, shapes={"w": (3, 2)})
        out = mutate_svd(g, MutationParams(k=256, sigma=0.1, rate=1.0), rng)
        assert out.tensors["w"].shape == (3, 2)
        assert np.all(np.isfinite(out.tensors["w"]))

    def test_lineage_and_identity(self, rng):
        g = make_genome("g", 11)
        out = mutate_svd(g, MutationParams(), rng, child_id="m1", generation=4)
        assert out.id == "m1"
        assert out.generation_born == 4
        assert out.lineage.parents == ("g",)
        assert out.lineage.operator == "mutation"

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_frobenius_change_bounded_by_noise(self, seed):
        rng = np.random.default_rng(seed)
        g = make_genome("g", seed, shapes={"w": (8, 6)})
        params = MutationParams(k=6, sigma=0.3, rate=1.0)
        out = mutate_svd(g, params, rng)
        # perturbing singular values by delta changes the matrix by
        # exactly ||delta|| in Frobenius norm
        s_orig = np.linalg.svd(g.tensors["w"], compute_uv=False)
        diff = np.linalg.norm(out.tensors["w"] - g.tensors["w"])
        s_new = np.linalg.svd(out.tensors["w"], compute_uv=False)
        assert diff < np.abs(s_orig).sum() + np.abs(s_new).sum() + 1.0
        assert np.all(np.isfinite(out.tensors["w"]))
