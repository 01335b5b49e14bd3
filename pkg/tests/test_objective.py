"""Three-term loss and the contrastive baseline against composed oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest

from attnjsd import (
    DataError,
    LossConfig,
    ObjectiveBreakdown,
    ProbField,
    PromptSpec,
    SubjectGroup,
    diversity_penalty,
    entropy_normalized,
    inter_separation,
    intra_coherence,
    jedi_loss,
    jsd_normalized,
    mixture,
    nt_xent_loss,
    softmax_fields,
)

TWO_GROUPS = PromptSpec(
    (SubjectGroup("left", (0, 1)), SubjectGroup("right", (2, 3)))
)


def bump(center: float, width: float, d: int = 32) -> ProbField:
    cells = (np.arange(d) + 0.5) / d
    v = np.exp(-((cells - center) ** 2) / (2.0 * width**2))
    return ProbField(v / v.sum())


def half_uniform(first_half: bool, d: int = 32) -> ProbField:
    v = np.zeros(d)
    if first_half:
        v[: d // 2] = 2.0 / d
    else:
        v[d // 2 :] = 2.0 / d
    return ProbField(v)


def random_pool(rng: np.random.Generator, groups, d: int):
    count = sum(len(g) for g in groups)
    spec = PromptSpec(
        tuple(SubjectGroup(f"s{i}", g) for i, g in enumerate(groups))
    )
    pool = [ProbField(rng.dirichlet(np.ones(d))) for _ in range(count)]
    return spec, pool


class TestIntraCoherence:
    def test_identical_copies_score_zero(self):
        p = bump(0.5, 0.1)
        pool = [p, p, p, p]
        assert intra_coherence(TWO_GROUPS, pool) == 0.0

    def test_single_group_disjoint_pair_attains_one(self):
        spec = PromptSpec((SubjectGroup("only", (0, 1)),))
        pool = [half_uniform(True), half_uniform(False)]
        assert intra_coherence(spec, pool) == pytest.approx(1.0, abs=1e-12)

    def test_matches_mean_of_per_group_divergences(self):
        pool = [bump(0.3, 0.08), bump(0.4, 0.1), bump(0.6, 0.09), bump(0.7, 0.12)]
        oracle = 0.5 * (
            jsd_normalized(pool[:2]) + jsd_normalized(pool[2:])
        )
        assert intra_coherence(TWO_GROUPS, pool) == pytest.approx(oracle, abs=1e-12)

    def test_size_one_groups_contribute_zero(self):
        spec = PromptSpec((SubjectGroup("a", (0,)), SubjectGroup("b", (1,))))
        pool = [bump(0.3, 0.1), bump(0.7, 0.1)]
        assert intra_coherence(spec, pool) == 0.0


class TestInterSeparation:
    def test_disjoint_mixtures_no_penalty(self):
        pool = [half_uniform(True)] * 2 + [half_uniform(False)] * 2
        assert inter_separation(TWO_GROUPS, pool) == pytest.approx(0.0, abs=1e-12)

    def test_identical_mixtures_full_penalty(self):
        p = bump(0.5, 0.15)
        assert inter_separation(TWO_GROUPS, [p, p, p, p]) == pytest.approx(1.0, abs=1e-12)

    def test_matches_one_minus_normalized_divergence(self):
        pool = [bump(0.35, 0.1), bump(0.45, 0.1), bump(0.55, 0.1), bump(0.65, 0.1)]
        mixtures = [mixture(pool[:2]), mixture(pool[2:])]
        oracle = 1.0 - jsd_normalized(mixtures)
        assert inter_separation(TWO_GROUPS, pool) == pytest.approx(oracle, abs=1e-12)

    def test_single_subject_separates_trivially(self):
        spec = PromptSpec((SubjectGroup("solo", (0, 1)),))
        pool = [bump(0.4, 0.1), bump(0.6, 0.1)]
        assert inter_separation(spec, pool) == 0.0


class TestDiversityPenalty:
    def test_uniform_mixtures_no_penalty(self):
        pool = [ProbField.uniform(32)] * 4
        assert diversity_penalty(TWO_GROUPS, pool) == pytest.approx(0.0, abs=1e-15)

    def test_delta_mixtures_full_penalty(self):
        pool = [ProbField.delta(32, 3)] * 2 + [ProbField.delta(32, 20)] * 2
        assert diversity_penalty(TWO_GROUPS, pool) == pytest.approx(1.0, abs=1e-15)

    def test_matches_mean_entropy_complement(self):
        pool = [bump(0.3, 0.05), bump(0.4, 0.2), bump(0.6, 0.07), bump(0.75, 0.1)]
        oracle = 0.5 * (
            (1.0 - entropy_normalized(mixture(pool[:2])))
            + (1.0 - entropy_normalized(mixture(pool[2:])))
        )
        assert diversity_penalty(TWO_GROUPS, pool) == pytest.approx(oracle, abs=1e-12)


class TestJediLoss:
    def test_every_enabled_term_at_optimum(self):
        # identical members per group, disjoint halves, flat on each half:
        # intra and inter sit at 0; only the diversity floor remains
        pool = [half_uniform(True)] * 2 + [half_uniform(False)] * 2
        no_div = jedi_loss(TWO_GROUPS, pool, LossConfig(enable_diversity=False))
        assert no_div.total == pytest.approx(0.0, abs=1e-9)
        full = jedi_loss(TWO_GROUPS, pool, LossConfig())
        floor = 1.0 - math.log(16) / math.log(32)
        assert full.total == pytest.approx(0.01 * floor, abs=1e-12)

    def test_identical_everything_closed_form(self):
        p = bump(0.5, 0.12)
        breakdown = jedi_loss(TWO_GROUPS, [p, p, p, p], LossConfig())
        h = entropy_normalized(p)
        assert breakdown.intra == 0.0
        assert breakdown.inter == pytest.approx(1.0, abs=1e-12)
        assert breakdown.diversity == pytest.approx(1.0 - h, abs=1e-12)
        assert breakdown.total == pytest.approx(1.0 + 0.01 * (1.0 - h), abs=1e-12)

    def test_default_weight_recorded(self):
        assert LossConfig().diversity_weight == 0.01
        p = bump(0.5, 0.1)
        assert jedi_loss(TWO_GROUPS, [p] * 4, LossConfig()).diversity_weight == 0.01

    def test_toggle_additivity(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            spec, pool = random_pool(rng, [(0, 1), (2, 3, 4)], d=12)
            only = {}
            for term in ("intra", "inter", "diversity"):
                cfg = LossConfig(
                    enable_intra=term == "intra",
                    enable_inter=term == "inter",
                    enable_diversity=term == "diversity",
                )
                only[term] = jedi_loss(spec, pool, cfg).total
            full = jedi_loss(spec, pool, LossConfig()).total
            assert full == pytest.approx(
                only["intra"] + only["inter"] + only["diversity"], abs=1e-12
            )

    def test_disabled_terms_read_zero(self):
        rng = np.random.default_rng(22)
        spec, pool = random_pool(rng, [(0, 1), (2, 3)], d=10)
        b = jedi_loss(spec, pool, LossConfig(enable_intra=False))
        assert b.intra == 0.0
        assert b.total == pytest.approx(b.inter + 0.01 * b.diversity, abs=1e-12)

    def test_components_stay_in_range_on_random_instances(self):
        rng = np.random.default_rng(23)
        shapes = [[(0, 1)], [(0, 1), (2, 3)], [(0,), (1, 2), (3, 4, 5)]]
        for i in range(10_000):
            spec, pool = random_pool(rng, shapes[i % 3], d=int(rng.integers(2, 17)))
            b = jedi_loss(spec, pool, LossConfig())
            assert 0.0 <= b.intra <= 1.0
            assert 0.0 <= b.inter <= 1.0
            assert 0.0 <= b.diversity <= 1.0

    def test_breakdown_rejects_inconsistent_total(self):
        with pytest.raises(DataError):
            ObjectiveBreakdown(
                intra=0.2, inter=0.3, diversity=0.1, diversity_weight=0.01, total=0.9
            )

    def test_breakdown_rejects_out_of_range_component(self):
        with pytest.raises(DataError):
            ObjectiveBreakdown(
                intra=1.5, inter=0.0, diversity=0.0, diversity_weight=0.0, total=1.5
            )


class TestPromptSpec:
    def test_groups_must_be_disjoint(self):
        with pytest.raises(DataError):
            PromptSpec((SubjectGroup("a", (0, 1)), SubjectGroup("b", (1, 2))))

    def test_duplicate_ids_rejected(self):
        with pytest.raises(DataError):
            PromptSpec((SubjectGroup("a", (0,)), SubjectGroup("a", (1,))))

    def test_empty_group_rejected(self):
        with pytest.raises(DataError):
            SubjectGroup("a", ())

    def test_negative_index_rejected(self):
        with pytest.raises(DataError):
            SubjectGroup("a", (-1,))

    def test_pool_shorter_than_indices_rejected(self):
        with pytest.raises(DataError):
            intra_coherence(TWO_GROUPS, [ProbField.uniform(4)] * 3)


def nt_xent_oracle(rows, groups, tau: float) -> float:
    n = len(rows)
    unit = [r / np.linalg.norm(r) for r in rows]
    sims = np.array([[float(np.dot(unit[a], unit[b])) for b in range(n)] for a in range(n)])
    sims = np.clip(sims, -1.0, 1.0)
    terms = []
    for g in groups:
        for a in g:
            for b in g:
                if a == b:
                    continue
                denom = sum(math.exp(sims[a, k] / tau) for k in range(n) if k != a)
                terms.append(-math.log(math.exp(sims[a, b] / tau) / denom))
    return float(np.mean(terms))


class TestNtXent:
    def test_matches_brute_force_oracle(self):
        p = bump(0.4, 0.1)
        rows = [p.values, p.values.copy(), bump(0.7, 0.08).values]
        spec = PromptSpec((SubjectGroup("pair", (0, 1)), SubjectGroup("odd", (2,))))
        pool = [ProbField(r) for r in rows]
        got = nt_xent_loss(spec, pool, temperature=0.5)
        want = nt_xent_oracle(rows, [(0, 1), (2,)], 0.5)
        assert got == pytest.approx(want, abs=1e-12)

    def test_matches_oracle_on_random_pools(self):
        rng = np.random.default_rng(24)
        for _ in range(25):
            spec, pool = random_pool(rng, [(0, 1), (2, 3, 4)], d=9)
            got = nt_xent_loss(spec, pool, temperature=0.37)
            want = nt_xent_oracle([p.values for p in pool], [(0, 1), (2, 3, 4)], 0.37)
            assert got == pytest.approx(want, abs=1e-12)

    def test_flat_temperature_limit(self):
        rng = np.random.default_rng(25)
        spec, pool = random_pool(rng, [(0, 1), (2, 3)], d=8)
        # tau -> inf flattens every similarity: each term -> log(#negatives)
        assert nt_xent_loss(spec, pool, temperature=1e6) == pytest.approx(
            math.log(3.0), abs=1e-4
        )

    def test_within_group_permutation_symmetry(self):
        rng = np.random.default_rng(26)
        spec, pool = random_pool(rng, [(0, 1, 2), (3, 4)], d=7)
        swapped = [pool[2], pool[0], pool[1], pool[4], pool[3]]
        assert nt_xent_loss(spec, swapped, temperature=0.5) == pytest.approx(
            nt_xent_loss(spec, pool, temperature=0.5), abs=1e-12
        )

    def test_nonpositive_temperature_rejected(self):
        spec = PromptSpec((SubjectGroup("pair", (0, 1)),))
        pool = [bump(0.4, 0.1), bump(0.6, 0.1)]
        with pytest.raises(DataError):
            nt_xent_loss(spec, pool, temperature=0.0)

    def test_no_positive_pair_rejected(self):
        spec = PromptSpec((SubjectGroup("a", (0,)), SubjectGroup("b", (1,))))
        pool = [bump(0.4, 0.1), bump(0.6, 0.1)]
        with pytest.raises(DataError):
            nt_xent_loss(spec, pool, temperature=0.5)

    def test_single_map_rejected(self):
        spec = PromptSpec((SubjectGroup("a", (0,)),))
        with pytest.raises(DataError):
            nt_xent_loss(spec, [bump(0.5, 0.1)], temperature=0.5)


def test_softmax_fields_are_valid_distributions():
    rng = np.random.default_rng(27)
    fields = softmax_fields(rng.standard_normal((5, 12)))
    for f in fields:
        assert f.values.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(f.values > 0.0)
