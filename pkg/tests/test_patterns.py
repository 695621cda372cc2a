import math

import numpy as np
import pytest

from dimsum.core import ContractViolation, MaskVector, SeriesWindow
from dimsum.ingest import blocky_mask
from dimsum.patterns import (
    KL_SMOOTHING,
    ProjectedSample,
    bernoulli_mask_gen,
    build_training_sets,
    mask_kl,
    pair_projections,
    project,
    structure_test,
)

W = 24


def complete_window(sid, idx, rng):
    return SeriesWindow.create(sid, idx, rng.normal(size=W))


def incomplete_window(sid, idx, rng, holes):
    values = rng.normal(size=W)
    values[list(holes)] = np.nan
    return SeriesWindow.create(sid, idx, values)


class TestProject:
    def test_copies_mask_and_truth(self):
        rng = np.random.default_rng(0)
        inc = incomplete_window("a", 0, rng, [2, 5, 6])
        tgt = complete_window("b", 3, rng)
        s = project(inc, tgt)
        assert s.source_id == "a:0"
        assert s.target_id == "b:3"
        assert s.proj_mask == inc.mask_vector
        assert np.array_equal(s.ground_truth, tgt.values)

    def test_rejects_incomplete_target(self):
        rng = np.random.default_rng(1)
        inc = incomplete_window("a", 0, rng, [2])
        other = incomplete_window("c", 1, rng, [7])
        with pytest.raises(ContractViolation):
            project(inc, other)

    def test_rejects_length_mismatch(self):
        rng = np.random.default_rng(2)
        inc = incomplete_window("a", 0, rng, [2])
        short = SeriesWindow.create("b", 0, rng.normal(size=W - 1))
        with pytest.raises(ContractViolation):
            project(inc, short)


class TestMaskKl:
    def test_identical_masks_diverge_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            bits = (rng.random(W) >= 0.3).astype(np.uint8)
            m = MaskVector(bits)
            assert mask_kl(m, m) == 0.0

    def test_disjoint_single_hole_closed_form(self):
        # w=2, holes at opposite slots: KL = ln((1+s)/s) / (1+2s)
        p = MaskVector(np.array([0, 1], dtype=np.uint8))
        q = MaskVector(np.array([1, 0], dtype=np.uint8))
        s = KL_SMOOTHING
        expect = math.log((1 + s) / s) / (1 + 2 * s)
        assert mask_kl(p, q) == pytest.approx(expect, rel=1e-12)
        assert mask_kl(q, p) == pytest.approx(expect, rel=1e-12)

    def test_mirrored_half_blocks_closed_form(self):
        # disjoint equal-count blocks generalize to KL = Z/(Z+w*s) * ln((1+s)/s)
        w, z = 96, 48
        bits_p = np.ones(w, dtype=np.uint8)
        bits_p[:z] = 0
        bits_q = np.ones(w, dtype=np.uint8)
        bits_q[z:] = 0
        p, q = MaskVector(bits_p), MaskVector(bits_q)
        s = KL_SMOOTHING
        expect = z / (z + w * s) * math.log((1 + s) / s)
        assert mask_kl(p, q) == pytest.approx(expect, rel=1e-12)
        assert mask_kl(q, p) == pytest.approx(mask_kl(p, q), rel=1e-12)

    def test_nonnegative_and_finite(self):
        rng = np.random.default_rng(4)
        for _ in range(500):
            a = MaskVector((rng.random(W) >= rng.uniform(0, 1)).astype(np.uint8))
            b = MaskVector((rng.random(W) >= rng.uniform(0, 1)).astype(np.uint8))
            d = mask_kl(a, b)
            assert math.isfinite(d)
            assert d >= 0.0

    def test_overlap_beats_disjoint(self):
        base = np.ones(W, dtype=np.uint8)
        p = base.copy()
        p[:6] = 0
        near = base.copy()
        near[1:7] = 0
        far = base.copy()
        far[-6:] = 0
        assert mask_kl(MaskVector(p), MaskVector(near)) < mask_kl(MaskVector(p), MaskVector(far))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractViolation):
            mask_kl(MaskVector.ones(4), MaskVector.ones(5))


class TestStructureTest:
    W = 96

    def correlated_blocky_masks(self, n, seed):
        """One blocky base pattern per cluster, each member a small circular
        shift of it: holes land in nearly the same positions across members,
        which is what distinguishes structured from incidental missingness."""
        rng = np.random.default_rng(seed)
        base = blocky_mask(self.W, rate=0.3, run_p=0.2, rng=rng)
        out = {}
        for i in range(n):
            shift = int(rng.integers(-3, 4))
            out[f"s:{i}"] = MaskVector(np.roll(base, shift))
        return out

    def iid_masks(self, n, seed):
        rng = np.random.default_rng(seed)
        out = {}
        for i in range(n):
            bits = (rng.random(self.W) >= 0.3).astype(np.uint8)
            if bits.all():
                bits[0] = 0
            out[f"s:{i}"] = MaskVector(bits)
        return out

    def test_correlated_blocky_patterns_accepted(self):
        hits = 0
        for seed in range(10):
            report = structure_test(self.correlated_blocky_masks(40, seed), seed=seed)
            hits += report.accepted
        assert hits >= 9

    def test_iid_patterns_rejected(self):
        hits = 0
        for seed in range(10):
            report = structure_test(self.iid_masks(40, seed + 100), seed=seed)
            hits += not report.accepted
        assert hits >= 9

    def test_identical_twins_score_perfectly(self):
        bits = blocky_mask(self.W, rate=0.25, run_p=0.2, rng=np.random.default_rng(13))
        masks = {f"s:{i}": MaskVector(bits) for i in range(8)}
        report = structure_test(masks, seed=3)
        assert report.ratio == 1.0
        assert report.accepted

    def test_complement_pair_rejected(self):
        # each source's only peer is maximally divergent (disjoint holes), so
        # any rate-matched random draw that covers even one hole beats it
        bits = np.ones(self.W, dtype=np.uint8)
        bits[: self.W // 2] = 0
        masks = {"a:0": MaskVector(bits), "b:0": MaskVector(1 - bits)}
        report = structure_test(masks, seed=21)
        assert report.n_pattern == 0
        assert not report.accepted

    def test_singleton_auto_rejects(self):
        report = structure_test({"only:0": MaskVector(np.array([0, 1, 1, 1], dtype=np.uint8))}, 7)
        assert not report.accepted
        assert report.reason == "fewer than 2 patterns"
        assert report.total == 1

    def test_insertion_order_does_not_matter(self):
        masks = self.correlated_blocky_masks(25, 11)
        reversed_masks = dict(reversed(list(masks.items())))
        a = structure_test(masks, seed=42)
        b = structure_test(reversed_masks, seed=42)
        assert a == b

    def test_ratio_counts(self):
        masks = self.correlated_blocky_masks(30, 5)
        report = structure_test(masks, seed=1)
        assert report.total == 30
        assert 0 <= report.n_pattern <= 30
        assert report.ratio == pytest.approx(report.n_pattern / 30)
        assert report.accepted == (report.ratio > 2.0 / 3.0)


class TestPairProjections:
    def targets(self, n, seed=0):
        rng = np.random.default_rng(seed)
        return [complete_window(f"t{i}", i, rng) for i in range(n)]

    def patterns(self, n, seed=1):
        rng = np.random.default_rng(seed)
        out = {}
        for i in range(n):
            bits = np.ones(W, dtype=np.uint8)
            bits[rng.choice(W, size=4, replace=False)] = 0
            out[f"p:{i}"] = MaskVector(bits)
        return out

    def test_more_targets_than_patterns(self):
        targets = self.targets(10)
        patterns = self.patterns(4)
        samples, recycled = pair_projections(targets, patterns, seed=3)
        assert recycled == 0
        assert len(samples) == 10
        sources = [s.source_id for s in samples if s.source_id is not None]
        assert sorted(sources) == sorted(patterns)
        fillers = [s for s in samples if s.source_id is None]
        assert len(fillers) == 6
        assert all(s.proj_mask.all_observed for s in fillers)
        # every target used exactly once
        assert sorted(s.target_id for s in samples) == sorted(t.key for t in targets)

    def test_more_patterns_than_targets(self):
        targets = self.targets(3)
        patterns = self.patterns(8)
        samples, recycled = pair_projections(targets, patterns, seed=3)
        assert recycled == 5
        assert len(samples) == 8
        assert all(s.source_id is not None for s in samples)
        counts = {}
        for s in samples:
            counts[s.target_id] = counts.get(s.target_id, 0) + 1
        # round-robin over the permutation: 8 over 3 targets splits 3/3/2
        assert sorted(counts.values()) == [2, 3, 3]

    def test_equal_counts_is_bijection(self):
        targets = self.targets(6)
        patterns = self.patterns(6)
        samples, recycled = pair_projections(targets, patterns, seed=9)
        assert recycled == 0
        assert sorted(s.target_id for s in samples) == sorted(t.key for t in targets)
        assert sorted(s.source_id for s in samples) == sorted(patterns)

    def test_masks_copied_verbatim(self):
        targets = self.targets(5)
        patterns = self.patterns(5)
        samples, _ = pair_projections(targets, patterns, seed=2)
        for s in samples:
            assert s.proj_mask == patterns[s.source_id]

    def test_deterministic(self):
        targets = self.targets(7)
        patterns = self.patterns(5)
        a, _ = pair_projections(targets, patterns, seed=4)
        b, _ = pair_projections(targets, patterns, seed=4)
        assert [(s.source_id, s.target_id) for s in a] == [(s.source_id, s.target_id) for s in b]

    def test_rejects_empty_or_incomplete_targets(self):
        with pytest.raises(ContractViolation):
            pair_projections([], self.patterns(2), seed=0)
        rng = np.random.default_rng(8)
        bad = [incomplete_window("x", 0, rng, [1])]
        with pytest.raises(ContractViolation):
            pair_projections(bad, self.patterns(2), seed=0)


class TestTrainingSets:
    def samples(self, n, seed=0):
        targets = TestPairProjections().targets(n, seed=seed)
        patterns = TestPairProjections().patterns(n, seed=seed + 1)
        out, _ = pair_projections(targets, patterns, seed=seed)
        return out

    def test_and_identity_row_for_row(self):
        samples = self.samples(12)
        gen = bernoulli_mask_gen(rate=0.2, seed=5, tag="arm0")
        d_proj, d_mask, d_both = build_training_sets(samples, gen)
        assert np.array_equal(d_both.mask, d_proj.mask & d_mask.mask)
        assert np.array_equal(d_proj.truth, d_mask.truth)
        assert np.array_equal(d_proj.truth, d_both.truth)
        assert d_proj.pairs == d_mask.pairs == d_both.pairs

    def test_values_nan_exactly_at_hidden(self):
        samples = self.samples(8, seed=3)
        gen = bernoulli_mask_gen(rate=0.3, seed=6, tag="arm1")
        for ts in build_training_sets(samples, gen):
            hidden = ts.mask == 0
            assert np.isnan(ts.values[hidden]).all()
            assert np.array_equal(ts.values[~hidden], ts.truth[~hidden])
            assert np.isfinite(ts.truth).all()

    def test_rate_zero_mask_set_mirrors_truth(self):
        samples = self.samples(5, seed=4)
        gen = bernoulli_mask_gen(rate=0.0, seed=1, tag="x")
        _, d_mask, d_both = build_training_sets(samples, gen)
        assert np.array_equal(d_mask.values, d_mask.truth)
        assert d_mask.mask.all()
        # combined collapses to the projection representation
        d_proj = build_training_sets(samples, gen)[0]
        assert np.array_equal(d_both.mask, d_proj.mask)

    def test_art_mask_keyed_by_identity_not_order(self):
        samples = self.samples(10, seed=7)
        gen = bernoulli_mask_gen(rate=0.4, seed=9, tag="arm2")
        _, d_mask_a, _ = build_training_sets(samples, gen)
        perm = list(reversed(range(len(samples))))
        shuffled = [samples[i] for i in perm]
        _, d_mask_b, _ = build_training_sets(shuffled, gen)
        for row_a, row_b in enumerate(perm):
            assert np.array_equal(d_mask_a.mask[row_b], d_mask_b.mask[row_a])

    def test_rate_one_keeps_single_anchor(self):
        samples = self.samples(6, seed=9)
        gen = bernoulli_mask_gen(rate=1.0, seed=2, tag="full")
        _, d_mask, _ = build_training_sets(samples, gen)
        assert np.array_equal(d_mask.mask.sum(axis=1), np.ones(6))

    def test_empty_rejected(self):
        gen = bernoulli_mask_gen(rate=0.2, seed=0, tag="t")
        with pytest.raises(ContractViolation):
            build_training_sets([], gen)

    def test_rate_validated(self):
        with pytest.raises(ContractViolation):
            bernoulli_mask_gen(rate=1.5, seed=0, tag="t")
        with pytest.raises(ContractViolation):
            bernoulli_mask_gen(rate=-0.1, seed=0, tag="t")


class TestProjectedSampleValidation:
    def test_rejects_nan_truth(self):
        vals = np.ones(W)
        vals[3] = np.nan
        with pytest.raises(ContractViolation):
            ProjectedSample("s", "t", vals, MaskVector.ones(W))

    def test_rejects_mask_length_mismatch(self):
        with pytest.raises(ContractViolation):
            ProjectedSample("s", "t", np.ones(W), MaskVector.ones(W - 1))

    def test_combined_mask(self):
        proj = MaskVector(np.array([1, 1, 0, 1], dtype=np.uint8))
        art = MaskVector(np.array([1, 0, 1, 1], dtype=np.uint8))
        s = ProjectedSample("s", "t", np.ones(4), proj, art)
        assert np.array_equal(s.combined_mask.bits, [1, 0, 0, 1])
        bare = ProjectedSample("s", "t", np.ones(4), proj)
        assert bare.combined_mask == proj
