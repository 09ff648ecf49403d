import json

import numpy as np
import pytest

from qrfs.errors import ValidationError
from qrfs.evaluation import LabeledDataset
from qrfs.ga import (Chromosome, ChromosomeLayout, ChromosomeEvaluator,
                     GaConfig, Segment, decode_segment, default_knn_layout,
                     evaluate_chromosome, fitness, ga_run, qr_ga_select,
                     svm_example_layout)

from helpers import planted_classification, separable_toy, xor_toy


def all_chromosomes(layout):
    """Exhaustive enumeration of every bit pattern with a nonempty mask."""
    for v in range(2 ** layout.total_bits):
        bits = np.array([(v >> (layout.total_bits - 1 - t)) & 1
                         for t in range(layout.total_bits)], dtype=bool)
        if bits[layout.feature_slice].any():
            yield Chromosome(bits)


class TestDecodeSegment:
    def test_all_zero_is_min(self):
        assert decode_segment(np.zeros(6, dtype=bool), 0.25, 9.5) == 0.25

    def test_all_one_is_max_exactly(self):
        # the (2^l - 1) denominator cancels rho exactly at the top end
        assert decode_segment(np.ones(9, dtype=bool), -1e17, 1.0) == 1.0

    def test_direct_formula_example(self):
        # l = 10, rho = 511, bounds [0.1, 100]
        bits = np.array([int(b) for b in format(511, "010b")], dtype=bool)
        expected = 0.1 + (100.0 - 0.1) / (2 ** 10 - 1) * 511
        assert decode_segment(bits, 0.1, 100.0) == pytest.approx(expected, rel=1e-15)

    def test_msb_first(self):
        # 100 (binary) must decode as rho = 4, not rho = 1
        bits = np.array([1, 0, 0], dtype=bool)
        assert decode_segment(bits, 0.0, 7.0) == pytest.approx(4.0)

    def test_random_segments_match_formula(self):
        rng = np.random.default_rng(99)
        for _ in range(200):
            l = int(rng.integers(1, 16))
            lo = float(rng.uniform(-50, 50))
            hi = lo + float(rng.uniform(1e-3, 100))
            bits = rng.integers(0, 2, size=l).astype(bool)
            rho = int("".join("1" if b else "0" for b in bits), 2)
            expected = lo + (hi - lo) / (2 ** l - 1) * rho
            got = decode_segment(bits, lo, hi)
            assert abs(got - expected) <= 1e-15 * max(abs(expected), 1.0)


class TestFitness:
    def test_paper_style_arithmetic(self):
        assert fitness(0.1, 50, 1000, 0.8) == pytest.approx(0.09, abs=1e-15)

    def test_perfect_classifier_all_features(self):
        assert fitness(0.0, 30, 30, 0.8) == pytest.approx(0.2, abs=1e-15)

    def test_even_weights(self):
        assert fitness(0.2, 10, 40, 0.5) == pytest.approx(0.225, abs=1e-15)

    def test_validation(self):
        with pytest.raises(ValidationError):
            fitness(1.5, 1, 2, 0.8)
        with pytest.raises(ValidationError):
            fitness(0.1, 0, 2, 0.8)
        with pytest.raises(ValidationError):
            fitness(0.1, 1, 2, 1.0)


class TestLayout:
    def test_total_bits_and_slices(self):
        layout = ChromosomeLayout(segments=(Segment("a", 3, 0.0, 1.0),
                                            Segment("b", 5, 1.0, 2.0)),
                                  feature_bits=7)
        assert layout.total_bits == 15
        assert layout.segment_slice(0) == slice(0, 3)
        assert layout.segment_slice(1) == slice(3, 8)
        assert layout.feature_slice == slice(8, 15)

    def test_svm_example_layout_is_engineless_config(self):
        layout = svm_example_layout(12)
        assert [s.name for s in layout.segments] == ["C", "gamma"]
        assert layout.feature_bits == 12

    def test_segment_validation(self):
        with pytest.raises(ValidationError):
            Segment("bad", 0, 0.0, 1.0)
        with pytest.raises(ValidationError):
            Segment("bad", 3, 2.0, 1.0)


class TestEvaluateChromosome:
    def test_separable_full_mask_hits_floor(self):
        data = separable_toy(seed=0, extra=1)
        layout = default_knn_layout(data.n_features)
        cfg = GaConfig(seed=0, cv_folds=5)
        bits = np.zeros(layout.total_bits, dtype=bool)
        bits[0:4] = [0, 0, 0, 0]  # k decodes to min = 1
        bits[layout.feature_slice] = True
        record = evaluate_chromosome(Chromosome(bits), layout, data, cfg)
        assert record.cv_error == 0.0
        assert record.fitness == pytest.approx((1 - cfg.omega_weight) * 1.0)
        assert record.decoded_params["k"] == 1.0

    def test_smaller_subset_wins_at_equal_error(self):
        data = separable_toy(seed=1, extra=2)
        layout = default_knn_layout(data.n_features)
        cfg = GaConfig(seed=0)
        full = np.zeros(layout.total_bits, dtype=bool)
        full[layout.feature_slice] = True
        lean = full.copy()
        lean[layout.feature_slice.start + 2] = False  # drop one noise feature
        r_full = evaluate_chromosome(Chromosome(full), layout, data, cfg)
        r_lean = evaluate_chromosome(Chromosome(lean), layout, data, cfg)
        assert r_full.cv_error == r_lean.cv_error == 0.0
        assert r_lean.fitness < r_full.fitness

    def test_repeated_calls_identical(self):
        data = xor_toy(0)
        layout = default_knn_layout(3)
        cfg = GaConfig(seed=4)
        bits = np.ones(layout.total_bits, dtype=bool)
        a = evaluate_chromosome(Chromosome(bits), layout, data, cfg)
        b = evaluate_chromosome(Chromosome(bits.copy()), layout, data, cfg)
        assert a.fitness == b.fitness and a.cv_error == b.cv_error

    def test_cache_hits_counted(self):
        data = xor_toy(0)
        layout = default_knn_layout(3)
        ev = ChromosomeEvaluator(data, layout, GaConfig(seed=0))
        bits = np.ones(layout.total_bits, dtype=bool)
        ev.evaluate(Chromosome(bits))
        ev.evaluate(Chromosome(bits.copy()))
        assert ev.evaluations == 1 and ev.cache_hits == 1

    def test_fitness_recomputable_from_record(self):
        data = xor_toy(2)
        layout = default_knn_layout(3)
        record = evaluate_chromosome(
            Chromosome(np.ones(layout.total_bits, dtype=bool)), layout, data,
            GaConfig(seed=1))
        redo = fitness(record.cv_error, record.subset_size,
                       record.total_features, 0.8)
        assert abs(redo - record.fitness) <= 1e-15

    def test_empty_mask_rejected(self):
        data = xor_toy(0)
        layout = default_knn_layout(3)
        bits = np.zeros(layout.total_bits, dtype=bool)
        with pytest.raises(ValidationError):
            evaluate_chromosome(Chromosome(bits), layout, data, GaConfig())


class TestGaRun:
    def test_zero_generations_returns_initial_best(self):
        data = xor_toy(0)
        layout = default_knn_layout(3)
        cfg = GaConfig(population=8, generations=0, seed=5)
        res = ga_run(data, layout, cfg)
        assert len(res.history) == 1
        assert res.best.fitness == res.history[0][0]

    def test_finds_exhaustive_optimum_on_xor_toy(self):
        data = xor_toy(0)
        layout = default_knn_layout(3)
        cfg = GaConfig(population=20, generations=15, seed=0)
        res = ga_run(data, layout, cfg)
        oracle = min(ChromosomeEvaluator(data, layout, cfg).evaluate(c).fitness
                     for c in all_chromosomes(layout))
        assert res.best.fitness == oracle
        assert res.selection.selected == (0, 1)

    def test_elitism_keeps_best_fitness_nonincreasing(self):
        data = xor_toy(1)
        layout = default_knn_layout(3)
        res = ga_run(data, layout, GaConfig(population=12, generations=10, seed=2))
        best = [h[0] for h in res.history]
        assert all(a >= b for a, b in zip(best, best[1:]))

    def test_seeded_determinism(self):
        layout = default_knn_layout(3)
        cfg = GaConfig(population=10, generations=6, seed=9)
        r1 = ga_run(xor_toy(3), layout, cfg)
        r2 = ga_run(xor_toy(3), layout, cfg)
        assert json.dumps(r1.selection.to_dict()) == json.dumps(r2.selection.to_dict())
        assert r1.history == r2.history


class TestQrGaSelect:
    def test_duplicated_features_filtered_and_never_coselected(self, rng):
        base = rng.standard_normal((40, 6))
        data = LabeledDataset(x=np.hstack([base, base]),
                              y=(base[:, 0] > 0).astype(int), class_count=2)
        cfg = GaConfig(population=12, generations=8, seed=0)
        sel, ga = qr_ga_select(data, cfg)
        assert sel.params["survivors"] == 6  # phase 1 halves the candidates
        mod = [s % 6 for s in sel.selected]
        assert len(mod) == len(set(mod))  # no exact-duplicate pair survives

    def test_full_rank_orthogonal_phase1_noop_equals_ga_run(self):
        rng = np.random.default_rng(4)
        q = np.linalg.qr(rng.standard_normal((24, 4)))[0] * 3.0
        y = (q[:, 0] > np.median(q[:, 0])).astype(int)
        data = LabeledDataset(x=q, y=y, class_count=2)
        cfg = GaConfig(population=10, generations=5, seed=3)
        sel, ga = qr_ga_select(data, cfg)
        bare = ga_run(data, default_knn_layout(4), cfg)
        assert sel.selected == bare.selection.selected
        assert ga.history == bare.history
        assert ga.best.fitness == bare.best.fitness

    def test_mapping_is_injective_and_lands_in_survivors(self):
        data = planted_classification(0, m=40, n=30)
        cfg = GaConfig(population=10, generations=5, seed=1)
        sel, ga = qr_ga_select(data, cfg)
        assert len(set(sel.selected)) == len(sel.selected)
        survivors = set(range(data.n_features))  # phase-1 output is a subset
        assert set(sel.selected) <= survivors
        assert sel.method == "qr-ga"

    def test_planted_beats_rrqr_head_to_head(self):
        from qrfs.evaluation import cross_validate, dobscv_folds
        from qrfs.rrqr import select_features_rrqr
        wins = 0
        for seed in range(2):
            data = planted_classification(seed)
            cfg = GaConfig(population=20, generations=15, seed=seed)
            sel, _ = qr_ga_select(data, cfg)
            rr = select_features_rrqr(data.x, k=len(sel.selected), f=1.1)
            folds = dobscv_folds(data, 5, seed=1234)
            acc = cross_validate(data, list(sel.selected), ("knn", {"k": 5}),
                                 folds).pooled_metrics.accuracy
            acc_rr = cross_validate(data, list(rr.selected), ("knn", {"k": 5}),
                                    folds).pooled_metrics.accuracy
            wins += acc >= acc_rr
        assert wins >= 1
