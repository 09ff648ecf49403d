"""Hybrid two-phase feature selection: an RRQR filter then a GA wrapper.

Phase one removes redundant features by strong rank-revealing QR at k equal
to the numerical rank of the data. Phase two searches the surviving feature
space with a genetic algorithm whose chromosome carries classifier
hyperparameter segments ahead of a per-feature mask, so subset choice and
hyperparameter tuning happen in one run. Fitness mixes cross-validated error
with the selected fraction of features and is minimized.

The GA uses tournament selection, single-point crossover, per-bit mutation
and elitism; the paper-facing knobs (the error/size trade-off weight, the
genotype decode bounds) live in the layout and config. Fitness evaluations
are cached per run by chromosome bits, and everything is deterministic for a
fixed seed. Within a generation, evaluations are independent and could run
in parallel; this implementation keeps them sequential and the cache
run-local.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .evaluation import LabeledDataset, cross_validate, dobscv_folds
from .matrix import numerical_rank
from .rrqr import SelectionResult, select_features_rrqr


@dataclass(frozen=True)
class Segment:
    """One hyperparameter segment: ``bits`` genes decoded into [min_p, max_p]."""

    name: str
    bits: int
    min_p: float
    max_p: float

    def __post_init__(self):
        if self.bits < 1:
            raise ValidationError(f"segment {self.name!r} needs at least 1 bit")
        if not self.max_p > self.min_p:
            raise ValidationError(f"segment {self.name!r} needs max_p > min_p")


@dataclass(frozen=True)
class ChromosomeLayout:
    """Hyperparameter segments followed by one bit per candidate feature."""

    segments: tuple[Segment, ...]
    feature_bits: int

    def __post_init__(self):
        if self.feature_bits < 1:
            raise ValidationError("layout needs at least one feature bit")

    @property
    def param_bits(self) -> int:
        return sum(s.bits for s in self.segments)

    @property
    def total_bits(self) -> int:
        return self.param_bits + self.feature_bits

    def segment_slice(self, index: int) -> slice:
        start = sum(s.bits for s in self.segments[:index])
        return slice(start, start + self.segments[index].bits)

    @property
    def feature_slice(self) -> slice:
        return slice(self.param_bits, self.total_bits)


@dataclass(frozen=True)
class Chromosome:
    """Fixed-length bit vector; the feature segment is never all zero after repair."""

    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", np.asarray(self.bits, dtype=bool))

    def key(self) -> bytes:
        return self.bits.tobytes()

    def feature_mask(self, layout: ChromosomeLayout) -> np.ndarray:
        return self.bits[layout.feature_slice]

    def decoded_params(self, layout: ChromosomeLayout) -> dict:
        return {seg.name: decode_segment(self.bits[layout.segment_slice(i)],
                                         seg.min_p, seg.max_p)
                for i, seg in enumerate(layout.segments)}


@dataclass(frozen=True)
class GaConfig:
    omega_weight: float = 0.8
    population: int = 50
    generations: int = 100
    crossover_rate: float = 0.9
    mutation_rate: float | None = None  # defaults to 1 / total_bits
    tournament_size: int = 3
    elitism: int = 2
    seed: int = 0
    cv_folds: int = 5
    rrqr_f: float = 1.1
    classifier: str = "knn"

    def validate(self) -> None:
        if not 0.0 < self.omega_weight < 1.0:
            raise ValidationError("omega_weight must lie strictly inside (0, 1)")
        if self.population < 2:
            raise ValidationError("population must be >= 2")
        if self.generations < 0:
            raise ValidationError("generations must be >= 0")
        if self.tournament_size < 1 or self.elitism < 0:
            raise ValidationError("tournament_size >= 1 and elitism >= 0 required")
        if self.cv_folds < 1:
            raise ValidationError("cv_folds must be >= 1")


@dataclass(frozen=True)
class FitnessRecord:
    """One evaluated chromosome; fitness is recomputable from the stored parts."""

    fitness: float
    cv_error: float
    subset_size: int
    total_features: int
    decoded_params: dict
    chromosome: Chromosome
    fold_failures: int = 0


@dataclass(frozen=True)
class GaResult:
    best: FitnessRecord
    history: tuple  # (best_fitness, mean_fitness) per recorded generation
    selection: SelectionResult
    evaluations: int = 0
    cache_hits: int = 0


def decode_segment(bits, min_p: float, max_p: float) -> float:
    """Genotype-to-phenotype decode, most-significant bit first.

    Value = min_p + (max_p - min_p) / (2**l - 1) * rho with rho the unsigned
    integer value of the bits; the endpoints are returned bit-exactly.
    """
    bits = np.asarray(bits, dtype=bool)
    l = bits.size
    if l < 1:
        raise ValidationError("decode_segment needs at least one bit")
    rho = 0
    for b in bits:
        rho = (rho << 1) | int(b)
    top = (1 << l) - 1
    if rho == 0:
        return float(min_p)
    if rho == top:
        return float(max_p)
    return min_p + (max_p - min_p) / top * rho


def fitness(cv_error: float, subset_size: int, total: int, omega_weight: float) -> float:
    """Weighted mix of classification error and selected-feature fraction (minimized)."""
    if not 0.0 <= cv_error <= 1.0:
        raise ValidationError(f"cv_error must lie in [0, 1], got {cv_error}")
    if not 0 < subset_size <= total:
        raise ValidationError("subset_size must lie in (0, total]")
    if not 0.0 < omega_weight < 1.0:
        raise ValidationError("omega_weight must lie strictly inside (0, 1)")
    return omega_weight * cv_error + (1.0 - omega_weight) * (subset_size / total)


def default_knn_layout(feature_bits: int) -> ChromosomeLayout:
    """One 4-bit k segment spanning [1, 15] plus the feature mask."""
    return ChromosomeLayout(segments=(Segment("k", 4, 1.0, 15.0),),
                            feature_bits=feature_bits)


def svm_example_layout(feature_bits: int) -> ChromosomeLayout:
    """Layout example for an SVM's C and kernel-width segments. Shipped as a
    config illustration only: no SVM engine is provided."""
    return ChromosomeLayout(segments=(Segment("C", 10, 0.1, 100.0),
                                      Segment("gamma", 10, 1e-4, 1.0)),
                            feature_bits=feature_bits)


class ChromosomeEvaluator:
    """Fitness evaluation with a per-run cache and shared DOB-SCV folds."""

    def __init__(self, data: LabeledDataset, layout: ChromosomeLayout, cfg: GaConfig):
        if data.n_features != layout.feature_bits:
            raise ValidationError(
                f"layout expects {layout.feature_bits} features, data has {data.n_features}")
        cfg.validate()
        self.data = data
        self.layout = layout
        self.cfg = cfg
        self.folds = dobscv_folds(data, cfg.cv_folds, cfg.seed)
        self.cache: dict[bytes, FitnessRecord] = {}
        self.evaluations = 0
        self.cache_hits = 0

    def _classifier_spec(self, params: dict) -> tuple:
        if self.cfg.classifier == "knn":
            k = int(round(params.get("k", 5.0)))
            return ("knn", {"k": max(k, 1)})
        if self.cfg.classifier == "tree":
            spec = {}
            if "max_depth" in params:
                spec["max_depth"] = max(int(round(params["max_depth"])), 1)
            if "min_leaf" in params:
                spec["min_leaf"] = max(int(round(params["min_leaf"])), 1)
            return ("tree", spec)
        raise ValidationError(f"unknown classifier {self.cfg.classifier!r}")

    def evaluate(self, chrom: Chromosome) -> FitnessRecord:
        key = chrom.key()
        hit = self.cache.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit
        mask = chrom.feature_mask(self.layout)
        if not mask.any():
            raise ValidationError("chromosome selects no features; repair it first")
        params = chrom.decoded_params(self.layout)
        classifier = self._classifier_spec(params)
        feats = np.flatnonzero(mask)
        errors = []
        failures = 0
        for fold in range(self.folds.n_folds):
            train_idx = self.folds.train_indices(fold)
            test_idx = self.folds.test_indices(fold)
            if test_idx.size == 0:
                test_idx = train_idx
            try:
                from .evaluation import _predict
                train = self.data.subset(train_idx, feats)
                pred = _predict(classifier, train, self.data.x[test_idx][:, feats])
                errors.append(float(np.mean(pred != self.data.y[test_idx])))
            except Exception:
                errors.append(1.0)
                failures += 1
        cv_error = float(np.mean(errors))
        record = FitnessRecord(
            fitness=fitness(cv_error, int(mask.sum()), self.layout.feature_bits,
                            self.cfg.omega_weight),
            cv_error=cv_error, subset_size=int(mask.sum()),
            total_features=self.layout.feature_bits, decoded_params=params,
            chromosome=chrom, fold_failures=failures)
        self.cache[key] = record
        self.evaluations += 1
        return record


def evaluate_chromosome(chrom: Chromosome, layout: ChromosomeLayout,
                        data: LabeledDataset, cfg: GaConfig) -> FitnessRecord:
    """One-off evaluation (folds rebuilt from cfg.seed; identical inputs give
    identical records)."""
    return ChromosomeEvaluator(data, layout, cfg).evaluate(chrom)


def _repair(bits: np.ndarray, layout: ChromosomeLayout, rng) -> None:
    """Flip one random feature bit on if the mask came out empty."""
    fs = layout.feature_slice
    if not bits[fs].any():
        bits[fs.start + int(rng.integers(layout.feature_bits))] = True


def _random_chromosome(layout: ChromosomeLayout, rng) -> Chromosome:
    bits = rng.integers(0, 2, size=layout.total_bits).astype(bool)
    _repair(bits, layout, rng)
    return Chromosome(bits)


def ga_run(data: LabeledDataset, layout: ChromosomeLayout, cfg: GaConfig) -> GaResult:
    """Run the GA and return the best-ever record plus per-generation history.

    history[0] covers the initial population; with elitism >= 1 the best
    fitness is nonincreasing along the history. The final selection scores
    each chosen feature by its frequency in the final population.
    """
    cfg.validate()
    evaluator = ChromosomeEvaluator(data, layout, cfg)
    rng = np.random.default_rng(cfg.seed)
    mut_rate = cfg.mutation_rate if cfg.mutation_rate is not None else 1.0 / layout.total_bits

    population = [_random_chromosome(layout, rng) for _ in range(cfg.population)]
    records = [evaluator.evaluate(c) for c in population]
    best = min(records, key=lambda r: r.fitness)
    history = [(min(r.fitness for r in records),
                float(np.mean([r.fitness for r in records])))]

    def tournament() -> Chromosome:
        idx = rng.integers(0, cfg.population, size=cfg.tournament_size)
        winner = min(idx, key=lambda i: (records[i].fitness, i))
        return population[winner]

    for _ in range(cfg.generations):
        order = sorted(range(cfg.population), key=lambda i: (records[i].fitness, i))
        children = [population[i] for i in order[:cfg.elitism]]
        while len(children) < cfg.population:
            p1 = tournament().bits.copy()
            p2 = tournament().bits.copy()
            if rng.random() < cfg.crossover_rate and layout.total_bits > 1:
                point = int(rng.integers(1, layout.total_bits))
                p1[point:], p2[point:] = p2[point:].copy(), p1[point:].copy()
            for child in (p1, p2):
                flips = rng.random(layout.total_bits) < mut_rate
                child ^= flips
                _repair(child, layout, rng)
                if len(children) < cfg.population:
                    children.append(Chromosome(child))
        population = children
        records = [evaluator.evaluate(c) for c in population]
        gen_best = min(records, key=lambda r: r.fitness)
        if gen_best.fitness < best.fitness:
            best = gen_best
        history.append((gen_best.fitness,
                        float(np.mean([r.fitness for r in records]))))

    freq = np.zeros(layout.feature_bits)
    for c in population:
        freq += c.feature_mask(layout)
    freq /= cfg.population
    chosen = np.flatnonzero(best.chromosome.feature_mask(layout))
    selection = SelectionResult(
        selected=tuple(int(i) for i in chosen),
        scores=tuple(float(freq[i]) for i in chosen),
        method="ga",
        params={"omega_weight": cfg.omega_weight, "population": cfg.population,
                "generations": cfg.generations, "seed": cfg.seed,
                "classifier": cfg.classifier, "cv_folds": cfg.cv_folds,
                "decoded_params": best.decoded_params})
    return GaResult(best=best, history=tuple(history), selection=selection,
                    evaluations=evaluator.evaluations, cache_hits=evaluator.cache_hits)


def qr_ga_select(data: LabeledDataset, cfg: GaConfig,
                 layout: ChromosomeLayout | None = None
                 ) -> tuple[SelectionResult, GaResult]:
    """Two-phase hybrid selection.

    Phase one keeps the strong-RRQR selection at k equal to the numerical
    rank of the feature matrix, removing redundant columns. Phase two runs
    the GA over the surviving features (in ascending original order, so a
    no-op filter reduces exactly to ga_run). The returned selection maps the
    GA mask back to original feature indices.
    """
    cfg.validate()
    rank = numerical_rank(data.x)
    phase1 = select_features_rrqr(data.x, k=max(rank, 1), f=cfg.rrqr_f)
    survivors = sorted(phase1.selected)
    if not survivors:
        raise ValidationError("the RRQR filter produced no surviving features")
    filtered = LabeledDataset(x=data.x[:, survivors], y=data.y,
                              class_count=data.class_count)
    if layout is None:
        layout = default_knn_layout(len(survivors))
    ga = ga_run(filtered, layout, cfg)
    original = tuple(int(survivors[i]) for i in ga.selection.selected)
    params = dict(ga.selection.params)
    params.update({"rrqr_f": cfg.rrqr_f, "filter_rank": rank,
                   "survivors": len(survivors)})
    selection = SelectionResult(selected=original, scores=ga.selection.scores,
                                method="qr-ga", params=params,
                                truncated=phase1.truncated)
    return selection, ga
