"""Two-phase random hyperparameter search.

Phase 1 freezes everything except the two KL weights at documented initial
values and samples the weights uniformly a few times; phase 2 freezes the
winning weights and samples the remaining knobs. Every trial is scored by
the generalized zero-shot harmonic mean on a validation split carved out
of the seen classes; the real unseen split is never touched.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import seeding
from .classifiers import build_predictor, gate_input_rows, train_domain_gate
from .data import ClassSplit, Dataset, RunConfig
from .errors import ArgumentError
from .evaluation import gzsl_metrics
from .model import posterior_means

PHASE1_INITIAL = {
    "learning_rate": 1e-5,  # exponent -5
    "batch_size": 64,
    "n_d": 10,
    "dim_r": 192,
    "dim_v": 8,
}


@dataclass
class SearchSpace:
    beta_low: float = 0.0
    beta_high: float = 1.0
    lr_exponent_low: float = -6.0
    lr_exponent_high: float = -3.0
    batch_sizes: tuple = (32, 64, 128, 256)
    n_d_values: tuple = tuple(range(1, 17))
    dim_r_values: tuple = tuple(range(128, 257, 16))
    dim_v_values: tuple = tuple(range(8, 33, 4))
    phase1_trials: int = 5
    phase2_trials: int = 100

    def validate(self) -> None:
        if self.phase1_trials < 1 or self.phase2_trials < 1:
            raise ArgumentError("trial counts must be >= 1")
        if not (self.batch_sizes and self.n_d_values and self.dim_r_values and self.dim_v_values):
            raise ArgumentError("discrete search sets must be nonempty")
        if self.beta_high <= self.beta_low or self.lr_exponent_high <= self.lr_exponent_low:
            raise ArgumentError("continuous search ranges must be nonempty")


@dataclass
class Trial:
    phase: int
    index: int
    config: RunConfig
    score: float


@dataclass
class SearchResult:
    best_config: RunConfig
    best_score: float
    trials: list[Trial] = field(default_factory=list)


def carve_validation_split(split: ClassSplit, rng: np.random.Generator) -> ClassSplit:
    """Proxy split inside the seen classes, sized like the real unseen set."""
    k = len(split.unseen_ids)
    seen_ids = sorted(split.seen_ids)
    if len(seen_ids) < 2 * k:
        raise ArgumentError(
            f"validation carving needs at least 2*|unseen| = {2 * k} seen classes"
        )
    proxy_unseen = rng.choice(np.asarray(seen_ids), size=k, replace=False)
    return ClassSplit(
        seen_ids=frozenset(seen_ids) - frozenset(int(u) for u in proxy_unseen),
        unseen_ids=frozenset(int(u) for u in proxy_unseen),
    )


def validation_harmonic_mean(
    dataset: Dataset, validation_split: ClassSplit, config: RunConfig
) -> float:
    """Train on the validation-seen classes and score the GZSL harmonic
    mean over the validation classes, with the gate fit in-sample."""
    from .trainer import train

    result = train(dataset, validation_split, config)
    rng_cls = seeding.stream(config.seed, seeding.CLASSIFIER)
    predictor = build_predictor(result.state, dataset, validation_split, config, rng_cls)

    k = len(validation_split.unseen_ids)
    seen_mask = np.isin(dataset.labels, sorted(validation_split.seen_ids))
    unseen_mask = np.isin(dataset.labels, sorted(validation_split.unseen_ids))
    f_all = np.concatenate([dataset.skeleton[seen_mask], dataset.skeleton[unseen_mask]])
    gate_labels = np.concatenate([np.ones(seen_mask.sum()), np.zeros(unseen_mask.sum())])
    semantic_mean, _ = posterior_means(result.state.skeleton_encoder, f_all)
    unseen_probs = predictor.unseen.predict_proba(semantic_mean)
    rows = gate_input_rows(predictor.seen, unseen_probs, f_all, config.temperature, k)
    predictor.gate = train_domain_gate(rows, gate_labels, config.temperature, k)

    labels = np.concatenate([dataset.labels[seen_mask], dataset.labels[unseen_mask]])
    report = gzsl_metrics(predictor, f_all, labels, validation_split)
    return report.harmonic_mean


def hyperparameter_search(
    dataset: Dataset,
    split: ClassSplit,
    config: RunConfig,
    space: SearchSpace,
    seed: int,
    evaluate: Optional[Callable[[RunConfig], float]] = None,
) -> SearchResult:
    """Run both phases and return the highest-scoring configuration.

    ``evaluate`` defaults to the validation-split harmonic mean; tests can
    inject a cheap objective.
    """
    space.validate()
    rng = seeding.stream(seed, seeding.SEARCH)
    if evaluate is None:
        validation_split = carve_validation_split(split, rng)

        def evaluate(cfg: RunConfig) -> float:
            return validation_harmonic_mean(dataset, validation_split, cfg)

    trials: list[Trial] = []

    def run_trial(phase: int, index: int, cfg: RunConfig) -> Trial:
        trial = Trial(phase=phase, index=index, config=cfg, score=float(evaluate(cfg)))
        trials.append(trial)
        return trial

    best_phase1: Optional[Trial] = None
    for i in range(space.phase1_trials):
        beta_x = float(rng.uniform(space.beta_low, space.beta_high))
        beta_y = float(rng.uniform(space.beta_low, space.beta_high))
        cfg = replace(config, beta_x=beta_x, beta_y=beta_y, **PHASE1_INITIAL)
        trial = run_trial(1, i, cfg)
        if best_phase1 is None or trial.score > best_phase1.score:
            best_phase1 = trial

    phase2: list[Trial] = []
    for i in range(space.phase2_trials):
        lr = float(10.0 ** rng.uniform(space.lr_exponent_low, space.lr_exponent_high))
        cfg = replace(
            config,
            beta_x=best_phase1.config.beta_x,
            beta_y=best_phase1.config.beta_y,
            learning_rate=lr,
            batch_size=int(rng.choice(space.batch_sizes)),
            n_d=int(rng.choice(space.n_d_values)),
            dim_r=int(rng.choice(space.dim_r_values)),
            dim_v=int(rng.choice(space.dim_v_values)),
        )
        phase2.append(run_trial(2, i, cfg))

    # phase 1 only fixes the KL weights; the winner comes from phase 2
    best = max(phase2, key=lambda t: t.score)
    return SearchResult(best_config=best.config, best_score=best.score, trials=trials)
