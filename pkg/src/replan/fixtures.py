"""Deterministic demo assets: fixture schemas, datasets, classifiers, personas.

Two scales are provided. The desk scale (14 features, 10 actionable) keeps
tests and benchmarks fast; the study scale (104 features, 31 actionable)
matches the size of the combined lending scenario and backs the demo server.
Both are synthetic stand-ins: rows are sampled uniformly per feature domain
and labeled by a hand-authored linear scoring rule before the MLP ensemble is
trained on them.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .classifier import EnsembleClassifier, TrainConfig, train_ensemble
from .engine import mix_seed
from .schema import (
    CategoricalKind,
    Dataset,
    FeatureSet,
    FeatureSpec,
    NumericKind,
    UserProfile,
)
from .session import Persona, SessionContext
from .simulation import (
    LinearLabelRule,
    SyntheticDataSpec,
    gen_dataset,
    rejected_candidates,
)


def desk_schema() -> FeatureSet:
    # grids are deliberately coarse: actions carry tangible effort, and the
    # per-profile action space stays small enough for near-exhaustive search
    f = [
        FeatureSpec("monthly_income", NumericKind(1000, 8000, 1000, "EUR"), True,
                    "Monthly income"),
        FeatureSpec("savings", NumericKind(0, 10000, 2500, "EUR"), True,
                    "Savings balance"),
        FeatureSpec("debt", NumericKind(0, 6000, 1500, "EUR"), True,
                    "Outstanding debt"),
        FeatureSpec("work_hours", NumericKind(10, 60, 10, "h/week"), True,
                    "Weekly work hours"),
        FeatureSpec("training_courses", NumericKind(0, 4, 1, "courses"), False,
                    "Completed training courses"),
        FeatureSpec("credit_lines", NumericKind(0, 6, 2, "accounts"), False,
                    "Open credit lines"),
        FeatureSpec("employment", CategoricalKind(
            ("unemployed", "part_time", "full_time", "self_employed")), True,
            "Employment status"),
        FeatureSpec("education", CategoricalKind(
            ("none", "highschool", "bachelor", "master")), True,
            "Education level"),
        FeatureSpec("housing", CategoricalKind(("rent", "mortgage", "own")), True,
                    "Housing situation"),
        FeatureSpec("direct_deposit", CategoricalKind(("no", "yes")), True,
                    "Salary paid by direct deposit"),
        FeatureSpec("age", NumericKind(18, 80, 1, "years"), False, "Age"),
        FeatureSpec("credit_history_years", NumericKind(0, 40, 1, "years"), False,
                    "Credit history length"),
        FeatureSpec("prior_defaults", CategoricalKind(("zero", "one", "several")),
                    False, "Prior defaults"),
        FeatureSpec("application_channel", CategoricalKind(("online", "branch")),
                    False, "Application channel"),
    ]
    return FeatureSet(tuple(f), version="desk-1")


def _encoded_rule(
    schema: FeatureSet,
    numeric: dict[str, float],
    categorical: dict[str, dict[str, float]],
) -> tuple[float, ...]:
    w = np.zeros(schema.encoded_length)
    for spec in schema.features:
        off = schema.encoded_offsets[spec.name]
        if spec.is_numeric:
            w[off] = numeric.get(spec.name, 0.0)
        else:
            per_option = categorical.get(spec.name, {})
            for j, opt in enumerate(spec.kind.options):
                w[off + j] = per_option.get(opt, 0.0)
    return tuple(float(v) for v in w)


def desk_label_rule(schema: FeatureSet) -> LinearLabelRule:
    weights = _encoded_rule(
        schema,
        numeric={
            "monthly_income": 2.2,
            "savings": 1.6,
            "debt": -2.4,
            "work_hours": 0.9,
            "training_courses": 0.4,
            "credit_lines": -0.5,
            "age": 0.5,
            "credit_history_years": 0.9,
        },
        categorical={
            "employment": {"unemployed": -1.4, "part_time": -0.3,
                           "full_time": 0.9, "self_employed": 0.5},
            "education": {"none": -0.7, "highschool": -0.1,
                          "bachelor": 0.5, "master": 0.8},
            "housing": {"rent": -0.3, "mortgage": 0.2, "own": 0.6},
            "direct_deposit": {"no": -0.4, "yes": 0.4},
            "prior_defaults": {"zero": 0.7, "one": -0.3, "several": -1.1},
            "application_channel": {"online": 0.0, "branch": 0.1},
        },
    )
    return LinearLabelRule(weights=weights, threshold=None)


def study_schema(seed: int = 29) -> FeatureSet:
    """104 synthetic attributes, exactly 31 actionable."""
    rng = np.random.default_rng(seed)
    actionable_idx = set(map(int, rng.choice(104, size=31, replace=False)))
    specs = []
    for i in range(104):
        name = f"attr_{i:03d}"
        display = f"Attribute {i:03d}"
        if rng.random() < 0.62:
            steps = int(rng.integers(4, 21))
            lo = float(rng.integers(0, 50)) * 10.0
            step = float(rng.integers(1, 26))
            kind: NumericKind | CategoricalKind = NumericKind(
                min=lo, max=lo + steps * step, step=step
            )
        else:
            n_opt = int(rng.integers(2, 6))
            kind = CategoricalKind(tuple(f"level_{j}" for j in range(n_opt)))
        specs.append(
            FeatureSpec(name, kind, actionable=i in actionable_idx,
                        display_name=display)
        )
    return FeatureSet(tuple(specs), version="study-1")


@dataclass(frozen=True)
class DemoBundle:
    scale: str
    schema: FeatureSet
    dataset: Dataset
    classifier: EnsembleClassifier
    personas: tuple[Persona, ...]
    context: SessionContext


_PERSONA_SPECS = (
    ("Marta", "Marta, 34, rents a flat and works part time while finishing "
              "her bookkeeping certification; the bank turned her loan down."),
    ("Jonas", "Jonas, 41, is self-employed with uneven income and a small "
              "outstanding debt; his application was rejected last week."),
)


@lru_cache(maxsize=4)
def build_bundle(scale: str = "desk", seed: int = 11) -> DemoBundle:
    if scale == "desk":
        schema = desk_schema()
        rule = desk_label_rule(schema)
        n_rows, epochs = 900, 45
    elif scale == "study":
        schema = study_schema()
        rule = LinearLabelRule()  # seeded random weights, median threshold
        n_rows, epochs = 1200, 25
    else:
        raise ValueError(f"unknown bundle scale {scale!r}")

    dataset = gen_dataset(
        SyntheticDataSpec(
            schema=schema,
            n_rows=n_rows,
            label_rule=rule,
            label_noise=0.02,
            seed=mix_seed(seed, scale, "data"),
        )
    )
    classifier = train_ensemble(
        dataset,
        TrainConfig(
            learning_rate=0.25,
            epochs=epochs,
            batch_size=32,
            seed=mix_seed(seed, scale, "train"),
        ),
    )
    ctx = SessionContext(classifier=classifier, schema=schema)
    candidates = rejected_candidates(ctx, dataset, max_len=2, limit=40,
                                     min_flips=25, min_cost=0.05)
    if len(candidates) < 2:
        raise RuntimeError(
            f"{scale} bundle: fewer than 2 rejected-but-recoverable profiles"
        )
    personas = tuple(
        Persona(name=name, profile=candidates[i], narrative=narrative)
        for i, (name, narrative) in enumerate(_PERSONA_SPECS)
    )
    for p in personas:
        if ctx.evaluator.predict_profile(p.profile) != 0:
            raise RuntimeError(f"persona {p.name} is not rejected")
    return DemoBundle(
        scale=scale,
        schema=schema,
        dataset=dataset,
        classifier=classifier,
        personas=personas,
        context=ctx,
    )


def desk_bundle() -> DemoBundle:
    return build_bundle("desk")


def study_bundle() -> DemoBundle:
    return build_bundle("study")


def benchmark_profiles(bundle: DemoBundle, limit: int = 40) -> list[UserProfile]:
    return rejected_candidates(
        bundle.context, bundle.dataset, max_len=2, limit=limit,
        min_flips=60, min_cost=0.08,
    )
