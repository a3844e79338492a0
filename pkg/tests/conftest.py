from __future__ import annotations

import numpy as np
import pytest

from replan.classifier import EnsembleClassifier, MlpModel
from replan.schema import (
    CategoricalKind,
    FeatureSet,
    FeatureSpec,
    NumericKind,
    UserProfile,
)
from replan.session import SessionContext


@pytest.fixture
def tiny_schema() -> FeatureSet:
    return FeatureSet(
        (
            FeatureSpec("income", NumericKind(0, 300, 100, "EUR"), True),
            FeatureSpec("job", CategoricalKind(("a", "b", "c")), True),
            FeatureSpec("age", NumericKind(18, 80, 1, "years"), False),
        ),
        version="tiny-1",
    )


@pytest.fixture
def tiny_profile(tiny_schema) -> UserProfile:
    return UserProfile.validate(
        {"income": 100.0, "job": "b", "age": 30.0}, tiny_schema
    )


def linear_member(
    schema: FeatureSet,
    numeric: dict[str, float],
    categorical: dict[str, dict[str, float]],
    bias: float,
) -> MlpModel:
    """Single-layer model: logit = w . encoded + bias, per-feature authored."""
    w = np.zeros((schema.encoded_length, 1))
    for spec in schema.features:
        off = schema.encoded_offsets[spec.name]
        if spec.is_numeric:
            w[off, 0] = numeric.get(spec.name, 0.0)
        else:
            for j, opt in enumerate(spec.kind.options):
                w[off + j, 0] = categorical.get(spec.name, {}).get(opt, 0.0)
    return MlpModel((schema.encoded_length, 1), [w], [np.asarray([bias])])


def linear_ensemble(
    schema: FeatureSet,
    numeric: dict[str, float],
    categorical: dict[str, dict[str, float]] | None = None,
    bias: float = 0.0,
    bias_delta: float = 0.1,
) -> EnsembleClassifier:
    """Two near-identical linear members so the AND rule behaves linearly."""
    categorical = categorical or {}
    return EnsembleClassifier(
        (
            linear_member(schema, numeric, categorical, bias),
            linear_member(schema, numeric, categorical, bias + bias_delta),
        )
    )


def constant_ensemble(schema: FeatureSet, p0: float, p1: float) -> EnsembleClassifier:
    """Members with fixed output probabilities regardless of input."""

    def member(p: float) -> MlpModel:
        logit = float(np.log(p / (1.0 - p)))
        return MlpModel(
            (schema.encoded_length, 1),
            [np.zeros((schema.encoded_length, 1))],
            [np.asarray([logit])],
        )

    return EnsembleClassifier((member(p0), member(p1)))


@pytest.fixture
def tiny_context(tiny_schema) -> SessionContext:
    # approves once income is high enough; rejects the fixture profile
    h = linear_ensemble(tiny_schema, {"income": 6.0}, bias=-2.5, bias_delta=0.2)
    return SessionContext(classifier=h, schema=tiny_schema)


@pytest.fixture(scope="session")
def desk():
    from replan.fixtures import desk_bundle

    return desk_bundle()
