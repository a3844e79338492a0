from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replan.schema import (
    Action,
    ActionError,
    CategoricalKind,
    DatasetError,
    FeatureSet,
    FeatureSpec,
    Intervention,
    NumericKind,
    SchemaError,
    UserProfile,
    apply_action,
    apply_intervention,
    dump_schema,
    emit_csv,
    encode,
    ingest_csv,
    parse_schema,
)

TWO_FEATURE_DOC = """
{"version": "t", "features": [
  {"name": "income", "kind": "numeric", "actionable": true,
   "min": 0, "max": 300, "step": 100, "unit": "EUR"},
  {"name": "job", "kind": "categorical", "actionable": false,
   "options": ["a", "b", "c"]}
]}
"""


class TestParseSchema:
    def test_minimal_document(self):
        fs = parse_schema(TWO_FEATURE_DOC)
        assert len(fs) == 2
        assert fs.features[0].is_numeric
        assert fs.features[1].kind.options == ("a", "b", "c")

    def test_study_scale_counts(self):
        from replan.fixtures import study_schema

        fs = study_schema()
        assert len(fs) == 104
        assert len(fs.actionable_names) == 31
        reparsed = parse_schema(dump_schema(fs))
        assert reparsed == fs

    def test_duplicate_name_rejected(self):
        doc = TWO_FEATURE_DOC.replace('"job"', '"income"')
        with pytest.raises(SchemaError, match="income"):
            parse_schema(doc)

    def test_min_not_below_max(self):
        doc = TWO_FEATURE_DOC.replace('"min": 0, "max": 300', '"min": 300, "max": 300')
        with pytest.raises(SchemaError, match="income"):
            parse_schema(doc)

    def test_empty_options(self):
        doc = TWO_FEATURE_DOC.replace('["a", "b", "c"]', "[]")
        with pytest.raises(SchemaError, match="job"):
            parse_schema(doc)

    def test_unknown_kind_tag(self):
        doc = TWO_FEATURE_DOC.replace('"kind": "categorical"', '"kind": "ordinal"')
        with pytest.raises(SchemaError, match="ordinal"):
            parse_schema(doc)

    def test_step_must_divide_span(self):
        doc = TWO_FEATURE_DOC.replace('"step": 100', '"step": 70')
        with pytest.raises(SchemaError, match="step"):
            parse_schema(doc)

    def test_needs_actionable_feature(self):
        doc = TWO_FEATURE_DOC.replace('"actionable": true', '"actionable": false')
        with pytest.raises(SchemaError, match="actionable"):
            parse_schema(doc)


class TestIngestCsv:
    SCHEMA = parse_schema(TWO_FEATURE_DOC)

    def test_three_valid_rows(self):
        text = "income,job,label\n0,a,0\n100,b,1\n300,c,0\n"
        ds = ingest_csv(text, self.SCHEMA)
        assert len(ds) == 3
        assert ds.rows[1][0]["income"] == 100.0
        assert ds.labels == (0, 1, 0)

    def test_bad_categorical_names_row_and_feature(self):
        text = "income,job,label\n0,a,0\n100,z,1\n"
        with pytest.raises(DatasetError, match=r"row 1.*'job'"):
            ingest_csv(text, self.SCHEMA)

    def test_snap_nearest_step(self):
        schema = parse_schema(
            '{"features": [{"name": "x", "kind": "numeric", "actionable": true,'
            ' "min": 1000, "max": 11000, "step": 100}]}'
        )
        ds = ingest_csv("x,label\n2049,0\n2051,1\n", schema)
        assert ds.rows[0][0]["x"] == 2000.0
        assert ds.rows[1][0]["x"] == 2100.0

    def test_snap_tie_toward_min(self):
        schema = parse_schema(
            '{"features": [{"name": "x", "kind": "numeric", "actionable": true,'
            ' "min": 1000, "max": 11000, "step": 100}]}'
        )
        ds = ingest_csv("x,label\n2050,0\n", schema)
        assert ds.rows[0][0]["x"] == 2000.0

    def test_missing_column(self):
        with pytest.raises(DatasetError, match="missing"):
            ingest_csv("income,label\n0,0\n", self.SCHEMA)

    def test_non_binary_label(self):
        with pytest.raises(DatasetError, match="label"):
            ingest_csv("income,job,label\n0,a,2\n", self.SCHEMA)

    def test_out_of_domain_value(self):
        with pytest.raises(DatasetError, match=r"row 0.*income"):
            ingest_csv("income,job,label\n900,a,0\n", self.SCHEMA)


class TestEncode:
    SCHEMA = parse_schema(TWO_FEATURE_DOC)

    def test_numeric_at_min_is_zero(self):
        p = UserProfile.validate({"income": 0.0, "job": "a"}, self.SCHEMA)
        assert encode(p, self.SCHEMA)[0] == 0.0

    def test_one_hot_block(self):
        p = UserProfile.validate({"income": 0.0, "job": "b"}, self.SCHEMA)
        assert encode(p, self.SCHEMA)[1:].tolist() == [0.0, 1.0, 0.0]

    def test_numeric_midpoint(self):
        schema = parse_schema(
            '{"features": [{"name": "x", "kind": "numeric", "actionable": true,'
            ' "min": 0, "max": 10, "step": 5}]}'
        )
        p = UserProfile.validate({"x": 5.0}, schema)
        assert encode(p, schema)[0] == 0.5

    def test_length_matches_widths(self):
        assert self.SCHEMA.encoded_length == 1 + 3


class TestApply:
    SCHEMA = parse_schema(TWO_FEATURE_DOC)

    def profile(self):
        return UserProfile.validate({"income": 100.0, "job": "a"}, self.SCHEMA)

    def test_apply_action(self):
        out = apply_action(self.profile(), Action("income", 200.0), self.SCHEMA)
        assert out["income"] == 200.0
        assert out["job"] == "a"

    def test_non_actionable_rejected(self):
        with pytest.raises(ActionError, match="not actionable"):
            apply_action(self.profile(), Action("job", "b"), self.SCHEMA)

    def test_noop_rejected(self):
        with pytest.raises(ActionError, match="current value"):
            apply_action(self.profile(), Action("income", 100.0), self.SCHEMA)

    def test_empty_intervention_is_identity(self):
        x = self.profile()
        assert apply_intervention(Intervention(()), x, self.SCHEMA) == x

    def test_two_actions_apply(self):
        schema = FeatureSet(
            (
                FeatureSpec("a", NumericKind(0, 10, 1), True),
                FeatureSpec("b", NumericKind(0, 10, 1), True),
            )
        )
        x = UserProfile.validate({"a": 0.0, "b": 0.0}, schema)
        out = apply_intervention(
            Intervention((Action("a", 3.0), Action("b", 7.0))), x, schema
        )
        assert (out["a"], out["b"]) == (3.0, 7.0)

    def test_duplicate_feature_rejected(self):
        with pytest.raises(ActionError, match="twice"):
            Intervention((Action("a", 1.0), Action("a", 2.0)))

    def test_error_carries_action_index(self):
        schema = FeatureSet(
            (
                FeatureSpec("a", NumericKind(0, 10, 1), True),
                FeatureSpec("b", NumericKind(0, 10, 1), False),
            )
        )
        x = UserProfile.validate({"a": 0.0, "b": 0.0}, schema)
        with pytest.raises(ActionError, match="action 1"):
            apply_intervention(
                Intervention((Action("a", 3.0), Action("b", 7.0))), x, schema
            )


# -- properties ---------------------------------------------------------------

PROP_SCHEMA = FeatureSet(
    (
        FeatureSpec("n1", NumericKind(0, 1000, 50), True),
        FeatureSpec("n2", NumericKind(-10, 10, 2.5), True),
        FeatureSpec("c1", CategoricalKind(("p", "q", "r", "s")), True),
        FeatureSpec("c2", CategoricalKind(("u", "v")), False),
    )
)


@st.composite
def profiles(draw):
    n1 = PROP_SCHEMA.features[0].kind
    n2 = PROP_SCHEMA.features[1].kind
    return UserProfile.validate(
        {
            "n1": n1.grid_value(draw(st.integers(0, n1.n_steps))),
            "n2": n2.grid_value(draw(st.integers(0, n2.n_steps))),
            "c1": draw(st.sampled_from(PROP_SCHEMA.features[2].kind.options)),
            "c2": draw(st.sampled_from(PROP_SCHEMA.features[3].kind.options)),
        },
        PROP_SCHEMA,
    )


@given(profiles(), profiles())
@settings(max_examples=100, deadline=None)
def test_encode_injective(p1, p2):
    if p1 != p2:
        assert not np.array_equal(encode(p1, PROP_SCHEMA), encode(p2, PROP_SCHEMA))
    else:
        assert np.array_equal(encode(p1, PROP_SCHEMA), encode(p2, PROP_SCHEMA))


@st.composite
def interventions_for(draw, profile):
    actions = []
    for spec in PROP_SCHEMA.features:
        if not spec.actionable or not draw(st.booleans()):
            continue
        if spec.is_numeric:
            idx = draw(st.integers(0, spec.kind.n_steps))
            target = spec.kind.grid_value(idx)
        else:
            target = draw(st.sampled_from(spec.kind.options))
        if target != profile[spec.name]:
            actions.append(Action(spec.name, target))
    return Intervention(tuple(actions))


@st.composite
def profile_and_intervention(draw):
    p = draw(profiles())
    return p, draw(interventions_for(p))


@given(profile_and_intervention(), st.randoms(use_true_random=False))
@settings(max_examples=100, deadline=None)
def test_intervention_order_independent(pi, rnd):
    profile, intervention = pi
    shuffled = list(intervention.actions)
    rnd.shuffle(shuffled)
    a = apply_intervention(intervention, profile, PROP_SCHEMA)
    b = apply_intervention(Intervention(tuple(shuffled)), profile, PROP_SCHEMA)
    assert a == b


@given(st.lists(st.tuples(profiles(), st.integers(0, 1)), min_size=1, max_size=20))
@settings(max_examples=50, deadline=None)
def test_csv_round_trip(rows):
    from replan.schema import Dataset

    ds = Dataset(PROP_SCHEMA, tuple(rows))
    text = emit_csv(ds)
    back = ingest_csv(text, PROP_SCHEMA)
    assert back == ds
    assert emit_csv(back) == text


def test_profile_validation_errors():
    schema = parse_schema(TWO_FEATURE_DOC)
    with pytest.raises(SchemaError, match="missing"):
        UserProfile.validate({"income": 0.0}, schema)
    with pytest.raises(SchemaError, match="unknown"):
        UserProfile.validate(
            {"income": 0.0, "job": "a", "extra": 1.0}, schema
        )
    with pytest.raises(SchemaError, match="outside"):
        UserProfile.validate({"income": 99999.0, "job": "a"}, schema)
    with pytest.raises(ActionError, match="grid"):
        UserProfile.validate({"income": 130.0, "job": "a"}, schema)
    snapped = UserProfile.validate({"income": 130.0, "job": "a"}, schema, snap=True)
    assert snapped["income"] == 100.0
