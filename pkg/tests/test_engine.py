from __future__ import annotations

import math

import numpy as np
import pytest

from replan.engine import (
    ConstraintError,
    ConstraintSet,
    EmptyActionSpaceError,
    Evaluator,
    NoRecourseError,
    PreferenceWeights,
    SearchBudget,
    SearchSpaceTooLargeError,
    action_cost,
    brute_force_search,
    diverse_plans,
    enumerate_actions,
    intervention_cost,
    mcts_search,
)
from replan.schema import (
    Action,
    CategoricalKind,
    FeatureSet,
    FeatureSpec,
    Intervention,
    NumericKind,
    UserProfile,
)

from conftest import constant_ensemble, linear_ensemble


def weights_for(schema, **named):
    w = {n: 0.0 for n in schema.actionable_names}
    w.update(named)
    return PreferenceWeights(w)


class TestEnumerateActions:
    def test_numeric_grid_minus_current(self, tiny_schema, tiny_profile):
        acts = enumerate_actions(tiny_profile, tiny_schema)
        income_targets = [a.target for a in acts if a.feature == "income"]
        assert income_targets == [0.0, 200.0, 300.0]

    def test_respects_numeric_range_constraint(self, tiny_schema, tiny_profile):
        cs = ConstraintSet(numeric_ranges={"income": (150.0, 300.0)})
        acts = enumerate_actions(tiny_profile, tiny_schema, cs)
        assert [a.target for a in acts if a.feature == "income"] == [200.0, 300.0]

    def test_categorical_allowed_subset(self, tiny_schema, tiny_profile):
        cs = ConstraintSet(allowed_options={"job": ("a", "b")})
        acts = enumerate_actions(tiny_profile, tiny_schema, cs)
        assert [a.target for a in acts if a.feature == "job"] == ["a"]

    def test_all_non_actionable_gives_empty(self):
        schema = FeatureSet(
            (
                FeatureSpec("x", NumericKind(0, 10, 1), True),
                FeatureSpec("y", NumericKind(0, 10, 1), False),
            )
        )
        x = UserProfile.validate({"x": 0.0, "y": 0.0}, schema)
        assert enumerate_actions(x, schema, exclude_features=frozenset({"x"})) == []

    def test_invalid_constraints_rejected(self, tiny_schema, tiny_profile):
        with pytest.raises(ConstraintError):
            enumerate_actions(
                tiny_profile, tiny_schema,
                ConstraintSet(numeric_ranges={"income": (-50.0, 100.0)}),
            )
        with pytest.raises(ConstraintError):
            enumerate_actions(
                tiny_profile, tiny_schema,
                ConstraintSet(allowed_options={"job": ()}),
            )


class TestCosts:
    def test_weighted_normalized_effort(self):
        schema = FeatureSet(
            (FeatureSpec("income", NumericKind(1000, 10000, 100), True),)
        )
        x = UserProfile.validate({"income": 2000.0}, schema)
        w = PreferenceWeights({"income": 1.0})
        cost = action_cost(Action("income", 2100.0), x, schema, w)
        assert cost == pytest.approx(100.0 / 9000.0)

    def test_zero_weight_zero_cost(self, tiny_schema, tiny_profile):
        w = weights_for(tiny_schema, job=1.0)  # income weight 0
        assert action_cost(Action("income", 300.0), tiny_profile, tiny_schema, w) == 0.0

    def test_categorical_with_multiplier(self, tiny_schema, tiny_profile):
        w = weights_for(tiny_schema, income=0.5, job=0.5)
        cs = ConstraintSet(multipliers={"job": 2.0})
        assert action_cost(Action("job", "c"), tiny_profile, tiny_schema, w, cs) == 1.0

    def test_intervention_cost_empty(self, tiny_schema, tiny_profile):
        w = PreferenceWeights.uniform(tiny_schema)
        assert intervention_cost(Intervention(()), tiny_profile, tiny_schema, w) == 0.0

    def test_intervention_cost_single_equals_action(self, tiny_schema, tiny_profile):
        w = PreferenceWeights.uniform(tiny_schema)
        a = Action("income", 300.0)
        assert intervention_cost(
            Intervention((a,)), tiny_profile, tiny_schema, w
        ) == action_cost(a, tiny_profile, tiny_schema, w)

    def test_intervention_cost_two_actions_hand_sum(self, tiny_schema, tiny_profile):
        w = weights_for(tiny_schema, income=0.25, job=0.75)
        cs = ConstraintSet(multipliers={"income": 2.0})
        total = intervention_cost(
            Intervention((Action("income", 300.0), Action("job", "a"))),
            tiny_profile, tiny_schema, w, cs,
        )
        # income: 0.25 * (200/300) * 2 = 1/3; job: 0.75 * 1 * 1
        assert total == pytest.approx(0.25 * (200.0 / 300.0) * 2.0 + 0.75)

    def test_cost_monotone_in_appended_action(self, tiny_schema, tiny_profile):
        w = PreferenceWeights.uniform(tiny_schema)
        base = Intervention((Action("income", 300.0),))
        extended = Intervention((Action("income", 300.0), Action("job", "a")))
        assert intervention_cost(
            extended, tiny_profile, tiny_schema, w
        ) > intervention_cost(base, tiny_profile, tiny_schema, w)


def flip_at_income(schema, threshold_value: float):
    """Linear ensemble approving once income strictly exceeds the threshold."""
    scale = 20.0
    enc_threshold = (threshold_value - 0.0) / 300.0
    return linear_ensemble(
        schema, {"income": scale}, bias=-scale * enc_threshold - 0.01,
        bias_delta=0.005,
    )


class TestBruteForce:
    def test_no_recourse(self, tiny_schema, tiny_profile):
        h = constant_ensemble(tiny_schema, 0.2, 0.2)
        with pytest.raises(NoRecourseError):
            brute_force_search(
                tiny_profile, h, tiny_schema,
                PreferenceWeights.uniform(tiny_schema), max_len=2,
            )

    def test_unique_flip_found(self, tiny_schema, tiny_profile):
        h = flip_at_income(tiny_schema, 250.0)  # only income=300 flips
        res = brute_force_search(
            tiny_profile, h, tiny_schema,
            PreferenceWeights.uniform(tiny_schema), max_len=1,
        )
        assert res.intervention == Intervention((Action("income", 300.0),))
        assert res.valid

    def test_cheapest_of_two_singletons(self):
        schema = FeatureSet(
            (
                FeatureSpec("a", CategoricalKind(("no", "yes")), True),
                FeatureSpec("b", CategoricalKind(("no", "yes")), True),
            )
        )
        x = UserProfile.validate({"a": "no", "b": "no"}, schema)
        # either switch flips the decision on its own
        h = linear_ensemble(
            schema,
            {},
            {"a": {"yes": 5.0}, "b": {"yes": 5.0}},
            bias=-2.0,
            bias_delta=0.1,
        )
        w = PreferenceWeights({"a": 0.2, "b": 0.5})
        res = brute_force_search(x, h, schema, w, max_len=2)
        assert res.intervention == Intervention((Action("a", "yes"),))
        assert res.cost == pytest.approx(0.2)

    def test_search_space_guard(self):
        specs = tuple(
            FeatureSpec(f"n{i}", NumericKind(0, 100, 1), True) for i in range(6)
        )
        schema = FeatureSet(specs)
        x = UserProfile.validate({f"n{i}": 0.0 for i in range(6)}, schema)
        h = constant_ensemble(schema, 0.2, 0.2)
        with pytest.raises(SearchSpaceTooLargeError):
            brute_force_search(
                x, h, schema, PreferenceWeights.uniform(schema), max_len=4
            )


class TestMcts:
    def test_finds_unique_single_action(self, tiny_schema, tiny_profile):
        h = flip_at_income(tiny_schema, 250.0)
        w = PreferenceWeights.uniform(tiny_schema)
        brute = brute_force_search(tiny_profile, h, tiny_schema, w, max_len=2)
        res = mcts_search(
            tiny_profile, h, tiny_schema, w,
            budget=SearchBudget(max_rollouts=2000, max_intervention_len=2, seed=3),
        )
        assert res.intervention == brute.intervention
        assert res.cost == pytest.approx(brute.cost)

    def test_constant_rejector_is_no_recourse(self, tiny_schema, tiny_profile):
        h = constant_ensemble(tiny_schema, 0.2, 0.2)
        with pytest.raises(NoRecourseError) as err:
            mcts_search(
                tiny_profile, h, tiny_schema,
                PreferenceWeights.uniform(tiny_schema),
                budget=SearchBudget(max_rollouts=200, seed=1),
            )
        assert err.value.rollouts_used > 0

    def test_empty_action_space(self, tiny_schema, tiny_profile):
        h = flip_at_income(tiny_schema, 250.0)
        cs = ConstraintSet(
            numeric_ranges={"income": (100.0, 100.0)},
            allowed_options={"job": ("b",)},
        )
        with pytest.raises(EmptyActionSpaceError):
            mcts_search(
                tiny_profile, h, tiny_schema,
                PreferenceWeights.uniform(tiny_schema), cs,
                budget=SearchBudget(max_rollouts=100, seed=1),
            )

    def test_deterministic_given_seed(self, tiny_schema, tiny_profile):
        h = flip_at_income(tiny_schema, 150.0)
        w = PreferenceWeights({"income": 0.7, "job": 0.3})
        budget = SearchBudget(max_rollouts=500, max_intervention_len=2, seed=11)
        a = mcts_search(tiny_profile, h, tiny_schema, w, budget=budget)
        b = mcts_search(tiny_profile, h, tiny_schema, w, budget=budget)
        assert a == b

    def test_requires_rejected_profile(self, tiny_schema, tiny_profile):
        h = constant_ensemble(tiny_schema, 0.9, 0.9)
        with pytest.raises(ValueError, match="rejected"):
            mcts_search(
                tiny_profile, h, tiny_schema,
                PreferenceWeights.uniform(tiny_schema),
            )


class TestRandomInstances:
    """MCTS against the exhaustive oracle on random small instances."""

    def test_oracle_dominance_and_closeness(self):
        from replan.simulation import _random_small_instance

        rng = np.random.default_rng(123)
        checked = 0
        while checked < 15:
            schema, profile, h, w = _random_small_instance(rng)
            ev = Evaluator(h, schema)
            try:
                brute = brute_force_search(
                    profile, h, schema, w, max_len=3, evaluator=ev
                )
            except NoRecourseError:
                continue
            checked += 1
            res = mcts_search(
                profile, h, schema, w,
                budget=SearchBudget(max_rollouts=20000, max_intervention_len=3,
                                    seed=checked),
                evaluator=ev,
            )
            assert brute.cost <= res.cost + 1e-12
            assert res.cost <= brute.cost * 1.05 + 1e-12

    def test_constraint_compliance(self):
        from replan.simulation import _random_small_instance

        rng = np.random.default_rng(77)
        checked = 0
        while checked < 10:
            schema, profile, h, w = _random_small_instance(rng)
            # random constraints: clamp each numeric to a subrange, categoricals
            # to a random non-empty subset containing the current value
            ranges, options = {}, {}
            for spec in schema.features:
                if not spec.actionable or rng.random() < 0.5:
                    continue
                if spec.is_numeric:
                    cur = float(profile[spec.name])
                    lo = min(cur, float(spec.kind.grid_value(
                        int(rng.integers(spec.kind.n_steps + 1)))))
                    hi = max(cur, float(spec.kind.grid_value(
                        int(rng.integers(spec.kind.n_steps + 1)))))
                    ranges[spec.name] = (lo, hi)
                else:
                    opts = [o for o in spec.kind.options
                            if o == profile[spec.name] or rng.random() < 0.6]
                    options[spec.name] = tuple(opts)
            cs = ConstraintSet(numeric_ranges=ranges, allowed_options=options)
            try:
                res = mcts_search(
                    profile, h, schema, w, cs,
                    budget=SearchBudget(max_rollouts=4000,
                                        max_intervention_len=3, seed=checked),
                )
            except (NoRecourseError, EmptyActionSpaceError):
                continue
            checked += 1
            for a in res.intervention.actions:
                if a.feature in ranges:
                    lo, hi = ranges[a.feature]
                    assert lo <= float(a.target) <= hi
                if a.feature in options:
                    assert a.target in options[a.feature]

    def test_scale_invariance_of_argmin(self):
        from replan.simulation import _random_small_instance

        rng = np.random.default_rng(55)
        checked = 0
        while checked < 10:
            schema, profile, h, w = _random_small_instance(rng)
            try:
                base = brute_force_search(profile, h, schema, w, max_len=2)
            except NoRecourseError:
                continue
            checked += 1
            scaled_w = PreferenceWeights(
                {n: 4.0 * v for n, v in w.weights.items()}
            )
            scaled = brute_force_search(profile, h, schema, scaled_w, max_len=2)
            assert scaled.intervention == base.intervention
            assert scaled.cost == pytest.approx(4.0 * base.cost, rel=1e-12)


class TestDiversePlans:
    def three_singletons(self):
        schema = FeatureSet(
            tuple(
                FeatureSpec(f"s{i}", CategoricalKind(("no", "yes")), True)
                for i in range(3)
            )
        )
        x = UserProfile.validate({f"s{i}": "no" for i in range(3)}, schema)
        h = linear_ensemble(
            schema, {},
            {f"s{i}": {"yes": 6.0} for i in range(3)},
            bias=-2.0, bias_delta=0.1,
        )
        return schema, x, h

    def test_m1_equals_plain_search(self, tiny_schema, tiny_profile):
        h = flip_at_income(tiny_schema, 150.0)
        w = PreferenceWeights.uniform(tiny_schema)
        budget = SearchBudget(max_rollouts=800, max_intervention_len=2, seed=5)
        single = mcts_search(tiny_profile, h, tiny_schema, w, budget=budget)
        plans = diverse_plans(tiny_profile, h, tiny_schema, w, m=1, budget=budget)
        assert plans == [single]

    def test_three_distinct_feature_sets(self):
        schema, x, h = self.three_singletons()
        w = PreferenceWeights.uniform(schema)
        plans = diverse_plans(
            x, h, schema, w, m=3,
            budget=SearchBudget(max_rollouts=1500, max_intervention_len=2, seed=2),
        )
        feature_sets = [p.intervention.features for p in plans]
        assert len(feature_sets) == 3
        assert len(set(feature_sets)) == 3

    def test_single_feasible_plan_short_list(self, tiny_schema, tiny_profile):
        # only income=300 flips; one feasible singleton, nothing diverse
        h = flip_at_income(tiny_schema, 250.0)
        cs = ConstraintSet(allowed_options={"job": ("b",)})
        plans = diverse_plans(
            tiny_profile, h, tiny_schema,
            PreferenceWeights.uniform(tiny_schema), cs, m=3,
            budget=SearchBudget(max_rollouts=800, max_intervention_len=1, seed=4),
        )
        assert len(plans) == 1

    def test_no_recourse_raises(self, tiny_schema, tiny_profile):
        h = constant_ensemble(tiny_schema, 0.1, 0.1)
        with pytest.raises(NoRecourseError):
            diverse_plans(
                tiny_profile, h, tiny_schema,
                PreferenceWeights.uniform(tiny_schema), m=2,
                budget=SearchBudget(max_rollouts=150, seed=9),
            )


class TestResultInvariants:
    def test_valid_results_flip_and_price_correctly(self, tiny_schema, tiny_profile):
        from replan.classifier import predict
        from replan.schema import apply_intervention

        h = flip_at_income(tiny_schema, 150.0)
        w = PreferenceWeights({"income": 0.6, "job": 0.4})
        cs = ConstraintSet(multipliers={"income": 0.5})
        res = mcts_search(
            tiny_profile, h, tiny_schema, w, cs,
            budget=SearchBudget(max_rollouts=600, max_intervention_len=2, seed=8),
        )
        assert res.valid
        after = apply_intervention(res.intervention, tiny_profile, tiny_schema)
        assert predict(h, after, tiny_schema) != predict(h, tiny_profile, tiny_schema)
        assert res.cost == pytest.approx(
            intervention_cost(res.intervention, tiny_profile, tiny_schema, w, cs),
            rel=1e-12,
        )
