"""Online preference learning over cost weights.

Beliefs are a particle posterior: a fixed set of candidate weight vectors on
the simplex with a probability each. Choices among intervention sets update
the probabilities by exact Bayes with a softmax (logit) choice likelihood;
ratings are folded into the same machinery by mapping them to choices.
Posteriors are immutable; every update returns a new one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .engine import (
    ConstraintSet,
    EMPTY_CONSTRAINTS,
    PreferenceWeights,
    effort_vector,
    intervention_cost,
)
from .schema import FeatureSet, Intervention, UserProfile

RATING_LABELS = {1: "Terrible", 2: "Bad", 3: "Neutral", 4: "Good", 5: "Great"}
ACHIEVABILITY_LABELS = {
    1: "Very difficult",
    2: "Difficult",
    3: "Neutral",
    4: "Easy",
    5: "Very easy",
}

_ACHIEVABILITY_MULTIPLIER = {1: 4.0, 2: 2.0, 3: 1.0, 4: 0.5, 5: 0.25}


class DegenerateUpdateError(RuntimeError):
    """Every particle assigned (numerically) zero likelihood to the choice."""


@dataclass(frozen=True)
class ChoiceModel:
    """Softmax rationality temperature; beta=0 is random, large beta is greedy."""

    beta: float = 10.0

    def __post_init__(self) -> None:
        if not (self.beta >= 0.0) or not np.isfinite(self.beta):
            raise ValueError("beta must be finite and >= 0")


@dataclass(frozen=True)
class ChoiceQuery:
    """A set of alternative interventions shown for one profile.

    Elicitation queries use k >= 2; k = 1 is allowed for the internal
    single-proposal path where the query degenerates to a presentation.
    """

    alternatives: tuple[Intervention, ...]
    context: UserProfile
    constraints: ConstraintSet
    schema: FeatureSet

    def __post_init__(self) -> None:
        if len(self.alternatives) < 1:
            raise ValueError("a query needs at least one alternative")
        if len(set(self.alternatives)) != len(self.alternatives):
            raise ValueError("query alternatives must be pairwise distinct")

    @property
    def k(self) -> int:
        return len(self.alternatives)


@dataclass(frozen=True)
class RatingSignal:
    intervention: Intervention
    likert: int

    def __post_init__(self) -> None:
        if self.likert not in RATING_LABELS:
            raise ValueError(f"likert must be 1..5, got {self.likert}")


@dataclass(frozen=True, eq=False)
class WeightPosterior:
    particles: tuple[PreferenceWeights, ...]
    probs: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.particles) < 1:
            raise ValueError("posterior needs at least one particle")
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (len(self.particles),):
            raise ValueError("probability vector length mismatch")
        if (p < 0).any():
            raise ValueError("negative particle probability")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")
        names = set(self.feature_names)
        for w in self.particles:
            if set(w.weights) != names:
                raise ValueError("particles disagree on the feature set")
            total = sum(w.weights.values())
            if abs(total - 1.0) > 1e-6:
                raise ValueError(f"particle not on the simplex (sum {total})")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return len(self.particles)

    def weight_matrix(self) -> np.ndarray:
        return np.asarray(
            [[w.weights[n] for n in self.feature_names] for w in self.particles],
            dtype=np.float64,
        )

    def with_probs(self, probs: np.ndarray) -> "WeightPosterior":
        return WeightPosterior(self.particles, probs, self.feature_names)

    def equal_to(self, other: "WeightPosterior") -> bool:
        return (
            self.feature_names == other.feature_names
            and self.particles == other.particles
            and np.array_equal(self.probs, other.probs)
        )


def init_posterior(schema: FeatureSet, n: int, seed: int) -> WeightPosterior:
    """n particles from the flat (concentration-1) distribution on the simplex
    over actionable features, each with prior probability 1/n."""
    if n < 1:
        raise ValueError("particle count must be >= 1")
    names = schema.actionable_names
    rng = np.random.default_rng(seed & (2**64 - 1))
    draws = rng.dirichlet(np.ones(len(names)), size=n)
    particles = tuple(
        PreferenceWeights(dict(zip(names, map(float, row)))) for row in draws
    )
    probs = np.full(n, 1.0 / n)
    # nudge the last entry until the float sum is exactly 1.0
    for _ in range(6):
        delta = 1.0 - float(probs.sum())
        if delta == 0.0:
            break
        probs[-1] += delta
    return WeightPosterior(particles, probs, names)


def _query_costs(q: ChoiceQuery, w: PreferenceWeights) -> np.ndarray:
    return np.asarray(
        [
            intervention_cost(alt, q.context, q.schema, w, q.constraints)
            for alt in q.alternatives
        ],
        dtype=np.float64,
    )


def choice_likelihood(
    q: ChoiceQuery, chosen: int, w: PreferenceWeights, cm: ChoiceModel
) -> float:
    """P(user picks alternative `chosen`) under softmax over negated costs."""
    if not (0 <= chosen < q.k):
        raise ValueError(f"chosen index {chosen} out of range")
    z = -cm.beta * _query_costs(q, w)
    z -= z.max()
    expz = np.exp(z)
    return float(expz[chosen] / expz.sum())


def update_posterior(
    p: WeightPosterior, q: ChoiceQuery, chosen: int, cm: ChoiceModel
) -> WeightPosterior:
    """Exact Bayes: reweight each particle by its choice likelihood.

    A constant likelihood across particles short-circuits to the identity so
    uninformative observations cannot perturb the posterior numerically.
    """
    if not (0 <= chosen < q.k):
        raise ValueError(f"chosen index {chosen} out of range")
    # one cost matrix for all particles; per row this is the same softmax
    # arithmetic as choice_likelihood
    u = _utility_matrix(p, q.alternatives, q.context, q.constraints, q.schema)
    z = cm.beta * u  # = -beta * cost
    z -= z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    liks = expz[:, chosen] / expz.sum(axis=1)
    if np.all(liks == liks[0]):
        return p.with_probs(p.probs.copy())
    post = p.probs * liks
    total = float(post.sum())
    if not np.isfinite(total) or total < 1e-300:
        raise DegenerateUpdateError("all particle likelihoods underflowed")
    return p.with_probs(post / total)


def _utility_matrix(
    p: WeightPosterior,
    candidates: Sequence[Intervention],
    context: UserProfile,
    cs: ConstraintSet,
    schema: FeatureSet,
) -> np.ndarray:
    """U[i, j] = -cost of candidate j under particle i."""
    efforts = np.stack(
        [effort_vector(c, context, schema, cs) for c in candidates], axis=1
    )
    order = [schema.actionable_names.index(n) for n in p.feature_names]
    return -(p.weight_matrix() @ efforts[order, :])


def select_choice_set(
    p: WeightPosterior,
    candidates: Sequence[Intervention],
    k: int,
    context: UserProfile,
    cs: ConstraintSet,
    schema: FeatureSet,
) -> ChoiceQuery:
    """Greedy maximization of the expected utility of selection.

    Starting empty, repeatedly add the candidate that most raises
    E_p[max over the set of -cost]; ties resolve to the earliest candidate.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(candidates) < k:
        raise ValueError(f"need at least k={k} candidates, got {len(candidates)}")
    if len(set(candidates)) != len(candidates):
        raise ValueError("candidates must be distinct")
    u = _utility_matrix(p, candidates, context, cs, schema)
    chosen: list[int] = []
    best = np.full(p.n, -np.inf)
    for _ in range(k):
        values = np.full(len(candidates), -np.inf)
        for j in range(len(candidates)):
            if j in chosen:
                continue
            values[j] = float(p.probs @ np.maximum(best, u[:, j]))
        pick = int(np.argmax(values))
        chosen.append(pick)
        best = np.maximum(best, u[:, pick])
    return ChoiceQuery(
        alternatives=tuple(candidates[j] for j in chosen),
        context=context,
        constraints=cs,
        schema=schema,
    )


def eus_value(
    p: WeightPosterior,
    candidates: Sequence[Intervention],
    subset: Sequence[int],
    context: UserProfile,
    cs: ConstraintSet,
    schema: FeatureSet,
) -> float:
    """Expected utility of selecting from `subset`, shifted so the worst
    single candidate scores 0. The shift is constant over subsets, so argmax
    sets are unchanged while values stay non-negative (as the greedy
    approximation bound requires)."""
    if not subset:
        return 0.0
    u = _utility_matrix(p, candidates, context, cs, schema)
    shift = float(u.min())
    return float(p.probs @ (u[:, list(subset)].max(axis=1) - shift))


def rating_to_update(
    p: WeightPosterior,
    r: RatingSignal,
    pool: Sequence[Intervention],
    context: UserProfile,
    cs: ConstraintSet,
    cm: ChoiceModel,
    schema: FeatureSet,
) -> WeightPosterior:
    """Fold a Likert rating into the posterior.

    4-5 count as choosing the rated intervention out of the pool; 1-2 count
    as a pairwise choice of the pool's strongest rival over it; 3 is neutral
    and leaves the posterior untouched.
    """
    candidates = list(pool)
    if r.intervention not in candidates:
        raise ValueError("rated intervention is not in the pool")
    if r.likert == 3:
        return p.with_probs(p.probs.copy())
    idx = candidates.index(r.intervention)
    if r.likert >= 4:
        q = ChoiceQuery(tuple(candidates), context, cs, schema)
        return update_posterior(p, q, idx, cm)
    # low rating: the posterior-expected cheapest other pool member wins
    rivals = [j for j in range(len(candidates)) if j != idx]
    if not rivals:
        return p.with_probs(p.probs.copy())
    u = _utility_matrix(p, candidates, context, cs, schema)
    expected = p.probs @ u
    rival = max(rivals, key=lambda j: (expected[j], -j))
    q = ChoiceQuery((candidates[idx], candidates[rival]), context, cs, schema)
    return update_posterior(p, q, 1, cm)


def achievability_to_multiplier(likert: int) -> float:
    """Fixed difficulty-to-cost-multiplier table, geometric around neutral."""
    if likert not in _ACHIEVABILITY_MULTIPLIER:
        raise ValueError(f"achievability must be 1..5, got {likert}")
    return _ACHIEVABILITY_MULTIPLIER[likert]


def point_estimate(p: WeightPosterior) -> PreferenceWeights:
    """Probability-weighted particle mean, renormalized onto the simplex."""
    mean = p.probs @ p.weight_matrix()
    total = float(mean.sum())
    return PreferenceWeights(
        {n: float(v / total) for n, v in zip(p.feature_names, mean)}
    )
