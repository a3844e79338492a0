"""Search for cost-minimal interventions that flip the classifier decision.

The cost of an intervention is additive over its actions; each action costs
weight * effort * achievability multiplier, where effort is the range-
normalized distance for numerics and 1 for categorical switches. Because an
intervention touches each feature at most once, per-action costs depend only
on the starting profile, which lets both searchers precompute them.

Two searchers share one action space: a UCT Monte Carlo tree search (the
production path) and an exhaustive brute-force search (the test oracle).
The MCTS returns the cheapest flipping intervention observed anywhere during
the run, and stops early once it has provably enumerated the whole tree.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classifier import EnsembleClassifier
from .schema import (
    Action,
    FeatureSet,
    Intervention,
    UserProfile,
    apply_action,
    encode,
)


class NoRecourseError(RuntimeError):
    """No flipping intervention exists within the explored budget."""

    def __init__(self, message: str, rollouts_used: int = 0):
        super().__init__(message)
        self.rollouts_used = rollouts_used


class EmptyActionSpaceError(RuntimeError):
    pass


class SearchSpaceTooLargeError(RuntimeError):
    pass


class ConstraintError(ValueError):
    pass


def mix_seed(*parts) -> int:
    """Stable 64-bit seed derived from arbitrary labeled parts."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def intervention_identity(intervention: Intervention) -> frozenset:
    """Order-free identity of an intervention, used for shown-plan exclusion."""
    return frozenset((a.feature, a.target) for a in intervention.actions)


@dataclass(frozen=True)
class PreferenceWeights:
    """Non-negative cost weight per actionable feature; positive total mass."""

    weights: Mapping[str, float]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("weights must be non-empty")
        total = 0.0
        for name, w in self.weights.items():
            if not (w >= 0.0) or not math.isfinite(w):
                raise ValueError(f"weight for {name!r} must be finite and >= 0")
            total += w
        if total <= 0.0:
            raise ValueError("weights must have positive total mass")

    @staticmethod
    def uniform(schema: FeatureSet) -> "PreferenceWeights":
        names = schema.actionable_names
        return PreferenceWeights({n: 1.0 / len(names) for n in names})

    def validate_against(self, schema: FeatureSet) -> None:
        if set(self.weights) != set(schema.actionable_names):
            raise ValueError("weights must cover exactly the actionable features")

    def normalized(self) -> "PreferenceWeights":
        total = sum(self.weights.values())
        return PreferenceWeights({n: w / total for n, w in self.weights.items()})

    def scaled(self, factors: Mapping[str, float]) -> "PreferenceWeights":
        return PreferenceWeights(
            {n: w * factors.get(n, 1.0) for n, w in self.weights.items()}
        )

    def vector(self, schema: FeatureSet) -> np.ndarray:
        return np.asarray(
            [self.weights[n] for n in schema.actionable_names], dtype=np.float64
        )

    def __getitem__(self, name: str) -> float:
        return self.weights[name]


@dataclass(frozen=True)
class ConstraintSet:
    """User-imposed hard ranges/option subsets plus achievability multipliers."""

    numeric_ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    allowed_options: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    multipliers: Mapping[str, float] = field(default_factory=dict)

    def validate_against(self, schema: FeatureSet) -> None:
        for name, rng in self.numeric_ranges.items():
            spec = schema.require(name)
            lo, hi = rng
            if not spec.is_numeric:
                raise ConstraintError(f"range constraint on categorical {name!r}")
            if lo > hi or lo < spec.kind.min - 1e-9 or hi > spec.kind.max + 1e-9:
                raise ConstraintError(
                    f"range [{lo}, {hi}] outside the domain of {name!r}"
                )
        for name, opts in self.allowed_options.items():
            spec = schema.require(name)
            if spec.is_numeric:
                raise ConstraintError(f"option constraint on numeric {name!r}")
            if not opts:
                raise ConstraintError(f"empty option subset for {name!r}")
            unknown = set(opts) - set(spec.kind.options)
            if unknown:
                raise ConstraintError(f"unknown options {sorted(unknown)} for {name!r}")
        for name, m in self.multipliers.items():
            schema.require(name)
            if not (m > 0.0) or not math.isfinite(m):
                raise ConstraintError(f"multiplier for {name!r} must be > 0")

    def multiplier(self, name: str) -> float:
        return self.multipliers.get(name, 1.0)

    def merged(
        self,
        numeric_ranges: Mapping[str, tuple[float, float]] | None = None,
        allowed_options: Mapping[str, tuple[str, ...]] | None = None,
        multipliers: Mapping[str, float] | None = None,
    ) -> "ConstraintSet":
        """Per-feature overwrite merge; later submissions win."""
        return ConstraintSet(
            numeric_ranges={**self.numeric_ranges, **(numeric_ranges or {})},
            allowed_options={**self.allowed_options, **(allowed_options or {})},
            multipliers={**self.multipliers, **(multipliers or {})},
        )


EMPTY_CONSTRAINTS = ConstraintSet()


@dataclass(frozen=True)
class SearchBudget:
    max_rollouts: int = 20000
    max_intervention_len: int = 4
    uct_constant: float = math.sqrt(2.0)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_rollouts <= 0 or self.max_intervention_len <= 0:
            raise ValueError("budget sizes must be positive")
        if self.uct_constant <= 0:
            raise ValueError("uct_constant must be positive")

    def with_seed(self, seed: int) -> "SearchBudget":
        return SearchBudget(
            self.max_rollouts, self.max_intervention_len, self.uct_constant, seed
        )


@dataclass(frozen=True)
class RecourseResult:
    intervention: Intervention
    cost: float
    valid: bool
    rollouts_used: int


class Evaluator:
    """Caches ensemble predictions for one (classifier, schema) pair.

    Search state spaces are tiny compared to rollout counts, so memoizing
    predictions by profile value tuple dominates everything else.
    """

    def __init__(self, classifier: EnsembleClassifier, schema: FeatureSet):
        if classifier.input_dim != schema.encoded_length:
            raise ValueError(
                f"classifier input dim {classifier.input_dim} does not match "
                f"encoded length {schema.encoded_length}"
            )
        self.classifier = classifier
        self.schema = schema
        self._pred_cache: dict[tuple, int] = {}

    def predict_values(self, key: tuple) -> int:
        hit = self._pred_cache.get(key)
        if hit is None:
            profile = UserProfile(dict(zip((f.name for f in self.schema.features), key)))
            hit = self.classifier.predict_encoded(encode(profile, self.schema))
            self._pred_cache[key] = hit
        return hit

    def predict_profile(self, profile: UserProfile) -> int:
        return self.predict_values(profile.value_tuple(self.schema))


# -- action space and costs --------------------------------------------------


def enumerate_actions(
    x: UserProfile,
    schema: FeatureSet,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
    exclude_features: frozenset[str] = frozenset(),
) -> list[Action]:
    """All constraint-respecting single-feature modifications, in canonical
    order: schema order, then ascending grid value / option order."""
    cs.validate_against(schema)
    actions: list[Action] = []
    for spec in schema.features:
        if not spec.actionable or spec.name in exclude_features:
            continue
        current = x[spec.name]
        if spec.is_numeric:
            lo, hi = cs.numeric_ranges.get(spec.name, (spec.kind.min, spec.kind.max))
            for v in spec.kind.grid():
                if v == current or v < lo - 1e-12 or v > hi + 1e-12:
                    continue
                actions.append(Action(spec.name, v))
        else:
            allowed = cs.allowed_options.get(spec.name, spec.kind.options)
            for opt in spec.kind.options:
                if opt == current or opt not in allowed:
                    continue
                actions.append(Action(spec.name, opt))
    return actions


def action_effort(a: Action, x: UserProfile, schema: FeatureSet) -> float:
    spec = schema.require(a.feature)
    if spec.is_numeric:
        return abs(float(a.target) - float(x[a.feature])) / spec.kind.span
    return 1.0


def action_cost(
    a: Action,
    x: UserProfile,
    schema: FeatureSet,
    w: PreferenceWeights,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
) -> float:
    if a.feature not in w.weights:
        raise ValueError(f"no weight for feature {a.feature!r}")
    return w[a.feature] * action_effort(a, x, schema) * cs.multiplier(a.feature)


def intervention_cost(
    intervention: Intervention,
    x: UserProfile,
    schema: FeatureSet,
    w: PreferenceWeights,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
) -> float:
    """Sum of action costs, each priced against the profile before it."""
    total = 0.0
    current = x
    for a in intervention.actions:
        total += action_cost(a, current, schema, w, cs)
        current = apply_action(current, a, schema)
    return total


def effort_vector(
    intervention: Intervention,
    x: UserProfile,
    schema: FeatureSet,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
) -> np.ndarray:
    """Per-actionable-feature effort*multiplier terms; zero when untouched.

    Dotting a weight vector with this reproduces intervention_cost exactly
    up to summation order, which is what the particle-matrix paths use.
    """
    idx = {n: i for i, n in enumerate(schema.actionable_names)}
    out = np.zeros(len(idx), dtype=np.float64)
    for a in intervention.actions:
        out[idx[a.feature]] = action_effort(a, x, schema) * cs.multiplier(a.feature)
    return out


# -- shared search scaffolding ------------------------------------------------


class _ActionTable:
    """Flattened, canonical action space with static per-action costs."""

    def __init__(
        self,
        x: UserProfile,
        schema: FeatureSet,
        w: PreferenceWeights,
        cs: ConstraintSet,
        exclude_features: frozenset[str],
    ):
        w.validate_against(schema)
        self.schema = schema
        self.x = x
        self.base_key = x.value_tuple(schema)
        self.actions = enumerate_actions(x, schema, cs, exclude_features)
        self.costs = np.asarray(
            [action_cost(a, x, schema, w, cs) for a in self.actions], dtype=np.float64
        )
        self.feature_index = [schema.index_of[a.feature] for a in self.actions]
        # actions grouped per feature, preserving canonical order
        self.by_feature: dict[int, list[int]] = {}
        for ai, fi in enumerate(self.feature_index):
            self.by_feature.setdefault(fi, []).append(ai)

    def __len__(self) -> int:
        return len(self.actions)

    def state_key(self, action_ids: Iterable[int]) -> tuple:
        key = list(self.base_key)
        for ai in action_ids:
            key[self.feature_index[ai]] = self.actions[ai].target
        return tuple(key)

    def intervention(self, action_ids: Sequence[int]) -> Intervention:
        return Intervention(tuple(self.actions[ai] for ai in action_ids))

    def cost_of(self, action_ids: Sequence[int]) -> float:
        return float(sum(self.costs[ai] for ai in action_ids))

    def identity(self, action_ids: Iterable[int]) -> frozenset:
        a = self.actions
        return frozenset((a[ai].feature, a[ai].target) for ai in action_ids)


def _result(
    table: _ActionTable, action_ids: Sequence[int], rollouts_used: int
) -> RecourseResult:
    ordered = tuple(sorted(action_ids))
    return RecourseResult(
        intervention=table.intervention(ordered),
        cost=table.cost_of(ordered),
        valid=True,
        rollouts_used=rollouts_used,
    )


class _Best:
    """Tracks the cheapest flipping intervention; ties prefer shorter then
    lexicographically smaller canonical action tuples. Banned interventions
    (already shown to the user) are identified by their feature/target pairs
    so the filter survives changes of the action table."""

    def __init__(self, banned: frozenset[frozenset]):
        self.entry: tuple[float, int, tuple] | None = None
        self.observed: dict[tuple, float] = {}
        self.banned = banned

    def offer(self, table: _ActionTable, action_ids: Iterable[int]) -> None:
        canon = tuple(sorted(action_ids))
        if self.banned and table.identity(canon) in self.banned:
            return
        cost = table.cost_of(canon)
        self.observed[canon] = cost
        candidate = (cost, len(canon), canon)
        if self.entry is None or candidate < self.entry:
            self.entry = candidate

    def ranked(self) -> list[tuple[tuple, float]]:
        return sorted(self.observed.items(), key=lambda kv: (kv[1], len(kv[0]), kv[0]))


# -- Monte Carlo tree search ---------------------------------------------------


class _Node:
    __slots__ = (
        "action_ids", "touched", "flipped", "cost", "terminal",
        "untried", "children", "visits", "total", "done",
    )

    def __init__(self, action_ids: tuple[int, ...], touched: frozenset[int],
                 flipped: bool, cost: float, terminal: bool,
                 untried: list[int]):
        self.action_ids = action_ids
        self.touched = touched
        self.flipped = flipped
        self.cost = cost
        self.terminal = terminal
        self.untried = untried
        self.children: list[_Node] = []
        self.visits = 0
        self.total = 0.0
        self.done = terminal

    def reward(self) -> float:
        return 1.0 / (1.0 + self.cost) if self.flipped else 0.0


def _mcts(
    x: UserProfile,
    evaluator: Evaluator,
    w: PreferenceWeights,
    cs: ConstraintSet,
    budget: SearchBudget,
    exclude_features: frozenset[str] = frozenset(),
    banned: frozenset[frozenset] = frozenset(),
) -> tuple[_Best, int]:
    table = _ActionTable(x, evaluator.schema, w, cs, exclude_features)
    if len(table) == 0:
        raise EmptyActionSpaceError("no applicable actions under the constraints")
    if evaluator.predict_values(table.base_key) != 0:
        raise ValueError("search requires a currently rejected profile")

    rng = np.random.default_rng(np.random.SeedSequence(budget.seed & (2**63 - 1)))
    best = _Best(banned)
    max_len = budget.max_intervention_len
    flip_cache: dict[frozenset, bool] = {}

    def flips(ids: frozenset) -> bool:
        hit = flip_cache.get(ids)
        if hit is None:
            hit = evaluator.predict_values(table.state_key(ids)) == 1
            flip_cache[ids] = hit
            if hit:
                best.offer(table, ids)
        return hit

    def available(touched: frozenset[int]) -> list[int]:
        return [
            ai
            for fi, ids in table.by_feature.items()
            if fi not in touched
            for ai in ids
        ]

    def make_node(parent: _Node, action_id: int) -> _Node:
        ids = parent.action_ids + (action_id,)
        touched = parent.touched | {table.feature_index[action_id]}
        id_set = frozenset(ids)
        flipped = flips(id_set)
        cost = parent.cost + table.costs[action_id]
        if flipped or len(ids) >= max_len:
            untried: list[int] = []
        else:
            untried = available(touched)
        terminal = flipped or len(ids) >= max_len or not untried
        return _Node(ids, touched, flipped, cost, terminal, untried)

    root = _Node((), frozenset(), False, 0.0, False, available(frozenset()))
    c = budget.uct_constant
    rollouts = 0

    for rollouts in range(1, budget.max_rollouts + 1):
        if root.done:
            rollouts -= 1
            break
        node, path = root, [root]
        # selection: descend fully expanded nodes via UCT over live children
        while not node.terminal and not node.untried:
            live = [ch for ch in node.children if not ch.done]
            log_n = math.log(node.visits)
            node = max(
                live,
                key=lambda ch: ch.total / ch.visits + c * math.sqrt(log_n / ch.visits),
            )
            path.append(node)

        if node.terminal:
            reward = node.reward()
        else:
            # expansion: materialize one untried child at random
            pick = int(rng.integers(len(node.untried)))
            child = make_node(node, node.untried.pop(pick))
            node.children.append(child)
            path.append(child)
            node = child
            # rollout: random continuation until flip, cap, or dead end
            ids = set(node.action_ids)
            touched = set(node.touched)
            cost = node.cost
            flipped = node.flipped
            while not flipped and len(ids) < max_len:
                options = available(frozenset(touched))
                if not options:
                    break
                ai = options[int(rng.integers(len(options)))]
                ids.add(ai)
                touched.add(table.feature_index[ai])
                cost += table.costs[ai]
                flipped = flips(frozenset(ids))
            reward = 1.0 / (1.0 + cost) if flipped else 0.0

        for n in path:
            n.visits += 1
            n.total += reward
        # propagate exhaustion flags from the leaf upward
        for n in reversed(path):
            if not n.done and not n.untried and all(ch.done for ch in n.children):
                n.done = True

    return best, rollouts


def mcts_search(
    x: UserProfile,
    h: EnsembleClassifier,
    schema: FeatureSet,
    w: PreferenceWeights,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
    budget: SearchBudget = SearchBudget(),
    evaluator: Evaluator | None = None,
    exclude_features: frozenset[str] = frozenset(),
    banned: frozenset[frozenset] = frozenset(),
) -> RecourseResult:
    """Cheapest flipping intervention observed by a seeded UCT search.

    Node children are the applicable actions on untouched features; rollout
    terminals pay 1/(1+cost) when they flip the classifier and 0 otherwise.
    """
    ev = evaluator or Evaluator(h, schema)
    best, rollouts = _mcts(x, ev, w, cs, budget, exclude_features, banned)
    if best.entry is None:
        raise NoRecourseError(
            f"no flipping intervention found in {rollouts} rollouts",
            rollouts_used=rollouts,
        )
    table = _ActionTable(x, ev.schema, w, cs, exclude_features)
    return _result(table, best.entry[2], rollouts)


def search_candidates(
    x: UserProfile,
    evaluator: Evaluator,
    w: PreferenceWeights,
    cs: ConstraintSet,
    budget: SearchBudget,
    top_n: int = 8,
    exclude_features: frozenset[str] = frozenset(),
    banned: frozenset[frozenset] = frozenset(),
) -> list[RecourseResult]:
    """Top flipping interventions observed by one MCTS run, cheapest first."""
    best, rollouts = _mcts(x, evaluator, w, cs, budget, exclude_features, banned)
    table = _ActionTable(x, evaluator.schema, w, cs, exclude_features)
    return [
        _result(table, canon, rollouts) for canon, _ in best.ranked()[:top_n]
    ]


# -- brute force oracle --------------------------------------------------------


def _flip_mask(
    evaluator: Evaluator, table: _ActionTable, combos: list[tuple[int, ...]]
) -> np.ndarray:
    """Vectorized classifier flips for a batch of action-id combinations."""
    schema = evaluator.schema
    base_profile = UserProfile(
        dict(zip((f.name for f in schema.features), table.base_key))
    )
    base = encode(base_profile, schema)
    # per-action encoding patch: (offset span, replacement block)
    patches = []
    for a in table.actions:
        spec = schema.require(a.feature)
        off = schema.encoded_offsets[a.feature]
        if spec.is_numeric:
            block = np.asarray([(float(a.target) - spec.kind.min) / spec.kind.span])
        else:
            block = np.zeros(len(spec.kind.options))
            block[spec.kind.options.index(a.target)] = 1.0
        patches.append((off, block))

    flips = np.zeros(len(combos), dtype=bool)
    chunk = 8192
    for start in range(0, len(combos), chunk):
        part = combos[start : start + chunk]
        rows = np.tile(base, (len(part), 1))
        for r, combo in enumerate(part):
            for ai in combo:
                off, block = patches[ai]
                rows[r, off : off + len(block)] = block
        flips[start : start + len(part)] = (
            evaluator.classifier.predict_batch(rows) == 1
        )
    return flips


def brute_force_search(
    x: UserProfile,
    h: EnsembleClassifier,
    schema: FeatureSet,
    w: PreferenceWeights,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
    max_len: int = 3,
    evaluator: Evaluator | None = None,
    collect_costs: bool = False,
    exclude_features: frozenset[str] = frozenset(),
) -> RecourseResult | tuple[RecourseResult, list[float]]:
    """Exact optimum over all interventions up to max_len distinct features.

    Ties break toward shorter interventions, then lexicographic canonical
    order, which enumeration order delivers for free.
    """
    from itertools import combinations

    ev = evaluator or Evaluator(h, schema)
    table = _ActionTable(x, schema, w, cs, exclude_features)
    if len(table) == 0:
        raise EmptyActionSpaceError("no applicable actions under the constraints")
    if ev.predict_values(table.base_key) != 0:
        raise ValueError("search requires a currently rejected profile")
    if len(table) ** max_len > 10**7:
        raise SearchSpaceTooLargeError(
            f"|A|^max_len = {len(table)}^{max_len} exceeds the 1e7 guard"
        )

    best: tuple[float, int, tuple] | None = None
    flip_costs: list[float] = []
    for length in range(1, max_len + 1):
        combos = [
            combo
            for combo in combinations(range(len(table)), length)
            if len({table.feature_index[ai] for ai in combo}) == length
        ]
        if not combos:
            continue
        mask = _flip_mask(ev, table, combos)
        for combo, flipped in zip(combos, mask):
            if not flipped:
                continue
            cost = table.cost_of(combo)
            if collect_costs:
                flip_costs.append(cost)
            candidate = (cost, length, combo)
            if best is None or candidate < best:
                best = candidate
    if best is None:
        raise NoRecourseError("no flipping intervention up to the length cap")
    result = _result(table, best[2], rollouts_used=0)
    return (result, flip_costs) if collect_costs else result


# -- diverse plan generation ----------------------------------------------------


def diverse_plans(
    x: UserProfile,
    h: EnsembleClassifier,
    schema: FeatureSet,
    w_uniform: PreferenceWeights,
    cs: ConstraintSet = EMPTY_CONSTRAINTS,
    m: int = 2,
    budget: SearchBudget = SearchBudget(),
    evaluator: Evaluator | None = None,
    banned: frozenset[frozenset] = frozenset(),
) -> list[RecourseResult]:
    """Up to m valid plans with pairwise-distinct touched-feature sets where
    the instance admits them.

    The first plan is the plain search result; later slots rotate through
    harder-to-softer diversification: exclude every feature already used,
    exclude only the previous plan's features, then rerun with a heavy
    weight penalty on used features.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    ev = evaluator or Evaluator(h, schema)
    first = mcts_search(x, h, schema, w_uniform, cs, budget, ev, banned=banned)
    plans = [first]
    seen_sets = {first.intervention.features}

    for slot in range(1, m):
        found: RecourseResult | None = None
        union_used = frozenset().union(*seen_sets)
        last_used = plans[-1].intervention.features
        attempts: list[tuple[frozenset[str], PreferenceWeights, int]] = [
            (union_used, w_uniform, mix_seed(budget.seed, "excl-union", slot)),
            (frozenset(last_used), w_uniform, mix_seed(budget.seed, "excl-last", slot)),
        ]
        penalized = w_uniform.scaled({n: 25.0 for n in union_used})
        for j in range(3):
            attempts.append(
                (frozenset(), penalized, mix_seed(budget.seed, "penalty", slot, j))
            )
        for exclude, weights, seed in attempts:
            try:
                res = mcts_search(
                    x, h, schema, weights, cs, budget.with_seed(seed), ev,
                    exclude_features=exclude, banned=banned,
                )
            except (NoRecourseError, EmptyActionSpaceError):
                continue
            if res.intervention.features in seen_sets:
                continue
            # penalty-path costs are under the penalized weights; re-price
            if weights is not w_uniform:
                res = RecourseResult(
                    intervention=res.intervention,
                    cost=intervention_cost(res.intervention, x, schema, w_uniform, cs),
                    valid=True,
                    rollouts_used=res.rollouts_used,
                )
            found = res
            break
        if found is None:
            break
        plans.append(found)
        seen_sets.add(found.intervention.features)
    return plans
