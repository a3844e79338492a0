"""Synthetic data, simulated users with hidden preferences, and benchmarks.

The benchmark drives full sessions against simulated users whose true weight
vector is hidden from the system, recording per-round regret against the
brute-force optimum plus the alignment of the learned point estimate. It is
the desk-scale stand-in for a human study: guided sessions should close the
regret gap over rounds while exploratory (non-learning) sessions stay flat.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classifier import EnsembleClassifier, MlpModel
from .elicitation import ChoiceModel, ChoiceQuery, point_estimate, select_choice_set
from .engine import (
    EMPTY_CONSTRAINTS,
    ConstraintSet,
    EmptyActionSpaceError,
    Evaluator,
    NoRecourseError,
    PreferenceWeights,
    RecourseResult,
    SearchBudget,
    brute_force_search,
    intervention_cost,
    mcts_search,
    mix_seed,
)
from .schema import (
    CategoricalKind,
    Dataset,
    FeatureSet,
    FeatureSpec,
    Intervention,
    NumericKind,
    UserProfile,
    encode_batch,
)
from .session import (
    Mode,
    Phase,
    SessionConfig,
    SessionContext,
    Submode,
    accept,
    propose,
    regenerate,
    start_session,
    submit_rating,
)


@dataclass(frozen=True)
class LinearLabelRule:
    """Linear score over encoded features; labels are score > threshold."""

    weights: tuple[float, ...] | None = None
    threshold: float | None = None  # None means: median of scores


@dataclass(frozen=True)
class SyntheticDataSpec:
    schema: FeatureSet
    n_rows: int
    label_rule: LinearLabelRule = LinearLabelRule()
    label_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.label_noise < 0.5):
            raise ValueError("label_noise must lie in [0, 0.5)")


def gen_dataset(spec: SyntheticDataSpec) -> Dataset:
    """Rows uniform per feature domain; labels by a noisy linear rule."""
    if spec.n_rows <= 0:
        raise ValueError("n_rows must be positive")
    rng = np.random.default_rng(spec.seed & (2**64 - 1))
    profiles = []
    for _ in range(spec.n_rows):
        values: dict = {}
        for f in spec.schema.features:
            if f.is_numeric:
                values[f.name] = f.kind.grid_value(
                    int(rng.integers(f.kind.n_steps + 1))
                )
            else:
                values[f.name] = f.kind.options[int(rng.integers(len(f.kind.options)))]
        profiles.append(UserProfile(values))
    x = encode_batch(profiles, spec.schema)

    if spec.label_rule.weights is not None:
        w = np.asarray(spec.label_rule.weights, dtype=np.float64)
        if w.shape != (spec.schema.encoded_length,):
            raise ValueError("label rule weight length must match the encoding")
    else:
        w = rng.normal(size=spec.schema.encoded_length)
    scores = x @ w

    threshold = spec.label_rule.threshold
    if threshold is None:
        threshold = float(np.median(scores))
    for attempt in range(11):
        labels = (scores > threshold).astype(int)
        if spec.label_noise > 0:
            flips = rng.random(spec.n_rows) < spec.label_noise
            labels = np.where(flips, 1 - labels, labels)
        if 0 < labels.sum() < spec.n_rows:
            break
        if attempt == 10:
            raise ValueError("degenerate single-class dataset after 10 retries")
        threshold = float(np.quantile(scores, rng.uniform(0.2, 0.8)))
    rows = tuple((p, int(lbl)) for p, lbl in zip(profiles, labels))
    return Dataset(schema=spec.schema, rows=rows)


@dataclass
class SimulatedUser:
    """Chooses and rates plans under hidden true weights.

    Ratings bucket the plan's true cost by four ascending cutpoints into
    Likert 5..1; a cost exactly on a cutpoint falls in the lower bucket.
    """

    true_weights: PreferenceWeights
    choice_model: ChoiceModel
    rating_thresholds: tuple[float, float, float, float]
    rng: np.random.Generator

    def __post_init__(self) -> None:
        t = self.rating_thresholds
        if len(t) != 4 or any(t[i] >= t[i + 1] for i in range(3)):
            raise ValueError("rating thresholds must be 4 strictly ascending values")
        total = sum(self.true_weights.weights.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError("true weights must lie on the simplex")


def make_simulated_user(
    schema: FeatureSet,
    seed: int,
    beta: float,
    rating_thresholds: tuple[float, float, float, float],
) -> SimulatedUser:
    rng = np.random.default_rng(mix_seed(seed, "sim-user-wstar"))
    names = schema.actionable_names
    draw = rng.dirichlet(np.ones(len(names)))
    return SimulatedUser(
        true_weights=PreferenceWeights(dict(zip(names, map(float, draw)))),
        choice_model=ChoiceModel(beta),
        rating_thresholds=rating_thresholds,
        rng=np.random.default_rng(mix_seed(seed, "sim-user-stream")),
    )


def sim_choose(user: SimulatedUser, q: ChoiceQuery) -> int:
    """Sample an alternative from softmax(-beta * true cost)."""
    costs = np.asarray(
        [
            intervention_cost(alt, q.context, q.schema, user.true_weights, q.constraints)
            for alt in q.alternatives
        ]
    )
    z = -user.choice_model.beta * costs
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return int(user.rng.choice(len(costs), p=p))


def sim_rate(
    user: SimulatedUser,
    intervention: Intervention,
    context: UserProfile,
    cs: ConstraintSet,
    schema: FeatureSet,
) -> int:
    cost = intervention_cost(intervention, context, schema, user.true_weights, cs)
    return 5 - sum(1 for t in user.rating_thresholds if cost >= t)


def regret(
    intervention: Intervention,
    x: UserProfile,
    w_star: PreferenceWeights,
    oracle_best: RecourseResult,
    cs: ConstraintSet,
    schema: FeatureSet,
) -> float:
    """True-cost gap to the oracle optimum, clamped at 0 within 1e-12."""
    diff = intervention_cost(intervention, x, schema, w_star, cs) - oracle_best.cost
    if diff < -1e-12:
        raise ValueError(f"plan beats the supposed optimum by {-diff}")
    return max(diff, 0.0)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


# -- benchmark ----------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkConfig:
    seeds: tuple[int, ...]
    rounds: int
    mode: Mode
    submode: Submode = Submode.CHOICE
    k: int = 3
    m: int = 2
    beta: float = 10.0
    n_particles: int = 400
    rollouts: int = 400
    max_intervention_len: int = 2
    pool_draws: int = 5
    pool_top_n: int = 4
    stop_on_accept: bool = False

    def session_config(self) -> SessionConfig:
        return SessionConfig(
            submode=self.submode,
            k=self.k,
            m=self.m,
            n_particles=self.n_particles,
            beta=self.beta,
            pool_draws=self.pool_draws,
            pool_top_n=self.pool_top_n,
            rollouts=self.rollouts,
            max_intervention_len=self.max_intervention_len,
        )


@dataclass(frozen=True)
class BenchmarkRow:
    seed: int
    round: int
    mode: str
    regret: float
    cosine: float | None
    cost: float
    accepted: bool


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchmarkRow, ...]
    exhausted_seeds: tuple[int, ...] = ()

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("seed,round,mode,regret,cosine,cost,accepted\n")
        for r in self.rows:
            cos = "" if r.cosine is None else repr(r.cosine)
            out.write(
                f"{r.seed},{r.round},{r.mode},{repr(r.regret)},{cos},"
                f"{repr(r.cost)},{'true' if r.accepted else 'false'}\n"
            )
        return out.getvalue()

    def round_values(self, rnd: int, column: str) -> list[float]:
        vals = [
            getattr(r, column)
            for r in self.rows
            if r.round == rnd and getattr(r, column) is not None
        ]
        return [float(v) for v in vals]

    def aggregates(self) -> dict:
        rounds = sorted({r.round for r in self.rows})
        per_round = {}
        for rnd in rounds:
            regrets = self.round_values(rnd, "regret")
            cosines = self.round_values(rnd, "cosine")
            accepted = [r.accepted for r in self.rows if r.round == rnd]
            entry = {
                "n": len(regrets),
                "regret_median": float(np.median(regrets)) if regrets else None,
                "regret_q1": float(np.quantile(regrets, 0.25)) if regrets else None,
                "regret_q3": float(np.quantile(regrets, 0.75)) if regrets else None,
                "accept_rate": (sum(accepted) / len(accepted)) if accepted else None,
            }
            entry["cosine_median"] = (
                float(np.median(cosines)) if cosines else None
            )
            per_round[str(rnd)] = entry
        return {
            "rounds": per_round,
            "n_rows": len(self.rows),
            "exhausted_seeds": list(self.exhausted_seeds),
        }

    def summary_text(self) -> str:
        return json.dumps(self.aggregates(), sort_keys=True, indent=2)


def rejected_candidates(
    ctx: SessionContext,
    dataset: Dataset,
    max_len: int = 2,
    limit: int = 50,
    min_flips: int = 1,
    min_cost: float = 0.0,
) -> list[UserProfile]:
    """Profiles the classifier rejects and for which recourse provably exists
    within max_len actions (uniform weights, no constraints).

    min_flips demands that many distinct flipping interventions, keeping
    sampled searches and diversification away from needle-in-haystack
    instances; min_cost screens out profiles sitting right on the decision
    boundary, whose plans are too cheap to differentiate preferences.
    """
    uniform = PreferenceWeights.uniform(ctx.schema)
    out: list[UserProfile] = []
    for profile, _ in dataset.rows:
        if len(out) >= limit:
            break
        if ctx.evaluator.predict_profile(profile) != 0:
            continue
        try:
            best, costs = brute_force_search(
                profile, ctx.classifier, ctx.schema, uniform,
                max_len=max_len, evaluator=ctx.evaluator, collect_costs=True,
            )
        except (NoRecourseError, EmptyActionSpaceError, ValueError):
            continue
        if len(costs) >= min_flips and best.cost >= min_cost:
            out.append(profile)
    return out


def _strictly_ascending(values: np.ndarray) -> tuple[float, float, float, float]:
    out = [float(values[0])]
    for v in values[1:]:
        nxt = float(v)
        if nxt <= out[-1]:
            nxt = float(np.nextafter(out[-1], np.inf))
        out.append(nxt)
    return tuple(out)  # type: ignore[return-value]


def _run_seed(
    cfg: BenchmarkConfig,
    ctx: SessionContext,
    profile: UserProfile,
    seed: int,
) -> tuple[list[BenchmarkRow], bool]:
    schema = ctx.schema
    rng = np.random.default_rng(mix_seed(seed, "wstar"))
    names = schema.actionable_names
    w_star = PreferenceWeights(
        dict(zip(names, map(float, rng.dirichlet(np.ones(len(names))))))
    )
    oracle, feasible_costs = brute_force_search(
        profile, ctx.classifier, schema, w_star,
        max_len=cfg.max_intervention_len, evaluator=ctx.evaluator,
        collect_costs=True,
    )
    cuts = _strictly_ascending(
        np.quantile(np.asarray(feasible_costs), [0.2, 0.4, 0.6, 0.8])
    )
    user = SimulatedUser(
        true_weights=w_star,
        choice_model=ChoiceModel(cfg.beta),
        rating_thresholds=cuts,
        rng=np.random.default_rng(mix_seed(seed, "sim-user-stream")),
    )

    state = start_session(
        profile, cfg.mode, ctx, seed=mix_seed(seed, "session"),
        config=cfg.session_config(),
    )
    rows: list[BenchmarkRow] = []
    exhausted = False
    # every candidate surfaced so far stays eligible: the user may accept any
    # plan already shown, so the system's commitment is the expected-cost
    # argmin over the whole session pool, not just this round's novelties
    seen_pool: list[Intervention] = []
    seen_keys: set = set()
    for rnd in range(1, cfg.rounds + 1):
        state = propose(state, ctx)
        if state.phase == Phase.EXHAUSTED:
            exhausted = True
            break
        fresh = (
            state.candidate_pool
            if cfg.mode == Mode.GUIDED
            else tuple(p.result.intervention for p in state.current_plans)
        )
        for iv in fresh:
            if iv not in seen_keys:
                seen_keys.add(iv)
                seen_pool.append(iv)

        if cfg.mode == Mode.GUIDED:
            rec = select_choice_set(
                state.posterior, seen_pool, 1, profile, state.constraints, schema
            ).alternatives[0]
            cos = _cosine(
                point_estimate(state.posterior).vector(schema),
                w_star.vector(schema),
            )
        else:
            uniform = PreferenceWeights.uniform(schema)
            rec = min(
                seen_pool,
                key=lambda iv: intervention_cost(
                    iv, profile, schema, uniform, state.constraints
                ),
            )
            cos = None
        true_cost = intervention_cost(rec, profile, schema, w_star, state.constraints)
        gap = regret(rec, profile, w_star, oracle, state.constraints, schema)

        if cfg.mode == Mode.GUIDED and cfg.submode == Submode.CHOICE:
            q = ChoiceQuery(
                tuple(p.result.intervention for p in state.current_plans),
                profile, state.constraints, schema,
            )
            pick = sim_choose(user, q)
            chosen = state.current_plans[pick]
            rating = sim_rate(
                user, chosen.result.intervention, profile, state.constraints, schema
            )
            feedback = ("rate", chosen.plan_id, max(4, rating))
        elif cfg.mode == Mode.GUIDED:
            chosen = state.current_plans[0]
            rating = sim_rate(
                user, chosen.result.intervention, profile, state.constraints, schema
            )
            feedback = ("rate", chosen.plan_id, rating)
        else:
            chosen = min(
                state.current_plans,
                key=lambda p: intervention_cost(
                    p.result.intervention, profile, schema, w_star, state.constraints
                ),
            )
            rating = sim_rate(
                user, chosen.result.intervention, profile, state.constraints, schema
            )
            feedback = None

        accepted = rating >= 4
        rows.append(
            BenchmarkRow(
                seed=seed, round=rnd, mode=cfg.mode.value, regret=gap,
                cosine=cos, cost=true_cost, accepted=accepted,
            )
        )
        if cfg.stop_on_accept and accepted:
            state = accept(state, ctx, chosen.plan_id)
            break
        if rnd == cfg.rounds:
            break
        if feedback is not None:
            state = submit_rating(state, ctx, feedback[1], feedback[2])
        state = regenerate(state, ctx)
    return rows, exhausted


def run_benchmark(
    cfg: BenchmarkConfig,
    ctx: SessionContext,
    profiles: Sequence[UserProfile],
) -> BenchmarkReport:
    """One full session loop per seed against a fresh simulated user."""
    if not profiles:
        raise ValueError("no candidate profiles supplied")
    rows: list[BenchmarkRow] = []
    exhausted: list[int] = []
    for seed in cfg.seeds:
        profile = profiles[seed % len(profiles)]
        seed_rows, was_exhausted = _run_seed(cfg, ctx, profile, seed)
        rows.extend(seed_rows)
        if was_exhausted:
            exhausted.append(seed)
    return BenchmarkReport(rows=tuple(rows), exhausted_seeds=tuple(exhausted))


# -- MCTS vs brute force oracle suite ------------------------------------------


@dataclass(frozen=True)
class OracleCheckReport:
    instances: int
    within_tolerance: int
    dominance_ok: int
    lines: tuple[str, ...]

    @property
    def pass_rate(self) -> float:
        return self.within_tolerance / self.instances

    def text(self) -> str:
        body = "\n".join(self.lines)
        return (
            f"{body}\n"
            f"oracle-check: {self.within_tolerance}/{self.instances} within 5% "
            f"of optimum; dominance {self.dominance_ok}/{self.instances}; "
            f"pass rate {self.pass_rate:.2f}\n"
        )


def _random_small_instance(
    rng: np.random.Generator,
) -> tuple[FeatureSet, UserProfile, EnsembleClassifier, PreferenceWeights]:
    n_act = int(rng.integers(3, 6))
    n_fixed = int(rng.integers(0, 3))
    specs = []
    for i in range(n_act + n_fixed):
        actionable = i < n_act
        if rng.random() < 0.6:
            steps = int(rng.integers(1, 4))  # 2..4 grid values
            specs.append(
                FeatureSpec(
                    name=f"f{i}",
                    kind=NumericKind(min=0.0, max=float(steps), step=1.0),
                    actionable=actionable,
                )
            )
        else:
            n_opt = int(rng.integers(2, 5))
            specs.append(
                FeatureSpec(
                    name=f"f{i}",
                    kind=CategoricalKind(tuple(f"o{j}" for j in range(n_opt))),
                    actionable=actionable,
                )
            )
    schema = FeatureSet(tuple(specs), version="oracle-check")

    values: dict = {}
    for f in schema.features:
        if f.is_numeric:
            values[f.name] = f.kind.grid_value(int(rng.integers(f.kind.n_steps + 1)))
        else:
            values[f.name] = f.kind.options[int(rng.integers(len(f.kind.options)))]
    profile = UserProfile(values)

    from .schema import encode

    base = encode(profile, schema)
    members = []
    for _ in range(2):
        w = rng.normal(scale=1.5, size=(schema.encoded_length, 1))
        margin = rng.uniform(0.05, 0.8)
        b = np.asarray([-(float(base @ w[:, 0]) + margin)])
        members.append(MlpModel((schema.encoded_length, 1), [w], [b]))
    classifier = EnsembleClassifier(members)

    names = schema.actionable_names
    w_draw = rng.dirichlet(np.ones(len(names)))
    weights = PreferenceWeights(dict(zip(names, map(float, w_draw))))
    return schema, profile, classifier, weights


def oracle_check(
    instances: int = 100,
    rollouts: int = 20000,
    seed: int = 0,
    tolerance: float = 0.05,
    max_len: int = 3,
) -> OracleCheckReport:
    """Random small instances where brute force is exact; MCTS must land
    within tolerance of the optimum and never beat it."""
    rng = np.random.default_rng(seed & (2**64 - 1))
    lines = []
    within = dominance = 0
    produced = 0
    while produced < instances:
        schema, profile, classifier, weights = _random_small_instance(rng)
        evaluator = Evaluator(classifier, schema)
        try:
            brute = brute_force_search(
                profile, classifier, schema, weights,
                max_len=max_len, evaluator=evaluator,
            )
        except NoRecourseError:
            continue  # infeasible draw; not an oracle instance
        produced += 1
        budget = SearchBudget(
            max_rollouts=rollouts, max_intervention_len=max_len,
            seed=mix_seed(seed, "mcts", produced),
        )
        mcts = mcts_search(
            profile, classifier, schema, weights, budget=budget, evaluator=evaluator
        )
        ok_tol = mcts.cost <= brute.cost * (1.0 + tolerance) + 1e-12
        ok_dom = brute.cost <= mcts.cost + 1e-12
        within += ok_tol
        dominance += ok_dom
        lines.append(
            f"instance {produced:03d}: brute={brute.cost:.6f} "
            f"mcts={mcts.cost:.6f} within_5pct={'yes' if ok_tol else 'NO'} "
            f"dominance={'yes' if ok_dom else 'NO'}"
        )
    return OracleCheckReport(
        instances=instances,
        within_tolerance=within,
        dominance_ok=dominance,
        lines=tuple(lines),
    )
