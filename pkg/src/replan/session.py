"""One live recourse negotiation, guided or exploratory, as a state machine.

States are immutable; every command returns a new state carrying an append-
only event history. All randomness derives from the session seed, so a
session is a deterministic fold of its commands: replaying the event log
reproduces the final state field-for-field.

Guided sessions maintain a weight posterior and propose either a single plan
to rate ("rate" sub-mode) or an informative set of k plans to pick from
("choice" sub-mode). Exploratory sessions propose diverse plans under
uniform weights, learn nothing, and accept constraints on any actionable
feature with progressive disclosure.
"""

from __future__ import annotations

import json
import math
import uuid
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .classifier import EnsembleClassifier
from .elicitation import (
    RATING_LABELS,
    ChoiceModel,
    RatingSignal,
    WeightPosterior,
    achievability_to_multiplier,
    init_posterior,
    point_estimate,
    rating_to_update,
    select_choice_set,
)
from .engine import (
    ConstraintError,
    ConstraintSet,
    EmptyActionSpaceError,
    Evaluator,
    NoRecourseError,
    PreferenceWeights,
    RecourseResult,
    SearchBudget,
    diverse_plans,
    intervention_cost,
    intervention_identity,
    mix_seed,
    search_candidates,
)
from .schema import FeatureSet, Intervention, UserProfile, Value


class SessionError(RuntimeError):
    pass


class PhaseError(SessionError):
    pass


class ModeError(SessionError):
    pass


class UnknownPlanError(SessionError):
    pass


class AlreadyApprovedError(SessionError):
    pass


class ConstraintScopeError(SessionError):
    pass


class ReplayError(SessionError):
    pass


class Mode(str, Enum):
    GUIDED = "guided"
    EXPLORATORY = "exploratory"


class Submode(str, Enum):
    RATE = "rate"
    CHOICE = "choice"


class Phase(str, Enum):
    AWAITING_PROPOSAL = "awaiting_proposal"
    PROPOSED = "proposed"
    AWAITING_FEEDBACK = "awaiting_feedback"
    ACCEPTED = "accepted"
    EXHAUSTED = "exhausted"


TERMINAL_PHASES = (Phase.ACCEPTED, Phase.EXHAUSTED)

EV_STARTED = "SessionStarted"
EV_PROPOSED = "PlanProposed"
EV_RATED = "RatingSubmitted"
EV_CONSTRAINED = "ConstraintsSubmitted"
EV_REGENERATED = "Regenerated"
EV_ACCEPTED = "PlanAccepted"
EV_DISCLOSED = "FeatureDisclosed"
EV_ERROR = "Error"


@dataclass(frozen=True)
class SessionConfig:
    submode: Submode = Submode.RATE
    k: int = 3
    m: int = 2
    n_particles: int = 500
    beta: float = 10.0
    pool_draws: int = 6
    pool_top_n: int = 4
    rollouts: int = 1500
    max_intervention_len: int = 4
    uct_constant: float = math.sqrt(2.0)

    def budget(self, seed: int) -> SearchBudget:
        return SearchBudget(
            self.rollouts, self.max_intervention_len, self.uct_constant, seed
        )

    def to_payload(self) -> dict:
        return {
            "submode": self.submode.value,
            "k": self.k,
            "m": self.m,
            "n_particles": self.n_particles,
            "beta": self.beta,
            "pool_draws": self.pool_draws,
            "pool_top_n": self.pool_top_n,
            "rollouts": self.rollouts,
            "max_intervention_len": self.max_intervention_len,
            "uct_constant": self.uct_constant,
        }

    @staticmethod
    def from_payload(payload: Mapping) -> "SessionConfig":
        return SessionConfig(
            submode=Submode(payload["submode"]),
            k=int(payload["k"]),
            m=int(payload["m"]),
            n_particles=int(payload["n_particles"]),
            beta=float(payload["beta"]),
            pool_draws=int(payload["pool_draws"]),
            pool_top_n=int(payload["pool_top_n"]),
            rollouts=int(payload["rollouts"]),
            max_intervention_len=int(payload["max_intervention_len"]),
            uct_constant=float(payload["uct_constant"]),
        )


@dataclass
class SessionContext:
    """Immutable shared machinery for all sessions of one deployment."""

    classifier: EnsembleClassifier
    schema: FeatureSet
    evaluator: Evaluator = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.evaluator is None:
            self.evaluator = Evaluator(self.classifier, self.schema)


@dataclass(frozen=True)
class Plan:
    plan_id: str
    result: RecourseResult


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    timestamp: str
    session_id: str
    kind: str
    payload: Mapping


@dataclass(frozen=True)
class Persona:
    """Fixture identity whose profile the shipped classifier rejects."""

    name: str
    profile: UserProfile
    narrative: str


@dataclass(frozen=True)
class ConstraintUpdate:
    achievability: int | None = None
    numeric_range: tuple[float, float] | None = None
    options: tuple[str, ...] | None = None

    def to_payload(self) -> dict:
        return {
            "achievability": self.achievability,
            "range": list(self.numeric_range) if self.numeric_range else None,
            "options": list(self.options) if self.options else None,
        }

    @staticmethod
    def from_payload(payload: Mapping) -> "ConstraintUpdate":
        rng = payload.get("range")
        opts = payload.get("options")
        return ConstraintUpdate(
            achievability=payload.get("achievability"),
            numeric_range=(float(rng[0]), float(rng[1])) if rng else None,
            options=tuple(opts) if opts else None,
        )


@dataclass(frozen=True)
class SessionState:
    id: str
    mode: Mode
    profile: UserProfile
    schema_version: str
    posterior: WeightPosterior | None
    constraints: ConstraintSet
    round: int
    phase: Phase
    current_plans: tuple[Plan, ...]
    history: tuple[SessionEvent, ...]
    seed: int
    config: SessionConfig
    candidate_pool: tuple[Intervention, ...] = ()
    shown_identities: frozenset = frozenset()
    shown_features: frozenset = frozenset()
    disclosed_features: frozenset = frozenset()
    accepted_plan: Plan | None = None
    accepted_cost: float | None = None

    def plan(self, plan_id: str) -> Plan:
        for p in self.current_plans:
            if p.plan_id == plan_id:
                return p
        raise UnknownPlanError(f"no current plan with id {plan_id!r}")


def states_equivalent(a: SessionState, b: SessionState) -> bool:
    """Field-for-field equality, including posterior probabilities bitwise."""
    if (a.posterior is None) != (b.posterior is None):
        return False
    if a.posterior is not None and not a.posterior.equal_to(b.posterior):
        return False
    plain = (
        "id", "mode", "profile", "schema_version", "constraints", "round",
        "phase", "current_plans", "history", "seed", "config",
        "candidate_pool", "shown_identities", "shown_features",
        "disclosed_features", "accepted_plan", "accepted_cost",
    )
    return all(getattr(a, f) == getattr(b, f) for f in plain)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def _emit(state: SessionState, kind: str, payload: Mapping) -> SessionState:
    ev = SessionEvent(
        seq=len(state.history),
        timestamp=_now(),
        session_id=state.id,
        kind=kind,
        payload=payload,
    )
    return replace(state, history=state.history + (ev,))


def _actions_payload(intervention: Intervention) -> list[dict]:
    return [{"feature": a.feature, "target": a.target} for a in intervention.actions]


def _uniform(schema: FeatureSet) -> PreferenceWeights:
    return PreferenceWeights.uniform(schema)


# -- commands ---------------------------------------------------------------


def start_session(
    profile: UserProfile,
    mode: Mode,
    ctx: SessionContext,
    seed: int,
    config: SessionConfig = SessionConfig(),
    session_id: str | None = None,
) -> SessionState:
    """Open a negotiation for a currently rejected profile."""
    profile = UserProfile.validate(profile.values, ctx.schema)
    if ctx.evaluator.predict_profile(profile) == 1:
        raise AlreadyApprovedError("profile is already approved; nothing to overturn")
    sid = session_id or uuid.uuid4().hex[:12]
    posterior = None
    if mode == Mode.GUIDED:
        posterior = init_posterior(
            ctx.schema, config.n_particles, mix_seed(seed, "posterior")
        )
    state = SessionState(
        id=sid,
        mode=mode,
        profile=profile,
        schema_version=ctx.schema.version,
        posterior=posterior,
        constraints=ConstraintSet(),
        round=0,
        phase=Phase.AWAITING_PROPOSAL,
        current_plans=(),
        history=(),
        seed=seed,
        config=config,
    )
    return _emit(
        state,
        EV_STARTED,
        {
            "session_id": sid,
            "mode": mode.value,
            "seed": seed,
            "schema_version": ctx.schema.version,
            "profile": dict(profile.values),
            "config": config.to_payload(),
        },
    )


def _guided_pool(state: SessionState, ctx: SessionContext) -> list[RecourseResult]:
    """Candidate plans for one guided round.

    Searches run under the posterior point estimate plus particles sampled
    from the posterior; every flipping intervention the searches observe is
    a potential candidate. The pool keeps the cheapest plans under the point
    estimate plus, per actionable feature, the cheapest plan touching it, so
    choice queries can probe preferences the cheap plans alone would never
    reveal.
    """
    cfg = state.config
    post = state.posterior
    assert post is not None
    w_point = point_estimate(post)
    weight_list: list[PreferenceWeights] = [w_point]
    rng = np.random.default_rng(
        np.random.SeedSequence(mix_seed(state.seed, "pool-draws", state.round))
    )
    # without replacement: once the posterior concentrates, draws with
    # replacement collapse onto one particle and pool diversity dies
    draws = rng.choice(
        post.n, size=min(cfg.pool_draws, post.n), replace=False, p=post.probs
    )
    for i in draws:
        weight_list.append(post.particles[int(i)])

    found: dict[frozenset, RecourseResult] = {}
    empty_spaces = 0
    for i, wv in enumerate(weight_list):
        budget = cfg.budget(mix_seed(state.seed, "search", state.round, i))
        try:
            results = search_candidates(
                state.profile,
                ctx.evaluator,
                wv,
                state.constraints,
                budget,
                top_n=4 * cfg.pool_top_n,
                banned=state.shown_identities,
            )
        except EmptyActionSpaceError:
            empty_spaces += 1
            continue
        for res in results:
            found.setdefault(intervention_identity(res.intervention), res)
    if empty_spaces == len(weight_list):
        raise EmptyActionSpaceError("constraints leave no applicable actions")
    if not found:
        raise NoRecourseError("no unseen flipping intervention within budget")

    ranked = sorted(
        found.values(),
        key=lambda r: (
            intervention_cost(
                r.intervention, state.profile, ctx.schema, w_point, state.constraints
            ),
            r.intervention.sort_key(ctx.schema),
        ),
    )
    # keep the cheapest plan per touched-feature set: near-duplicates add
    # nothing to a choice query, they only invite coin-flip answers
    by_feature_set: dict[frozenset, RecourseResult] = {}
    for r in ranked:
        by_feature_set.setdefault(r.intervention.features, r)
    distinct = list(by_feature_set.values())
    pool = distinct[: max(cfg.pool_top_n, cfg.k)]
    for feature in ctx.schema.actionable_names:
        if any(feature in r.intervention.features for r in pool):
            continue
        probe = next(
            (r for r in distinct if feature in r.intervention.features), None
        )
        if probe is not None:
            pool.append(probe)
    return pool


def propose(state: SessionState, ctx: SessionContext) -> SessionState:
    """Generate and present the round's plan(s); Exhausted when impossible."""
    if state.phase != Phase.AWAITING_PROPOSAL:
        raise PhaseError(f"cannot propose in phase {state.phase.value}")
    cfg = state.config
    try:
        if state.mode == Mode.GUIDED:
            pool = _guided_pool(state, ctx)
            interventions = [r.intervention for r in pool]
            k_eff = 1 if cfg.submode == Submode.RATE else min(cfg.k, len(pool))
            query = select_choice_set(
                state.posterior, interventions, k_eff, state.profile,
                state.constraints, ctx.schema,
            )
            w_show = point_estimate(state.posterior)
            picked = list(query.alternatives)
            rollouts = {r.intervention: r.rollouts_used for r in pool}
            results = [
                RecourseResult(
                    intervention=iv,
                    cost=intervention_cost(
                        iv, state.profile, ctx.schema, w_show, state.constraints
                    ),
                    valid=True,
                    rollouts_used=rollouts[iv],
                )
                for iv in picked
            ]
            pool_field = tuple(interventions)
        else:
            results = diverse_plans(
                state.profile,
                ctx.classifier,
                ctx.schema,
                _uniform(ctx.schema),
                state.constraints,
                cfg.m,
                cfg.budget(mix_seed(state.seed, "diverse", state.round)),
                evaluator=ctx.evaluator,
                banned=state.shown_identities,
            )
            pool_field = ()
    except (NoRecourseError, EmptyActionSpaceError) as exc:
        exhausted = replace(state, phase=Phase.EXHAUSTED, current_plans=())
        return _emit(
            exhausted,
            EV_ERROR,
            {
                "command": "propose",
                "error": type(exc).__name__,
                "message": str(exc),
            },
        )

    plans = tuple(
        Plan(plan_id=f"r{state.round}-{i}", result=res)
        for i, res in enumerate(results)
    )
    new = replace(
        state,
        phase=Phase.PROPOSED,
        current_plans=plans,
        candidate_pool=pool_field,
        shown_identities=state.shown_identities
        | {intervention_identity(p.result.intervention) for p in plans},
        shown_features=state.shown_features
        | {f for p in plans for f in p.result.intervention.features},
    )
    for i, p in enumerate(plans):
        new = _emit(
            new,
            EV_PROPOSED,
            {
                "round": state.round,
                "plan_id": p.plan_id,
                "plan_index": i,
                "n_plans": len(plans),
                "actions": _actions_payload(p.result.intervention),
                "cost_estimate": p.result.cost,
            },
        )
    return new


def submit_rating(
    state: SessionState, ctx: SessionContext, plan_id: str, likert: int
) -> SessionState:
    """Record a Likert rating for a presented plan and update the posterior."""
    if state.mode != Mode.GUIDED:
        raise ModeError("the exploratory interface collects no ratings")
    if state.phase != Phase.PROPOSED:
        raise PhaseError(f"cannot rate in phase {state.phase.value}")
    plan = state.plan(plan_id)
    signal = RatingSignal(plan.result.intervention, likert)  # validates 1..5
    if state.config.submode == Submode.RATE:
        pool: Sequence[Intervention] = state.candidate_pool
    else:
        pool = tuple(p.result.intervention for p in state.current_plans)
    posterior = rating_to_update(
        state.posterior,
        signal,
        pool,
        state.profile,
        state.constraints,
        ChoiceModel(state.config.beta),
        ctx.schema,
    )
    new = replace(state, posterior=posterior, phase=Phase.AWAITING_FEEDBACK)
    return _emit(
        new,
        EV_RATED,
        {"plan_id": plan_id, "likert": likert, "label": RATING_LABELS[likert]},
    )


def submit_constraints(
    state: SessionState,
    ctx: SessionContext,
    updates: Mapping[str, ConstraintUpdate],
) -> SessionState:
    """Merge per-feature achievability/range/option constraints.

    Guided sessions may only constrain features of the current proposal;
    exploratory sessions may constrain any actionable feature, recording a
    disclosure event the first time an unproposed feature is touched.
    """
    if not updates:
        raise ValueError("no constraint updates supplied")
    if state.mode == Mode.GUIDED:
        if state.phase != Phase.AWAITING_FEEDBACK:
            raise PhaseError(
                f"guided constraints require a rated proposal, not phase "
                f"{state.phase.value}"
            )
        proposed = {
            f for p in state.current_plans for f in p.result.intervention.features
        }
        outside = sorted(set(updates) - proposed)
        if outside:
            raise ConstraintScopeError(
                f"guided mode only accepts constraints on proposed features; "
                f"got {outside}"
            )
    else:
        if state.phase != Phase.PROPOSED:
            raise PhaseError(f"cannot constrain in phase {state.phase.value}")

    ranges: dict[str, tuple[float, float]] = {}
    options: dict[str, tuple[str, ...]] = {}
    multipliers: dict[str, float] = {}
    for name, upd in updates.items():
        spec = ctx.schema.require(name)
        if not spec.actionable:
            raise ConstraintError(f"feature {name!r} is not actionable")
        if upd.achievability is not None:
            multipliers[name] = achievability_to_multiplier(upd.achievability)
        if upd.numeric_range is not None:
            ranges[name] = upd.numeric_range
        if upd.options is not None:
            options[name] = upd.options
    merged = state.constraints.merged(ranges, options, multipliers)
    merged.validate_against(ctx.schema)

    new = replace(state, constraints=merged)
    new = _emit(
        new,
        EV_CONSTRAINED,
        {"features": {n: u.to_payload() for n, u in updates.items()}},
    )
    if state.mode == Mode.EXPLORATORY:
        fresh = sorted(
            set(updates) - state.shown_features - state.disclosed_features
        )
        if fresh:
            new = replace(
                new, disclosed_features=new.disclosed_features | set(fresh)
            )
            new = _emit(new, EV_DISCLOSED, {"features": fresh})
    return new


def regenerate(state: SessionState, ctx: SessionContext) -> SessionState:
    """Discard the current proposal and advance to a fresh round."""
    if state.phase not in (Phase.PROPOSED, Phase.AWAITING_FEEDBACK):
        raise PhaseError(f"cannot regenerate in phase {state.phase.value}")
    new = replace(
        state,
        round=state.round + 1,
        phase=Phase.AWAITING_PROPOSAL,
        current_plans=(),
        candidate_pool=(),
    )
    return _emit(new, EV_REGENERATED, {"round": new.round})


def accept(state: SessionState, ctx: SessionContext, plan_id: str) -> SessionState:
    """Accept a presented plan; the session becomes terminal."""
    if state.phase not in (Phase.PROPOSED, Phase.AWAITING_FEEDBACK):
        raise PhaseError(f"cannot accept in phase {state.phase.value}")
    plan = state.plan(plan_id)
    if state.mode == Mode.GUIDED:
        w = point_estimate(state.posterior)
    else:
        w = _uniform(ctx.schema)
    final_cost = intervention_cost(
        plan.result.intervention, state.profile, ctx.schema, w, state.constraints
    )
    new = replace(
        state,
        phase=Phase.ACCEPTED,
        accepted_plan=plan,
        accepted_cost=final_cost,
    )
    return _emit(
        new,
        EV_ACCEPTED,
        {
            "plan_id": plan_id,
            "final_cost": final_cost,
            "actions": _actions_payload(plan.result.intervention),
        },
    )


# -- event log persistence ----------------------------------------------------


def event_to_json(ev: SessionEvent) -> str:
    return json.dumps(
        {
            "seq": ev.seq,
            "timestamp": ev.timestamp,
            "session_id": ev.session_id,
            "kind": ev.kind,
            "payload": ev.payload,
        },
        sort_keys=False,
    )


def event_from_json(line: str) -> SessionEvent:
    doc = json.loads(line)
    return SessionEvent(
        seq=int(doc["seq"]),
        timestamp=doc["timestamp"],
        session_id=doc["session_id"],
        kind=doc["kind"],
        payload=doc["payload"],
    )


def append_events(path: str | Path, events: Sequence[SessionEvent]) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        for ev in events:
            fh.write(event_to_json(ev) + "\n")


def read_event_log(path: str | Path) -> tuple[SessionEvent, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return tuple(event_from_json(line) for line in lines if line.strip())


# -- replay ---------------------------------------------------------------


def _substitute(
    state: SessionState,
    before_len: int,
    originals: Sequence[SessionEvent],
    pos: int,
) -> tuple[SessionState, int]:
    emitted = state.history[before_len:]
    recorded = originals[pos : pos + len(emitted)]
    if len(recorded) != len(emitted):
        raise ReplayError("event log ends mid-command")
    for e, r in zip(emitted, recorded):
        if e.kind != r.kind or e.seq != r.seq:
            raise ReplayError(
                f"replay divergence at seq {e.seq}: recomputed {e.kind}, "
                f"log has {r.kind} (seq {r.seq})"
            )
    return (
        replace(state, history=state.history[:before_len] + tuple(recorded)),
        pos + len(emitted),
    )


def replay_events(
    events: Sequence[SessionEvent], ctx: SessionContext
) -> SessionState:
    """Rebuild the final state by re-running the commands the log records.

    Search and posterior computations are recomputed deterministically from
    the logged seed; the logged events themselves are spliced back into the
    history so timestamps and sequence numbers match the original run.
    """
    if not events or events[0].kind != EV_STARTED:
        raise ReplayError("log must begin with a session start event")
    head = events[0].payload
    profile = UserProfile(dict(head["profile"]))
    state = start_session(
        profile,
        Mode(head["mode"]),
        ctx,
        seed=int(head["seed"]),
        config=SessionConfig.from_payload(head["config"]),
        session_id=head["session_id"],
    )
    state, pos = _substitute(state, 0, events, 0)

    while pos < len(events):
        ev = events[pos]
        before = len(state.history)
        if ev.kind == EV_PROPOSED or (
            ev.kind == EV_ERROR and ev.payload.get("command") == "propose"
        ):
            state = propose(state, ctx)
        elif ev.kind == EV_RATED:
            state = submit_rating(
                state, ctx, ev.payload["plan_id"], int(ev.payload["likert"])
            )
        elif ev.kind == EV_CONSTRAINED:
            updates = {
                name: ConstraintUpdate.from_payload(p)
                for name, p in ev.payload["features"].items()
            }
            state = submit_constraints(state, ctx, updates)
        elif ev.kind == EV_REGENERATED:
            state = regenerate(state, ctx)
        elif ev.kind == EV_ACCEPTED:
            state = accept(state, ctx, ev.payload["plan_id"])
        else:
            raise ReplayError(f"unexpected event kind {ev.kind} at seq {ev.seq}")
        state, pos = _substitute(state, before, events, pos)
    return state
