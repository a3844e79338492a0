"""HTTP/JSON service exposing sessions to the browser UI and other clients.

Session handles live in memory behind one lock each, so commands against a
single session serialize while distinct sessions proceed in parallel. Every
command's events append to a JSONL file per session, from which the final
state is replayable. Session ids and seeds derive from the configured root
seed plus a counter, making a fresh server fully reproducible.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles

from ..classifier import load_checkpoint
from ..elicitation import ACHIEVABILITY_LABELS, RATING_LABELS
from ..engine import ConstraintError, mix_seed
from ..schema import FeatureSet, SchemaError, UserProfile, parse_schema
from ..session import (
    AlreadyApprovedError,
    ConstraintScopeError,
    ConstraintUpdate,
    Mode,
    ModeError,
    Persona,
    PhaseError,
    SessionConfig,
    SessionContext,
    SessionState,
    Submode,
    UnknownPlanError,
    accept,
    append_events,
    propose,
    regenerate,
    start_session,
    submit_constraints,
    submit_rating,
)
from .config import ServerConfig
from .models import (
    AcceptRequest,
    ChangeView,
    ConstraintPatch,
    CreateSessionRequest,
    EventView,
    FeatureConstraintView,
    FeatureView,
    FinalRecord,
    NumericDomainView,
    PersonaView,
    PlanView,
    RatingRequest,
    SchemaView,
    SessionView,
)


class _Handle:
    def __init__(self, state: SessionState, log_path: Path | None):
        self.state = state
        self.lock = threading.Lock()
        self.log_path = log_path


def _plan_view(state: SessionState, plan) -> PlanView:
    changes = []
    for a in plan.result.intervention.actions:
        current = state.profile[a.feature]
        changes.append(
            ChangeView(
                feature=a.feature,
                display_name=a.feature,
                current=current,
                target=a.target,
                description=f"{a.feature}: {current} -> {a.target}",
            )
        )
    return PlanView(
        plan_id=plan.plan_id,
        cost_estimate=plan.result.cost,
        changes=changes,
    )


def _session_view(state: SessionState, schema: FeatureSet) -> SessionView:
    plans = []
    for plan in state.current_plans:
        view = _plan_view(state, plan)
        for change in view.changes:
            spec = schema.by_name[change.feature]
            unit = f" {spec.kind.unit}" if spec.is_numeric and spec.kind.unit else ""
            change.display_name = spec.display_name
            change.description = (
                f"{spec.display_name}: {change.current} -> {change.target}{unit}"
            )
        plans.append(view)
    constraints: dict[str, FeatureConstraintView] = {}
    cs = state.constraints
    for name in set(cs.numeric_ranges) | set(cs.allowed_options) | set(cs.multipliers):
        constraints[name] = FeatureConstraintView(
            multiplier=cs.multipliers.get(name),
            range=cs.numeric_ranges.get(name),
            options=list(cs.allowed_options[name]) if name in cs.allowed_options else None,
        )
    return SessionView(
        session_id=state.id,
        mode=state.mode.value,
        submode=state.config.submode.value,
        phase=state.phase.value,
        round=state.round,
        plans=plans,
        constraints=constraints,
        accepted_plan_id=state.accepted_plan.plan_id if state.accepted_plan else None,
        final_cost=state.accepted_cost,
    )


def _schema_view(schema: FeatureSet) -> SchemaView:
    features = []
    for f in schema.features:
        if f.is_numeric:
            features.append(
                FeatureView(
                    name=f.name, display_name=f.display_name, kind="numeric",
                    actionable=f.actionable,
                    numeric=NumericDomainView(
                        min=f.kind.min, max=f.kind.max, step=f.kind.step,
                        unit=f.kind.unit,
                    ),
                )
            )
        else:
            features.append(
                FeatureView(
                    name=f.name, display_name=f.display_name, kind="categorical",
                    actionable=f.actionable, options=list(f.kind.options),
                )
            )
    return SchemaView(
        version=schema.version,
        features=features,
        rating_labels=RATING_LABELS,
        achievability_labels=ACHIEVABILITY_LABELS,
    )


def _http_error(exc: Exception) -> HTTPException:
    if isinstance(exc, (UnknownPlanError,)):
        return HTTPException(status_code=404, detail=str(exc))
    if isinstance(
        exc, (PhaseError, ModeError, AlreadyApprovedError, ConstraintScopeError)
    ):
        return HTTPException(status_code=409, detail=str(exc))
    if isinstance(exc, (ConstraintError, SchemaError, ValueError)):
        return HTTPException(status_code=422, detail=str(exc))
    raise exc


def create_app(
    config: ServerConfig | None = None,
    *,
    context: SessionContext | None = None,
    personas: tuple[Persona, ...] = (),
) -> FastAPI:
    """Build the service either from a config file's assets or directly from
    an in-memory context (used by tests and the demo server)."""
    if context is None:
        if config is None:
            raise ValueError("need a config or an explicit context")
        schema = parse_schema(Path(config.schema_path).read_text(encoding="utf-8"))
        classifier = load_checkpoint(config.checkpoint_path)
        context = SessionContext(classifier=classifier, schema=schema)
        if config.personas_path:
            import json

            doc = json.loads(Path(config.personas_path).read_text(encoding="utf-8"))
            personas = tuple(
                Persona(
                    name=e["name"],
                    profile=UserProfile.validate(e["profile"], schema),
                    narrative=e.get("narrative", ""),
                )
                for e in doc
            )
    cfg = config or ServerConfig(schema_path="", checkpoint_path="")
    schema = context.schema

    session_config = SessionConfig(
        submode=Submode(cfg.guided_submode),
        k=cfg.k,
        m=cfg.m,
        n_particles=cfg.n_particles,
        beta=cfg.beta,
        pool_draws=cfg.pool_draws,
        pool_top_n=cfg.pool_top_n,
        rollouts=cfg.rollouts,
        max_intervention_len=cfg.max_intervention_len,
    )

    app = FastAPI(title="replan", version="0.1.0")
    sessions: dict[str, _Handle] = {}
    persona_map = {p.name: p for p in personas}
    counter_lock = threading.Lock()
    counter = [0]
    log_dir = Path(cfg.log_dir) if config is not None else None
    if log_dir is not None:
        log_dir.mkdir(parents=True, exist_ok=True)

    def _mutate(session_id: str, fn) -> SessionState:
        handle = sessions.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        with handle.lock:
            before = len(handle.state.history)
            try:
                new_state = fn(handle.state)
            except HTTPException:
                raise
            except Exception as exc:  # noqa: BLE001 - translated to HTTP codes
                raise _http_error(exc) from exc
            handle.state = new_state
            if handle.log_path is not None:
                append_events(handle.log_path, new_state.history[before:])
        return new_state

    @app.post("/sessions", response_model=SessionView, status_code=201)
    def create_session(req: CreateSessionRequest) -> SessionView:
        if req.persona_name is not None:
            persona = persona_map.get(req.persona_name)
            if persona is None:
                raise HTTPException(
                    status_code=404, detail=f"no persona {req.persona_name!r}"
                )
            profile = persona.profile
        else:
            try:
                profile = UserProfile.validate(req.profile, schema, snap=True)
            except SchemaError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        with counter_lock:
            index = counter[0]
            counter[0] += 1
        sid = f"s{index:06d}"
        seed = mix_seed(cfg.root_seed, "session", index)
        try:
            state = start_session(
                profile, Mode(req.mode), context, seed=seed,
                config=session_config, session_id=sid,
            )
            state = propose(state, context)
        except Exception as exc:  # noqa: BLE001
            raise _http_error(exc) from exc
        log_path = log_dir / f"{sid}.jsonl" if log_dir is not None else None
        handle = _Handle(state, log_path)
        if log_path is not None:
            append_events(log_path, state.history)
        sessions[sid] = handle
        return _session_view(state, schema)

    @app.get("/sessions/{session_id}", response_model=SessionView)
    def get_session(session_id: str) -> SessionView:
        handle = sessions.get(session_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return _session_view(handle.state, schema)

    @app.post("/sessions/{session_id}/rating", response_model=SessionView)
    def rate(session_id: str, req: RatingRequest) -> SessionView:
        state = _mutate(
            session_id, lambda s: submit_rating(s, context, req.plan_id, req.likert)
        )
        return _session_view(state, schema)

    @app.post("/sessions/{session_id}/constraints", response_model=SessionView)
    def constrain(
        session_id: str, req: dict[str, ConstraintPatch]
    ) -> SessionView:
        updates = {
            name: ConstraintUpdate(
                achievability=patch.achievability,
                numeric_range=tuple(patch.range) if patch.range else None,
                options=tuple(patch.options) if patch.options else None,
            )
            for name, patch in req.items()
        }
        state = _mutate(
            session_id, lambda s: submit_constraints(s, context, updates)
        )
        return _session_view(state, schema)

    @app.post("/sessions/{session_id}/regenerate", response_model=SessionView)
    def regen(session_id: str) -> SessionView:
        def step(s: SessionState) -> SessionState:
            return propose(regenerate(s, context), context)

        state = _mutate(session_id, step)
        return _session_view(state, schema)

    @app.post("/sessions/{session_id}/accept", response_model=FinalRecord)
    def accept_plan(session_id: str, req: AcceptRequest) -> FinalRecord:
        state = _mutate(session_id, lambda s: accept(s, context, req.plan_id))
        assert state.accepted_plan is not None and state.accepted_cost is not None
        view = _plan_view(state, state.accepted_plan)
        for change in view.changes:
            spec = schema.by_name[change.feature]
            change.display_name = spec.display_name
        return FinalRecord(
            session_id=state.id,
            plan=view,
            final_cost=state.accepted_cost,
            events=[
                EventView(
                    seq=e.seq, timestamp=e.timestamp, kind=e.kind,
                    payload=dict(e.payload),
                )
                for e in state.history
            ],
        )

    @app.get("/schema", response_model=SchemaView)
    def get_schema() -> SchemaView:
        return _schema_view(schema)

    @app.get("/personas", response_model=list[PersonaView])
    def get_personas() -> list[PersonaView]:
        return [
            PersonaView(
                name=p.name, narrative=p.narrative, profile=dict(p.profile.values)
            )
            for p in personas
        ]

    if cfg.frontend_dir and Path(cfg.frontend_dir).is_dir():
        app.mount(
            "/", StaticFiles(directory=cfg.frontend_dir, html=True), name="ui"
        )

    return app
