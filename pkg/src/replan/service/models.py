"""Request and response bodies for the HTTP API."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, model_validator

Value = Union[float, str]


class ChangeView(BaseModel):
    feature: str
    display_name: str
    current: Value
    target: Value
    description: str


class PlanView(BaseModel):
    plan_id: str
    cost_estimate: float
    changes: list[ChangeView]


class FeatureConstraintView(BaseModel):
    multiplier: Optional[float] = None
    range: Optional[tuple[float, float]] = None
    options: Optional[list[str]] = None


class SessionView(BaseModel):
    session_id: str
    mode: Literal["guided", "exploratory"]
    submode: Literal["rate", "choice"]
    phase: str
    round: int
    plans: list[PlanView]
    constraints: dict[str, FeatureConstraintView]
    accepted_plan_id: Optional[str] = None
    final_cost: Optional[float] = None


class EventView(BaseModel):
    seq: int
    timestamp: str
    kind: str
    payload: dict


class FinalRecord(BaseModel):
    session_id: str
    plan: PlanView
    final_cost: float
    events: list[EventView]


class CreateSessionRequest(BaseModel):
    mode: Literal["guided", "exploratory"]
    persona_name: Optional[str] = None
    profile: Optional[dict[str, Value]] = None

    @model_validator(mode="after")
    def _exactly_one_source(self) -> "CreateSessionRequest":
        if (self.persona_name is None) == (self.profile is None):
            raise ValueError("provide exactly one of persona_name or profile")
        return self


class RatingRequest(BaseModel):
    plan_id: str
    likert: int = Field(ge=1, le=5)


class ConstraintPatch(BaseModel):
    achievability: Optional[int] = Field(default=None, ge=1, le=5)
    range: Optional[tuple[float, float]] = None
    options: Optional[list[str]] = None

    @model_validator(mode="after")
    def _non_empty(self) -> "ConstraintPatch":
        if self.achievability is None and self.range is None and self.options is None:
            raise ValueError("constraint patch must set at least one field")
        return self


class AcceptRequest(BaseModel):
    plan_id: str


class NumericDomainView(BaseModel):
    min: float
    max: float
    step: float
    unit: str


class FeatureView(BaseModel):
    name: str
    display_name: str
    kind: Literal["numeric", "categorical"]
    actionable: bool
    numeric: Optional[NumericDomainView] = None
    options: Optional[list[str]] = None


class SchemaView(BaseModel):
    version: str
    features: list[FeatureView]
    rating_labels: dict[int, str]
    achievability_labels: dict[int, str]


class PersonaView(BaseModel):
    name: str
    narrative: str
    profile: dict[str, Value]

