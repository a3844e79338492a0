"""Feature schema, user profiles, actions, interventions and dataset ingestion.

Every type here is immutable after construction and every operation is a pure
function, so values can be shared freely across threads. The feature order in
a FeatureSet is the canonical order used by the encoder, the search engine and
the CSV formats.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Union

import numpy as np

Value = Union[float, str]


class SchemaError(ValueError):
    """Schema document violates the file format or a schema invariant."""


class DatasetError(ValueError):
    """CSV ingestion failure: missing column, out-of-domain value, bad label."""


class ActionError(ValueError):
    """Action or intervention that cannot be applied to a profile."""


@dataclass(frozen=True)
class NumericKind:
    """Numeric domain [min, max] discretized by an author-chosen step.

    The step makes the action space finite; all stored values sit exactly on
    the grid min + i*step so comparisons and encodings are reproducible.
    """

    min: float
    max: float
    step: float
    unit: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "min", float(self.min))
        object.__setattr__(self, "max", float(self.max))
        object.__setattr__(self, "step", float(self.step))

    @property
    def span(self) -> float:
        return self.max - self.min

    @cached_property
    def n_steps(self) -> int:
        ratio = self.span / self.step
        return int(round(ratio))

    def check(self, name: str) -> None:
        if not (self.min < self.max):
            raise SchemaError(f"feature {name!r}: numeric min must be < max")
        if self.step <= 0:
            raise SchemaError(f"feature {name!r}: step must be positive")
        ratio = self.span / self.step
        n = round(ratio)
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
            raise SchemaError(
                f"feature {name!r}: step {self.step} does not divide the span "
                f"{self.span}"
            )

    def grid(self) -> tuple[float, ...]:
        return tuple(self.min + i * self.step for i in range(self.n_steps + 1))

    def grid_value(self, i: int) -> float:
        return self.min + i * self.step

    def grid_index(self, value: float) -> int | None:
        """Index of ``value`` on the grid, or None if it is off-grid."""
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return None
        t = (float(value) - self.min) / self.step
        i = int(round(t))
        if i < 0 or i > self.n_steps or abs(t - i) > 1e-6:
            return None
        return i

    def snap(self, value: float) -> float:
        """Nearest grid value; exact half-step ties resolve toward min."""
        t = (float(value) - self.min) / self.step
        frac = t - math.floor(t)
        if frac == 0.5:
            i = math.floor(t)
        else:
            i = math.floor(t + 0.5)
        i = min(max(i, 0), self.n_steps)
        return self.grid_value(i)

    def contains(self, value: float) -> bool:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return False
        return self.min - 1e-9 * max(1.0, abs(self.min)) <= float(value) <= (
            self.max + 1e-9 * max(1.0, abs(self.max))
        )


@dataclass(frozen=True)
class CategoricalKind:
    options: tuple[str, ...]

    def check(self, name: str) -> None:
        if len(self.options) < 2:
            raise SchemaError(f"feature {name!r}: needs at least 2 options")
        if len(set(self.options)) != len(self.options):
            raise SchemaError(f"feature {name!r}: duplicate option labels")
        if any(not isinstance(o, str) or not o for o in self.options):
            raise SchemaError(f"feature {name!r}: options must be non-empty labels")


Kind = Union[NumericKind, CategoricalKind]


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: Kind
    actionable: bool = False
    display_name: str = ""

    def __post_init__(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise SchemaError("feature name must be a non-empty string")
        self.kind.check(self.name)
        if not self.display_name:
            object.__setattr__(
                self, "display_name", self.name.replace("_", " ").capitalize()
            )

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.kind, NumericKind)

    def encoded_width(self) -> int:
        return 1 if self.is_numeric else len(self.kind.options)

    def canonical(self, value: Value) -> Value:
        """Value normalized to an exact grid point / known option, or raise."""
        if self.is_numeric:
            i = self.kind.grid_index(value)  # type: ignore[arg-type]
            if i is None:
                raise ActionError(
                    f"value {value!r} not on the grid of feature {self.name!r}"
                )
            return self.kind.grid_value(i)
        if value not in self.kind.options:
            raise ActionError(
                f"value {value!r} not an option of feature {self.name!r}"
            )
        return value


@dataclass(frozen=True)
class FeatureSet:
    features: tuple[FeatureSpec, ...]
    version: str = "v1"

    def __post_init__(self) -> None:
        names = [f.name for f in self.features]
        seen = set()
        for n in names:
            if n in seen:
                raise SchemaError(f"duplicate feature name {n!r}")
            seen.add(n)
        if not any(f.actionable for f in self.features):
            raise SchemaError("schema needs at least one actionable feature")

    @cached_property
    def by_name(self) -> dict[str, FeatureSpec]:
        return {f.name: f for f in self.features}

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {f.name: i for i, f in enumerate(self.features)}

    @cached_property
    def actionable_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features if f.actionable)

    @cached_property
    def encoded_length(self) -> int:
        return sum(f.encoded_width() for f in self.features)

    @cached_property
    def encoded_offsets(self) -> dict[str, int]:
        offsets, pos = {}, 0
        for f in self.features:
            offsets[f.name] = pos
            pos += f.encoded_width()
        return offsets

    def __len__(self) -> int:
        return len(self.features)

    def require(self, name: str) -> FeatureSpec:
        spec = self.by_name.get(name)
        if spec is None:
            raise SchemaError(f"unknown feature {name!r}")
        return spec


@dataclass(frozen=True)
class UserProfile:
    """One value per schema feature; numeric values sit exactly on the grid."""

    values: Mapping[str, Value]

    @staticmethod
    def validate(
        values: Mapping[str, Value], schema: FeatureSet, snap: bool = False
    ) -> "UserProfile":
        """Check one in-domain value per feature and canonicalize numerics.

        With ``snap=True`` in-range numerics are snapped to the nearest grid
        point (ties toward min) instead of being required to sit on it.
        """
        extra = set(values) - set(schema.by_name)
        if extra:
            raise SchemaError(f"profile has unknown features: {sorted(extra)}")
        out: dict[str, Value] = {}
        for spec in schema.features:
            if spec.name not in values:
                raise SchemaError(f"profile is missing feature {spec.name!r}")
            v = values[spec.name]
            if spec.is_numeric:
                kind = spec.kind
                if not kind.contains(v):  # type: ignore[arg-type]
                    raise SchemaError(
                        f"feature {spec.name!r}: value {v!r} outside "
                        f"[{kind.min}, {kind.max}]"
                    )
                if snap:
                    out[spec.name] = kind.snap(float(v))  # type: ignore[arg-type]
                else:
                    out[spec.name] = spec.canonical(v)
            else:
                if v not in spec.kind.options:
                    raise SchemaError(
                        f"feature {spec.name!r}: {v!r} is not a known option"
                    )
                out[spec.name] = v
        return UserProfile(out)

    def value_tuple(self, schema: FeatureSet) -> tuple[Value, ...]:
        return tuple(self.values[f.name] for f in schema.features)

    def with_value(self, name: str, value: Value) -> "UserProfile":
        new = dict(self.values)
        new[name] = value
        return UserProfile(new)

    def __getitem__(self, name: str) -> Value:
        return self.values[name]


@dataclass(frozen=True)
class Action:
    """Set one actionable feature to a target value in its domain."""

    feature: str
    target: Value


@dataclass(frozen=True)
class Intervention:
    """Ordered sequence of actions, at most one per feature."""

    actions: tuple[Action, ...] = ()

    def __post_init__(self) -> None:
        feats = [a.feature for a in self.actions]
        if len(set(feats)) != len(feats):
            dupes = sorted({f for f in feats if feats.count(f) > 1})
            raise ActionError(f"intervention touches features twice: {dupes}")

    @property
    def features(self) -> frozenset[str]:
        return frozenset(a.feature for a in self.actions)

    def __len__(self) -> int:
        return len(self.actions)

    def sort_key(self, schema: FeatureSet) -> tuple:
        """Canonical comparison key: feature order then target order."""
        keys = []
        for a in self.actions:
            spec = schema.require(a.feature)
            if spec.is_numeric:
                vk: float | int = spec.kind.grid_index(a.target) or 0  # type: ignore[arg-type]
            else:
                vk = spec.kind.options.index(a.target)  # type: ignore[arg-type]
            keys.append((schema.index_of[a.feature], vk))
        return tuple(sorted(keys))


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSet
    rows: tuple[tuple[UserProfile, int], ...]

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(lbl for _, lbl in self.rows)


# -- schema document -------------------------------------------------------


def parse_schema(text: str) -> FeatureSet:
    """Parse the JSON schema document into a validated FeatureSet."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "features" not in doc:
        raise SchemaError("schema document must be an object with a 'features' list")
    entries = doc["features"]
    if not isinstance(entries, list) or not entries:
        raise SchemaError("'features' must be a non-empty list")
    specs = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaError(f"feature entry {i} is not an object")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise SchemaError(f"feature entry {i} is missing a name")
        kind_tag = entry.get("kind")
        if kind_tag == "numeric":
            missing = [k for k in ("min", "max", "step") if k not in entry]
            if missing:
                raise SchemaError(f"feature {name!r}: missing numeric fields {missing}")
            kind: Kind = NumericKind(
                min=float(entry["min"]),
                max=float(entry["max"]),
                step=float(entry["step"]),
                unit=str(entry.get("unit", "")),
            )
        elif kind_tag == "categorical":
            opts = entry.get("options")
            if not isinstance(opts, list) or not opts:
                raise SchemaError(f"feature {name!r}: empty or missing option list")
            kind = CategoricalKind(options=tuple(str(o) for o in opts))
        else:
            raise SchemaError(f"feature {name!r}: unknown kind tag {kind_tag!r}")
        specs.append(
            FeatureSpec(
                name=name,
                kind=kind,
                actionable=bool(entry.get("actionable", False)),
                display_name=str(entry.get("display_name", "")),
            )
        )
    return FeatureSet(features=tuple(specs), version=str(doc.get("version", "v1")))


def dump_schema(schema: FeatureSet) -> str:
    """Inverse of parse_schema; emits the JSON schema document."""
    entries = []
    for f in schema.features:
        entry: dict = {"name": f.name, "actionable": f.actionable,
                       "display_name": f.display_name}
        if f.is_numeric:
            k = f.kind
            entry.update(kind="numeric", min=k.min, max=k.max, step=k.step,
                         unit=k.unit)
        else:
            entry.update(kind="categorical", options=list(f.kind.options))
        entries.append(entry)
    return json.dumps({"version": schema.version, "features": entries}, indent=2)


# -- dataset CSV ------------------------------------------------------------


def ingest_csv(text: str, schema: FeatureSet, label_column: str = "label") -> Dataset:
    """Load a comma-delimited table, snapping numerics to the feature grid."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("empty CSV document") from None
    required = set(schema.by_name) | {label_column}
    missing = required - set(header)
    if missing:
        raise DatasetError(f"missing columns: {sorted(missing)}")
    extra = set(header) - required
    if extra:
        raise DatasetError(f"unexpected columns: {sorted(extra)}")
    col = {name: header.index(name) for name in header}

    rows = []
    for ridx, record in enumerate(reader):
        if len(record) != len(header):
            raise DatasetError(f"row {ridx}: expected {len(header)} fields")
        values: dict[str, Value] = {}
        for spec in schema.features:
            raw = record[col[spec.name]]
            if spec.is_numeric:
                try:
                    v = float(raw)
                except ValueError:
                    raise DatasetError(
                        f"row {ridx}: feature {spec.name!r}: {raw!r} is not numeric"
                    ) from None
                if not spec.kind.contains(v):
                    raise DatasetError(
                        f"row {ridx}: feature {spec.name!r}: value {raw} outside "
                        f"[{spec.kind.min}, {spec.kind.max}]"
                    )
                values[spec.name] = spec.kind.snap(v)
            else:
                if raw not in spec.kind.options:
                    raise DatasetError(
                        f"row {ridx}: feature {spec.name!r}: {raw!r} is not an option"
                    )
                values[spec.name] = raw
        raw_label = record[col[label_column]]
        if raw_label not in ("0", "1"):
            raise DatasetError(f"row {ridx}: non-binary label {raw_label!r}")
        rows.append((UserProfile(values), int(raw_label)))
    return Dataset(schema=schema, rows=tuple(rows))


def emit_csv(dataset: Dataset, label_column: str = "label") -> str:
    """Inverse of ingest_csv; floats use repr so the round-trip is bit-exact."""
    schema = dataset.schema
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f.name for f in schema.features] + [label_column])
    for profile, label in dataset.rows:
        record = []
        for f in schema.features:
            v = profile[f.name]
            record.append(repr(float(v)) if f.is_numeric else v)
        record.append(str(label))
        writer.writerow(record)
    return buf.getvalue()


# -- encoding and application ----------------------------------------------


def encode(profile: UserProfile, schema: FeatureSet) -> np.ndarray:
    """Min-max scaled numerics and one-hot categoricals, in schema order."""
    out = np.zeros(schema.encoded_length, dtype=np.float64)
    pos = 0
    for spec in schema.features:
        v = profile[spec.name]
        if spec.is_numeric:
            k = spec.kind
            out[pos] = (float(v) - k.min) / k.span
            pos += 1
        else:
            out[pos + spec.kind.options.index(v)] = 1.0
            pos += spec.encoded_width()
    return out


def encode_batch(profiles: Iterable[UserProfile], schema: FeatureSet) -> np.ndarray:
    rows = [encode(p, schema) for p in profiles]
    if not rows:
        return np.zeros((0, schema.encoded_length), dtype=np.float64)
    return np.stack(rows)


def apply_action(x: UserProfile, a: Action, schema: FeatureSet) -> UserProfile:
    spec = schema.require(a.feature)
    if not spec.actionable:
        raise ActionError(f"feature {a.feature!r} is not actionable")
    target = spec.canonical(a.target)
    if target == x[a.feature]:
        raise ActionError(
            f"action on {a.feature!r} targets the current value {target!r}"
        )
    return x.with_value(a.feature, target)


def apply_intervention(
    intervention: Intervention, x: UserProfile, schema: FeatureSet
) -> UserProfile:
    current = x
    for i, action in enumerate(intervention.actions):
        try:
            current = apply_action(current, action, schema)
        except ActionError as exc:
            raise ActionError(f"action {i}: {exc}") from exc
    return current
