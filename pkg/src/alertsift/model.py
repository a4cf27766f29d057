"""Shared domain types for the alert-suppression pipeline.

Every value that crosses a layer boundary is defined here: provenance-tagged
measurements, the unified per-epoch patient record, the three inter-layer
messages (candidate alert, specialist claim, system decision), and the JSON
codecs for the dataset file formats. Types carry no behaviour beyond
construction, validation, and serialization; all are immutable once built
and safe to share across concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Mapping, TextIO

__all__ = [
    "AccelLevel",
    "AgentClaim",
    "AgentDomain",
    "AlertType",
    "CandidateAlert",
    "DeviceStatus",
    "EnumParseError",
    "Epoch",
    "InvariantViolation",
    "PatientContext",
    "Position",
    "ProvenanceTag",
    "Recommendation",
    "ResolutionPath",
    "RiskLevel",
    "SelfReportedActivity",
    "SystemDecision",
    "TaggedValue",
    "Verdict",
    "VeritasRecord",
    "DEVICE_STREAM_FIELDS",
    "HR_BOUNDS",
    "PATIENT_ID_RANGE",
    "SPO2_BOUNDS",
    "DATA_WINDOW",
    "format_timestamp",
    "parse_enum",
    "parse_timestamp",
    "read_contexts_json",
    "read_epochs_jsonl",
    "validate_epoch",
    "write_contexts_json",
    "write_epochs_jsonl",
]

import json


class EnumParseError(ValueError):
    """Raised when an input string is outside a closed enumeration."""


class InvariantViolation(ValueError):
    """Raised when a domain type is constructed in an invalid state."""


class ProvenanceTag(str, Enum):
    """Trust origin of a datum. Every tagged value carries exactly one."""

    DEVICE_VERIFIED = "device_verified"
    PATIENT_REPORTED = "patient_reported"
    EHR_DERIVED = "ehr_derived"
    INFERRED = "inferred"


class DeviceStatus(str, Enum):
    OK = "ok"
    MOTION_ARTEFACT = "motion_artefact"
    PROBE_COVER = "probe_cover"
    SYSTEM_FLAG = "system_flag"
    THRESHOLD_MARGINAL = "threshold_marginal"
    DUPLICATE_ALERT = "duplicate_alert"


class AccelLevel(str, Enum):
    STILL = "still"
    LIGHT = "light"
    VIGOROUS = "vigorous"


class Position(str, Enum):
    UPRIGHT = "upright"
    SUPINE = "supine"
    PRONE = "prone"
    LATERAL = "lateral"


class SelfReportedActivity(str, Enum):
    RESTING = "resting"
    WALKING = "walking"
    EXERCISING = "exercising"


class AlertType(str, Enum):
    LOW_SPO2 = "low_spo2"
    HIGH_HR = "high_hr"
    LOW_HR = "low_hr"
    SIGNAL_QUALITY = "signal_quality"


class AgentDomain(str, Enum):
    """The six specialist domains, in canonical evaluation order."""

    PROBE_INTEGRITY = "probe_integrity"
    ACTIVITY_INTEGRITY = "activity_integrity"
    TACHYCARDIA = "tachycardia"
    BRADYCARDIA = "bradycardia"
    COPD = "copd"
    NOCTURNAL = "nocturnal"


class Recommendation(str, Enum):
    SUPPRESS = "suppress"
    ESCALATE = "escalate"
    INDETERMINATE = "indeterminate"


class RiskLevel(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


class Verdict(str, Enum):
    SUPPRESS = "suppress"
    ESCALATE = "escalate"


class ResolutionPath(str, Enum):
    SINGLE_DOMAIN = "single_domain"
    WEIGHTED_AGGREGATION = "weighted_aggregation"
    AMBIGUITY_DEFAULT = "ambiguity_default"
    DEBOUNCED = "debounced"


_EnumT = Any


def parse_enum(cls: type, raw: Any) -> _EnumT:
    """Parse ``raw`` into a member of the closed enumeration ``cls``.

    Raises EnumParseError naming the offending value and the allowed set;
    unknown strings in input files must never round into a default.
    """
    try:
        return cls(raw)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise EnumParseError(
            f"{cls.__name__}: {raw!r} is not one of [{allowed}]"
        ) from None


# Physiological clamps for generated data; wide enough to admit every
# device-failure value that occurs in the scenario catalogue.
SPO2_BOUNDS = (70.0, 100.0)
HR_BOUNDS = (25.0, 220.0)
PATIENT_ID_RANGE = (3847291, 3847388)
DATA_WINDOW = (
    datetime(2022, 6, 1, tzinfo=timezone.utc),
    datetime(2022, 9, 1, tzinfo=timezone.utc),
)

# Epoch fields whose provenance must be device_verified after assembly.
DEVICE_STREAM_FIELDS = ("spo2", "hr", "accel_level", "device_status")


def format_timestamp(ts: datetime) -> str:
    """Render a UTC minute-resolution timestamp as ``YYYY-MM-DDTHH:MM:00Z``."""
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:00Z")


def parse_timestamp(raw: str) -> datetime:
    text = raw.replace("Z", "+00:00")
    try:
        ts = datetime.fromisoformat(text)
    except ValueError as exc:
        raise InvariantViolation(f"bad timestamp {raw!r}: {exc}") from None
    if ts.tzinfo is None:
        raise InvariantViolation(f"timestamp {raw!r} is not timezone-aware")
    ts = ts.astimezone(timezone.utc)
    if ts.second or ts.microsecond:
        raise InvariantViolation(f"timestamp {raw!r} is not minute-resolution")
    return ts


@dataclass(frozen=True)
class TaggedValue:
    """A measurement or fact annotated with its trust origin.

    ``provenance`` is immutable after construction; there is no untagged
    state anywhere in the system.
    """

    value: Any
    provenance: ProvenanceTag
    source_id: str
    observed_at: datetime

    def __post_init__(self) -> None:
        if not isinstance(self.provenance, ProvenanceTag):
            raise InvariantViolation("TaggedValue requires a ProvenanceTag")

    def to_dict(self) -> dict[str, Any]:
        value = self.value
        if isinstance(value, Enum):
            value = value.value
        return {
            "value": value,
            "provenance": self.provenance.value,
            "source_id": self.source_id,
            "observed_at": format_timestamp(self.observed_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], value_type: type | None = None) -> "TaggedValue":
        value = data["value"]
        if value_type is not None and value is not None:
            value = parse_enum(value_type, value) if issubclass(value_type, Enum) else value_type(value)
        return cls(
            value=value,
            provenance=parse_enum(ProvenanceTag, data["provenance"]),
            source_id=str(data["source_id"]),
            observed_at=parse_timestamp(data["observed_at"]),
        )

    def retagged(self, provenance: ProvenanceTag) -> "TaggedValue":
        """Copy with a different provenance tag (test hook; tags never mutate)."""
        return TaggedValue(self.value, provenance, self.source_id, self.observed_at)


@dataclass(frozen=True)
class Epoch:
    """One-minute summarized measurement row for one patient.

    ``ambient_condition`` is carried through the schema for forward
    compatibility but is never consumed by any rule.
    """

    patient_id: int
    timestamp: datetime
    spo2: float
    hr: float
    accel_level: AccelLevel
    device_status: DeviceStatus
    probe_cover_present: bool
    position: Position
    self_reported_activity: SelfReportedActivity | None = None
    ambient_condition: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "patient_id": self.patient_id,
            "timestamp": format_timestamp(self.timestamp),
            "spo2": self.spo2,
            "hr": self.hr,
            "accel_level": self.accel_level.value,
            "device_status": self.device_status.value,
            "probe_cover_present": self.probe_cover_present,
            "position": self.position.value,
            "self_reported_activity": (
                self.self_reported_activity.value if self.self_reported_activity else None
            ),
            "ambient_condition": self.ambient_condition,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Epoch":
        activity = data.get("self_reported_activity")
        return cls(
            patient_id=int(data["patient_id"]),
            timestamp=parse_timestamp(data["timestamp"]),
            spo2=float(data["spo2"]),
            hr=float(data["hr"]),
            accel_level=parse_enum(AccelLevel, data["accel_level"]),
            device_status=parse_enum(DeviceStatus, data["device_status"]),
            probe_cover_present=bool(data["probe_cover_present"]),
            position=parse_enum(Position, data["position"]),
            self_reported_activity=(
                parse_enum(SelfReportedActivity, activity) if activity is not None else None
            ),
            ambient_condition=data.get("ambient_condition"),
        )


def validate_epoch(epoch: Epoch) -> list[str]:
    """Check every epoch invariant; returns a list of violations (empty = ok).

    Violations name the field and the bound so callers can report precisely.
    """
    violations: list[str] = []
    lo, hi = SPO2_BOUNDS
    if not lo <= epoch.spo2 <= hi:
        violations.append(f"spo2 out of [{lo:g},{hi:g}]: {epoch.spo2}")
    lo, hi = HR_BOUNDS
    if not lo <= epoch.hr <= hi:
        violations.append(f"hr out of [{lo:g},{hi:g}]: {epoch.hr}")
    lo_id, hi_id = PATIENT_ID_RANGE
    if not lo_id <= epoch.patient_id <= hi_id:
        violations.append(f"patient_id out of [{lo_id},{hi_id}]: {epoch.patient_id}")
    start, end = DATA_WINDOW
    if not start <= epoch.timestamp < end:
        violations.append(
            f"timestamp out of [{format_timestamp(start)},{format_timestamp(end)}): "
            f"{format_timestamp(epoch.timestamp)}"
        )
    if epoch.timestamp.second or epoch.timestamp.microsecond:
        violations.append("timestamp not minute-resolution")
    return violations


@dataclass(frozen=True)
class PatientContext:
    """EHR-derived per-patient baseline facts."""

    patient_id: int
    copd_documented: bool
    baseline_spo2: float | None = None
    baseline_hr: float | None = None
    rate_limiting_medication: bool = False

    def __post_init__(self) -> None:
        if self.copd_documented and self.baseline_spo2 is None:
            raise InvariantViolation(
                "documented COPD requires a baseline_spo2 in the patient context"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "patient_id": self.patient_id,
            "copd_documented": self.copd_documented,
            "baseline_spo2": self.baseline_spo2,
            "baseline_hr": self.baseline_hr,
            "rate_limiting_medication": self.rate_limiting_medication,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PatientContext":
        return cls(
            patient_id=int(data["patient_id"]),
            copd_documented=bool(data["copd_documented"]),
            baseline_spo2=(
                float(data["baseline_spo2"]) if data.get("baseline_spo2") is not None else None
            ),
            baseline_hr=(
                float(data["baseline_hr"]) if data.get("baseline_hr") is not None else None
            ),
            rate_limiting_medication=bool(data.get("rate_limiting_medication", False)),
        )


# Decoders for the typed payload of each tagged record field.
_EPOCH_FIELD_TYPES: dict[str, type | None] = {
    "spo2": float,
    "hr": float,
    "accel_level": AccelLevel,
    "device_status": DeviceStatus,
    "probe_cover_present": bool,
    "position": Position,
    "self_reported_activity": SelfReportedActivity,
    "ambient_condition": str,
}
_CONTEXT_FIELD_TYPES: dict[str, type | None] = {
    "copd_documented": bool,
    "baseline_spo2": float,
    "baseline_hr": float,
    "rate_limiting_medication": bool,
}


@dataclass(frozen=True)
class VeritasRecord:
    """Unified per-epoch patient record with every field provenance-tagged.

    Measurement and context fields live in mappings keyed by field name so a
    field can be structurally absent (optional inputs, or excluded by the
    specialist projection). ``patient_id`` and ``timestamp`` are record
    coordinates, not measurements, and are not tagged.
    """

    patient_id: int
    timestamp: datetime
    epoch_fields: Mapping[str, TaggedValue]
    context_fields: Mapping[str, TaggedValue]
    conversation_flags: tuple[TaggedValue, ...] = ()

    def __post_init__(self) -> None:
        unknown = set(self.epoch_fields) - set(_EPOCH_FIELD_TYPES)
        if unknown:
            raise InvariantViolation(f"unknown epoch fields: {sorted(unknown)}")
        unknown = set(self.context_fields) - set(_CONTEXT_FIELD_TYPES)
        if unknown:
            raise InvariantViolation(f"unknown context fields: {sorted(unknown)}")

    def all_tagged(self) -> Iterable[tuple[str, TaggedValue]]:
        yield from self.epoch_fields.items()
        yield from self.context_fields.items()
        for i, flag in enumerate(self.conversation_flags):
            yield f"conversation_flags[{i}]", flag

    def to_dict(self) -> dict[str, Any]:
        return {
            "patient_id": self.patient_id,
            "timestamp": format_timestamp(self.timestamp),
            "epoch_fields": {k: tv.to_dict() for k, tv in self.epoch_fields.items()},
            "context_fields": {k: tv.to_dict() for k, tv in self.context_fields.items()},
            "conversation_flags": [tv.to_dict() for tv in self.conversation_flags],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "VeritasRecord":
        epoch_fields = {
            k: TaggedValue.from_dict(v, _EPOCH_FIELD_TYPES.get(k))
            for k, v in data["epoch_fields"].items()
        }
        context_fields = {
            k: TaggedValue.from_dict(v, _CONTEXT_FIELD_TYPES.get(k))
            for k, v in data["context_fields"].items()
        }
        return cls(
            patient_id=int(data["patient_id"]),
            timestamp=parse_timestamp(data["timestamp"]),
            epoch_fields=epoch_fields,
            context_fields=context_fields,
            conversation_flags=tuple(
                TaggedValue.from_dict(v, str) for v in data["conversation_flags"]
            ),
        )


@dataclass(frozen=True)
class CandidateAlert:
    """Threshold-exceedance message emitted by the detection layer.

    Every alert type carries the tagged value that triggered it, so the
    provenance of the trigger travels with the alert.
    """

    alert_types: frozenset[AlertType]
    triggering_values: Mapping[AlertType, TaggedValue]
    record_ref: VeritasRecord
    raised_at: datetime

    def __post_init__(self) -> None:
        if not self.alert_types:
            raise InvariantViolation("CandidateAlert requires at least one alert type")
        for alert_type in self.alert_types:
            trigger = self.triggering_values.get(alert_type)
            if trigger is None:
                raise InvariantViolation(f"missing triggering value for {alert_type.value}")
            if trigger.provenance is ProvenanceTag.INFERRED:
                raise InvariantViolation(
                    f"alert type {alert_type.value} triggered by an inferred value"
                )

    def to_dict(self) -> dict[str, Any]:
        return {
            "alert_types": sorted(t.value for t in self.alert_types),
            "triggering_values": {
                t.value: tv.to_dict() for t, tv in sorted(self.triggering_values.items())
            },
            "record_ref": self.record_ref.to_dict(),
            "raised_at": format_timestamp(self.raised_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CandidateAlert":
        types = frozenset(parse_enum(AlertType, t) for t in data["alert_types"])
        trigger_field = {
            AlertType.LOW_SPO2: "spo2",
            AlertType.HIGH_HR: "hr",
            AlertType.LOW_HR: "hr",
            AlertType.SIGNAL_QUALITY: "device_status",
        }
        triggers = {
            parse_enum(AlertType, t): TaggedValue.from_dict(
                v, _EPOCH_FIELD_TYPES[trigger_field[parse_enum(AlertType, t)]]
            )
            for t, v in data["triggering_values"].items()
        }
        return cls(
            alert_types=types,
            triggering_values=triggers,
            record_ref=VeritasRecord.from_dict(data["record_ref"]),
            raised_at=parse_timestamp(data["raised_at"]),
        )


@dataclass(frozen=True)
class AgentClaim:
    """A specialist's recommendation for one routed alert."""

    domain: AgentDomain
    recommendation: Recommendation
    confidence: float
    risk_level: RiskLevel
    rationale_codes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantViolation(f"confidence out of [0,1]: {self.confidence}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain": self.domain.value,
            "recommendation": self.recommendation.value,
            "confidence": self.confidence,
            "risk_level": self.risk_level.value,
            "rationale_codes": list(self.rationale_codes),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AgentClaim":
        return cls(
            domain=parse_enum(AgentDomain, data["domain"]),
            recommendation=parse_enum(Recommendation, data["recommendation"]),
            confidence=float(data["confidence"]),
            risk_level=parse_enum(RiskLevel, data["risk_level"]),
            rationale_codes=tuple(data.get("rationale_codes", ())),
        )


@dataclass(frozen=True)
class SystemDecision:
    """The forced binary outcome for one epoch; never indeterminate."""

    verdict: Verdict
    contributing_claims: tuple[AgentClaim, ...]
    resolution_path: ResolutionPath
    decided_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "contributing_claims": [c.to_dict() for c in self.contributing_claims],
            "resolution_path": self.resolution_path.value,
            "decided_at": format_timestamp(self.decided_at),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SystemDecision":
        return cls(
            verdict=parse_enum(Verdict, data["verdict"]),
            contributing_claims=tuple(
                AgentClaim.from_dict(c) for c in data["contributing_claims"]
            ),
            resolution_path=parse_enum(ResolutionPath, data["resolution_path"]),
            decided_at=parse_timestamp(data["decided_at"]),
        )


# ---------------------------------------------------------------------------
# Dataset file formats: epochs as JSON Lines, contexts as a keyed sidecar.
# ---------------------------------------------------------------------------


def write_epochs_jsonl(epochs: Iterable[Epoch], fp: TextIO) -> None:
    for epoch in epochs:
        fp.write(json.dumps(epoch.to_dict(), separators=(",", ":")) + "\n")


def read_epochs_jsonl(fp: TextIO) -> list[Epoch]:
    epochs = []
    for line_no, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            epochs.append(Epoch.from_dict(json.loads(line)))
        except (KeyError, json.JSONDecodeError) as exc:
            raise InvariantViolation(f"epochs line {line_no}: {exc}") from None
    return epochs


def write_contexts_json(contexts: Mapping[int, PatientContext], fp: TextIO) -> None:
    payload = {str(pid): ctx.to_dict() for pid, ctx in sorted(contexts.items())}
    fp.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_contexts_json(fp: TextIO) -> dict[int, PatientContext]:
    raw = json.load(fp)
    return {int(pid): PatientContext.from_dict(data) for pid, data in raw.items()}
