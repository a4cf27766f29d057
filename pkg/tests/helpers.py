"""Shared builders for pipeline tests.

Records are built through the real assembly path so tag assignment and
projection behave exactly as in production; tests that need a tampered
record (e.g. an inferred-tagged field) rebuild it field by field.
"""

from __future__ import annotations

from datetime import datetime, timezone

from alertsift.assembly import (
    SourceBundle,
    SpecialistView,
    assemble,
    project_for_specialists,
)
from alertsift.model import (
    AccelLevel,
    DeviceStatus,
    Epoch,
    PatientContext,
    Position,
    ProvenanceTag,
    SelfReportedActivity,
    VeritasRecord,
)
from alertsift.routing import route
from alertsift.sentinel import SentinelConfig, detect

DAYTIME = datetime(2022, 6, 15, 14, 0, tzinfo=timezone.utc)
NIGHT = datetime(2022, 6, 15, 2, 30, tzinfo=timezone.utc)
PATIENT = 3847291


def make_epoch(
    ts: datetime = DAYTIME,
    patient_id: int = PATIENT,
    spo2: float = 97.0,
    hr: float = 72.0,
    accel: AccelLevel = AccelLevel.STILL,
    status: DeviceStatus = DeviceStatus.OK,
    probe_cover: bool = False,
    position: Position = Position.UPRIGHT,
    activity: SelfReportedActivity | None = None,
    ambient: str | None = None,
) -> Epoch:
    return Epoch(
        patient_id=patient_id,
        timestamp=ts,
        spo2=spo2,
        hr=hr,
        accel_level=accel,
        device_status=status,
        probe_cover_present=probe_cover,
        position=position,
        self_reported_activity=activity,
        ambient_condition=ambient,
    )


def make_context(
    patient_id: int = PATIENT,
    copd: bool = False,
    baseline_spo2: float | None = None,
    baseline_hr: float | None = None,
    med: bool = False,
) -> PatientContext:
    return PatientContext(
        patient_id=patient_id,
        copd_documented=copd,
        baseline_spo2=baseline_spo2,
        baseline_hr=baseline_hr,
        rate_limiting_medication=med,
    )


def make_bundle(epoch: Epoch, context: PatientContext | None = None) -> SourceBundle:
    return SourceBundle(
        ehr=context or make_context(patient_id=epoch.patient_id),
        conversation_log=(),
        vitals_stream=(epoch,),
        patient_reported=(),
    )


def make_record(epoch: Epoch, context: PatientContext | None = None) -> VeritasRecord:
    return assemble(make_bundle(epoch, context), epoch.timestamp)


def make_view(epoch: Epoch, context: PatientContext | None = None) -> SpecialistView:
    return project_for_specialists(make_record(epoch, context))


def retag_field(record: VeritasRecord, name: str, tag: ProvenanceTag) -> VeritasRecord:
    """Rebuild a record with one epoch field's provenance replaced."""
    epoch_fields = dict(record.epoch_fields)
    epoch_fields[name] = epoch_fields[name].retagged(tag)
    return VeritasRecord(
        patient_id=record.patient_id,
        timestamp=record.timestamp,
        epoch_fields=epoch_fields,
        context_fields=record.context_fields,
        conversation_flags=record.conversation_flags,
    )


def detect_and_route(epoch: Epoch, context: PatientContext | None = None):
    """Run the front half of the pipeline for one epoch."""
    cfg = SentinelConfig()
    view = make_view(epoch, context)
    alert = detect(view, cfg)
    routing = route(alert, cfg) if alert is not None else None
    return view, alert, routing
