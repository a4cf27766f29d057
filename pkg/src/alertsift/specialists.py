"""The six deterministic specialist evaluators.

Each evaluator is a pure, guardrail-bounded rule table from (routed alert,
specialist input view) to a claim. Hard clinical bounds dominate context:
for example no combination of context fields can suppress an SpO2 reading
below the COPD floor. Specialists may return indeterminate; turning that
into a binary verdict is the aggregation layer's job, not theirs.

Numeric rule parameters live in SpecialistConfig so every bound is
auditable and tunable in one place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

from .assembly import SpecialistView
from .model import (
    AccelLevel,
    AgentClaim,
    AgentDomain,
    AlertType,
    CandidateAlert,
    DeviceStatus,
    InvariantViolation,
    Position,
    Recommendation,
    RiskLevel,
    SelfReportedActivity,
)
from .routing import MOTION_REPORTS, RoutingDecision, in_nocturnal_window

__all__ = [
    "NotRoutedHere",
    "SpecialistConfig",
    "evaluate_activity_integrity",
    "evaluate_bradycardia",
    "evaluate_copd",
    "evaluate_domain",
    "evaluate_nocturnal",
    "evaluate_probe_integrity",
    "evaluate_tachycardia",
]

DEFAULT_NOCTURNAL_BASELINE_SPO2 = 96.0


class NotRoutedHere(RuntimeError):
    """A claim was requested for a domain the alert was not routed to."""


@dataclass(frozen=True)
class SpecialistConfig:
    copd_acceptable_spo2: float = 86.0
    hr_activity_allowance: float = 20.0
    nocturnal_dip_allowance: float = 3.0
    bradycardia_personal_floor: float = 40.0
    high_confidence: float = 0.9
    low_confidence: float = 0.4

    def __post_init__(self) -> None:
        if not 0.0 <= self.low_confidence < self.high_confidence <= 1.0:
            raise InvariantViolation("require 0 <= low_confidence < high_confidence <= 1")
        if not self.copd_acceptable_spo2 < 94.0:
            raise InvariantViolation("copd_acceptable_spo2 must sit below the 94 screen")

    def to_dict(self) -> dict[str, Any]:
        return {
            "copd_acceptable_spo2": self.copd_acceptable_spo2,
            "hr_activity_allowance": self.hr_activity_allowance,
            "nocturnal_dip_allowance": self.nocturnal_dip_allowance,
            "bradycardia_personal_floor": self.bradycardia_personal_floor,
            "high_confidence": self.high_confidence,
            "low_confidence": self.low_confidence,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SpecialistConfig":
        defaults = cls()
        return cls(
            **{
                name: float(data.get(name, getattr(defaults, name)))
                for name in defaults.to_dict()
            }
        )


def _claim(
    domain: AgentDomain,
    recommendation: Recommendation,
    confidence: float,
    *codes: str,
) -> AgentClaim:
    risk = {
        Recommendation.SUPPRESS: RiskLevel.LOW,
        Recommendation.INDETERMINATE: RiskLevel.MEDIUM,
        Recommendation.ESCALATE: RiskLevel.HIGH,
    }[recommendation]
    return AgentClaim(domain, recommendation, confidence, risk, tuple(codes))


def evaluate_probe_integrity(
    alert: CandidateAlert, view: SpecialistView, cfg: SpecialistConfig
) -> AgentClaim:
    """Suppress on positive artefact evidence, stay indeterminate otherwise.

    motion_artefact / probe_cover are direct artefact evidence; system_flag
    carries no artefact classification; an ok status means the probe route
    was a hypothesis with nothing behind it; threshold_marginal and
    duplicate_alert describe the alert, not the probe.
    """
    domain = AgentDomain.PROBE_INTEGRITY
    status = view.value("device_status")
    if status in (DeviceStatus.MOTION_ARTEFACT, DeviceStatus.PROBE_COVER):
        return _claim(domain, Recommendation.SUPPRESS, cfg.high_confidence, "artefact_flagged")
    if status is DeviceStatus.SYSTEM_FLAG:
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "system_flag_no_context"
        )
    if status in (DeviceStatus.THRESHOLD_MARGINAL, DeviceStatus.DUPLICATE_ALERT):
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "ambiguous_device_status"
        )
    return _claim(domain, Recommendation.INDETERMINATE, cfg.low_confidence, "no_artefact_evidence")


def evaluate_activity_integrity(
    alert: CandidateAlert, view: SpecialistView, cfg: SpecialistConfig
) -> AgentClaim:
    """Reconcile accelerometer motion with the patient's own account.

    Corroborated or uncontradicted motion explains the anomaly; a still
    accelerometer with a claimed walk is a contradiction worth review; and
    with no motion story at all (still and resting, or motion the patient
    explicitly denies) the anomaly has no benign activity explanation.
    """
    domain = AgentDomain.ACTIVITY_INTEGRITY
    accel = view.value("accel_level")
    reported = view.value("self_reported_activity")
    if accel is None:
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "missing_accelerometer"
        )
    moving = accel is not AccelLevel.STILL
    if moving and (reported in MOTION_REPORTS or reported is None):
        code = "motion_corroborated" if reported in MOTION_REPORTS else "motion_uncontradicted"
        return _claim(domain, Recommendation.SUPPRESS, cfg.high_confidence, code)
    if not moving and reported in MOTION_REPORTS:
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "activity_contradiction"
        )
    if moving and reported is SelfReportedActivity.RESTING:
        return _claim(
            domain, Recommendation.ESCALATE, cfg.high_confidence, "activity_denied_by_patient"
        )
    return _claim(
        domain, Recommendation.ESCALATE, cfg.high_confidence, "no_activity_explanation"
    )


def evaluate_tachycardia(
    alert: CandidateAlert, view: SpecialistView, cfg: SpecialistConfig
) -> AgentClaim:
    """Suppress high HR explained by motion, baseline allowance, or a
    non-clean device status; an isolated high reading escalates."""
    domain = AgentDomain.TACHYCARDIA
    hr = view.value("hr")
    if hr is None:
        return _claim(domain, Recommendation.INDETERMINATE, cfg.low_confidence, "missing_heart_rate")
    accel = view.value("accel_level")
    if accel is not None and accel is not AccelLevel.STILL:
        return _claim(domain, Recommendation.SUPPRESS, cfg.high_confidence, "activity_context")
    baseline = view.value("baseline_hr")
    if baseline is not None and hr <= baseline + cfg.hr_activity_allowance:
        return _claim(
            domain, Recommendation.SUPPRESS, cfg.high_confidence, "within_baseline_allowance"
        )
    status = view.value("device_status")
    if status is not None and status is not DeviceStatus.OK:
        return _claim(domain, Recommendation.SUPPRESS, cfg.high_confidence, "device_status_context")
    return _claim(domain, Recommendation.ESCALATE, cfg.high_confidence, "isolated_high_hr")


def evaluate_bradycardia(
    alert: CandidateAlert, view: SpecialistView, cfg: SpecialistConfig
) -> AgentClaim:
    """Suppress low HR above the personal floor when rate-limiting
    medication or the nocturnal window explains it; everything else,
    including any reading below the floor, escalates."""
    domain = AgentDomain.BRADYCARDIA
    hr = view.value("hr")
    if hr is None:
        return _claim(domain, Recommendation.INDETERMINATE, cfg.low_confidence, "missing_heart_rate")
    if hr < cfg.bradycardia_personal_floor:
        return _claim(domain, Recommendation.ESCALATE, cfg.high_confidence, "below_personal_floor")
    codes = []
    if view.value("rate_limiting_medication", default=False) is True:
        codes.append("medication_context")
    if in_nocturnal_window(view.timestamp):
        codes.append("nocturnal_context")
    if codes:
        return _claim(domain, Recommendation.SUPPRESS, cfg.high_confidence, *codes)
    return _claim(domain, Recommendation.ESCALATE, cfg.high_confidence, "unexplained_bradycardia")


def evaluate_copd(
    alert: CandidateAlert, view: SpecialistView, cfg: SpecialistConfig
) -> AgentClaim:
    """Judge low SpO2 against the patient's own floor.

    The floor is the higher of the global acceptable bound and two points
    below the documented baseline, so neither a generous baseline nor a
    missing one can pull the guardrail under the hard bound.
    """
    domain = AgentDomain.COPD
    spo2 = view.value("spo2")
    if spo2 is None:
        return _claim(domain, Recommendation.INDETERMINATE, cfg.low_confidence, "missing_spo2")
    if view.value("copd_documented", default=False) is not True:
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "copd_not_documented"
        )
    floor = cfg.copd_acceptable_spo2
    baseline = view.value("baseline_spo2")
    if baseline is not None:
        floor = max(floor, baseline - 2.0)
    if spo2 >= floor:
        return _claim(domain, Recommendation.SUPPRESS, cfg.high_confidence, "within_copd_baseline")
    return _claim(domain, Recommendation.ESCALATE, cfg.high_confidence, "below_copd_floor")


def evaluate_nocturnal(
    alert: CandidateAlert, view: SpecialistView, cfg: SpecialistConfig
) -> AgentClaim:
    """Suppress the classic sleep pattern: supine, still, and any SpO2 dip
    within the allowance of baseline (96.0 assumed when the EHR has none).
    Outside the window or with any condition unmet the agent has nothing
    definitive to say."""
    domain = AgentDomain.NOCTURNAL
    if not in_nocturnal_window(view.timestamp):
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "outside_nocturnal_window"
        )
    if view.value("position") is not Position.SUPINE:
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "position_not_supine"
        )
    if view.value("accel_level") is not AccelLevel.STILL:
        return _claim(
            domain, Recommendation.INDETERMINATE, cfg.low_confidence, "motion_during_sleep"
        )
    if AlertType.LOW_SPO2 in alert.alert_types:
        spo2 = view.value("spo2")
        baseline = view.value("baseline_spo2", default=DEFAULT_NOCTURNAL_BASELINE_SPO2)
        if spo2 is None or baseline - spo2 > cfg.nocturnal_dip_allowance:
            return _claim(
                domain, Recommendation.INDETERMINATE, cfg.low_confidence, "dip_exceeds_allowance"
            )
    return _claim(
        domain, Recommendation.SUPPRESS, cfg.high_confidence, "nocturnal_pattern_consistent"
    )


_EVALUATORS = {
    AgentDomain.PROBE_INTEGRITY: evaluate_probe_integrity,
    AgentDomain.ACTIVITY_INTEGRITY: evaluate_activity_integrity,
    AgentDomain.TACHYCARDIA: evaluate_tachycardia,
    AgentDomain.BRADYCARDIA: evaluate_bradycardia,
    AgentDomain.COPD: evaluate_copd,
    AgentDomain.NOCTURNAL: evaluate_nocturnal,
}


def evaluate_domain(
    domain: AgentDomain,
    alert: CandidateAlert,
    view: SpecialistView,
    cfg: SpecialistConfig,
    routing: RoutingDecision,
) -> AgentClaim:
    """Run one specialist for a routed alert.

    Raises NotRoutedHere when asked for a domain outside the routing
    decision; that is a programming error, not a clinical outcome.
    """
    if domain not in routing.targets:
        raise NotRoutedHere(f"{domain.value} is not a routed target for this alert")
    return _EVALUATORS[domain](alert, view, cfg)


def claims_for(
    alert: CandidateAlert,
    view: SpecialistView,
    routing: RoutingDecision,
    cfg: SpecialistConfig,
) -> tuple[AgentClaim, ...]:
    """Evaluate every routed specialist, ordered by domain enumeration.

    The fixed join order makes claim sequences deterministic even when the
    evaluations themselves run concurrently.
    """
    return tuple(
        evaluate_domain(domain, alert, view, cfg, routing)
        for domain in AgentDomain
        if domain in routing.targets
    )
