"""Conflict resolution: adoption, weighting, debounce, forced binary verdict."""

from __future__ import annotations

import random
from datetime import timedelta

import pytest

from alertsift.meta import DecisionHistory, EmptyClaims, MetaConfig, resolve
from alertsift.model import (
    AgentClaim,
    AgentDomain,
    DeviceStatus,
    InvariantViolation,
    Recommendation,
    ResolutionPath,
    RiskLevel,
    Verdict,
)
from alertsift.routing import RoutingDecision
from alertsift.sentinel import SentinelConfig, detect
from helpers import make_epoch, make_view

CFG = MetaConfig()


def claim(domain, rec, conf):
    risk = {
        Recommendation.SUPPRESS: RiskLevel.LOW,
        Recommendation.INDETERMINATE: RiskLevel.MEDIUM,
        Recommendation.ESCALATE: RiskLevel.HIGH,
    }[rec]
    return AgentClaim(domain, rec, conf, risk)


def make_alert(epoch=None, context=None):
    view = make_view(epoch or make_epoch(spo2=90.0), context)
    alert = detect(view, SentinelConfig())
    assert alert is not None
    return alert


def routing_for(*domains, ambiguity=False):
    return RoutingDecision(targets=frozenset(domains), ambiguity_flag=ambiguity)


def test_single_definitive_claim_is_adopted():
    alert = make_alert()
    decision = resolve(
        (claim(AgentDomain.COPD, Recommendation.SUPPRESS, 0.9),),
        routing_for(AgentDomain.COPD),
        alert,
        DecisionHistory(),
        CFG,
    )
    assert decision.verdict is Verdict.SUPPRESS
    assert decision.resolution_path is ResolutionPath.SINGLE_DOMAIN


def test_weighted_suppression_beats_indeterminate():
    # S = 0.9, E = 0, margin 0.3: suppress by aggregation
    alert = make_alert()
    decision = resolve(
        (
            claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),
            claim(AgentDomain.COPD, Recommendation.SUPPRESS, 0.9),
        ),
        routing_for(AgentDomain.PROBE_INTEGRITY, AgentDomain.COPD, ambiguity=True),
        alert,
        DecisionHistory(),
        CFG,
    )
    assert decision.verdict is Verdict.SUPPRESS
    assert decision.resolution_path is ResolutionPath.WEIGHTED_AGGREGATION


def test_weighted_escalation_beats_indeterminate():
    # E = 0.9, S = 0: escalate by aggregation
    alert = make_alert()
    decision = resolve(
        (
            claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),
            claim(AgentDomain.TACHYCARDIA, Recommendation.ESCALATE, 0.9),
        ),
        routing_for(AgentDomain.PROBE_INTEGRITY, AgentDomain.TACHYCARDIA, ambiguity=True),
        alert,
        DecisionHistory(),
        CFG,
    )
    assert decision.verdict is Verdict.ESCALATE
    assert decision.resolution_path is ResolutionPath.WEIGHTED_AGGREGATION


def test_tie_and_all_indeterminate_default_to_escalation():
    alert = make_alert()
    tie = resolve(
        (
            claim(AgentDomain.PROBE_INTEGRITY, Recommendation.SUPPRESS, 0.9),
            claim(AgentDomain.ACTIVITY_INTEGRITY, Recommendation.ESCALATE, 0.9),
        ),
        routing_for(AgentDomain.PROBE_INTEGRITY, AgentDomain.ACTIVITY_INTEGRITY),
        alert,
        DecisionHistory(),
        CFG,
    )
    assert tie.verdict is Verdict.ESCALATE
    assert tie.resolution_path is ResolutionPath.AMBIGUITY_DEFAULT

    lone = resolve(
        (claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),),
        routing_for(AgentDomain.PROBE_INTEGRITY),
        alert,
        DecisionHistory(),
        CFG,
    )
    assert lone.verdict is Verdict.ESCALATE
    assert lone.resolution_path is ResolutionPath.AMBIGUITY_DEFAULT


def test_debounce_replays_prior_verdict():
    epoch1 = make_epoch(spo2=90.0)
    epoch2 = make_epoch(ts=epoch1.timestamp + timedelta(minutes=1), spo2=90.2)
    history = DecisionHistory()
    claims = (claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),)
    routing = routing_for(AgentDomain.PROBE_INTEGRITY)
    first = resolve(claims, routing, make_alert(epoch1), history, CFG)
    second = resolve(claims, routing, make_alert(epoch2), history, CFG)
    assert first.resolution_path is ResolutionPath.AMBIGUITY_DEFAULT
    assert second.resolution_path is ResolutionPath.DEBOUNCED
    assert second.verdict is first.verdict


def test_debounce_expires_outside_window():
    epoch1 = make_epoch(spo2=90.0)
    epoch2 = make_epoch(ts=epoch1.timestamp + timedelta(minutes=11), spo2=90.2)
    history = DecisionHistory()
    claims = (claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),)
    routing = routing_for(AgentDomain.PROBE_INTEGRITY)
    resolve(claims, routing, make_alert(epoch1), history, CFG)
    second = resolve(claims, routing, make_alert(epoch2), history, CFG)
    assert second.resolution_path is not ResolutionPath.DEBOUNCED


def test_debounce_requires_identical_alert_type_set():
    epoch1 = make_epoch(spo2=90.0)
    epoch2 = make_epoch(ts=epoch1.timestamp + timedelta(minutes=1), spo2=90.0, hr=120.0)
    history = DecisionHistory()
    routing1 = routing_for(AgentDomain.PROBE_INTEGRITY)
    resolve(
        (claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),),
        routing1,
        make_alert(epoch1),
        history,
        CFG,
    )
    decision = resolve(
        (claim(AgentDomain.TACHYCARDIA, Recommendation.ESCALATE, 0.9),),
        routing_for(AgentDomain.TACHYCARDIA),
        make_alert(epoch2),
        history,
        CFG,
    )
    assert decision.resolution_path is ResolutionPath.SINGLE_DOMAIN


def test_duplicate_alert_status_bypasses_debounce():
    # the documented duplicate-alert behaviour: cooldown logic never kicks in
    base = make_epoch(spo2=90.0, status=DeviceStatus.DUPLICATE_ALERT)
    history = DecisionHistory()
    claims = (claim(AgentDomain.PROBE_INTEGRITY, Recommendation.INDETERMINATE, 0.4),)
    routing = routing_for(AgentDomain.PROBE_INTEGRITY)
    for i in range(4):
        epoch = make_epoch(
            ts=base.timestamp + timedelta(minutes=i),
            spo2=90.0,
            status=DeviceStatus.DUPLICATE_ALERT,
        )
        decision = resolve(claims, routing, make_alert(epoch), history, CFG)
        assert decision.resolution_path is ResolutionPath.AMBIGUITY_DEFAULT
        assert decision.verdict is Verdict.ESCALATE


def test_debounce_idempotence_never_flips():
    rng = random.Random(11)
    recs = [Recommendation.SUPPRESS, Recommendation.ESCALATE, Recommendation.INDETERMINATE]
    for _ in range(100):
        epoch1 = make_epoch(spo2=90.0)
        history = DecisionHistory()
        claims = tuple(
            claim(AgentDomain.PROBE_INTEGRITY, rng.choice(recs), round(rng.random(), 2))
            for _ in range(1)
        )
        routing = routing_for(AgentDomain.PROBE_INTEGRITY)
        first = resolve(claims, routing, make_alert(epoch1), history, CFG)
        for i in range(1, 5):
            epoch = make_epoch(ts=epoch1.timestamp + timedelta(minutes=i), spo2=90.0)
            replay = resolve(claims, routing, make_alert(epoch), history, CFG)
            assert replay.verdict is first.verdict


def test_empty_claims_raises():
    with pytest.raises(EmptyClaims):
        resolve((), routing_for(AgentDomain.COPD), make_alert(), DecisionHistory(), CFG)


def test_claims_must_match_routed_targets():
    with pytest.raises(InvariantViolation):
        resolve(
            (claim(AgentDomain.COPD, Recommendation.SUPPRESS, 0.9),),
            routing_for(AgentDomain.TACHYCARDIA),
            make_alert(),
            DecisionHistory(),
            CFG,
        )


def test_history_requires_strictly_increasing_timestamps():
    alert = make_alert()
    history = DecisionHistory()
    claims = (claim(AgentDomain.PROBE_INTEGRITY, Recommendation.SUPPRESS, 0.9),)
    routing = routing_for(AgentDomain.PROBE_INTEGRITY)
    resolve(claims, routing, alert, history, CFG)
    with pytest.raises(InvariantViolation):
        resolve(claims, routing, alert, history, CFG)


def test_config_invariants():
    with pytest.raises(InvariantViolation):
        MetaConfig(resolution_margin=0.0)
    with pytest.raises(InvariantViolation):
        MetaConfig(cooldown_window_minutes=0)
    with pytest.raises(InvariantViolation):
        MetaConfig(domain_weights={AgentDomain.COPD: -1.0})


def _random_claims(rng):
    domains = rng.sample(list(AgentDomain), k=rng.randint(1, 6))
    domains.sort(key=list(AgentDomain).index)
    recs = [Recommendation.SUPPRESS, Recommendation.ESCALATE, Recommendation.INDETERMINATE]
    return tuple(
        claim(domain, rng.choice(recs), round(rng.uniform(0.0, 1.0), 3)) for domain in domains
    )


def test_totality_and_conservative_default_randomized():
    rng = random.Random(31337)
    for _ in range(2000):
        claims = _random_claims(rng)
        routing = routing_for(*(c.domain for c in claims))
        alert = make_alert()
        decision = resolve(claims, routing, alert, DecisionHistory(), CFG)
        assert decision.verdict in (Verdict.SUPPRESS, Verdict.ESCALATE)
        if not (len(claims) == 1 and claims[0].recommendation is not Recommendation.INDETERMINATE):
            s = sum(c.confidence for c in claims if c.recommendation is Recommendation.SUPPRESS)
            e = sum(c.confidence for c in claims if c.recommendation is Recommendation.ESCALATE)
            if abs(s - e) < CFG.resolution_margin:
                assert decision.verdict is Verdict.ESCALATE
                assert decision.resolution_path is ResolutionPath.AMBIGUITY_DEFAULT


def test_homogeneous_scaling_preserves_verdicts():
    rng = random.Random(404)
    for _ in range(300):
        claims = _random_claims(rng)
        routing = routing_for(*(c.domain for c in claims))
        base = resolve(claims, routing, make_alert(), DecisionHistory(), CFG)
        for factor in (0.5, 2.0):
            scaled_cfg = MetaConfig(
                resolution_margin=CFG.resolution_margin * factor,
                cooldown_window_minutes=CFG.cooldown_window_minutes,
                domain_weights={d: factor for d in AgentDomain},
            )
            scaled = resolve(claims, routing, make_alert(), DecisionHistory(), scaled_cfg)
            assert scaled.verdict is base.verdict


def test_resolve_uses_domain_weights():
    alert = make_alert()
    weights = {d: 1.0 for d in AgentDomain}
    weights[AgentDomain.ACTIVITY_INTEGRITY] = 3.0
    cfg = MetaConfig(domain_weights=weights)
    decision = resolve(
        (
            claim(AgentDomain.PROBE_INTEGRITY, Recommendation.SUPPRESS, 0.9),
            claim(AgentDomain.ACTIVITY_INTEGRITY, Recommendation.ESCALATE, 0.9),
        ),
        routing_for(AgentDomain.PROBE_INTEGRITY, AgentDomain.ACTIVITY_INTEGRITY),
        alert,
        DecisionHistory(),
        cfg,
    )
    # 2.7 - 0.9 = 1.8 >= 0.3 toward escalation
    assert decision.verdict is Verdict.ESCALATE
    assert decision.resolution_path is ResolutionPath.WEIGHTED_AGGREGATION
