import math
from pathlib import Path as FsPath

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from timebin_qbc.protocol import (
    BOB_STREAM,
    DetectionEvent,
    Outcome,
    ProtocolParams,
    RoundSecret,
    Transcript,
    Verdict,
    acceptance_test,
    acceptance_threshold,
    alice_commit_round,
    alice_secrets,
    bob_store,
    bob_verify_round,
    party_rng,
    run_protocol,
    with_seed,
)
from timebin_qbc.timebin import BasisKet, Path, TimeBinState

DATA = FsPath(__file__).parent / "data"
R = 1 / math.sqrt(2)


def test_build_schedule():
    p = ProtocolParams.build(3, 4, slot_spacing=2, start=10)
    assert p.tau_max == 6
    assert p.send_times == (10, 17, 24)
    assert p.slot_table().slots == (2, 4, 6)
    assert p.problems() == []


@pytest.mark.parametrize(
    "kwargs, fragment",
    [
        (dict(s=0), "s must be"),
        (dict(n=1), "n must be"),
        (dict(epsilon=1.0), "epsilon"),
        (dict(epsilon=-0.1), "epsilon"),
        (dict(accept_z=-1.0), "accept_z"),
        (dict(loss_fraction=1.5), "loss_fraction"),
        (dict(seed=-1), "seed"),
        (dict(send_times=(0, 3)), "must exceed"),
        (dict(tau_max=2), "exceeds tau_max"),
    ],
)
def test_invalid_params_reported(kwargs, fragment):
    base = dict(s=2, n=4, tau_max=3, send_times=(0, 4))
    base.update(kwargs)
    p = ProtocolParams(**base)
    assert any(fragment in msg for msg in p.problems())
    with pytest.raises(ValueError):
        p.validate()


def test_params_dict_round_trip():
    p = ProtocolParams.build(4, 6, epsilon=0.1, seed=9)
    assert ProtocolParams.from_dict(p.to_dict()) == p
    assert p.canonical_bytes() == ProtocolParams.from_dict(p.to_dict()).canonical_bytes()


def test_alice_secrets_are_slot_values():
    p = ProtocolParams.build(500, 6, slot_spacing=3)
    secrets = alice_secrets(p, 1)
    assert [s.j for s in secrets] == list(range(1, 501))
    assert {s.tau_j for s in secrets} == {3, 6, 9, 12, 15}
    assert all(s.b == 1 for s in secrets)
    with pytest.raises(ValueError):
        alice_secrets(p, 2)


def test_alice_commit_round_state():
    p = ProtocolParams.build(3, 5)
    st0 = alice_commit_round(RoundSecret(2, 3, 1), p)
    assert st0.terms == {BasisKet(Path.X, 5): R, BasisKet(Path.Y, 8): -R}
    with pytest.raises(ValueError):
        alice_commit_round(RoundSecret(1, 9, 0), p)


def test_bob_store_shifts_both_paths():
    st0 = TimeBinState({BasisKet(Path.X, 1): R, BasisKet(Path.Y, 4): R})
    assert bob_store(st0, 10).terms == {BasisKet(Path.X, 11): R, BasisKet(Path.Y, 14): R}


@pytest.mark.parametrize("b", [0, 1])
def test_bob_verify_round_noiseless_is_deterministic(b):
    p = ProtocolParams.build(1, 4)
    stored = bob_store(alice_commit_round(RoundSecret(1, 2, b), p), 7)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert bob_verify_round(stored, b, 2, 0.0, rng) == DetectionEvent(Outcome(b), 9)


def test_bob_verify_round_wrong_tau_spreads():
    p = ProtocolParams.build(1, 4)
    stored = bob_store(alice_commit_round(RoundSecret(1, 2, 0), p), 0)
    rng = np.random.default_rng(1)
    seen = {(e.outcome, e.time) for e in (bob_verify_round(stored, 0, 3, 0.0, rng) for _ in range(400))}
    assert seen == {(Outcome.D0, 2), (Outcome.D1, 2), (Outcome.D0, 3), (Outcome.D1, 3)}


def test_bob_verify_round_all_lost_when_loss_dominates():
    p = ProtocolParams.build(1, 3)
    stored = bob_store(alice_commit_round(RoundSecret(1, 1, 0), p), 0)
    rng = np.random.default_rng(2)
    events = [bob_verify_round(stored, 0, 1, 0.999, rng, loss_fraction=1.0) for _ in range(50)]
    assert sum(e.outcome is Outcome.LOST for e in events) >= 45


def test_detection_event_validation():
    with pytest.raises(ValueError):
        DetectionEvent(Outcome.LOST, 3)
    with pytest.raises(ValueError):
        DetectionEvent(Outcome.D0)


def test_acceptance_threshold_values():
    assert acceptance_threshold(100, 0.0, 3.0) == 100.0
    assert acceptance_threshold(10_000, 0.05, 3.0) == pytest.approx(9500 - 3 * math.sqrt(475))


def test_lost_and_wrong_time_count_as_failures():
    expected = [5, 6, 7, 8]
    good = [DetectionEvent(Outcome.D1, t) for t in expected]
    assert acceptance_test(good, 1, expected, 4, 0.0) is Verdict.ACCEPTED
    lost = good[:3] + [DetectionEvent(Outcome.LOST)]
    assert acceptance_test(lost, 1, expected, 4, 0.0) is Verdict.REJECTED
    late = good[:3] + [DetectionEvent(Outcome.D1, 9)]
    assert acceptance_test(late, 1, expected, 4, 0.0) is Verdict.REJECTED
    with pytest.raises(ValueError):
        acceptance_test(good[:2], 1, expected, 4, 0.0)


@pytest.mark.parametrize("b", [0, 1])
def test_honest_noiseless_all_correct(b):
    t = run_protocol(ProtocolParams.build(200, 16, seed=4), b, b, tau_hold=50)
    assert t.verdict is Verdict.ACCEPTED
    assert t.n_correct == 200
    assert np.all(t.outcomes == b)
    np.testing.assert_array_equal(t.times, t.expected_times())


def test_flipped_unveil_rejected():
    t = run_protocol(ProtocolParams.build(200, 16, seed=4), 0, 1)
    assert t.verdict is Verdict.REJECTED
    assert t.n_correct == 0


def test_run_is_deterministic_in_seed():
    p = ProtocolParams.build(300, 8, epsilon=0.1, seed=123)
    assert run_protocol(p, 0, 0, 5) == run_protocol(p, 0, 0, 5)
    assert run_protocol(p, 0, 0, 5) != run_protocol(with_seed(p, 124), 0, 0, 5)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(1, 40),
    st.integers(2, 9),
    st.sampled_from([0.0, 0.1, 0.4]),
    st.integers(0, 2**32),
    st.integers(0, 1),
    st.integers(0, 1),
    st.integers(0, 30),
)
def test_batched_matches_round_by_round(s, n, eps, seed, b, unveil, hold):
    p = ProtocolParams.build(s, n, epsilon=eps, seed=seed)
    t = run_protocol(p, b, unveil, hold)
    rng = party_rng(seed, BOB_STREAM)
    secrets = alice_secrets(p, b)
    events = [
        bob_verify_round(bob_store(alice_commit_round(sec, p), hold), unveil, sec.tau_j, eps, rng)
        for sec in secrets
    ]
    assert t.events == events
    expected = [p.send_times[k] + hold + sec.tau_j for k, sec in enumerate(secrets)]
    assert t.verdict is acceptance_test(events, unveil, expected, s, eps, p.accept_z)


def test_commit_log_matches_alice():
    p = ProtocolParams.build(6, 5, seed=2)
    t = run_protocol(p, 1, 1)
    assert len(t.commits) == 6
    for sec, state in zip(alice_secrets(p, 1), t.commits):
        assert state == alice_commit_round(sec, p)
    assert t.commits[-1] == t.commits[5]
    assert t.commits[1:3] == [t.commits[1], t.commits[2]]


def test_invalid_params_give_aborted_transcript():
    bad = ProtocolParams(s=2, n=4, tau_max=3, send_times=(0, 2))
    t = run_protocol(bad, 0, 0)
    assert t.verdict is Verdict.ABORTED
    assert "must exceed" in t.reason
    assert run_protocol(ProtocolParams.build(2, 4), 0, 0, tau_hold=-1).verdict is Verdict.ABORTED
    assert run_protocol(ProtocolParams.build(2, 4), 0, 3).verdict is Verdict.ABORTED


def test_golden_transcript():
    golden = (DATA / "golden_transcript.txt").read_text()
    t = run_protocol(ProtocolParams.build(8, 8, epsilon=0.3, seed=0), 1, 1, tau_hold=3)
    assert t.to_text() == golden
    # hand-checkable slices of the frozen record
    assert t.unveil_taus == (6, 5, 4, 2, 3, 1, 1, 1)
    assert list(t.outcomes) == [1, 1, 0, 2, 1, 2, 1, 2]
    assert list(t.times) == [9, 16, 23, -1, 38, -1, 52, -1]
    assert t.n_correct == 4
    assert t.verdict is Verdict.ACCEPTED


def test_transcript_text_round_trip():
    golden = (DATA / "golden_transcript.txt").read_text()
    parsed = Transcript.from_text(golden)
    assert parsed.to_text() == golden
    assert parsed.n_correct == 4
