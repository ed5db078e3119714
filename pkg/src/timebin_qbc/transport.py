"""Two-party execution: wire format, party state machines and channels.

Frame layout (all integers big-endian)::

    offset 0  uint32  length = 1 + len(payload)
    offset 4  uint8   kind tag
    offset 5  bytes   payload: UTF-8 JSON, sorted keys, no whitespace;
                      empty for an empty payload

Kind tags: Hello 0x01, Params 0x02, CommitRound 0x03, Unveil 0x04,
RoundResult 0x05, Verdict 0x06, Abort 0x07. Payloads above 16 MiB are
rejected.

The photon travels inside ``CommitRound`` as its serialized amplitudes. A
real Bob could never read those, so Bob's state machine keeps each stored
photon in an opaque register and only touches it through the interferometer
once the unveil arrives.
"""

from __future__ import annotations

import enum
import json
import logging
import multiprocessing as mp
import socket
import struct
from dataclasses import dataclass, field

import numpy as np

from .protocol import (
    BOB_STREAM,
    Outcome,
    ProtocolParams,
    RoundSecret,
    Transcript,
    Verdict,
    acceptance_test,
    alice_commit_round,
    alice_secrets,
    bob_store,
    bob_verify_round,
    party_rng,
)
from .timebin import TimeBinState

log = logging.getLogger(__name__)

MAX_PAYLOAD = 16 * 1024 * 1024
HEADER = struct.Struct(">IB")


class Kind(enum.IntEnum):
    HELLO = 0x01
    PARAMS = 0x02
    COMMIT_ROUND = 0x03
    UNVEIL = 0x04
    ROUND_RESULT = 0x05
    VERDICT = 0x06
    ABORT = 0x07


class FrameError(ValueError):
    """A byte stream that does not parse; ``offset`` is where parsing failed."""

    def __init__(self, offset: int, reason: str):
        super().__init__(f"{reason} at byte offset {offset}")
        self.offset = offset
        self.reason = reason


@dataclass(frozen=True)
class Message:
    kind: Kind
    payload: dict = field(default_factory=dict)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_payload(kind: Kind, p: dict) -> str | None:
    """Return a reason string if ``p`` is not a valid payload for ``kind``."""
    if kind is Kind.HELLO:
        return None if p == {} else "Hello carries no payload"
    if kind is Kind.PARAMS:
        if set(p) != {"params"} or not isinstance(p["params"], dict):
            return "Params payload must be {params}"
        try:
            ProtocolParams.from_dict(p["params"])
        except (KeyError, TypeError) as exc:
            return f"bad params: {exc}"
        return None
    if kind is Kind.COMMIT_ROUND:
        if set(p) != {"j", "t_j", "state"} or not (_is_int(p["j"]) and _is_int(p["t_j"])):
            return "CommitRound payload must be {j, t_j, state}"
        try:
            TimeBinState.from_records(p["state"])
        except (TypeError, ValueError, KeyError) as exc:
            return f"bad state: {exc}"
        return None
    if kind is Kind.UNVEIL:
        if set(p) != {"b", "taus"} or p["b"] not in (0, 1) or not isinstance(p["taus"], list):
            return "Unveil payload must be {b, taus}"
        if not all(_is_int(t) and t >= 0 for t in p["taus"]):
            return "Unveil taus must be non-negative integers"
        return None
    if kind is Kind.ROUND_RESULT:
        if set(p) != {"j", "outcome", "time"} or not _is_int(p["j"]):
            return "RoundResult payload must be {j, outcome, time}"
        if p["outcome"] not in Outcome.__members__:
            return "unknown outcome"
        if (p["outcome"] == "LOST") != (p["time"] is None) or not (p["time"] is None or _is_int(p["time"])):
            return "RoundResult time inconsistent with outcome"
        return None
    if kind is Kind.VERDICT:
        if set(p) != {"verdict", "correct", "tau_hold"} or p["verdict"] not in ("Accepted", "Rejected"):
            return "Verdict payload must be {verdict, correct, tau_hold}"
        return None
    if kind is Kind.ABORT:
        if set(p) != {"reason", "detail"} or not isinstance(p["reason"], str):
            return "Abort payload must be {reason, detail}"
        return None
    return "unknown kind"  # pragma: no cover


def encode(msg: Message) -> bytes:
    """Frame one message.

    Raises:
        ValueError: for an invalid payload or one larger than 16 MiB.
    """
    kind = Kind(msg.kind)
    problem = _check_payload(kind, msg.payload)
    if problem:
        raise ValueError(problem)
    body = b"" if not msg.payload else json.dumps(msg.payload, sort_keys=True, separators=(",", ":")).encode()
    if len(body) > MAX_PAYLOAD:
        raise ValueError(f"payload of {len(body)} bytes exceeds {MAX_PAYLOAD}")
    return HEADER.pack(len(body) + 1, kind) + body


def _parse_body(tag: int, body: bytes, offset: int) -> Message:
    try:
        kind = Kind(tag)
    except ValueError:
        raise FrameError(offset + 4, f"unknown kind tag 0x{tag:02x}") from None
    if body:
        try:
            payload = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise FrameError(offset + 5, "payload is not valid JSON") from None
        if not isinstance(payload, dict) or not payload:
            raise FrameError(offset + 5, "payload must be a non-empty JSON object")
    else:
        payload = {}
    problem = _check_payload(kind, payload)
    if problem:
        raise FrameError(offset + 5, problem)
    return Message(kind, payload)


class FrameDecoder:
    """Incremental decoder; feed bytes in any chunking, get whole messages out.

    After a ``FrameError`` the decoder stays failed: every later ``feed``
    raises the same error.
    """

    def __init__(self):
        self._buf = bytearray()
        self._offset = 0  # stream offset of _buf[0]
        self._error: FrameError | None = None

    def feed(self, data: bytes) -> list[Message]:
        if self._error:
            raise self._error
        self._buf += data
        out = []
        try:
            while len(self._buf) >= HEADER.size:
                length, tag = HEADER.unpack_from(self._buf)
                if length < 1:
                    raise FrameError(self._offset, "length field must be at least 1")
                if length - 1 > MAX_PAYLOAD:
                    raise FrameError(self._offset, f"declared payload of {length - 1} bytes exceeds limit")
                end = 4 + length
                if len(self._buf) < end:
                    break
                out.append(_parse_body(tag, bytes(self._buf[HEADER.size : end]), self._offset))
                del self._buf[:end]
                self._offset += end
        except FrameError as exc:
            self._error = exc
            raise
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)

    def close(self):
        """Signal end of stream; a half-received frame is an error."""
        if self._error:
            raise self._error
        if self._buf:
            self._error = FrameError(self._offset, "truncated frame")
            raise self._error


def decode(frame: bytes) -> Message:
    """Decode exactly one frame."""
    msgs = decode_stream(frame)
    if len(msgs) != 1:
        raise FrameError(0, f"expected one frame, found {len(msgs)}")
    return msgs[0]


def decode_stream(data: bytes) -> list[Message]:
    dec = FrameDecoder()
    msgs = dec.feed(data)
    dec.close()
    return msgs


# -- parties -------------------------------------------------------------------


def _abort_msg(reason: str, detail: str = "") -> Message:
    return Message(Kind.ABORT, {"reason": reason, "detail": detail})


@dataclass(frozen=True)
class AliceConfig:
    """Alice's inputs.

    ``premature_unveil_after`` and ``announced_taus`` are misbehaviour
    hooks: unveil after that many rounds, or announce these delays instead of
    the true ones.
    """

    params: ProtocolParams
    bit: int
    unveil_bit: int | None = None
    premature_unveil_after: int | None = None
    announced_taus: tuple[int, ...] | None = None


@dataclass(frozen=True)
class BobConfig:
    params: ProtocolParams
    tau_hold: int = 0


class _Party:
    name = "party"

    def __init__(self, params: ProtocolParams):
        self.params = params
        self.done = False
        self.transcript: Transcript | None = None

    def _abort(self, reason: str, detail: str = "", *, send: bool = True) -> list[Message]:
        self.done = True
        self.transcript = self._aborted_transcript(reason)
        log.info("%s aborts: %s %s", self.name, reason, detail)
        return [_abort_msg(reason, detail)] if send else []

    def _aborted_transcript(self, reason: str) -> Transcript:
        raise NotImplementedError

    def start(self) -> list[Message]:
        return []

    def on_frame_error(self, exc: FrameError) -> list[Message]:
        return self._abort("malformed frame", str(exc))

    def on_channel_failure(self, detail: str):
        if not self.done:
            self._abort("channel failure", detail, send=False)


class _Register:
    """Opaque holder for a stored photon; only the interferometer may open it."""

    __slots__ = ("_state",)

    def __init__(self, state: TimeBinState):
        self._state = state

    def release(self) -> TimeBinState:
        return self._state


class Alice(_Party):
    name = "alice"

    def __init__(self, cfg: AliceConfig):
        super().__init__(cfg.params)
        self.cfg = cfg
        self.stage = "hello"
        self.sent: list[TimeBinState] = []
        self.secrets: list[RoundSecret] = []
        self.outcomes: list[int] = []
        self.times: list[int] = []
        self.unveil_b = cfg.bit if cfg.unveil_bit is None else cfg.unveil_bit
        self.announced: tuple[int, ...] = ()

    def _aborted_transcript(self, reason):
        return Transcript(self.params, 0, Verdict.ABORTED, reason, commits=list(self.sent))

    def start(self):
        return [Message(Kind.HELLO)]

    def _commit_and_unveil(self) -> list[Message]:
        params = self.params
        self.secrets = alice_secrets(params, self.cfg.bit)
        stop = params.s if self.cfg.premature_unveil_after is None else self.cfg.premature_unveil_after
        out = []
        for sec in self.secrets[:stop]:
            state = alice_commit_round(sec, params)
            self.sent.append(state)
            payload = {"j": sec.j, "t_j": params.send_times[sec.j - 1], "state": [list(r) for r in state.to_records()]}
            out.append(Message(Kind.COMMIT_ROUND, payload))
        taus = self.cfg.announced_taus or tuple(sec.tau_j for sec in self.secrets)
        self.announced = tuple(int(t) for t in taus)
        out.append(Message(Kind.UNVEIL, {"b": self.unveil_b, "taus": list(self.announced)}))
        self.stage = "results"
        return out

    def handle(self, msg: Message) -> list[Message]:
        if self.done:
            return []
        if msg.kind is Kind.ABORT:
            return self._abort(msg.payload["reason"], msg.payload["detail"], send=False)
        if self.stage == "hello" and msg.kind is Kind.HELLO:
            self.stage = "params"
            return [Message(Kind.PARAMS, {"params": self.params.to_dict()})]
        if self.stage == "params" and msg.kind is Kind.PARAMS:
            theirs = ProtocolParams.from_dict(msg.payload["params"]).canonical_bytes()
            if theirs != self.params.canonical_bytes():
                return self._abort("params mismatch")
            return self._commit_and_unveil()
        if self.stage == "results" and msg.kind is Kind.ROUND_RESULT:
            if msg.payload["j"] != len(self.outcomes) + 1:
                return self._abort("out of order", f"RoundResult j={msg.payload['j']}")
            self.outcomes.append(int(Outcome[msg.payload["outcome"]]))
            self.times.append(-1 if msg.payload["time"] is None else msg.payload["time"])
            return []
        if self.stage == "results" and msg.kind is Kind.VERDICT:
            if len(self.outcomes) != self.params.s:
                return self._abort("out of order", "Verdict before all RoundResults")
            self.done = True
            self.transcript = Transcript(
                params=self.params,
                tau_hold=msg.payload["tau_hold"],
                verdict=Verdict(msg.payload["verdict"]),
                commits=list(self.sent),
                unveil_b=self.unveil_b,
                unveil_taus=self.announced,
                outcomes=np.array(self.outcomes, dtype=np.int8),
                times=np.array(self.times, dtype=np.int64),
            )
            return []
        return self._abort("unexpected message", f"{msg.kind.name} while {self.stage}")


class Bob(_Party):
    name = "bob"

    def __init__(self, cfg: BobConfig):
        super().__init__(cfg.params)
        self.cfg = cfg
        self.stage = "hello"
        self.registers: list[_Register] = []
        self.received: list[TimeBinState] = []

    def _aborted_transcript(self, reason):
        return Transcript(self.params, self.cfg.tau_hold, Verdict.ABORTED, reason, commits=list(self.received))

    def handle(self, msg: Message) -> list[Message]:
        if self.done:
            return []
        if msg.kind is Kind.ABORT:
            return self._abort(msg.payload["reason"], msg.payload["detail"], send=False)
        if self.stage == "hello" and msg.kind is Kind.HELLO:
            self.stage = "params"
            return [Message(Kind.HELLO)]
        if self.stage == "params" and msg.kind is Kind.PARAMS:
            theirs = ProtocolParams.from_dict(msg.payload["params"])
            if theirs.canonical_bytes() != self.params.canonical_bytes():
                return self._abort("params mismatch")
            problems = self.params.problems()
            if problems:
                return self._abort("invalid params", "; ".join(problems))
            self.stage = "commit"
            return [Message(Kind.PARAMS, {"params": self.params.to_dict()})]
        if self.stage == "commit" and msg.kind is Kind.COMMIT_ROUND:
            return self._on_commit(msg.payload)
        if self.stage == "commit" and msg.kind is Kind.UNVEIL:
            if len(self.registers) < self.params.s:
                return self._abort("premature unveil", f"after {len(self.registers)} of {self.params.s} rounds")
            return self._on_unveil(msg.payload)
        return self._abort("unexpected message", f"{msg.kind.name} while {self.stage}")

    def _on_commit(self, p: dict) -> list[Message]:
        j = p["j"]
        if j != len(self.registers) + 1 or j > self.params.s:
            return self._abort("out of order", f"CommitRound j={j}")
        if p["t_j"] != self.params.send_times[j - 1]:
            return self._abort("wrong send time", f"round {j} at {p['t_j']}")
        state = TimeBinState.from_records(p["state"])
        self.received.append(state)
        self.registers.append(_Register(bob_store(state, self.cfg.tau_hold)))
        return []

    def _on_unveil(self, p: dict) -> list[Message]:
        params = self.params
        taus = p["taus"]
        if len(taus) != params.s:
            return self._abort("bad unveil", f"{len(taus)} delays for {params.s} rounds")
        table = params.slot_table()
        for j, tau in enumerate(taus, start=1):
            if table.index_of(tau) is None:
                return self._abort("tau not in slot table", f"round {j}: {tau}")
        rng = party_rng(params.seed, BOB_STREAM)
        events = [
            bob_verify_round(reg.release(), p["b"], tau, params.epsilon, rng, loss_fraction=params.loss_fraction)
            for reg, tau in zip(self.registers, taus)
        ]
        expected = [t + self.cfg.tau_hold + tau for t, tau in zip(params.send_times, taus)]
        verdict = acceptance_test(events, p["b"], expected, params.s, params.epsilon, params.accept_z)
        self.transcript = Transcript(
            params=params,
            tau_hold=self.cfg.tau_hold,
            verdict=verdict,
            commits=list(self.received),
            unveil_b=p["b"],
            unveil_taus=tuple(taus),
            outcomes=np.array([int(e.outcome) for e in events], dtype=np.int8),
            times=np.array([-1 if e.time is None else e.time for e in events], dtype=np.int64),
        )
        self.done = True
        out = [
            Message(Kind.ROUND_RESULT, {"j": j, "outcome": e.outcome.name, "time": e.time})
            for j, e in enumerate(events, start=1)
        ]
        out.append(
            Message(Kind.VERDICT, {"verdict": verdict.value, "correct": self.transcript.n_correct, "tau_hold": self.cfg.tau_hold})
        )
        return out


# -- channels ------------------------------------------------------------------


@dataclass(frozen=True)
class LogEntry:
    tick: int
    sender: str
    kind: str
    nbytes: int


@dataclass
class Channel:
    """How the two parties talk.

    ``mode`` is ``"inprocess"`` or ``"socket"``. ``latency_ticks`` delays
    every classical message on the simulated clock recorded in ``log``; it
    never changes protocol outcomes.
    """

    mode: str = "inprocess"
    latency_ticks: int = 0
    host: str = "127.0.0.1"
    port: int = 0
    timeout: float = 30.0
    log: list[LogEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in ("inprocess", "socket"):
            raise ValueError(f"unknown channel mode {self.mode!r}")
        if self.latency_ticks < 0:
            raise ValueError("latency must be non-negative")


def _run_inprocess(alice: Alice, bob: Bob, channel: Channel):
    parties = {"alice": alice, "bob": bob}
    decoders = {"alice": FrameDecoder(), "bob": FrameDecoder()}
    queue = [("alice", "bob", encode(m)) for m in alice.start()]
    clock = 0
    while queue:
        sender, receiver, frame = queue.pop(0)
        clock += channel.latency_ticks
        channel.log.append(LogEntry(clock, sender, Kind(frame[4]).name, len(frame)))
        try:
            msgs = decoders[receiver].feed(frame)
        except FrameError as exc:
            replies = parties[receiver].on_frame_error(exc)
        else:
            replies = [r for m in msgs for r in parties[receiver].handle(m)]
        queue.extend((receiver, sender, encode(r)) for r in replies)
    for p in parties.values():
        p.on_channel_failure("peer went silent")


def _recv_loop(party: _Party, sock: socket.socket):
    dec = FrameDecoder()
    try:
        for m in party.start():
            sock.sendall(encode(m))
        while not party.done:
            data = sock.recv(65536)
            if not data:
                party.on_channel_failure("connection closed by peer")
                break
            try:
                msgs = dec.feed(data)
            except FrameError as exc:
                for r in party.on_frame_error(exc):
                    sock.sendall(encode(r))
                break
            for m in msgs:
                for r in party.handle(m):
                    sock.sendall(encode(r))
                if party.done:
                    break
    except OSError as exc:
        party.on_channel_failure(str(exc))


def serve_bob(cfg: BobConfig, host: str = "127.0.0.1", port: int = 0, ready=None, timeout: float = 30.0) -> Transcript:
    """Listen for one Alice connection and run Bob to completion.

    ``ready``, if given, is called with the bound port before accepting.
    """
    bob = Bob(cfg)
    with socket.create_server((host, port)) as srv:
        srv.settimeout(timeout)
        if ready is not None:
            ready(srv.getsockname()[1])
        try:
            conn, _ = srv.accept()
        except OSError as exc:
            bob.on_channel_failure(str(exc))
            return bob.transcript
        with conn:
            conn.settimeout(timeout)
            _recv_loop(bob, conn)
    return bob.transcript


def connect_alice(cfg: AliceConfig, host: str, port: int, timeout: float = 30.0) -> Transcript:
    alice = Alice(cfg)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        alice.on_channel_failure(str(exc))
        return alice.transcript
    with sock:
        _recv_loop(alice, sock)
    return alice.transcript


def _bob_process(cfg: BobConfig, host: str, port: int, timeout: float, conn):
    try:
        tr = serve_bob(cfg, host, port, ready=conn.send, timeout=timeout)
        conn.send(tr.to_text())
    finally:
        conn.close()


def run_session(alice_cfg: AliceConfig, bob_cfg: BobConfig, channel: Channel | None = None) -> tuple[Transcript, Transcript]:
    """Run one commitment session and return ``(alice_transcript, bob_transcript)``.

    In socket mode Bob runs in a separate process listening on
    ``channel.host:channel.port`` (port 0 picks a free one) and Alice
    connects from this process.
    """
    channel = channel or Channel()
    if channel.mode == "inprocess":
        alice, bob = Alice(alice_cfg), Bob(bob_cfg)
        _run_inprocess(alice, bob, channel)
        return alice.transcript, bob.transcript

    ctx = mp.get_context("spawn")
    parent, child = ctx.Pipe()
    proc = ctx.Process(target=_bob_process, args=(bob_cfg, channel.host, channel.port, channel.timeout, child))
    proc.start()
    child.close()
    try:
        if not parent.poll(channel.timeout):
            raise RuntimeError("Bob process did not start listening")
        port = parent.recv()
        alice_tr = connect_alice(alice_cfg, channel.host, port, channel.timeout)
        if not parent.poll(channel.timeout):
            raise RuntimeError("Bob process did not report a transcript")
        bob_tr = Transcript.from_text(parent.recv())
    finally:
        proc.join(channel.timeout)
        if proc.is_alive():
            proc.terminate()
        parent.close()
    return alice_tr, bob_tr
