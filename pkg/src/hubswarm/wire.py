"""Wire protocol for live operator sessions.

Every message travels as one frame: an ASCII decimal byte length, a
newline, then that many bytes of UTF-8 JSON. The JSON object always
carries `type`, `session`, `seq`, and `payload`; unknown top-level fields
survive a decode/encode round trip untouched, which keeps old servers
compatible with newer clients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SERVER_TYPES = frozenset(
    {"hello", "snapshot", "command_ack", "system_message", "probe_question", "decision_event", "trial_ended", "error"}
)
CLIENT_TYPES = frozenset({"join", "command", "probe_answer", "info_window_toggle", "pause"})

_KNOWN_FIELDS = ("type", "session", "seq", "payload")
MAX_FRAME_BYTES = 8 * 1024 * 1024


class FrameError(ValueError):
    """Malformed frame; `offset` points at the offending byte."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass
class WireMessage:
    type: str
    session: str = ""
    seq: int = 0
    payload: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)    # unknown fields, preserved opaquely

    def to_obj(self) -> dict:
        obj = {"type": self.type, "session": self.session, "seq": self.seq, "payload": self.payload}
        obj.update(self.extra)
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "WireMessage":
        if "type" not in obj:
            raise FrameError("message missing 'type'")
        extra = {k: v for k, v in obj.items() if k not in _KNOWN_FIELDS}
        return cls(
            type=str(obj["type"]),
            session=str(obj.get("session", "")),
            seq=int(obj.get("seq", 0)),
            payload=dict(obj.get("payload") or {}),
            extra=extra,
        )


def encode(msg: WireMessage) -> bytes:
    body = json.dumps(msg.to_obj(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    return b"%d\n%s" % (len(body), body)


def decode(buf: bytes | bytearray, start: int = 0) -> tuple[WireMessage, int]:
    """Decode one frame from `buf[start:]`; returns (message, next offset).

    Raises IncompleteFrame when more bytes are needed and FrameError when
    the data cannot ever parse.
    """
    nl = bytes(buf).find(b"\n", start, start + 20)
    if nl < 0:
        if len(buf) - start > 20:
            raise FrameError("frame length header missing", start)
        raise IncompleteFrame(start)
    header = bytes(buf[start:nl])
    if not header.isdigit():
        raise FrameError(f"bad length header {header!r}", start)
    length = int(header)
    if length > MAX_FRAME_BYTES:
        raise FrameError(f"frame of {length} bytes exceeds limit", start)
    body_start = nl + 1
    body_end = body_start + length
    if len(buf) < body_end:
        raise IncompleteFrame(start)
    body = bytes(buf[body_start:body_end])
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FrameError(f"frame body is not valid JSON: {exc}", body_start) from exc
    if not isinstance(obj, dict):
        raise FrameError("frame body must be a JSON object", body_start)
    return WireMessage.from_obj(obj), body_end


def decode_exact(buf: bytes) -> WireMessage:
    """Decode a buffer that must contain exactly one complete frame."""
    try:
        msg, end = decode(buf)
    except IncompleteFrame as exc:
        raise FrameError("truncated frame", exc.offset) from None
    if end != len(buf):
        raise FrameError(f"{len(buf) - end} trailing bytes after frame", end)
    return msg


class IncompleteFrame(Exception):
    """Not enough bytes buffered yet; read more and retry."""

    def __init__(self, offset: int):
        super().__init__("incomplete frame")
        self.offset = offset


class FrameDecoder:
    """Incremental decoder for a byte stream of concatenated frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[WireMessage]:
        self._buf.extend(data)
        out = []
        pos = 0
        while True:
            try:
                msg, pos = decode(self._buf, pos)
            except IncompleteFrame:
                break
            out.append(msg)
        if pos:
            del self._buf[:pos]
        return out
