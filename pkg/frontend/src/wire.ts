/**
 * Frame codec for the gateway protocol: an ASCII decimal byte length, a
 * newline, then that many bytes of UTF-8 JSON. Unknown top-level fields
 * survive a decode/encode round trip untouched.
 */

export interface WireMessage {
  type: string;
  session: string;
  seq: number;
  payload: Record<string, unknown>;
  extra: Record<string, unknown>;
}

const KNOWN_FIELDS = new Set(["type", "session", "seq", "payload"]);
const MAX_FRAME_BYTES = 8 * 1024 * 1024;

export class FrameError extends Error {
  constructor(message: string, public readonly offset = 0) {
    super(`${message} (offset ${offset})`);
  }
}

export function makeMessage(
  type: string,
  payload: Record<string, unknown> = {},
  session = "",
  seq = 0,
): WireMessage {
  return { type, session, seq, payload, extra: {} };
}

export function encode(msg: WireMessage): Uint8Array {
  const obj: Record<string, unknown> = {
    type: msg.type,
    session: msg.session,
    seq: msg.seq,
    payload: msg.payload,
    ...msg.extra,
  };
  // Stable key order keeps re-encoding bit-identical with the server side.
  const body = new TextEncoder().encode(stableStringify(obj));
  const header = new TextEncoder().encode(`${body.length}\n`);
  const out = new Uint8Array(header.length + body.length);
  out.set(header, 0);
  out.set(body, header.length);
  return out;
}

function stableStringify(value: unknown): string {
  if (value === null || typeof value !== "object") return JSON.stringify(value);
  if (Array.isArray(value)) return `[${value.map(stableStringify).join(",")}]`;
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => `${JSON.stringify(k)}:${stableStringify(v)}`);
  return `{${entries.join(",")}}`;
}

function fromObject(obj: Record<string, unknown>): WireMessage {
  if (typeof obj.type !== "string") throw new FrameError("message missing 'type'");
  const extra: Record<string, unknown> = {};
  for (const [k, v] of Object.entries(obj)) {
    if (!KNOWN_FIELDS.has(k)) extra[k] = v;
  }
  return {
    type: obj.type,
    session: typeof obj.session === "string" ? obj.session : "",
    seq: typeof obj.seq === "number" ? obj.seq : 0,
    payload: (obj.payload as Record<string, unknown>) ?? {},
    extra,
  };
}

/** Incremental decoder for a byte stream of concatenated frames. */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  feed(data: Uint8Array): WireMessage[] {
    const joined = new Uint8Array(this.buffer.length + data.length);
    joined.set(this.buffer, 0);
    joined.set(data, this.buffer.length);
    this.buffer = joined;

    const out: WireMessage[] = [];
    let pos = 0;
    for (;;) {
      const frame = tryDecode(this.buffer, pos);
      if (frame === null) break;
      out.push(frame.message);
      pos = frame.end;
    }
    if (pos > 0) this.buffer = this.buffer.slice(pos);
    return out;
  }
}

interface Decoded {
  message: WireMessage;
  end: number;
}

function tryDecode(buf: Uint8Array, start: number): Decoded | null {
  const nl = findNewline(buf, start);
  if (nl < 0) {
    if (buf.length - start > 20) throw new FrameError("frame length header missing", start);
    return null;
  }
  const header = new TextDecoder().decode(buf.slice(start, nl));
  if (!/^\d+$/.test(header)) throw new FrameError(`bad length header ${JSON.stringify(header)}`, start);
  const length = parseInt(header, 10);
  if (length > MAX_FRAME_BYTES) throw new FrameError(`frame of ${length} bytes exceeds limit`, start);
  const bodyStart = nl + 1;
  const bodyEnd = bodyStart + length;
  if (buf.length < bodyEnd) return null;
  let obj: unknown;
  try {
    obj = JSON.parse(new TextDecoder().decode(buf.slice(bodyStart, bodyEnd)));
  } catch (err) {
    throw new FrameError(`frame body is not valid JSON: ${err}`, bodyStart);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new FrameError("frame body must be a JSON object", bodyStart);
  }
  return { message: fromObject(obj as Record<string, unknown>), end: bodyEnd };
}

/** Decode a buffer that must contain exactly one complete frame. */
export function decodeExact(buf: Uint8Array): WireMessage {
  const frame = tryDecode(buf, 0);
  if (frame === null) throw new FrameError("truncated frame");
  if (frame.end !== buf.length) throw new FrameError(`${buf.length - frame.end} trailing bytes`, frame.end);
  return frame.message;
}

function findNewline(buf: Uint8Array, start: number): number {
  const limit = Math.min(buf.length, start + 20);
  for (let i = start; i < limit; i++) {
    if (buf[i] === 0x0a) return i;
  }
  return -1;
}
