// Message formats spoken by the host service's /stream and /control sockets.

export interface SampleMsg {
  type: "sample";
  t_s: number;
  pa: number;
  rx_ms?: number;
}

export interface EventMsg {
  type: "event";
  t_s: number;
  label: string;
  rx_ms?: number;
}

export interface HealthMsg {
  type: "health";
  frames_ok: number;
  frames_crc_fail: number;
  frames_resync: number;
  gaps: number;
  last_seq: number | null;
}

export type StreamMsg = SampleMsg | EventMsg | HealthMsg;

export type ControlType = "annotate" | "trial_start" | "trial_stop";

export interface ControlPayload {
  condition?: string;
  mass_kg?: number;
  angle_deg?: number;
  delayed?: boolean;
  [key: string]: unknown;
}

export interface ControlMsg {
  type: ControlType;
  label: string;
  payload: ControlPayload;
}

export interface AckMsg {
  type: "ack";
  of: string;
  t_s: number;
  label: string;
}

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

/** Parse one /stream message; returns null for anything malformed. */
export function parseStreamMessage(raw: string): StreamMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const m = obj as Record<string, unknown>;
  switch (m.type) {
    case "sample":
      if (!isFiniteNumber(m.t_s) || !isFiniteNumber(m.pa)) return null;
      return {
        type: "sample",
        t_s: m.t_s,
        pa: m.pa,
        rx_ms: isFiniteNumber(m.rx_ms) ? m.rx_ms : undefined,
      };
    case "event":
      if (!isFiniteNumber(m.t_s) || typeof m.label !== "string") return null;
      return {
        type: "event",
        t_s: m.t_s,
        label: m.label,
        rx_ms: isFiniteNumber(m.rx_ms) ? m.rx_ms : undefined,
      };
    case "health":
      return {
        type: "health",
        frames_ok: isFiniteNumber(m.frames_ok) ? m.frames_ok : 0,
        frames_crc_fail: isFiniteNumber(m.frames_crc_fail) ? m.frames_crc_fail : 0,
        frames_resync: isFiniteNumber(m.frames_resync) ? m.frames_resync : 0,
        gaps: isFiniteNumber(m.gaps) ? m.gaps : 0,
        last_seq: isFiniteNumber(m.last_seq) ? m.last_seq : null,
      };
    default:
      return null;
  }
}

/** Parse a /control acknowledgement; null when not an ack. */
export function parseAck(raw: string): AckMsg | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const m = obj as Record<string, unknown>;
  if (m.type !== "ack" || typeof m.of !== "string" || typeof m.label !== "string") {
    return null;
  }
  return { type: "ack", of: m.of, t_s: isFiniteNumber(m.t_s) ? m.t_s : NaN, label: m.label };
}
