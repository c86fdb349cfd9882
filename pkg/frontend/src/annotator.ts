// /control client: trial start/stop and annotations with acknowledgement
// tracking. Unacknowledged sends surface a retry prompt after 2 s; sends
// attempted while disconnected queue locally and flush on reconnect,
// flagged as delayed.

import { AckMsg, ControlMsg, ControlPayload, ControlType, parseAck } from "./protocol.js";
import { SocketLike } from "./connection.js";

export type PendingStatus = "queued_offline" | "sent" | "acked" | "retry_prompt";

export interface PendingControl {
  msg: ControlMsg;
  status: PendingStatus;
  sentAtMs: number | null;
  ack: AckMsg | null;
  delayed: boolean;
}

export const ACK_TIMEOUT_MS = 2000;

export class ControlChannel {
  readonly entries: PendingControl[] = [];
  onUpdate: (() => void) | null = null;

  private socket: SocketLike | null = null;
  private connected = false;

  constructor(private readonly now: () => number = () => Date.now()) {}

  attach(socket: SocketLike): void {
    this.socket = socket;
    socket.onmessage = (ev) => this.handleAck(String(ev.data));
    socket.onopen = () => {
      this.connected = true;
      this.flushQueued();
      this.onUpdate?.();
    };
    socket.onclose = () => {
      this.connected = false;
      this.socket = null;
      this.onUpdate?.();
    };
  }

  get isConnected(): boolean {
    return this.connected;
  }

  send(type: ControlType, label: string, payload: ControlPayload = {}): PendingControl {
    const entry: PendingControl = {
      msg: { type, label, payload: { ...payload } },
      status: "queued_offline",
      sentAtMs: null,
      ack: null,
      delayed: false,
    };
    this.entries.push(entry);
    if (this.connected && this.socket) {
      this.transmit(entry);
    } else {
      entry.delayed = true; // will be flagged when it finally goes out
    }
    this.onUpdate?.();
    return entry;
  }

  /** Re-send an entry that hit the retry prompt. */
  retry(entry: PendingControl): void {
    if (entry.status !== "retry_prompt") return;
    if (this.connected && this.socket) {
      this.transmit(entry);
    } else {
      entry.status = "queued_offline";
      entry.delayed = true;
    }
    this.onUpdate?.();
  }

  /** Drive ack timeouts; call from the render loop or a timer. */
  tick(): void {
    const now = this.now();
    let changed = false;
    for (const entry of this.entries) {
      if (entry.status === "sent" && entry.sentAtMs !== null &&
          now - entry.sentAtMs > ACK_TIMEOUT_MS) {
        entry.status = "retry_prompt";
        changed = true;
      }
    }
    if (changed) this.onUpdate?.();
  }

  private transmit(entry: PendingControl): void {
    const msg: ControlMsg = entry.delayed
      ? { ...entry.msg, payload: { ...entry.msg.payload, delayed: true } }
      : entry.msg;
    this.socket!.send(JSON.stringify(msg));
    entry.status = "sent";
    entry.sentAtMs = this.now();
  }

  private flushQueued(): void {
    for (const entry of this.entries) {
      if (entry.status === "queued_offline" || entry.status === "retry_prompt") {
        this.transmit(entry);
      }
    }
  }

  private handleAck(raw: string): void {
    const ack = parseAck(raw);
    if (ack === null) return;
    // acks carry no correlation id; match the oldest un-acked send FIFO-style
    for (const entry of this.entries) {
      if ((entry.status === "sent" || entry.status === "retry_prompt") &&
          entry.msg.type === ack.of && entry.msg.label === ack.label) {
        entry.status = "acked";
        entry.ack = ack;
        this.onUpdate?.();
        return;
      }
    }
  }
}
