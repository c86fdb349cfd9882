// /stream client: bounded buffering, reconnect with backoff, and the
// freshness bookkeeping behind the "latest-sample age" readout.

import { parseStreamMessage, SampleMsg, EventMsg, HealthMsg } from "./protocol.js";
import { RingBuffer } from "./ring.js";

/** The subset of the browser WebSocket API we rely on (ws-compatible). */
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  send(data: string): void;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionState = "connecting" | "open" | "retrying" | "closed";

export interface StreamOptions {
  makeSocket?: SocketFactory;
  now?: () => number; // wall-clock ms
  setTimer?: (fn: () => void, ms: number) => unknown;
  clearTimer?: (handle: unknown) => void;
  bufferSize?: number; // drop-oldest, mirrors the server contract
  backoffBaseMs?: number;
  backoffMaxMs?: number;
  staleAfterMs?: number; // "no signal" threshold
}

export class StreamConnection {
  readonly samples: RingBuffer<SampleMsg>;
  readonly events: RingBuffer<EventMsg>;
  health: HealthMsg | null = null;
  state: ConnectionState = "closed";
  retryAttempt = 0;
  onStateChange: ((state: ConnectionState) => void) | null = null;

  private socket: SocketLike | null = null;
  private lastRxWallMs: number | null = null;
  private lastSampleRxMs: number | null = null;
  private retryHandle: unknown = null;
  private stopped = false;

  private readonly makeSocket: SocketFactory;
  private readonly now: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private readonly clearTimer: (handle: unknown) => void;
  private readonly backoffBaseMs: number;
  private readonly backoffMaxMs: number;
  private readonly staleAfterMs: number;

  constructor(readonly url: string, opts: StreamOptions = {}) {
    this.makeSocket = opts.makeSocket ?? ((u) => new WebSocket(u) as unknown as SocketLike);
    this.now = opts.now ?? (() => Date.now());
    this.setTimer = opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = opts.clearTimer ?? ((h) => clearTimeout(h as number));
    this.samples = new RingBuffer<SampleMsg>(opts.bufferSize ?? 1024);
    this.events = new RingBuffer<EventMsg>(opts.bufferSize ?? 1024);
    this.backoffBaseMs = opts.backoffBaseMs ?? 500;
    this.backoffMaxMs = opts.backoffMaxMs ?? 8000;
    this.staleAfterMs = opts.staleAfterMs ?? 1000;
  }

  connect(): void {
    this.stopped = false;
    this.open();
  }

  private open(): void {
    this.setState("connecting");
    const socket = this.makeSocket(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retryAttempt = 0;
      this.setState("open");
    };
    socket.onmessage = (ev) => this.handleMessage(String(ev.data));
    socket.onerror = () => {
      /* onclose always follows */
    };
    socket.onclose = () => {
      this.socket = null;
      if (this.stopped) {
        this.setState("closed");
        return;
      }
      this.scheduleRetry();
    };
  }

  private handleMessage(raw: string): void {
    const msg = parseStreamMessage(raw);
    if (msg === null) return;
    this.lastRxWallMs = this.now();
    if (msg.type === "sample") {
      this.lastSampleRxMs = msg.rx_ms ?? this.lastRxWallMs;
      this.samples.push(msg);
    } else if (msg.type === "event") {
      this.events.push(msg);
    } else {
      this.health = msg;
    }
  }

  private scheduleRetry(): void {
    this.setState("retrying"); // disconnect becomes visible immediately
    const delay = Math.min(this.backoffBaseMs * 2 ** this.retryAttempt, this.backoffMaxMs);
    this.retryAttempt += 1;
    this.retryHandle = this.setTimer(() => {
      this.retryHandle = null;
      if (!this.stopped) this.open();
    }, delay);
  }

  /** Milliseconds since the newest sample arrived at the host; null before data. */
  sampleAgeMs(): number | null {
    if (this.lastSampleRxMs === null) return null;
    return this.now() - this.lastSampleRxMs;
  }

  /** True when the chart should show "no signal" instead of a frozen trace. */
  isStale(): boolean {
    if (this.state !== "open") return true;
    if (this.lastRxWallMs === null) return true;
    return this.now() - this.lastRxWallMs > this.staleAfterMs;
  }

  close(): void {
    this.stopped = true;
    if (this.retryHandle !== null) {
      this.clearTimer(this.retryHandle);
      this.retryHandle = null;
    }
    this.socket?.close();
    this.socket = null;
    this.setState("closed");
  }

  private setState(state: ConnectionState): void {
    if (this.state === state) return;
    this.state = state;
    this.onStateChange?.(state);
  }
}
