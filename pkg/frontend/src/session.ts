/**
 * Connection + session state machine, free of DOM dependencies so it can be
 * driven by tests with an injected WebSocket implementation.
 *
 * Rules enforced here:
 *  - rendered seq is strictly monotone: stale/out-of-order states are dropped
 *  - incoming frames go through a bounded drop-oldest queue so slow
 *    rendering can never apply backpressure to the socket
 *  - control messages (takeover/release/action/label) are sent immediately,
 *    never queued or dropped
 *  - actions are only sent while control is human; otherwise a hint fires
 *  - the first label wins; later labels are ignored
 *  - connection loss raises a status event and schedules a reconnect with
 *    exponential backoff
 */
import { ClientMessage, StateMessage, parseStateMessage } from "./protocol.js";

export type ControlState = "autonomous" | "human";
export type ConnectionStatus = "connecting" | "open" | "closed" | "reconnecting";

export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export interface SessionOptions {
  url: string;
  makeSocket: (url: string) => WebSocketLike;
  /** bounded frame queue capacity (drop-oldest beyond it) */
  queueCapacity?: number;
  /** initial reconnect delay in ms; doubles per attempt up to maxBackoffMs */
  backoffMs?: number;
  maxBackoffMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export interface SessionEvents {
  onState?: (msg: StateMessage) => void;
  onStatus?: (status: ConnectionStatus) => void;
  onHint?: (text: string) => void;
}

export class SessionClient {
  readonly queue: StateMessage[] = [];
  control: ControlState = "autonomous";
  status: ConnectionStatus = "connecting";
  grip: 0 | 1 = 0;
  labeled = false;
  lastSeq = -1;
  dropped = 0;
  sent: ClientMessage[] = [];

  private socket: WebSocketLike | null = null;
  private readonly capacity: number;
  private backoff: number;
  private readonly baseBackoff: number;
  private readonly maxBackoff: number;
  private readonly setTimeoutFn: (fn: () => void, ms: number) => unknown;
  private closedByUser = false;

  constructor(
    private readonly opts: SessionOptions,
    private readonly events: SessionEvents = {},
  ) {
    this.capacity = opts.queueCapacity ?? 8;
    this.baseBackoff = opts.backoffMs ?? 250;
    this.maxBackoff = opts.maxBackoffMs ?? 4000;
    this.backoff = this.baseBackoff;
    this.setTimeoutFn = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    this.connect();
  }

  private setStatus(status: ConnectionStatus): void {
    this.status = status;
    this.events.onStatus?.(status);
  }

  private connect(): void {
    const socket = this.opts.makeSocket(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      this.backoff = this.baseBackoff;
      this.setStatus("open");
    };
    socket.onmessage = (ev) => this.receive(String(ev.data));
    const onDown = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      if (this.closedByUser) {
        this.setStatus("closed");
        return;
      }
      this.setStatus("reconnecting");
      const delay = this.backoff;
      this.backoff = Math.min(this.backoff * 2, this.maxBackoff);
      this.setTimeoutFn(() => {
        if (!this.closedByUser) this.connect();
      }, delay);
    };
    socket.onclose = onDown;
    socket.onerror = onDown;
  }

  receive(raw: string): void {
    const msg = parseStateMessage(raw);
    if (msg.seq <= this.lastSeq) {
      this.dropped += 1;
      return; // out-of-order or duplicate: never rendered
    }
    this.lastSeq = msg.seq;
    this.control = msg.intervening ? "human" : "autonomous";
    this.queue.push(msg);
    while (this.queue.length > this.capacity) {
      this.queue.shift(); // drop-oldest, keep the freshest frames
      this.dropped += 1;
    }
    this.events.onState?.(msg);
  }

  /** Pull the next state for rendering; undefined when caught up. */
  nextFrame(): StateMessage | undefined {
    return this.queue.shift();
  }

  private send(msg: ClientMessage): void {
    if (!this.socket || this.status !== "open") {
      this.events.onHint?.("not connected");
      return;
    }
    this.sent.push(msg);
    this.socket.send(JSON.stringify(msg));
  }

  takeover(): void {
    this.control = "human";
    this.send({ type: "takeover" });
  }

  release(): void {
    this.control = "autonomous";
    this.send({ type: "release" });
  }

  toggleGrip(): void {
    this.grip = this.grip === 0 ? 1 : 0;
  }

  sendAction(ax: number, ay: number): void {
    if (this.control !== "human") {
      this.events.onHint?.("take over first (T)");
      return;
    }
    this.send({ type: "action", ax, ay, grip: this.grip });
  }

  labelEpisode(outcome: "success" | "failure"): void {
    if (this.labeled) {
      this.events.onHint?.("episode already labeled");
      return;
    }
    this.labeled = true;
    this.send({ type: "label", outcome });
  }

  close(): void {
    this.closedByUser = true;
    this.socket?.close();
  }
}

/**
 * Turns held keys into actions at the control tick rate, independent of the
 * keyboard's auto-repeat. Arrow keys / WASD steer, space toggles grip.
 */
export class HeldKeyTicker {
  private held = new Set<string>();

  constructor(private readonly session: SessionClient) {}

  keyDown(key: string): void {
    const k = key.toLowerCase();
    if (k === "t") {
      this.session.takeover();
      return;
    }
    if (k === "r") {
      this.session.release();
      return;
    }
    if (k === " " || k === "space") {
      if (!this.held.has("space")) this.session.toggleGrip();
      this.held.add("space");
      return;
    }
    this.held.add(k);
  }

  keyUp(key: string): void {
    const k = key.toLowerCase();
    this.held.delete(k === " " ? "space" : k);
  }

  /** Called once per control tick; emits at most one action. */
  tick(): void {
    let ax = 0;
    let ay = 0;
    if (this.held.has("arrowleft") || this.held.has("a")) ax -= 1;
    if (this.held.has("arrowright") || this.held.has("d")) ax += 1;
    if (this.held.has("arrowup") || this.held.has("w")) ay -= 1;
    if (this.held.has("arrowdown") || this.held.has("s")) ay += 1;
    if (ax !== 0 || ay !== 0 || this.session.control === "human") {
      this.session.sendAction(ax, ay);
    }
  }
}
