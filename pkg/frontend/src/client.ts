// Session client: keeps the GraphStore in sync over the WebSocket
// protocol and tracks create_room commands by cmd_id. Works with the
// browser WebSocket and with the `ws` package (tests) through a
// minimal structural interface.

import {
  AckMsg,
  DeltaMsg,
  HelloMsg,
  Message,
  MetricsUpdateMsg,
  NackMsg,
  PROTOCOL_VERSION,
  SnapshotMsg,
  decodeMessage,
  encodeMessage,
} from "./protocol.js";
import { GraphStore } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type CommandResponse = AckMsg | NackMsg;

interface PendingCommand {
  message: string;
  resolve: (response: CommandResponse) => void;
  sent: boolean;
}

export interface ClientEvents {
  onChange?: () => void; // store mutated (snapshot or delta applied)
  onMetrics?: (payload: MetricsUpdateMsg["payload"]) => void;
  onStatus?: (status: string) => void;
}

let cmdCounter = 0;

export function freshCmdId(): string {
  cmdCounter += 1;
  return `cmd-${Date.now().toString(36)}-${cmdCounter}`;
}

export class SessionClient {
  store = new GraphStore();
  private socket: SocketLike | null = null;
  private pending = new Map<string, PendingCommand>();
  private events: ClientEvents;
  private url = "";
  connected = false;

  constructor(private socketFactory: SocketFactory, events: ClientEvents = {}) {
    this.events = events;
  }

  connect(url: string): Promise<void> {
    this.url = url;
    return new Promise((resolve, reject) => {
      const socket = this.socketFactory(url);
      this.socket = socket;
      socket.onopen = () => {
        this.connected = true;
        this.events.onStatus?.("connected");
        const hello: HelloMsg = { type: "hello", protocol: PROTOCOL_VERSION };
        if (this.store.synced) {
          hello.last_revision = this.store.revision;
        }
        socket.send(encodeMessage(hello));
        // commands queued while offline go out after the hello
        for (const cmd of this.pending.values()) {
          if (!cmd.sent) {
            socket.send(cmd.message);
            cmd.sent = true;
          }
        }
        resolve();
      };
      socket.onmessage = (ev) => this.handleFrame(String(ev.data));
      socket.onclose = () => {
        this.connected = false;
        this.events.onStatus?.("disconnected");
      };
      socket.onerror = (err) => {
        this.events.onStatus?.("socket error");
        if (!this.connected) reject(err);
      };
    });
  }

  close(): void {
    this.socket?.close();
  }

  private handleFrame(text: string): void {
    let msg: Message;
    try {
      msg = decodeMessage(text);
    } catch (err) {
      this.events.onStatus?.(`protocol error: ${err}`);
      return;
    }
    switch (msg.type) {
      case "hello":
        break; // server greeting; snapshot or deltas follow
      case "snapshot":
        this.store.applySnapshot((msg as SnapshotMsg).graph);
        this.events.onChange?.();
        break;
      case "delta": {
        const delta = msg as DeltaMsg;
        if (!this.store.applyDelta(delta.revision, delta.events)) {
          this.requestResync();
        } else {
          this.events.onChange?.();
        }
        break;
      }
      case "ack":
      case "nack": {
        const response = msg as CommandResponse;
        const cmd = this.pending.get(response.cmd_id);
        if (cmd) {
          this.pending.delete(response.cmd_id);
          cmd.resolve(response);
        }
        break;
      }
      case "metrics_update":
        this.events.onMetrics?.((msg as MetricsUpdateMsg).payload);
        break;
    }
  }

  /** Revision gap: ask for a full snapshot on the same connection. */
  private requestResync(): void {
    this.events.onStatus?.("revision gap, requesting snapshot");
    this.socket?.send(encodeMessage({ type: "hello", protocol: PROTOCOL_VERSION }));
  }

  /**
   * Send a create_room command. While disconnected the command stays
   * queued until the next reconnect unless cancelled.
   */
  createRoom(planeIds: number[]): { cmdId: string; response: Promise<CommandResponse> } {
    const cmdId = freshCmdId();
    const message = encodeMessage({
      type: "create_room",
      cmd_id: cmdId,
      plane_ids: [...planeIds],
    });
    const response = new Promise<CommandResponse>((resolve) => {
      this.pending.set(cmdId, { message, resolve, sent: false });
      if (this.connected && this.socket) {
        const cmd = this.pending.get(cmdId)!;
        this.socket.send(message);
        cmd.sent = true;
      }
    });
    return { cmdId, response };
  }

  cancelQueued(cmdId: string): boolean {
    const cmd = this.pending.get(cmdId);
    if (cmd && !cmd.sent) {
      this.pending.delete(cmdId);
      return true;
    }
    return false;
  }

  get queuedCount(): number {
    return [...this.pending.values()].filter((c) => !c.sent).length;
  }
}
