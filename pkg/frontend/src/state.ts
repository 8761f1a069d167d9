// Client-side mirror of the server scene graph, reconstructed from the
// snapshot + delta stream. The canonical string and sha256 hash must
// match the server's byte for byte (see the protocol notes in the
// repository README).

import {
  DeltaEventData,
  FloorData,
  GraphDump,
  KeyframeData,
  PlaneData,
  RoomData,
} from "./protocol.js";

function f9(v: number): string {
  return (v + 0).toFixed(9); // v + 0 folds -0 into 0
}

export class GraphStore {
  revision = -1; // unsynced until a snapshot arrives
  keyframes = new Map<number, KeyframeData>();
  planes = new Map<number, PlaneData>();
  rooms = new Map<number, RoomData>();
  floors = new Map<number, FloorData>();

  get synced(): boolean {
    return this.revision >= 0;
  }

  applySnapshot(dump: GraphDump): void {
    this.keyframes = new Map(dump.keyframes.map((k) => [k.id, k]));
    this.planes = new Map(dump.planes.map((p) => [p.id, p]));
    this.rooms = new Map(dump.rooms.map((r) => [r.id, r]));
    this.floors = new Map(dump.floors.map((fl) => [fl.id, fl]));
    this.revision = dump.revision;
  }

  /** Apply one delta; returns false on a revision gap (caller resyncs). */
  applyDelta(revision: number, events: DeltaEventData[]): boolean {
    if (!this.synced || revision !== this.revision + 1) {
      if (revision <= this.revision) return true; // duplicate from a resume race
      return false;
    }
    for (const ev of events) {
      const table = this.tableOf(ev.kind);
      if (ev.op === "upsert") {
        const entity = ev.data as { id: number };
        table.set(entity.id, ev.data as never);
      } else {
        table.delete((ev.data as { id: number }).id);
      }
    }
    this.revision = revision;
    return true;
  }

  private tableOf(kind: DeltaEventData["kind"]): Map<number, unknown> {
    switch (kind) {
      case "keyframe":
        return this.keyframes;
      case "plane":
        return this.planes;
      case "room":
        return this.rooms;
      case "floor":
        return this.floors;
    }
  }

  private sortedValues<T extends { id: number }>(table: Map<number, T>): T[] {
    return [...table.values()].sort((a, b) => a.id - b.id);
  }

  toDump(): GraphDump {
    return {
      revision: this.revision,
      keyframes: this.sortedValues(this.keyframes),
      planes: this.sortedValues(this.planes),
      rooms: this.sortedValues(this.rooms),
      floors: this.sortedValues(this.floors),
    };
  }

  canonicalString(): string {
    const lines: string[] = [`revision ${this.revision}`];
    for (const kf of this.sortedValues(this.keyframes)) {
      lines.push(
        `keyframe ${kf.id} ${f9(kf.stamp)} ${kf.pose.map(f9).join(" ")} obs ${kf.observed_plane_ids.join(",")}`,
      );
    }
    for (const p of this.sortedValues(this.planes)) {
      lines.push(
        `plane ${p.id} ${p.normal.map(f9).join(" ")} ${f9(p.offset)} ` +
          `${p.extent.center.map(f9).join(" ")} ${f9(p.extent.half_u)} ${f9(p.extent.half_v)} ` +
          `${p.provenance} ${p.axis_class}`,
      );
    }
    for (const r of this.sortedValues(this.rooms)) {
      lines.push(
        `room ${r.id} ${f9(r.center[0])} ${f9(r.center[1])} ${r.plane_ids.join(",")} ` +
          `${r.provenance} ${r.floor_id}`,
      );
    }
    for (const fl of this.sortedValues(this.floors)) {
      lines.push(`floor ${fl.id} ${fl.room_ids.join(",")}`);
    }
    return lines.join("\n");
  }

  async hash(): Promise<string> {
    const bytes = new TextEncoder().encode(this.canonicalString());
    const digest = await crypto.subtle.digest("SHA-256", bytes);
    return [...new Uint8Array(digest)].map((b) => b.toString(16).padStart(2, "0")).join("");
  }
}
