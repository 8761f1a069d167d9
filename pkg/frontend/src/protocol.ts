// Wire protocol: one JSON document per WebSocket frame.

export const PROTOCOL_VERSION = 1;

export interface HelloMsg {
  type: "hello";
  protocol: number;
  last_revision?: number;
  revision?: number;
}

export interface SnapshotMsg {
  type: "snapshot";
  revision: number;
  graph: GraphDump;
}

export interface DeltaEventData {
  kind: "keyframe" | "plane" | "room" | "floor";
  op: "upsert" | "remove";
  data: Record<string, unknown>;
}

export interface DeltaMsg {
  type: "delta";
  revision: number;
  events: DeltaEventData[];
}

export interface CreateRoomMsg {
  type: "create_room";
  cmd_id: string;
  plane_ids: number[];
}

export interface AckMsg {
  type: "ack";
  cmd_id: string;
  room_id: number;
}

export interface NackMsg {
  type: "nack";
  cmd_id: string;
  violation: string;
}

export interface MetricsUpdateMsg {
  type: "metrics_update";
  payload: Record<string, unknown>;
}

export type Message =
  | HelloMsg
  | SnapshotMsg
  | DeltaMsg
  | CreateRoomMsg
  | AckMsg
  | NackMsg
  | MetricsUpdateMsg;

export interface PlaneExtentData {
  center: [number, number, number];
  half_u: number;
  half_v: number;
}

export interface PlaneData {
  id: number;
  normal: [number, number, number];
  offset: number;
  extent: PlaneExtentData;
  provenance: string;
  axis_class: string;
}

export interface KeyframeData {
  id: number;
  pose: number[]; // [qw qx qy qz tx ty tz]
  stamp: number;
  observed_plane_ids: number[];
}

export interface RoomData {
  id: number;
  center: [number, number];
  plane_ids: number[];
  provenance: string;
  floor_id: number;
}

export interface FloorData {
  id: number;
  room_ids: number[];
}

export interface GraphDump {
  revision: number;
  keyframes: KeyframeData[];
  planes: PlaneData[];
  rooms: RoomData[];
  floors: FloorData[];
}

const SCHEMAS: Record<string, { required: string[]; optional: string[] }> = {
  hello: { required: ["protocol"], optional: ["last_revision", "revision"] },
  snapshot: { required: ["revision", "graph"], optional: [] },
  delta: { required: ["revision", "events"], optional: [] },
  create_room: { required: ["cmd_id", "plane_ids"], optional: [] },
  ack: { required: ["cmd_id", "room_id"], optional: [] },
  nack: { required: ["cmd_id", "violation"], optional: [] },
  metrics_update: { required: ["payload"], optional: [] },
};

export class ProtocolViolation extends Error {}

export function validateMessage(msg: unknown): Message {
  if (typeof msg !== "object" || msg === null || Array.isArray(msg)) {
    throw new ProtocolViolation("message must be a JSON object");
  }
  const record = msg as Record<string, unknown>;
  const schema = SCHEMAS[record.type as string];
  if (!schema) {
    throw new ProtocolViolation(`unknown message type ${JSON.stringify(record.type)}`);
  }
  const fields = Object.keys(record).filter((k) => k !== "type");
  for (const req of schema.required) {
    if (!(req in record)) throw new ProtocolViolation(`${record.type}: missing field ${req}`);
  }
  for (const field of fields) {
    if (!schema.required.includes(field) && !schema.optional.includes(field)) {
      throw new ProtocolViolation(`${record.type}: unknown field ${field}`);
    }
  }
  return record as unknown as Message;
}

export function encodeMessage(msg: Message): string {
  return JSON.stringify(validateMessage(msg));
}

export function decodeMessage(text: string): Message {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (err) {
    throw new ProtocolViolation(`invalid JSON: ${err}`);
  }
  return validateMessage(parsed);
}
