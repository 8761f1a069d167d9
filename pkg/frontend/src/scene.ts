// Three.js view of the graph store: plane rectangles colored by their
// dominant axis, room markers (red discs) wired to their four planes,
// and the keyframe trail. The world is z-up.

import * as THREE from "three";
import { GraphStore } from "./state.js";
import { PlaneData } from "./protocol.js";
import { Selection } from "./selection.js";

export const AXIS_COLORS: Record<string, number> = {
  x: 0x2e9e9b, // teal for x-facing walls
  y: 0xd98e32, // amber for y-facing walls
  other: 0x888888,
};
export const SELECTED_COLOR = 0xf5e342;
export const ROOM_COLOR = 0xd03030;

/** In-plane axes (u, v) for a unit normal; mirrors the back-end handedness. */
export function planeAxes(n: [number, number, number]): [THREE.Vector3, THREE.Vector3] {
  const normal = new THREE.Vector3(...n);
  let u: THREE.Vector3;
  if (Math.abs(normal.z) < 0.9) {
    u = new THREE.Vector3(0, 0, 1).cross(normal);
  } else {
    u = new THREE.Vector3(1, 0, 0).cross(normal);
  }
  u.normalize();
  const v = normal.clone().cross(u);
  return [u, v];
}

function planeMesh(plane: PlaneData, selected: boolean): THREE.Mesh {
  const geometry = new THREE.PlaneGeometry(2 * plane.extent.half_u, 2 * plane.extent.half_v);
  const color = selected ? SELECTED_COLOR : AXIS_COLORS[plane.axis_class] ?? AXIS_COLORS.other;
  const material = new THREE.MeshBasicMaterial({
    color,
    side: THREE.DoubleSide,
    transparent: true,
    opacity: selected ? 0.95 : 0.55,
  });
  const mesh = new THREE.Mesh(geometry, material);
  const [u, v] = planeAxes(plane.normal);
  const n = new THREE.Vector3(...plane.normal);
  const basis = new THREE.Matrix4().makeBasis(u, v, n);
  mesh.quaternion.setFromRotationMatrix(basis);
  mesh.position.set(...plane.extent.center);
  mesh.userData.planeId = plane.id;
  mesh.name = `plane-${plane.id}`;
  return mesh;
}

export class SceneView {
  root = new THREE.Group();
  planeMeshes = new Map<number, THREE.Mesh>();
  roomMarkers = new Map<number, THREE.Group>();
  private grid: THREE.GridHelper;

  constructor() {
    this.grid = new THREE.GridHelper(60, 60, 0x333333, 0x232323);
    this.grid.rotation.x = Math.PI / 2; // grid lives in the xy ground plane
    this.root.add(this.grid);
  }

  /** Rebuild all entity objects from the store (desk-scale graphs). */
  update(store: GraphStore, selection: Selection): void {
    for (const mesh of this.planeMeshes.values()) this.root.remove(mesh);
    for (const marker of this.roomMarkers.values()) this.root.remove(marker);
    this.planeMeshes.clear();
    this.roomMarkers.clear();
    const trail = this.root.getObjectByName("keyframe-trail");
    if (trail) this.root.remove(trail);

    for (const plane of store.planes.values()) {
      const mesh = planeMesh(plane, selection.has(plane.id));
      this.planeMeshes.set(plane.id, mesh);
      this.root.add(mesh);
    }

    for (const room of store.rooms.values()) {
      const marker = new THREE.Group();
      marker.name = `room-${room.id}`;
      marker.userData.roomId = room.id;
      const disc = new THREE.Mesh(
        new THREE.CircleGeometry(0.35, 24),
        new THREE.MeshBasicMaterial({ color: ROOM_COLOR, side: THREE.DoubleSide }),
      );
      disc.position.set(room.center[0], room.center[1], 0.02);
      marker.add(disc);
      const anchor = new THREE.Vector3(room.center[0], room.center[1], 0.02);
      for (const planeId of room.plane_ids) {
        const plane = store.planes.get(planeId);
        if (!plane) continue;
        const target = new THREE.Vector3(...plane.extent.center);
        const geometry = new THREE.BufferGeometry().setFromPoints([anchor, target]);
        marker.add(new THREE.Line(geometry, new THREE.LineBasicMaterial({ color: ROOM_COLOR })));
      }
      this.roomMarkers.set(room.id, marker);
      this.root.add(marker);
    }

    const keyframes = [...store.keyframes.values()].sort((a, b) => a.id - b.id);
    if (keyframes.length >= 2) {
      const points = keyframes.map((kf) => new THREE.Vector3(kf.pose[4], kf.pose[5], kf.pose[6] + 0.05));
      const geometry = new THREE.BufferGeometry().setFromPoints(points);
      const line = new THREE.Line(geometry, new THREE.LineBasicMaterial({ color: 0x4f7fd9 }));
      line.name = "keyframe-trail";
      this.root.add(line);
    }

    // picking happens against world matrices; refresh them now rather
    // than waiting for the next render
    this.root.updateMatrixWorld(true);
  }

  pickables(): THREE.Mesh[] {
    return [...this.planeMeshes.values()];
  }
}
