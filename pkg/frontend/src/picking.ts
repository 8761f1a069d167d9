// Plane picking: plain raycasts against the plane rectangles, no GPU.

import * as THREE from "three";
import { SceneView } from "./scene.js";

const raycaster = new THREE.Raycaster();

function nearestPlaneId(view: SceneView): number | null {
  const hits = raycaster.intersectObjects(view.pickables(), false);
  if (hits.length === 0) return null;
  return hits[0].object.userData.planeId as number;
}

/** Pick from normalized device coordinates through a camera. */
export function pickPlane(
  ndcX: number,
  ndcY: number,
  camera: THREE.Camera,
  view: SceneView,
): number | null {
  raycaster.setFromCamera(new THREE.Vector2(ndcX, ndcY), camera);
  return nearestPlaneId(view);
}

/** Pick along an explicit ray (used by scripted sessions and tests). */
export function pickPlaneWithRay(
  origin: THREE.Vector3,
  direction: THREE.Vector3,
  view: SceneView,
): number | null {
  raycaster.set(origin, direction.clone().normalize());
  return nearestPlaneId(view);
}
