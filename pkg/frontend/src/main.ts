// Browser entry point: renders the live scene graph and drives the
// room-creation workflow. Desk input mapping: left-drag orbits, wheel
// zooms, right-drag pans, click selects a plane (max four), and the
// Create room button confirms and submits the selection.

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { SessionClient } from "./client.js";
import { pickPlane } from "./picking.js";
import { SceneView } from "./scene.js";
import { MAX_SELECTED, Selection } from "./selection.js";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const selectionEl = document.getElementById("selection")!;
const noticeEl = document.getElementById("notice")!;
const metricsEl = document.getElementById("metrics")!;
const createButton = document.getElementById("create-room") as HTMLButtonElement;

const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
renderer.setPixelRatio(window.devicePixelRatio);

const scene = new THREE.Scene();
scene.background = new THREE.Color(0x10141a);
const camera = new THREE.PerspectiveCamera(55, 1, 0.1, 500);
camera.up.set(0, 0, 1); // z-up world
camera.position.set(10, -14, 14);

const controls = new OrbitControls(camera, canvas);
controls.target.set(9, 3, 0);
controls.mouseButtons = {
  LEFT: THREE.MOUSE.ROTATE,
  MIDDLE: THREE.MOUSE.DOLLY,
  RIGHT: THREE.MOUSE.PAN,
};

const view = new SceneView();
scene.add(view.root);
scene.add(new THREE.AmbientLight(0xffffff, 1.0));

const selection = new Selection();
let dirty = true;
let noticeTimer: number | undefined;

function showNotice(text: string): void {
  noticeEl.textContent = text;
  noticeEl.classList.add("visible");
  window.clearTimeout(noticeTimer);
  noticeTimer = window.setTimeout(() => noticeEl.classList.remove("visible"), 4000);
}

const client = new SessionClient((url) => new WebSocket(url) as never, {
  onChange: () => {
    selection.prune((id) => client.store.planes.has(id));
    dirty = true;
  },
  onStatus: (status) => {
    statusEl.textContent = `${status} · revision ${client.store.revision}`;
  },
  onMetrics: (payload) => {
    const parts: string[] = [];
    if (typeof payload.ate_m === "number") parts.push(`ATE ${(payload.ate_m as number).toFixed(3)} m`);
    if (typeof payload.recall === "number") parts.push(`recall ${(payload.recall as number).toFixed(2)}`);
    if (typeof payload.rooms === "number") parts.push(`${payload.rooms} rooms`);
    metricsEl.textContent = parts.join(" · ");
  },
});

function refreshHud(): void {
  const labels = selection.ids.map((id) => `#${id}`).join(", ");
  selectionEl.textContent = selection.ids.length
    ? `selected planes: ${labels}`
    : "click walls to select (4 make a room)";
  createButton.disabled = !selection.complete;
}

canvas.addEventListener("pointerdown", (ev) => {
  if (ev.button !== 0) return;
  (canvas as HTMLElement).dataset.downAt = `${ev.clientX},${ev.clientY}`;
});

canvas.addEventListener("pointerup", (ev) => {
  if (ev.button !== 0) return;
  const downAt = (canvas as HTMLElement).dataset.downAt;
  if (!downAt) return;
  const [dx, dy] = downAt.split(",").map(Number);
  if (Math.hypot(ev.clientX - dx, ev.clientY - dy) > 5) return; // drag, not click
  const rect = canvas.getBoundingClientRect();
  const ndcX = ((ev.clientX - rect.left) / rect.width) * 2 - 1;
  const ndcY = -(((ev.clientY - rect.top) / rect.height) * 2 - 1);
  const planeId = pickPlane(ndcX, ndcY, camera, view);
  if (planeId === null) return;
  const result = selection.toggle(planeId);
  if (result === "rejected") {
    showNotice(`at most ${MAX_SELECTED} planes — deselect one first`);
    return;
  }
  dirty = true;
  refreshHud();
});

createButton.addEventListener("click", async () => {
  if (!selection.complete) return;
  const ok = window.confirm(`Create a room from planes ${selection.ids.join(", ")}?`);
  if (!ok) return;
  const { response } = client.createRoom(selection.ids);
  if (!client.connected) showNotice("disconnected — command queued until reconnect");
  const result = await response;
  if (result.type === "ack") {
    showNotice(`room ${result.room_id} created`);
  } else {
    showNotice(`rejected: ${result.violation}`);
  }
  selection.clear();
  dirty = true;
  refreshHud();
});

function resize(): void {
  const w = canvas.clientWidth || window.innerWidth;
  const h = canvas.clientHeight || window.innerHeight;
  renderer.setSize(w, h, false);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}
window.addEventListener("resize", resize);

function frame(): void {
  requestAnimationFrame(frame);
  controls.update();
  if (dirty) {
    view.update(client.store, selection);
    refreshHud();
    dirty = false;
  }
  renderer.render(scene, camera);
}

resize();
refreshHud();
frame();

const wsUrl = `ws://${window.location.host || "127.0.0.1:8765"}/ws`;
client.connect(wsUrl).catch(() => showNotice("connection failed — is the session server running?"));
