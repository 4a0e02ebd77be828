// App wiring: fetch the model, open the socket, drive scene + charts + panel.

import * as THREE from "three";
import { RingBuffer, rpy } from "./buffers.js";
import { StripChart } from "./charts.js";
import { SteeringClient } from "./client.js";
import { DragEmitter } from "./gizmo.js";
import { modelDoc } from "./kinematics.js";
import { buildPanel } from "./panel.js";
import { HandoverScene } from "./scene.js";
import type { ServerMessage, StatePayload } from "./protocol.js";

const POS_COLORS = ["#ff6b57", "#ffb357", "#57d0ff", "#ff6b57", "#ffb357", "#57d0ff"];
const view = {
  posBuf: new RingBuffer(6), // ee xyz solid, grasp xyz dashed
  rpyBuf: new RingBuffer(6),
  etaBuf: new RingBuffer(2),
  lastState: null as StatePayload | null,
  lastT: 0,
  meetAt: null as number | null,
  paused: false,
};

async function boot(): Promise<void> {
  const sceneRoot = document.getElementById("scene") as HTMLElement;
  const panelRoot = document.getElementById("panel") as HTMLElement;
  const hs = new HandoverScene();

  const renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setClearColor(0x0d0f12);
  sceneRoot.append(renderer.domElement);
  const resize = () => {
    renderer.setSize(sceneRoot.clientWidth, sceneRoot.clientHeight);
    hs.camera.aspect = sceneRoot.clientWidth / Math.max(sceneRoot.clientHeight, 1);
    hs.camera.updateProjectionMatrix();
  };
  window.addEventListener("resize", resize);
  resize();

  const proto = location.protocol === "https:" ? "wss" : "ws";
  const client = new SteeringClient(`${proto}://${location.host}/ws`, {
    onMessage: handleMessage,
    onOpen: () => panel.setBanner("connected", false),
    onClose: () => panel.setBanner("disconnected - retrying", true),
    onProtocolError: (d) => panel.setBanner(d, true),
  });

  const panel = buildPanel(panelRoot, {
    send: (msg) => {
      if (msg.type === "pause") view.paused = true;
      if (msg.type === "resume") view.paused = false;
      return client.send(msg);
    },
    onToggleDrag: (on) => {
      dragEnabled = on;
    },
  });

  const charts = [
    new StripChart(canvasEl("chart-pos"), {
      title: "position [m]  (solid ee / dashed grasp)",
      buffer: view.posBuf,
      labels: ["x", "x*", "y", "y*", "z", "z*"],
      colors: POS_COLORS,
      dashEvery2: true,
    }),
    new StripChart(canvasEl("chart-rpy"), {
      title: "orientation RPY [rad]",
      buffer: view.rpyBuf,
      labels: ["r", "r*", "p", "p*", "y", "y*"],
      colors: POS_COLORS,
      dashEvery2: true,
    }),
    new StripChart(canvasEl("chart-eta"), {
      title: "error norms",
      buffer: view.etaBuf,
      labels: ["obs", "track"],
      colors: ["#57d0ff", "#57ff9a"],
    }),
  ];

  function handleMessage(msg: ServerMessage): void {
    if (msg.type === "state") {
      view.lastState = msg.payload;
      view.lastT = msg.t;
      if (!view.paused) pushBuffers(msg.t, msg.payload);
      hs.update(msg.payload);
      panel.setStatus(
        `t=${msg.t.toFixed(2)}s  status=${msg.payload.status}` +
          (view.meetAt !== null ? `  meet@${view.meetAt.toFixed(2)}s` : ""),
      );
    } else if (msg.type === "event") {
      if (msg.payload.event === "meet") {
        view.meetAt = msg.payload.t ?? msg.t ?? view.lastT;
        if (view.lastState) hs.flash(view.lastState.X_grasp);
      }
    } else if (msg.type === "metrics") {
      panel.setBanner(`run finished: ${JSON.stringify(msg.payload)}`.slice(0, 160), false);
    } else {
      panel.setBanner(msg.payload.message, true);
    }
  }

  function pushBuffers(t: number, s: StatePayload): void {
    const pe = s.X_ee.position;
    const pg = s.X_grasp.position;
    view.posBuf.push(t, [pe[0], pg[0], pe[1], pg[1], pe[2], pg[2]]);
    const re = rpy(s.X_ee.quaternion);
    const rg = rpy(s.X_grasp.quaternion);
    view.rpyBuf.push(t, [re[0], rg[0], re[1], rg[1], re[2], rg[2]]);
    view.etaBuf.push(t, [s.eta_obs, s.eta_tt]);
  }

  // drag-to-retarget: ray onto the horizontal plane through the gizmo
  let dragEnabled = false;
  let dragging = false;
  const emitter = new DragEmitter((m) => client.send(m));
  const ray = new THREE.Raycaster();
  const plane = new THREE.Plane();
  const hit = new THREE.Vector3();
  const pointerNdc = (ev: PointerEvent): THREE.Vector2 => {
    const r = renderer.domElement.getBoundingClientRect();
    return new THREE.Vector2(
      ((ev.clientX - r.left) / r.width) * 2 - 1,
      -((ev.clientY - r.top) / r.height) * 2 + 1,
    );
  };
  renderer.domElement.addEventListener("pointerdown", (ev) => {
    if (!dragEnabled || !view.lastState) return;
    dragging = true;
    hs.target.position.set(...view.lastState.X_obj.position);
    plane.setFromNormalAndCoplanarPoint(new THREE.Vector3(0, 0, 1), hs.target.position);
    renderer.domElement.setPointerCapture(ev.pointerId);
  });
  renderer.domElement.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    ray.setFromCamera(pointerNdc(ev), hs.camera);
    if (ray.ray.intersectPlane(plane, hit)) {
      hs.target.position.copy(hit);
      emitter.move(hit);
    }
  });
  renderer.domElement.addEventListener("pointerup", () => {
    if (!dragging) return;
    dragging = false;
    emitter.release(hs.target.position);
  });

  try {
    const res = await fetch("/model");
    hs.setModel(modelDoc.parse(await res.json()));
    panel.setBanner("connecting", false);
  } catch (err) {
    panel.setBanner(`model fetch failed: ${err} - retrying`, true);
    setTimeout(boot, 2000);
    return;
  }
  client.connect();

  let frame = 0;
  const animate = () => {
    requestAnimationFrame(animate);
    hs.tick();
    renderer.render(hs.scene, hs.camera);
    if (frame++ % 6 === 0) for (const c of charts) c.draw();
  };
  animate();
}

function canvasEl(id: string): HTMLCanvasElement {
  return document.getElementById(id) as HTMLCanvasElement;
}

boot();
