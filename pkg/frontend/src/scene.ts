// Scene graph: the arm drawn from q via the model file, plus axis triads for
// the world, end-effector, true object, observer estimate, and grasp frames.
// No renderer in here -- tests walk the graph headless.

import * as THREE from "three";
import { chainPose, quatFromWxyz, type ModelDoc } from "./kinematics.js";
import type { PoseDoc, StatePayload } from "./protocol.js";

const FRAME_COLORS: Record<string, number> = {
  X_ee: 0xffffff,
  X_obj: 0xff5533,
  X_obs: 0x33aaff,
  X_grasp: 0x55ff77,
};
const TRIAD_SIZE = 0.09;

function triad(name: string, color: number, size = TRIAD_SIZE): THREE.Object3D {
  const group = new THREE.Group();
  group.name = name;
  group.add(new THREE.AxesHelper(size));
  const tag = new THREE.Mesh(
    new THREE.SphereGeometry(size * 0.18, 12, 8),
    new THREE.MeshBasicMaterial({ color }),
  );
  tag.name = `${name}-tag`;
  group.add(tag);
  return group;
}

export class HandoverScene {
  readonly scene = new THREE.Scene();
  readonly camera = new THREE.PerspectiveCamera(45, 4 / 3, 0.01, 20);
  readonly target = new THREE.Object3D(); // drag gizmo pose, world frame

  private readonly triads = new Map<string, THREE.Object3D>();
  private readonly armLine: THREE.Line;
  private readonly armPoints: THREE.Vector3[] = [];
  private readonly meetFlash: THREE.Mesh;
  private flashTtl = 0;
  private model: ModelDoc | null = null;

  constructor() {
    this.camera.position.set(1.6, -1.2, 1.1);
    this.camera.up.set(0, 0, 1);
    this.camera.lookAt(0.3, 0, 0.4);

    this.scene.add(triad("world", 0x888888, 0.15));
    for (const name of Object.keys(FRAME_COLORS)) {
      const t = triad(name, FRAME_COLORS[name]);
      this.triads.set(name, t);
      this.scene.add(t);
    }

    this.armLine = new THREE.Line(
      new THREE.BufferGeometry(),
      new THREE.LineBasicMaterial({ color: 0xdddddd }),
    );
    this.armLine.name = "arm";
    this.armLine.frustumCulled = false;
    this.scene.add(this.armLine);

    this.meetFlash = new THREE.Mesh(
      new THREE.SphereGeometry(0.05, 16, 12),
      new THREE.MeshBasicMaterial({ color: 0x55ff77, transparent: true, opacity: 0 }),
    );
    this.meetFlash.name = "meet-flash";
    this.scene.add(this.meetFlash);

    const gizmo = new THREE.Mesh(
      new THREE.TorusGeometry(0.07, 0.008, 8, 32),
      new THREE.MeshBasicMaterial({ color: 0xffcc00 }),
    );
    gizmo.name = "target-gizmo";
    this.target.add(gizmo);
    this.scene.add(this.target);
  }

  setModel(model: ModelDoc): void {
    this.model = model;
  }

  update(state: StatePayload): void {
    for (const [name, obj] of this.triads) {
      const pose = (state as unknown as Record<string, PoseDoc>)[name];
      obj.position.set(...pose.position);
      obj.quaternion.copy(quatFromWxyz(pose.quaternion));
    }
    if (this.model) {
      const chain = chainPose(this.model, state.q);
      this.armPoints.length = 0;
      this.armPoints.push(new THREE.Vector3(0, 0, 0), ...chain.pivots, chain.eePosition);
      this.armLine.geometry.setFromPoints(this.armPoints);
    }
    if (state.meet && this.flashTtl === 0) this.flash(state.X_grasp);
  }

  flash(at: PoseDoc): void {
    this.meetFlash.position.set(...at.position);
    this.flashTtl = 45;
  }

  /** Call once per animation tick; fades the meet flash. */
  tick(): void {
    if (this.flashTtl > 0) {
      this.flashTtl--;
      const mat = this.meetFlash.material as THREE.MeshBasicMaterial;
      mat.opacity = this.flashTtl / 45;
      this.meetFlash.scale.setScalar(1 + (45 - this.flashTtl) / 30);
    }
  }

  /** Serializable view of everything the state drives; used by snapshot tests. */
  snapshot(): Record<string, unknown> {
    const frames: Record<string, { position: number[]; quaternion: number[] }> = {};
    for (const [name, obj] of this.triads) {
      frames[name] = {
        position: obj.position.toArray(),
        quaternion: [obj.quaternion.w, obj.quaternion.x, obj.quaternion.y, obj.quaternion.z],
      };
    }
    return {
      frames,
      arm: this.armPoints.map((p) => p.toArray()),
    };
  }
}
