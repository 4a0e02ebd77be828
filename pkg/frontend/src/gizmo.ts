// Drag-to-retarget emission policy: intermediate poses rate-limited to
// <= 10 Hz, plus exactly one final message on release (also when the
// pointer never moved -- releasing confirms the current gizmo pose).

import * as THREE from "three";
import { quatToWxyz } from "./kinematics.js";
import type { ClientMessage } from "./protocol.js";

export function targetPoseMessage(
  position: THREE.Vector3,
  quaternion?: THREE.Quaternion,
  duration?: number,
): ClientMessage {
  return {
    type: "set_target_pose",
    payload: {
      position: [position.x, position.y, position.z],
      ...(quaternion ? { quaternion: quatToWxyz(quaternion) } : {}),
      ...(duration !== undefined ? { duration } : {}),
    },
  };
}

export class DragEmitter {
  private lastSent = -Infinity;

  constructor(
    private readonly send: (msg: ClientMessage) => void,
    private readonly minIntervalMs = 100,
    private readonly now: () => number = () => performance.now(),
  ) {}

  /** Pointer moved with the gizmo under it; may or may not emit. */
  move(position: THREE.Vector3, quaternion?: THREE.Quaternion): void {
    const t = this.now();
    if (t - this.lastSent < this.minIntervalMs) return;
    this.lastSent = t;
    this.send(targetPoseMessage(position, quaternion));
  }

  /** Pointer released: always exactly one final message. */
  release(position: THREE.Vector3, quaternion?: THREE.Quaternion): void {
    this.lastSent = this.now();
    this.send(targetPoseMessage(position, quaternion));
  }
}
