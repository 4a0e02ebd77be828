// Forward kinematics of the serial chain served at GET /model, mirrored here
// so the arm can be drawn from q alone.  World frame, quaternions wxyz.

import * as THREE from "three";
import { z } from "zod";

const frameDoc = z.object({
  translation: z.tuple([z.number(), z.number(), z.number()]).default([0, 0, 0]),
  rotation: z.tuple([z.number(), z.number(), z.number(), z.number()]).default([1, 0, 0, 0]),
});

export const modelDoc = z.object({
  name: z.string(),
  joints: z.array(
    z.object({
      name: z.string(),
      axis: z.tuple([z.number(), z.number(), z.number()]),
      origin: frameDoc,
      limits: z.object({ q_min: z.number(), q_max: z.number() }).passthrough(),
    }),
  ),
  end_effector: frameDoc,
});
export type ModelDoc = z.infer<typeof modelDoc>;

export function quatFromWxyz(q: readonly number[]): THREE.Quaternion {
  return new THREE.Quaternion(q[1], q[2], q[3], q[0]);
}

export function quatToWxyz(q: THREE.Quaternion): [number, number, number, number] {
  return [q.w, q.x, q.y, q.z];
}

export interface ChainPose {
  /** joint pivot positions, world frame (n entries) */
  pivots: THREE.Vector3[];
  /** link orientations after each joint rotation (n entries) */
  orientations: THREE.Quaternion[];
  eePosition: THREE.Vector3;
  eeOrientation: THREE.Quaternion;
}

export function chainPose(model: ModelDoc, q: readonly number[]): ChainPose {
  if (q.length !== model.joints.length) {
    throw new Error(`q has ${q.length} entries, model has ${model.joints.length} joints`);
  }
  const p = new THREE.Vector3();
  const R = new THREE.Quaternion();
  const pivots: THREE.Vector3[] = [];
  const orientations: THREE.Quaternion[] = [];
  model.joints.forEach((joint, i) => {
    p.add(new THREE.Vector3(...joint.origin.translation).applyQuaternion(R));
    R.multiply(quatFromWxyz(joint.origin.rotation));
    pivots.push(p.clone());
    const axis = new THREE.Vector3(...joint.axis).normalize();
    R.multiply(new THREE.Quaternion().setFromAxisAngle(axis, q[i]));
    orientations.push(R.clone());
  });
  const eePosition = p
    .clone()
    .add(new THREE.Vector3(...model.end_effector.translation).applyQuaternion(R));
  const eeOrientation = R.clone().multiply(quatFromWxyz(model.end_effector.rotation));
  return { pivots, orientations, eePosition, eeOrientation };
}
