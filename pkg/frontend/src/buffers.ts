// Rolling telemetry buffers for the strip charts.  Time-windowed and
// hard-capped so a long session can never grow them without bound.

import * as THREE from "three";
import { quatFromWxyz } from "./kinematics.js";

export const WINDOW_S = 30;
const HARD_CAP = 4096; // ~65 s of decimated state frames; belt and braces

export interface Sample {
  t: number;
  v: number[];
}

export class RingBuffer {
  private data: Sample[] = [];

  constructor(
    readonly channels: number,
    readonly windowS: number = WINDOW_S,
  ) {}

  push(t: number, v: number[]): void {
    if (v.length !== this.channels) {
      throw new Error(`expected ${this.channels} channels, got ${v.length}`);
    }
    this.data.push({ t, v });
    const cutoff = t - this.windowS;
    // frames arrive in t order except across a reconnect, where we start over
    if (this.data.length > 1 && t < this.data[this.data.length - 2].t) {
      this.data = [{ t, v }];
      return;
    }
    let drop = 0;
    while (drop < this.data.length && this.data[drop].t < cutoff) drop++;
    if (drop > 0) this.data.splice(0, drop);
    if (this.data.length > HARD_CAP) this.data.splice(0, this.data.length - HARD_CAP);
  }

  get length(): number {
    return this.data.length;
  }

  samples(): readonly Sample[] {
    return this.data;
  }

  clear(): void {
    this.data = [];
  }
}

/**
 * Roll/pitch/yaw of a wxyz quaternion (ZYX convention).  Yaw wraps at +-pi,
 * which is fine for display purposes.
 */
export function rpy(quatWxyz: readonly number[]): [number, number, number] {
  const e = new THREE.Euler().setFromQuaternion(quatFromWxyz(quatWxyz), "ZYX");
  return [e.x, e.y, e.z];
}
