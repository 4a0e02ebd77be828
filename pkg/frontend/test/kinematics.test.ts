// FK cross-check: the TypeScript chain must land exactly on the reference
// poses exported from the simulator's kinematics for the bundled model.

import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";
import { chainPose, modelDoc, type ModelDoc } from "../src/kinematics.js";

const here = new URL(".", import.meta.url).pathname;
const model: ModelDoc = modelDoc.parse(
  JSON.parse(readFileSync(join(here, "../../src/handover/models/panda7.json"), "utf8")),
);
const cases = JSON.parse(readFileSync(join(here, "fixtures/chain_pose.json"), "utf8")) as Record<
  string,
  { q: number[]; pivots: number[][]; ee_position: number[]; ee_quaternion: number[] }
>;

describe("chain pose vs simulator reference", () => {
  for (const [name, ref] of Object.entries(cases)) {
    it(`matches the ${name} configuration`, () => {
      const chain = chainPose(model, ref.q);
      chain.pivots.forEach((p, i) => {
        expect(p.x).toBeCloseTo(ref.pivots[i][0], 9);
        expect(p.y).toBeCloseTo(ref.pivots[i][1], 9);
        expect(p.z).toBeCloseTo(ref.pivots[i][2], 9);
      });
      expect(chain.eePosition.x).toBeCloseTo(ref.ee_position[0], 9);
      expect(chain.eePosition.y).toBeCloseTo(ref.ee_position[1], 9);
      expect(chain.eePosition.z).toBeCloseTo(ref.ee_position[2], 9);
      // q and -q are the same rotation; align signs before comparing
      const [w, x, y, z] = ref.ee_quaternion;
      const s = Math.sign(w * chain.eeOrientation.w + x * chain.eeOrientation.x +
        y * chain.eeOrientation.y + z * chain.eeOrientation.z) || 1;
      expect(s * chain.eeOrientation.w).toBeCloseTo(w, 9);
      expect(s * chain.eeOrientation.x).toBeCloseTo(x, 9);
      expect(s * chain.eeOrientation.y).toBeCloseTo(y, 9);
      expect(s * chain.eeOrientation.z).toBeCloseTo(z, 9);
    });
  }

  it("rejects a q of the wrong width", () => {
    expect(() => chainPose(model, [0, 0, 0])).toThrow(/3 entries/);
  });
});
