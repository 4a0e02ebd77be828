// v1 wire protocol: JSON envelopes {type, t, payload} over /ws.
// Every outbound message is validated against these schemas before sending.

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

export const vec3 = z.tuple([z.number(), z.number(), z.number()]);
// wxyz order everywhere on the wire
export const quatWxyz = z.tuple([z.number(), z.number(), z.number(), z.number()]);

export const poseDoc = z.object({
  position: vec3,
  quaternion: quatWxyz,
});
export type PoseDoc = z.infer<typeof poseDoc>;

export const statePayload = z.object({
  q: z.array(z.number()),
  X_ee: poseDoc,
  X_obj: poseDoc,
  X_obs: poseDoc,
  X_grasp: poseDoc,
  eta_obs: z.number(),
  eta_tt: z.number(),
  status: z.string(),
  meet: z.boolean().nullable(),
});
export type StatePayload = z.infer<typeof statePayload>;

export const eventPayload = z
  .object({ event: z.string(), t: z.number().optional() })
  .passthrough();

export const serverMessage = z.union([
  z.object({ type: z.literal("state"), t: z.number(), payload: statePayload }),
  z.object({ type: z.literal("event"), t: z.number().nullable(), payload: eventPayload }),
  z.object({ type: z.literal("metrics"), t: z.number().nullable(), payload: z.record(z.unknown()) }),
  z.object({ type: z.literal("error"), t: z.null(), payload: z.object({ message: z.string() }) }),
]);
export type ServerMessage = z.infer<typeof serverMessage>;

export const greeting = z.object({ v: z.number() });

// ---- client -> server ------------------------------------------------------

const targetPose = z.object({
  position: vec3,
  quaternion: quatWxyz.optional(),
  duration: z.number().positive().optional(),
});

export const clientMessage = z.discriminatedUnion("type", [
  z.object({ type: z.literal("set_target_pose"), payload: targetPose }),
  z.object({ type: z.literal("set_grasp_offset"), payload: targetPose }),
  z.object({ type: z.literal("abort"), payload: z.object({ duration: z.number().positive() }).optional() }),
  z.object({ type: z.literal("pause") }),
  z.object({ type: z.literal("resume") }),
  z.object({
    type: z.literal("set_weights"),
    payload: z.object({
      observation: z.number().positive().optional(),
      tracking: z.number().positive().optional(),
      posture: z.number().positive().optional(),
    }),
  }),
]);
export type ClientMessage = z.infer<typeof clientMessage>;

/** Validate and serialize; throws ZodError on a malformed message. */
export function encodeClientMessage(msg: ClientMessage): string {
  return JSON.stringify(clientMessage.parse(msg));
}
