// Canvas strip charts: per-axis pose traces (position xyz, orientation RPY)
// and the two error-state norms, over the rolling buffer window.

import type { RingBuffer } from "./buffers.js";

export interface ChartSpec {
  title: string;
  buffer: RingBuffer;
  labels: string[];
  colors: string[];
  /** pair up solid/dashed traces (actual vs target) when true */
  dashEvery2?: boolean;
}

export class StripChart {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly spec: ChartSpec,
  ) {
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas unavailable");
    this.ctx = ctx;
  }

  draw(): void {
    const { ctx, canvas, spec } = this;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#15181c";
    ctx.fillRect(0, 0, w, h);
    ctx.fillStyle = "#9aa3ad";
    ctx.font = "11px sans-serif";
    ctx.fillText(spec.title, 6, 14);

    const samples = spec.buffer.samples();
    if (samples.length < 2) return;
    const t1 = samples[samples.length - 1].t;
    const t0 = Math.max(samples[0].t, t1 - spec.buffer.windowS);
    let lo = Infinity;
    let hi = -Infinity;
    for (const s of samples) {
      for (const v of s.v) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
    }
    if (!(hi > lo)) {
      hi = lo + 1;
    }
    const pad = 0.08 * (hi - lo);
    lo -= pad;
    hi += pad;

    const x = (t: number) => ((t - t0) / Math.max(t1 - t0, 1e-9)) * (w - 8) + 4;
    const y = (v: number) => h - 6 - ((v - lo) / (hi - lo)) * (h - 26);

    spec.labels.forEach((label, ch) => {
      ctx.strokeStyle = spec.colors[ch % spec.colors.length];
      ctx.setLineDash(spec.dashEvery2 && ch % 2 === 1 ? [4, 3] : []);
      ctx.beginPath();
      let started = false;
      for (const s of samples) {
        if (s.t < t0) continue;
        const px = x(s.t);
        const py = y(s.v[ch]);
        if (started) ctx.lineTo(px, py);
        else ctx.moveTo(px, py);
        started = true;
      }
      ctx.stroke();
      ctx.setLineDash([]);
      ctx.fillStyle = ctx.strokeStyle;
      ctx.fillText(label, 6 + 46 * ch, h - 8);
      ctx.fillStyle = "#9aa3ad";
    });
  }
}
