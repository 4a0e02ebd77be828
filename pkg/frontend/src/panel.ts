// Control panel: abort/pause/resume buttons, task-weight sliders, and the
// connection banner.  Buttons map 1:1 onto wire messages.

import type { ClientMessage } from "./protocol.js";

export interface PanelHooks {
  send: (msg: ClientMessage) => boolean;
  onToggleDrag: (enabled: boolean) => void;
}

const WEIGHT_DEFAULTS: Record<string, number> = {
  observation: 1000,
  tracking: 100,
  posture: 1,
};

export function buildPanel(root: HTMLElement, hooks: PanelHooks): {
  setBanner: (text: string, bad: boolean) => void;
  setStatus: (text: string) => void;
} {
  const banner = el("div", "banner");
  const status = el("div", "status");
  root.append(banner, status);

  const buttons = el("div", "buttons");
  const mk = (label: string, msg: ClientMessage) => {
    const b = document.createElement("button");
    b.textContent = label;
    b.onclick = () => hooks.send(msg);
    buttons.append(b);
    return b;
  };
  mk("abort", { type: "abort" });
  mk("pause", { type: "pause" });
  mk("resume", { type: "resume" });
  const drag = document.createElement("button");
  drag.textContent = "drag target: off";
  let dragging = false;
  drag.onclick = () => {
    dragging = !dragging;
    drag.textContent = `drag target: ${dragging ? "on" : "off"}`;
    hooks.onToggleDrag(dragging);
  };
  buttons.append(drag);
  root.append(buttons);

  const weights = el("div", "weights");
  const current: Record<string, number> = { ...WEIGHT_DEFAULTS };
  for (const name of Object.keys(WEIGHT_DEFAULTS)) {
    const row = el("label", "weight-row");
    const span = document.createElement("span");
    span.textContent = `${name} ${current[name]}`;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "-1";
    slider.max = "4";
    slider.step = "0.1";
    slider.value = String(Math.log10(current[name]));
    slider.oninput = () => {
      current[name] = Number((10 ** Number(slider.value)).toPrecision(3));
      span.textContent = `${name} ${current[name]}`;
    };
    slider.onchange = () => hooks.send({ type: "set_weights", payload: { [name]: current[name] } });
    row.append(span, slider);
    weights.append(row);
  }
  root.append(weights);

  return {
    setBanner: (text, bad) => {
      banner.textContent = text;
      banner.className = bad ? "banner bad" : "banner";
    },
    setStatus: (text) => {
      status.textContent = text;
    },
  };
}

function el(tag: string, cls: string): HTMLElement {
  const e = document.createElement(tag);
  e.className = cls;
  return e;
}
