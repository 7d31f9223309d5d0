import { PlannerClient, ServiceError } from "./api.js";
import {
  applySlice,
  newSession,
  nextToken,
  pin,
  snapToLevel,
  unpin,
  unpinAll,
  windowMeta,
} from "./planner.js";
import { renderError, renderHeatmap, renderReadout } from "./render.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8000";
const client = new PlannerClient(baseUrl);

async function boot() {
  const canvas = document.getElementById("surface") as HTMLCanvasElement;
  const readoutEl = document.getElementById("readout") as HTMLElement;
  const errorEl = document.getElementById("error") as HTMLElement;
  const slider = document.getElementById("threshold") as HTMLInputElement;
  const sliderLabel = document.getElementById("threshold-label") as HTMLElement;
  const pinsEl = document.getElementById("pins") as HTMLElement;

  const [meta, surface] = await Promise.all([client.meta(), client.surface()]);
  const session = newSession(meta, surface);

  const redraw = () => {
    const t = Number(slider.value);
    sliderLabel.textContent = `efficiency ≥ ${t.toFixed(2)}`;
    renderHeatmap(canvas, session, t);
    renderReadout(readoutEl, session);
  };

  const refreshSlice = async () => {
    if (session.pins.size === 0) {
      redraw();
      return;
    }
    const token = nextToken(session);
    try {
      const slice = await client.slice(session.pins);
      if (applySlice(session, token, slice)) {
        renderError(errorEl, null);
        redraw();
      }
    } catch (err) {
      if (err instanceof ServiceError) {
        renderError(errorEl, `service: ${err.message}`);
      } else {
        renderError(errorEl, String(err));
      }
    }
  };

  // one pin row per window: a level selector plus pin/unpin buttons
  for (const w of meta.windows) {
    const row = document.createElement("div");
    row.className = "pin-row";
    const label = document.createElement("label");
    label.textContent = `${w.name} ∈ [${w.lower}, ${w.upper}]`;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "any";
    input.value = String(w.levels[Math.floor(w.levels.length / 2)]);
    const pinBtn = document.createElement("button");
    pinBtn.textContent = "pin";
    pinBtn.onclick = () => {
      try {
        const snapped = snapToLevel(windowMeta(session, w.name).levels, Number(input.value));
        pin(session, w.name, snapped);
        input.value = String(snapped);
        renderError(errorEl, null);
        void refreshSlice();
      } catch (err) {
        renderError(errorEl, String(err instanceof Error ? err.message : err));
      }
    };
    const unpinBtn = document.createElement("button");
    unpinBtn.textContent = "unpin";
    unpinBtn.onclick = () => {
      unpin(session, w.name);
      renderError(errorEl, null);
      void refreshSlice();
    };
    row.append(label, input, pinBtn, unpinBtn);
    pinsEl.append(row);
  }

  const clearBtn = document.getElementById("clear") as HTMLButtonElement;
  clearBtn.onclick = () => {
    unpinAll(session);
    renderError(errorEl, null);
    redraw();
  };

  slider.oninput = redraw;
  redraw();
}

boot().catch((err) => {
  const errorEl = document.getElementById("error") as HTMLElement;
  renderError(errorEl, `failed to reach the planner service: ${err}`);
});
