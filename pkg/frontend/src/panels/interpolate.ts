import { ApiClient } from "../api.js";
import { RequestSequencer } from "../requests.js";
import { clampUnit, highFirstLambdas, lowFirstLambdas } from "../state.js";

export interface InterpolatePanel {
  root: HTMLElement;
  setSessions(sessionA: string, sessionB: string, L: number): void;
}

/** Controllable interpolation: a progress scrubber with low-first/high-first
 * presets that stage the per-level blend weights. */
export function createInterpolatePanel(
  client: ApiClient,
  doc: Document = document,
  createObjectUrl: (b: Blob) => string = (b) => URL.createObjectURL(b),
): InterpolatePanel {
  const root = doc.createElement("section");
  root.className = "panel interpolate-panel";
  root.innerHTML = `
    <h2>Interpolation</h2>
    <label>preset <select name="preset">
      <option value="low_first">low levels first</option>
      <option value="high_first">high levels first</option>
    </select></label>
    <label>progress <input type="range" name="progress" min="0" max="1" step="0.01" value="0">
      <output name="lambdas"></output></label>
    <img name="result" alt="interpolated">
    <p class="error" name="error" hidden></p>
  `;
  const preset = root.querySelector<HTMLSelectElement>("select[name=preset]")!;
  const progress = root.querySelector<HTMLInputElement>("input[name=progress]")!;
  const lambdasOut = root.querySelector<HTMLOutputElement>("output[name=lambdas]")!;
  const result = root.querySelector<HTMLImageElement>("img[name=result]")!;
  const errorBox = root.querySelector<HTMLElement>("p[name=error]")!;

  const seq = new RequestSequencer();
  let a: string | null = null;
  let b: string | null = null;
  let L = 0;

  function path() {
    const p = clampUnit(Number(progress.value));
    const make = preset.value === "high_first" ? highFirstLambdas : lowFirstLambdas;
    return make(p, L);
  }

  async function fireInterpolate() {
    if (!a || !b || L === 0) return;
    const { lambdas, xTWeight } = path();
    lambdasOut.value = lambdas.map((v) => v.toFixed(2)).join(" ");
    const id = seq.issue();
    try {
      const blob = await client.interpolate({
        sessionA: a,
        sessionB: b,
        lambdas,
        xTWeight,
      });
      if (!seq.accept(id)) return;
      result.src = createObjectUrl(blob);
      errorBox.hidden = true;
    } catch (err) {
      if (!seq.accept(id)) return;
      errorBox.hidden = false;
      errorBox.textContent = `interpolate failed: ${err instanceof Error ? err.message : err}`;
    }
  }

  progress.addEventListener("change", fireInterpolate);
  preset.addEventListener("change", fireInterpolate);
  progress.addEventListener("input", () => {
    if (L > 0) lambdasOut.value = path().lambdas.map((v) => v.toFixed(2)).join(" ");
  });

  return {
    root,
    setSessions(sessionA, sessionB, levels) {
      a = sessionA;
      b = sessionB;
      L = levels;
    },
  };
}
