import { ApiClient } from "../api.js";
import { RequestSequencer } from "../requests.js";
import { clampSplit } from "../state.js";

export interface MixPanel {
  root: HTMLElement;
  setSessions(sessionA: string, sessionB: string, L: number): void;
}

/** Style mixing: levels 1..split come from image B, the rest from image A. */
export function createMixPanel(
  client: ApiClient,
  doc: Document = document,
  createObjectUrl: (b: Blob) => string = (b) => URL.createObjectURL(b),
): MixPanel {
  const root = doc.createElement("section");
  root.className = "panel mix-panel";
  root.innerHTML = `
    <h2>Style mixing</h2>
    <label>split level <input type="range" name="split" min="0" max="0" step="1" value="0">
      <output name="split-value">0</output></label>
    <img name="result" alt="mixed">
    <p class="error" name="error" hidden></p>
  `;
  const splitInput = root.querySelector<HTMLInputElement>("input[name=split]")!;
  const splitOut = root.querySelector<HTMLOutputElement>("output[name=split-value]")!;
  const result = root.querySelector<HTMLImageElement>("img[name=result]")!;
  const errorBox = root.querySelector<HTMLElement>("p[name=error]")!;

  const seq = new RequestSequencer();
  let a: string | null = null;
  let b: string | null = null;
  let L = 0;

  async function fireMix() {
    if (!a || !b) return;
    const split = clampSplit(Number(splitInput.value), L);
    splitOut.value = String(split);
    const id = seq.issue();
    try {
      const blob = await client.mix({ sessionA: a, sessionB: b, split });
      if (!seq.accept(id)) return;
      result.src = createObjectUrl(blob);
      errorBox.hidden = true;
    } catch (err) {
      if (!seq.accept(id)) return;
      errorBox.hidden = false;
      errorBox.textContent = `mix failed: ${err instanceof Error ? err.message : err}`;
    }
  }

  splitInput.addEventListener("change", fireMix);
  splitInput.addEventListener("input", () => {
    splitOut.value = String(clampSplit(Number(splitInput.value), L));
  });

  return {
    root,
    setSessions(sessionA, sessionB, levels) {
      a = sessionA;
      b = sessionB;
      L = levels;
      splitInput.max = String(levels);
    },
  };
}
