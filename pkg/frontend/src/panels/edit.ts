import { ApiClient } from "../api.js";
import { RequestSequencer } from "../requests.js";
import {
  ALPHA_MAX,
  ALPHA_MIN,
  ALPHA_STEP,
  clampAlpha,
  kStops,
} from "../state.js";
import { AttributeInfo, EncodeResponse } from "../types.js";

export interface EditPanel {
  root: HTMLElement;
  setSession(session: EncodeResponse, reconstructUrl: string): void;
  setAttributes(attrs: AttributeInfo[]): void;
}

/** Edit panel: attribute picker, alpha/k sliders, before/after images with
 * the logit delta. Requests fire on slider release (the `change` event), one
 * per release; responses arriving out of order are dropped. */
export function createEditPanel(
  client: ApiClient,
  doc: Document = document,
  createObjectUrl: (b: Blob) => string = (b) => URL.createObjectURL(b),
): EditPanel {
  const root = doc.createElement("section");
  root.className = "panel edit-panel";
  root.innerHTML = `
    <h2>Edit</h2>
    <label>attribute <select name="attribute"></select></label>
    <label>&alpha; <input type="range" name="alpha"
      min="${ALPHA_MIN}" max="${ALPHA_MAX}" step="${ALPHA_STEP}" value="0">
      <output name="alpha-value">0</output></label>
    <label>k <input type="range" name="k" min="0" max="0" step="1" value="0">
      <output name="k-value">-</output></label>
    <button name="reset">reset &alpha;</button>
    <div class="pair">
      <figure><img name="before" alt="before"><figcaption>before</figcaption></figure>
      <figure><img name="after" alt="after"><figcaption>after</figcaption></figure>
    </div>
    <p><span name="logit-delta"></span></p>
    <p class="error" name="error" hidden></p>
  `;

  const select = root.querySelector<HTMLSelectElement>("select[name=attribute]")!;
  const alphaInput = root.querySelector<HTMLInputElement>("input[name=alpha]")!;
  const alphaOut = root.querySelector<HTMLOutputElement>("output[name=alpha-value]")!;
  const kInput = root.querySelector<HTMLInputElement>("input[name=k]")!;
  const kOut = root.querySelector<HTMLOutputElement>("output[name=k-value]")!;
  const resetBtn = root.querySelector<HTMLButtonElement>("button[name=reset]")!;
  const before = root.querySelector<HTMLImageElement>("img[name=before]")!;
  const after = root.querySelector<HTMLImageElement>("img[name=after]")!;
  const delta = root.querySelector<HTMLElement>("span[name=logit-delta]")!;
  const errorBox = root.querySelector<HTMLElement>("p[name=error]")!;

  const seq = new RequestSequencer();
  let session: EncodeResponse | null = null;
  let reconstructUrl = "";
  let stops: number[] = [0];

  function currentK(): number {
    return stops[Math.min(stops.length - 1, Math.max(0, Number(kInput.value)))];
  }

  function showError(message: string | null) {
    errorBox.hidden = message === null;
    errorBox.textContent = message ?? "";
  }

  async function fireEdit() {
    if (!session || !select.value) return;
    const alpha = clampAlpha(Number(alphaInput.value));
    const k = currentK();
    alphaOut.value = String(alpha);
    kOut.value = String(k);
    const id = seq.issue();
    try {
      const result = await client.edit({
        sessionId: session.session_id,
        attribute: select.value,
        alpha,
        k,
      });
      if (!seq.accept(id)) return; // superseded while in flight
      after.src = createObjectUrl(result.image);
      const d = result.logitAfter - result.logitBefore;
      delta.textContent = `Δ logit: ${d.toFixed(3)}`;
      showError(null);
    } catch (err) {
      if (!seq.accept(id)) return;
      showError(`edit failed: ${err instanceof Error ? err.message : err} (release the slider to retry)`);
    }
  }

  alphaInput.addEventListener("change", fireEdit);
  kInput.addEventListener("change", fireEdit);
  select.addEventListener("change", fireEdit);
  alphaInput.addEventListener("input", () => {
    alphaOut.value = String(clampAlpha(Number(alphaInput.value)));
  });
  kInput.addEventListener("input", () => {
    kOut.value = String(currentK());
  });
  resetBtn.addEventListener("click", () => {
    alphaInput.value = "0";
    alphaOut.value = "0";
    after.src = reconstructUrl;
    delta.textContent = "Δ logit: 0";
    showError(null);
  });

  return {
    root,
    setSession(s, recon) {
      session = s;
      reconstructUrl = recon;
      stops = kStops(s.flat_len);
      kInput.max = String(stops.length - 1);
      kInput.value = String(stops.length - 1); // default: untruncated
      kOut.value = String(currentK());
      before.src = recon;
      after.src = recon;
      delta.textContent = "Δ logit: 0";
    },
    setAttributes(attrs) {
      select.innerHTML = "";
      for (const a of attrs) {
        const opt = doc.createElement("option");
        opt.value = a.name;
        opt.textContent = `${a.name} (acc ${(a.train_accuracy * 100).toFixed(0)}%)`;
        select.appendChild(opt);
      }
    },
  };
}
