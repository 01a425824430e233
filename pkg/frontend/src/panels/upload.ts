import { ApiClient } from "../api.js";
import { EncodeResponse } from "../types.js";

export interface UploadPanel {
  root: HTMLElement;
  /** Fires after a file is encoded and its reconstruction fetched. */
  onEncoded: (cb: (slot: "a" | "b", session: EncodeResponse, reconstructUrl: string) => void) => void;
}

/** Two upload slots (A is the edit subject, B the mixing partner). */
export function createUploadPanel(
  client: ApiClient,
  doc: Document = document,
  createObjectUrl: (b: Blob) => string = (b) => URL.createObjectURL(b),
): UploadPanel {
  const root = doc.createElement("section");
  root.className = "panel upload-panel";
  root.innerHTML = `
    <h2>Images</h2>
    <label>image A <input type="file" name="file-a" accept="image/*"></label>
    <label>image B <input type="file" name="file-b" accept="image/*"></label>
    <p class="error" name="error" hidden></p>
  `;
  const errorBox = root.querySelector<HTMLElement>("p[name=error]")!;
  const callbacks: Array<(slot: "a" | "b", s: EncodeResponse, url: string) => void> = [];

  for (const slot of ["a", "b"] as const) {
    const input = root.querySelector<HTMLInputElement>(`input[name=file-${slot}]`)!;
    input.addEventListener("change", async () => {
      const file = input.files?.[0];
      if (!file) return;
      try {
        const session = await client.encode(file);
        const recon = await client.reconstruct(session.session_id);
        errorBox.hidden = true;
        const url = createObjectUrl(recon);
        callbacks.forEach((cb) => cb(slot, session, url));
      } catch (err) {
        errorBox.hidden = false;
        errorBox.textContent = `encode failed: ${err instanceof Error ? err.message : err}`;
      }
    });
  }

  return {
    root,
    onEncoded(cb) {
      callbacks.push(cb);
    },
  };
}
