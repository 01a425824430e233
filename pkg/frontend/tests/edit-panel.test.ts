import { beforeEach, describe, expect, it, vi } from "vitest";
import { ApiClient, FetchLike } from "../src/api.js";
import { createEditPanel, EditPanel } from "../src/panels/edit.js";

const SESSION = { session_id: "sess", L: 4, d: 64, flat_len: 256 };
const RECON_URL = "blob:reconstruct";

function pngResponse(headers: Record<string, string> = {}): Response {
  return new Response(new Uint8Array([137, 80, 78, 71]), {
    status: 200,
    headers: { "Content-Type": "image/png", ...headers },
  });
}

let fetchFn: ReturnType<typeof vi.fn<FetchLike>>;
let panel: EditPanel;
let urlCounter: number;

function lastRequestBody(): any {
  const calls = fetchFn.mock.calls;
  return JSON.parse(calls[calls.length - 1][1]?.body as string);
}

function release(input: HTMLInputElement, value: string): void {
  input.value = value;
  input.dispatchEvent(new Event("change"));
}

beforeEach(() => {
  fetchFn = vi.fn<FetchLike>(async () =>
    pngResponse({ "X-Logit-Before": "0.0", "X-Logit-After": "1.0" }),
  );
  const client = new ApiClient("", fetchFn);
  panel = createEditPanel(client, document, () => `blob:edit-${++urlCounter}`);
  urlCounter = 0;
  document.body.replaceChildren(panel.root);
  panel.setAttributes([
    { name: "hue", level_mass: [1, 0, 0, 0], argmax_level: 1, train_accuracy: 0.9 },
  ]);
  panel.setSession(SESSION, RECON_URL);
});

const alphaInput = () => document.querySelector<HTMLInputElement>("input[name=alpha]")!;
const kInput = () => document.querySelector<HTMLInputElement>("input[name=k]")!;
const afterImg = () => document.querySelector<HTMLImageElement>("img[name=after]")!;

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe("edit panel request contract", () => {
  it("issues exactly one request per alpha slider release", async () => {
    release(alphaInput(), "0.5");
    await flush();
    expect(fetchFn).toHaveBeenCalledTimes(1);
    expect(lastRequestBody().alpha).toBe(0.5);

    release(alphaInput(), "0.75");
    await flush();
    expect(fetchFn).toHaveBeenCalledTimes(2);
  });

  it("issues no request while dragging (input events)", async () => {
    alphaInput().value = "0.3";
    alphaInput().dispatchEvent(new Event("input"));
    alphaInput().dispatchEvent(new Event("input"));
    await flush();
    expect(fetchFn).not.toHaveBeenCalled();
  });

  it("displays only the latest response when releases overlap", async () => {
    const resolvers: Array<(r: Response) => void> = [];
    fetchFn.mockImplementation(
      () => new Promise<Response>((resolve) => resolvers.push(resolve)),
    );
    release(alphaInput(), "0.2");
    release(alphaInput(), "0.9");
    expect(resolvers.length).toBe(2);
    // the stale response lands last
    resolvers[1](pngResponse({ "X-Logit-Before": "0", "X-Logit-After": "2" }));
    await flush();
    const latest = afterImg().src;
    resolvers[0](pngResponse({ "X-Logit-Before": "0", "X-Logit-After": "1" }));
    await flush();
    expect(afterImg().src).toBe(latest);
  });

  it("reset button restores the reconstruct image without a request", async () => {
    release(alphaInput(), "0.8");
    await flush();
    expect(afterImg().src).not.toContain(RECON_URL);
    fetchFn.mockClear();
    document.querySelector<HTMLButtonElement>("button[name=reset]")!.click();
    await flush();
    expect(afterImg().src).toContain(RECON_URL);
    expect(alphaInput().value).toBe("0");
    expect(fetchFn).not.toHaveBeenCalled();
  });

  it("clamps alpha so out-of-range values cannot be submitted", async () => {
    release(alphaInput(), "7");
    await flush();
    expect(lastRequestBody().alpha).toBe(1);
    release(alphaInput(), "-3.2");
    await flush();
    expect(lastRequestBody().alpha).toBe(-1);
  });

  it("snaps alpha onto the 0.05 grid", async () => {
    release(alphaInput(), "0.23");
    await flush();
    expect(lastRequestBody().alpha).toBe(0.25);
  });

  it("maps the k slider onto log-spaced stops within [0, flat_len]", async () => {
    // position indexes into [0,1,2,4,...,256]; the default is the last stop
    release(alphaInput(), "0.5");
    await flush();
    expect(lastRequestBody().k).toBe(256);
    release(kInput(), "3");
    await flush();
    expect(lastRequestBody().k).toBe(4);
    release(kInput(), "999");
    await flush();
    expect(lastRequestBody().k).toBe(256);
  });

  it("shows an inline error with retry hint on failure", async () => {
    fetchFn.mockImplementation(async () =>
      new Response(JSON.stringify({ detail: "generation queue full" }), { status: 503 }),
    );
    release(alphaInput(), "0.5");
    await flush();
    const box = document.querySelector<HTMLElement>("p[name=error]")!;
    expect(box.hidden).toBe(false);
    expect(box.textContent).toContain("queue full");
    expect(box.textContent).toContain("retry");
  });
});
