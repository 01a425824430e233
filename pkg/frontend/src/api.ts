import {
  AttributeInfo,
  EditParams,
  EditResult,
  EncodeResponse,
  HealthResponse,
  InterpolateParams,
  MixParams,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function raise(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail);
}

/** Thin typed client over the inference service. The fetch implementation is
 * injectable so component tests can stub the network. */
export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async postJson(path: string, body: unknown): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await raise(resp);
    return resp;
  }

  async encode(image: Blob): Promise<EncodeResponse> {
    const resp = await this.fetchFn(this.baseUrl + "/api/encode", {
      method: "POST",
      body: image,
    });
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as EncodeResponse;
  }

  async reconstruct(sessionId: string): Promise<Blob> {
    const resp = await this.postJson("/api/reconstruct", { session_id: sessionId });
    return resp.blob();
  }

  async edit(params: EditParams): Promise<EditResult> {
    const resp = await this.postJson("/api/edit", {
      session_id: params.sessionId,
      attribute: params.attribute,
      alpha: params.alpha,
      k: params.k,
    });
    return {
      image: await resp.blob(),
      logitBefore: Number(resp.headers.get("X-Logit-Before")),
      logitAfter: Number(resp.headers.get("X-Logit-After")),
    };
  }

  async mix(params: MixParams): Promise<Blob> {
    const resp = await this.postJson("/api/mix", {
      session_a: params.sessionA,
      session_b: params.sessionB,
      split: params.split,
    });
    return resp.blob();
  }

  async interpolate(params: InterpolateParams): Promise<Blob> {
    const resp = await this.postJson("/api/interpolate", {
      session_a: params.sessionA,
      session_b: params.sessionB,
      lambdas: params.lambdas,
      xT_weight: params.xTWeight,
    });
    return resp.blob();
  }

  async attributes(): Promise<AttributeInfo[]> {
    const resp = await this.fetchFn(this.baseUrl + "/api/attributes");
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as AttributeInfo[];
  }

  async health(): Promise<HealthResponse> {
    const resp = await this.fetchFn(this.baseUrl + "/api/health");
    if (!resp.ok) await raise(resp);
    return (await resp.json()) as HealthResponse;
  }
}
