/** Typed client for the workbench HTTP API. All numbers come from the
 * service; the UI never recomputes abstractions or scores locally. */

export interface SessionInfo {
  id: string;
  version: number;
  n: number;
  L: number;
  H: number;
  classes: number[];
  symbol_count: number;
  samples: { train: string[]; val: string[]; test: string[] };
  models: string[];
}

export interface LasaSample {
  sample_id: string;
  original: number[];
  lava: number[];
  t1: number;
  t2: number;
  kept: [number, number][];
  provenance: string[];
  reduction: number;
  interpolated: { values: number[]; mask: boolean[] };
  complexity: Record<string, number | null> | null;
}

export interface LasaResponse {
  combo: string;
  threshold: { mode: string; s1: number; s2: number };
  version: number;
  samples: LasaSample[];
  reduction: { mean: number; std: number };
}

export interface ThresholdState {
  combo: string;
  mode: "avg" | "max";
  s1: number;
  s2: number;
  sample_ids: string[];
}

export interface FcamHeatmap {
  kind: "fcam";
  class: number;
  n: number;
  symbols: string[];
  tiles: number[][][][];
}

export interface GtmHeatmap {
  kind: "gtm";
  class: number;
  n: number;
  symbols: string[];
  matrix: number[][];
}

export type Heatmap = FcamHeatmap | GtmHeatmap;

export interface Membership {
  sample_id: string;
  scores: Record<string, number | null>;
  predicted: number;
  certainty: number | null;
  margin: number | null;
  label: number;
}

export interface ClassifyResponse {
  version: number;
  memberships: Membership[];
  accuracy: number;
}

export interface CertaintyCurve {
  version: number;
  split: string;
  curve: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function unwrap<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class WorkbenchClient {
  constructor(
    private base: string = "",
    private fetcher: typeof fetch = fetch.bind(globalThis),
  ) {}

  createSession(body: unknown): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", body);
  }

  sessionInfo(id: string): Promise<SessionInfo> {
    return this.get<SessionInfo>(`/sessions/${id}`);
  }

  lasa(sessionId: string, state: ThresholdState): Promise<LasaResponse> {
    return this.post<LasaResponse>(`/sessions/${sessionId}/lasa`, state);
  }

  buildGcr(sessionId: string, variants: string[], combos: string[]): Promise<{ built: string[] }> {
    return this.post(`/sessions/${sessionId}/gcr`, { variants, combos });
  }

  heatmap(sessionId: string, variant: string, combo: string, cls: number): Promise<Heatmap> {
    const query = new URLSearchParams({ class: String(cls), combo });
    return this.get<Heatmap>(`/sessions/${sessionId}/gcr/${variant}/heatmap?${query}`);
  }

  classify(sessionId: string, variant: string, combo: string, split = "test"): Promise<ClassifyResponse> {
    return this.post(`/sessions/${sessionId}/gcr/${variant}/classify`, { combo, split });
  }

  certaintyCurve(
    sessionId: string,
    variant: string,
    combo: string,
    steps: number[] = [80, 50, 20, 10],
  ): Promise<CertaintyCurve> {
    const query = new URLSearchParams({ variant, combo, steps: steps.join(",") });
    return this.get<CertaintyCurve>(`/sessions/${sessionId}/certainty-curve?${query}`);
  }

  private async get<T>(path: string): Promise<T> {
    return unwrap<T>(await this.fetcher(this.base + path));
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    return unwrap<T>(
      await this.fetcher(this.base + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }
}
