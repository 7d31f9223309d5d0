// Typed client for the planner service. The UI never recomputes
// efficiencies: every number displayed comes from these payloads.

export interface WindowMeta {
  name: string;
  lower: number;
  upper: number;
  kind: string;
  levels: number[];
}

export interface Meta {
  q: number;
  windows: WindowMeta[];
  mode: string;
  baseline: number | null;
  thresholds: number[];
  digest: string | null;
  argmax_point: number[];
  argmax_eff: number;
}

export interface SurfacePayload {
  windows: string[];
  points: number[][];
  f_hat: number[];
  eff: number[];
  mode: string;
  argmax_index: number;
  argmax_point: number[];
}

export interface SlicePayload {
  fixed: Record<string, number>;
  free_windows: string[];
  indices: number[];
  points: number[][];
  f_hat: number[];
  eff: number[];
  argmax_point: number[];
  argmax_eff: number;
  retained_efficiency: number;
}

export class ServiceError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

async function getJson<T>(url: string): Promise<T> {
  const response = await fetch(url);
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the bare status text
    }
    throw new ServiceError(response.status, detail);
  }
  return (await response.json()) as T;
}

export function fixParam(pins: ReadonlyMap<string, number>): string {
  return Array.from(pins.entries())
    .map(([name, value]) => `${name}:${value}`)
    .join(",");
}

export class PlannerClient {
  constructor(readonly baseUrl: string) {}

  meta(): Promise<Meta> {
    return getJson<Meta>(`${this.baseUrl}/meta`);
  }

  surface(): Promise<SurfacePayload> {
    return getJson<SurfacePayload>(`${this.baseUrl}/surface`);
  }

  slice(pins: ReadonlyMap<string, number>): Promise<SlicePayload> {
    const fix = encodeURIComponent(fixParam(pins));
    return getJson<SlicePayload>(`${this.baseUrl}/slice?fix=${fix}`);
  }
}
