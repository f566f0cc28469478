/** Typed client for the avatar-forge session API. */

export interface AssetInfo {
  id: string;
  kind: "body-basis" | "garment" | "motion";
  name: string;
  textures: Record<string, string>;
  has_thumbnail: boolean;
}

export interface MotionState {
  asset_id: string;
  frame_count: number;
  frame_time: number;
  warnings: string[];
}

export interface SessionInfo {
  id: string;
  revision: number;
  body: string;
  attribute_names: string[];
  weight_bounds: Array<[number, number]>;
  weights: number[];
  garments: string[];
  motion: MotionState | null;
  frame: number;
}

export interface ShapeResponse {
  applied: number[];
  revision: number;
}

export interface MutationResponse {
  revision: number;
}

export interface MotionResponse {
  revision: number;
  frame_count: number;
  frame_time: number;
  warnings: string[];
}

export interface LayoutSection {
  kind: "body" | "garment" | "joints";
  name: string;
  vertex_count?: number;
  triangles?: number[][];
  joint_count?: number;
  names?: string[];
  parents?: number[];
}

export interface LayoutDoc {
  layout_version: number;
  revision: number;
  sections: LayoutSection[];
}

/** The surface the controller needs; mocked in unit tests. */
export interface ServiceClient {
  listAssets(): Promise<AssetInfo[]>;
  createSession(): Promise<SessionInfo>;
  setShape(sessionId: string, weights: number[]): Promise<ShapeResponse>;
  attachGarment(sessionId: string, garmentId: string): Promise<MutationResponse>;
  detachGarment(sessionId: string, garmentId: string): Promise<MutationResponse>;
  loadMotion(sessionId: string, assetId: string): Promise<MotionResponse>;
  setFrame(sessionId: string, index: number): Promise<MutationResponse>;
  fetchGeometry(sessionId: string): Promise<ArrayBuffer>;
  fetchLayout(sessionId: string): Promise<LayoutDoc>;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, reason: string) {
    super(reason);
    this.status = status;
  }
}

function describeDetail(detail: unknown): string {
  if (typeof detail === "string") {
    return detail;
  }
  if (Array.isArray(detail)) {
    return detail
      .map((item) =>
        item && typeof item === "object" && "reason" in item
          ? `${(item as any).field}: ${(item as any).reason}`
          : JSON.stringify(item),
      )
      .join("; ");
  }
  if (detail && typeof detail === "object") {
    if ("missing" in (detail as any)) {
      return `unmapped bones: ${(detail as any).missing.join(", ")}`;
    }
    return JSON.stringify(detail);
  }
  return "request failed";
}

export class HttpServiceClient implements ServiceClient {
  private readonly base: string;

  constructor(base = "") {
    this.base = base;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.base + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (!response.ok) {
      let reason = `${response.status}`;
      try {
        const doc = await response.json();
        reason = describeDetail(doc.detail ?? doc);
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, reason);
    }
    if (response.status === 204) {
      return undefined as T;
    }
    return (await response.json()) as T;
  }

  listAssets(): Promise<AssetInfo[]> {
    return this.request("GET", "/assets");
  }

  createSession(): Promise<SessionInfo> {
    return this.request("POST", "/sessions", {});
  }

  setShape(sessionId: string, weights: number[]): Promise<ShapeResponse> {
    return this.request("PUT", `/sessions/${sessionId}/shape`, { weights });
  }

  attachGarment(sessionId: string, garmentId: string): Promise<MutationResponse> {
    return this.request("POST", `/sessions/${sessionId}/garments/${garmentId}`);
  }

  detachGarment(sessionId: string, garmentId: string): Promise<MutationResponse> {
    return this.request("DELETE", `/sessions/${sessionId}/garments/${garmentId}`);
  }

  loadMotion(sessionId: string, assetId: string): Promise<MotionResponse> {
    return this.request("POST", `/sessions/${sessionId}/motion`, { asset_id: assetId });
  }

  setFrame(sessionId: string, index: number): Promise<MutationResponse> {
    return this.request("PUT", `/sessions/${sessionId}/frame`, { index });
  }

  async fetchGeometry(sessionId: string): Promise<ArrayBuffer> {
    const response = await fetch(`${this.base}/sessions/${sessionId}/geometry`);
    if (!response.ok) {
      throw new ApiError(response.status, `geometry fetch failed (${response.status})`);
    }
    return response.arrayBuffer();
  }

  fetchLayout(sessionId: string): Promise<LayoutDoc> {
    return this.request("GET", `/sessions/${sessionId}/geometry/layout`);
  }
}
