/** Test utilities: a payload encoder mirroring the documented binary
 * layout, a deferred promise, and a controllable mock service. */

import {
  AssetInfo,
  LayoutDoc,
  MotionResponse,
  MutationResponse,
  ServiceClient,
  SessionInfo,
  ShapeResponse,
} from "../src/api";

export interface EncodableSection {
  kind: number;
  name: string;
  /** mesh sections: 6 floats per vertex; joints: 3 per joint */
  data: number[];
  itemCount: number;
}

export function encodeGeometry(revision: number, sections: EncodableSection[]): ArrayBuffer {
  const encoder = new TextEncoder();
  const names = sections.map((s) => encoder.encode(s.name));
  const tableSize = sections.reduce((acc, _, i) => acc + 3 + names[i].length + 12, 0);
  const blobSize = sections.reduce((acc, s) => acc + s.data.length * 4, 0);
  const buffer = new ArrayBuffer(12 + tableSize + blobSize);
  const view = new DataView(buffer);
  const bytes = new Uint8Array(buffer);
  view.setUint32(0, 0x45475641, true); // "AVGE"
  view.setUint16(4, 1, true);
  view.setUint16(6, sections.length, true);
  view.setUint32(8, revision, true);
  let cursor = 12;
  let blobOffset = 0;
  for (let i = 0; i < sections.length; i++) {
    const s = sections[i];
    view.setUint8(cursor, s.kind);
    view.setUint16(cursor + 1, names[i].length, true);
    cursor += 3;
    bytes.set(names[i], cursor);
    cursor += names[i].length;
    view.setUint32(cursor, s.itemCount, true);
    view.setUint32(cursor + 4, blobOffset, true);
    view.setUint32(cursor + 8, s.data.length * 4, true);
    cursor += 12;
    blobOffset += s.data.length * 4;
  }
  for (const s of sections) {
    for (const value of s.data) {
      view.setFloat32(cursor, value, true);
      cursor += 4;
    }
  }
  return buffer;
}

export class Deferred<T = void> {
  readonly promise: Promise<T>;
  resolve!: (value: T) => void;
  reject!: (reason?: unknown) => void;

  constructor() {
    this.promise = new Promise((resolve, reject) => {
      this.resolve = resolve;
      this.reject = reject;
    });
  }
}

export async function flush(times = 8): Promise<void> {
  for (let i = 0; i < times; i++) {
    await new Promise((resolve) => setTimeout(resolve, 0));
  }
}

/** In-memory service with per-method gates to control response ordering.
 * Geometry responses snapshot the state at request time, so delaying a
 * response makes it stale exactly like a real out-of-order network. */
export class MockService implements ServiceClient {
  revision = 0;
  weights = [0, 0];
  frame = 0;
  garments = new Set<string>();
  motionLoaded = false;
  readonly frameCount = 10;
  readonly frameTime = 0.1;

  shapeCalls: number[][] = [];
  frameCalls: number[] = [];
  geometryRequests = 0;

  private gates = new Map<string, Deferred[]>();

  hold(method: string): Deferred {
    const gate = new Deferred();
    const queue = this.gates.get(method) ?? [];
    queue.push(gate);
    this.gates.set(method, queue);
    return gate;
  }

  private async gate(method: string): Promise<void> {
    const queue = this.gates.get(method);
    if (queue && queue.length > 0) {
      await queue.shift()!.promise;
    }
  }

  /** Payload bytes for the current state (the oracle the UI must render). */
  payloadBytes(): ArrayBuffer {
    return encodeGeometry(this.revision, [
      {
        kind: 0,
        name: "body",
        itemCount: 2,
        data: [
          this.weights[0], this.frame, this.garments.size, 0, 1, 0,
          this.weights[1], 0, 0, 0, 1, 0,
        ],
      },
      ...[...this.garments].sort().map((gid, i) => ({
        kind: 1,
        name: gid,
        itemCount: 1,
        data: [i, this.frame, 0, 0, 1, 0],
      })),
      { kind: 2, name: "joints", itemCount: 1, data: [0, this.frame * 0.1, 0] },
    ]);
  }

  async listAssets(): Promise<AssetInfo[]> {
    return [
      { id: "demo-body", kind: "body-basis", name: "Body", textures: {}, has_thumbnail: false },
      { id: "tunic", kind: "garment", name: "Tunic", textures: {}, has_thumbnail: false },
      { id: "sway", kind: "motion", name: "Sway", textures: {}, has_thumbnail: false },
    ];
  }

  async createSession(): Promise<SessionInfo> {
    return {
      id: "s1",
      revision: this.revision,
      body: "demo-body",
      attribute_names: ["weight", "belly"],
      weight_bounds: [
        [-1, 1],
        [-1, 1],
      ],
      weights: [...this.weights],
      garments: [],
      motion: null,
      frame: 0,
    };
  }

  async setShape(_id: string, weights: number[]): Promise<ShapeResponse> {
    await this.gate("setShape");
    this.shapeCalls.push([...weights]);
    this.weights = weights.map((w) => Math.max(-1, Math.min(1, w)));
    this.revision += 1;
    return { applied: [...this.weights], revision: this.revision };
  }

  async attachGarment(_id: string, gid: string): Promise<MutationResponse> {
    await this.gate("attachGarment");
    this.garments.add(gid);
    this.revision += 1;
    return { revision: this.revision };
  }

  async detachGarment(_id: string, gid: string): Promise<MutationResponse> {
    this.garments.delete(gid);
    this.revision += 1;
    return { revision: this.revision };
  }

  async loadMotion(_id: string, _assetId: string): Promise<MotionResponse> {
    await this.gate("loadMotion");
    this.motionLoaded = true;
    this.frame = 0;
    this.revision += 1;
    return {
      revision: this.revision,
      frame_count: this.frameCount,
      frame_time: this.frameTime,
      warnings: [],
    };
  }

  async setFrame(_id: string, index: number): Promise<MutationResponse> {
    await this.gate("setFrame");
    this.frameCalls.push(index);
    this.frame = index;
    this.revision += 1;
    return { revision: this.revision };
  }

  async fetchGeometry(_id: string): Promise<ArrayBuffer> {
    this.geometryRequests += 1;
    const snapshot = this.payloadBytes();
    await this.gate("fetchGeometry");
    return snapshot;
  }

  async fetchLayout(_id: string): Promise<LayoutDoc> {
    const snapshot: LayoutDoc = {
      layout_version: 1,
      revision: this.revision,
      sections: [
        { kind: "body", name: "body", vertex_count: 2, triangles: [] },
        ...[...this.garments].sort().map((gid) => ({
          kind: "garment" as const,
          name: gid,
          vertex_count: 1,
          triangles: [],
        })),
        { kind: "joints", name: "joints", joint_count: 1, names: ["root"], parents: [-1] },
      ],
    };
    await this.gate("fetchLayout");
    return snapshot;
  }
}
