/**
 * Binary geometry payload parser (layout version 1, little-endian).
 *
 * header: "AVGE" | u16 version | u16 section count | u32 revision
 * table:  per section: u8 kind | u16 name length | name utf-8
 *         | u32 item count | u32 byte offset | u32 byte length
 * blob:   mesh sections hold interleaved position+normal (6 f32/vertex),
 *         the joints section holds 3 f32 per joint.
 */

export const KIND_BODY = 0;
export const KIND_GARMENT = 1;
export const KIND_JOINTS = 2;

export interface MeshSection {
  kind: typeof KIND_BODY | typeof KIND_GARMENT;
  name: string;
  vertexCount: number;
  positions: Float32Array;
  normals: Float32Array;
}

export interface JointsSection {
  kind: typeof KIND_JOINTS;
  name: string;
  jointCount: number;
  positions: Float32Array;
}

export type Section = MeshSection | JointsSection;

export interface GeometryFrame {
  revision: number;
  sections: Map<string, Section>;
  bytes: ArrayBuffer;
}

const MAGIC = 0x45475641; // "AVGE" little-endian

export function parseGeometry(buffer: ArrayBuffer): GeometryFrame {
  const view = new DataView(buffer);
  if (buffer.byteLength < 12 || view.getUint32(0, true) !== MAGIC) {
    throw new Error("not a geometry payload (bad magic)");
  }
  const version = view.getUint16(4, true);
  if (version !== 1) {
    throw new Error(`unsupported payload version ${version}`);
  }
  const sectionCount = view.getUint16(6, true);
  const revision = view.getUint32(8, true);
  const decoder = new TextDecoder();
  let cursor = 12;
  const table: Array<{ kind: number; name: string; items: number; offset: number; length: number }> = [];
  for (let i = 0; i < sectionCount; i++) {
    const kind = view.getUint8(cursor);
    const nameLength = view.getUint16(cursor + 1, true);
    cursor += 3;
    const name = decoder.decode(new Uint8Array(buffer, cursor, nameLength));
    cursor += nameLength;
    const items = view.getUint32(cursor, true);
    const offset = view.getUint32(cursor + 4, true);
    const length = view.getUint32(cursor + 8, true);
    cursor += 12;
    table.push({ kind, name, items, offset, length });
  }
  const blobStart = cursor;
  const sections = new Map<string, Section>();
  for (const entry of table) {
    const start = blobStart + entry.offset;
    if (entry.kind === KIND_JOINTS) {
      const positions = readFloats(buffer, start, entry.items * 3);
      sections.set(entry.name, {
        kind: KIND_JOINTS,
        name: entry.name,
        jointCount: entry.items,
        positions,
      });
    } else {
      const interleaved = readFloats(buffer, start, entry.items * 6);
      const positions = new Float32Array(entry.items * 3);
      const normals = new Float32Array(entry.items * 3);
      for (let v = 0; v < entry.items; v++) {
        positions[v * 3] = interleaved[v * 6];
        positions[v * 3 + 1] = interleaved[v * 6 + 1];
        positions[v * 3 + 2] = interleaved[v * 6 + 2];
        normals[v * 3] = interleaved[v * 6 + 3];
        normals[v * 3 + 1] = interleaved[v * 6 + 4];
        normals[v * 3 + 2] = interleaved[v * 6 + 5];
      }
      sections.set(entry.name, {
        kind: entry.kind as MeshSection["kind"],
        name: entry.name,
        vertexCount: entry.items,
        positions,
        normals,
      });
    }
  }
  return { revision, sections, bytes: buffer };
}

function readFloats(buffer: ArrayBuffer, byteOffset: number, count: number): Float32Array {
  if (byteOffset % 4 === 0) {
    return new Float32Array(buffer, byteOffset, count);
  }
  // unaligned sections are copied via DataView
  const view = new DataView(buffer);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getFloat32(byteOffset + i * 4, true);
  }
  return out;
}

/** FNV-1a 32-bit checksum; used to assert the UI renders exactly the
 * payload the service sent. */
export function checksum(buffer: ArrayBuffer): number {
  const bytes = new Uint8Array(buffer);
  let hash = 0x811c9dc5;
  for (let i = 0; i < bytes.length; i++) {
    hash ^= bytes[i];
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}
