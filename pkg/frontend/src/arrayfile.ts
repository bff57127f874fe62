/**
 * Reader/writer for the array exchange format used by the Python package:
 * a JSON header (magic "DCRF1") plus a sibling little-endian .raw payload
 * (float32 for values, row-major).
 */
import * as fs from "node:fs";
import * as path from "node:path";

export const MAGIC = "DCRF1";

export interface ImageFile {
  kind: string;
  /** [ny, nx] */
  shape: [number, number];
  /** [dy, dx] in mm */
  spacing: [number, number];
  /** [cy, cx] in mm */
  center: [number, number];
  unit: string;
  /** row-major, length ny*nx */
  values: Float32Array;
  extra: Record<string, unknown>;
}

const KNOWN_KEYS = new Set([
  "magic", "kind", "shape", "spacing_mm", "center_mm", "unit", "payload",
]);

export function readImage(headerPath: string): ImageFile {
  const header = JSON.parse(fs.readFileSync(headerPath, "utf-8"));
  if (header.magic !== MAGIC) {
    throw new Error(`${headerPath}: bad magic ${JSON.stringify(header.magic)}`);
  }
  if (header.kind !== "image") {
    throw new Error(`${headerPath}: expected an image file, got ${header.kind}`);
  }
  const [ny, nx] = header.shape as [number, number];
  const raw = fs.readFileSync(path.join(path.dirname(headerPath), header.payload));
  const expected = ny * nx * 4;
  if (raw.byteLength !== expected) {
    throw new Error(
      `${header.payload}: payload is ${raw.byteLength} bytes, expected ${expected}`,
    );
  }
  const values = new Float32Array(
    raw.buffer.slice(raw.byteOffset, raw.byteOffset + raw.byteLength),
  );
  const extra: Record<string, unknown> = {};
  for (const key of Object.keys(header)) {
    if (!KNOWN_KEYS.has(key)) extra[key] = header[key];
  }
  return {
    kind: header.kind,
    shape: [ny, nx],
    spacing: header.spacing_mm as [number, number],
    center: (header.center_mm ?? [0, 0]) as [number, number],
    unit: header.unit,
    values,
    extra,
  };
}

export function writeImage(headerPath: string, img: ImageFile): void {
  const [ny, nx] = img.shape;
  if (img.values.length !== ny * nx) {
    throw new Error(`values length ${img.values.length} != ${ny}*${nx}`);
  }
  if (!headerPath.endsWith(".json")) headerPath += ".json";
  const rawName = path.basename(headerPath).replace(/\.json$/, ".raw");
  const header = {
    magic: MAGIC,
    kind: img.kind,
    shape: img.shape,
    spacing_mm: img.spacing,
    center_mm: img.center,
    unit: img.unit,
    ...img.extra,
    payload: rawName,
  };
  fs.mkdirSync(path.dirname(headerPath), { recursive: true });
  fs.writeFileSync(path.join(path.dirname(headerPath), rawName),
    Buffer.from(img.values.buffer, img.values.byteOffset, img.values.byteLength));
  fs.writeFileSync(headerPath, JSON.stringify(header, null, 2));
}
