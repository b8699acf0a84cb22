/**
 * Hand-built MAT v5 fixtures for the converter tests.
 *
 * Written from the container byte layout directly (independent of the
 * reader under test): 128-byte header, then one data element per variable,
 * optionally zlib-compressed, with both regular and small-element name
 * encodings.
 */

import * as zlib from "zlib";

const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;

const MX_DOUBLE_CLASS = 6;
const MX_SINGLE_CLASS = 7;
const MX_UINT8_CLASS = 9;

export type StorageType = "double" | "single" | "uint8";

export interface FixtureVariable {
  name: string;
  /** [rows, cols]; data given column-major */
  dims: [number, number];
  data: number[];
  storage?: StorageType;
  /** use the 4-byte small-element encoding for the name (scipy does this) */
  smallName?: boolean;
  compressed?: boolean;
}

function pad8(buf: Buffer): Buffer {
  const rem = buf.length % 8;
  if (rem === 0) return buf;
  return Buffer.concat([buf, Buffer.alloc(8 - rem)]);
}

function element(type: number, payload: Buffer): Buffer {
  const tag = Buffer.alloc(8);
  tag.writeUInt32LE(type, 0);
  tag.writeUInt32LE(payload.length, 4);
  return Buffer.concat([tag, pad8(payload)]);
}

function smallElement(type: number, payload: Buffer): Buffer {
  if (payload.length > 4) throw new Error("small element payload > 4 bytes");
  const out = Buffer.alloc(8);
  out.writeUInt16LE(type, 0);
  out.writeUInt16LE(payload.length, 2);
  payload.copy(out, 4);
  return out;
}

function numericPayload(data: number[], storage: StorageType): [number, Buffer] {
  if (storage === "double") {
    const buf = Buffer.alloc(8 * data.length);
    data.forEach((v, i) => buf.writeDoubleLE(v, 8 * i));
    return [MI_DOUBLE, buf];
  }
  if (storage === "single") {
    const buf = Buffer.alloc(4 * data.length);
    data.forEach((v, i) => buf.writeFloatLE(Math.fround(v), 4 * i));
    return [MI_SINGLE, buf];
  }
  const buf = Buffer.alloc(data.length);
  data.forEach((v, i) => buf.writeUInt8(v, i));
  return [MI_UINT8, buf];
}

const CLASS_FOR: Record<StorageType, number> = {
  double: MX_DOUBLE_CLASS,
  single: MX_SINGLE_CLASS,
  uint8: MX_UINT8_CLASS,
};

export function matrixElement(variable: FixtureVariable): Buffer {
  const storage = variable.storage ?? "double";
  const flags = Buffer.alloc(8);
  flags.writeUInt32LE(CLASS_FOR[storage], 0);
  const dims = Buffer.alloc(8);
  dims.writeInt32LE(variable.dims[0], 0);
  dims.writeInt32LE(variable.dims[1], 4);
  const nameBytes = Buffer.from(variable.name, "utf8");
  const nameEl =
    variable.smallName && nameBytes.length <= 4
      ? smallElement(MI_INT8, nameBytes)
      : element(MI_INT8, nameBytes);
  const [dataType, payload] = numericPayload(variable.data, storage);
  const body = Buffer.concat([
    element(MI_UINT32, flags),
    element(MI_INT32, dims),
    nameEl,
    element(dataType, payload),
  ]);
  const matrix = element(MI_MATRIX, body);
  if (variable.compressed) {
    // compressed elements are written back to back, without 8-byte padding
    const deflated = zlib.deflateSync(matrix);
    const tag = Buffer.alloc(8);
    tag.writeUInt32LE(MI_COMPRESSED, 0);
    tag.writeUInt32LE(deflated.length, 4);
    return Buffer.concat([tag, deflated]);
  }
  return matrix;
}

export function buildMat(variables: FixtureVariable[]): Buffer {
  const header = Buffer.alloc(128);
  header.write("MATLAB 5.0 MAT-file, converter test fixture", 0, "latin1");
  header.writeUInt16LE(0x0100, 124);
  header.write("IM", 126, "latin1");
  return Buffer.concat([header, ...variables.map(matrixElement)]);
}

/** Column-major helper: build a [t x 1] stream. */
export function stream(name: string, values: number[], extra?: Partial<FixtureVariable>): FixtureVariable {
  return { name, dims: [values.length, 1], data: values, ...extra };
}

/** Column-major helper: build a [t x c] matrix from row-major values. */
export function matrix(
  name: string,
  rows: number,
  cols: number,
  rowMajor: number[],
  extra?: Partial<FixtureVariable>
): FixtureVariable {
  const colMajor: number[] = new Array(rows * cols);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      colMajor[c * rows + r] = rowMajor[r * cols + c];
    }
  }
  return { name, dims: [rows, cols], data: colMajor, ...extra };
}

export function scalar(name: string, value: number, extra?: Partial<FixtureVariable>): FixtureVariable {
  return { name, dims: [1, 1], data: [value], ...extra };
}
