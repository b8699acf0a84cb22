/**
 * Minimal reader for MATLAB level-5 MAT containers.
 *
 * Supports what biosignal recordings actually use: little-endian files,
 * real numeric matrices (any integer/float storage type, including the
 * compact storage MATLAB applies to double arrays), the small-data-element
 * encoding, and zlib-compressed (miCOMPRESSED) elements. Cell arrays,
 * structs, sparse and complex matrices are rejected explicitly.
 */

import * as zlib from "zlib";

export class SchemaError extends Error {}

// MAT data element types
const MI_INT8 = 1;
const MI_UINT8 = 2;
const MI_INT16 = 3;
const MI_UINT16 = 4;
const MI_INT32 = 5;
const MI_UINT32 = 6;
const MI_SINGLE = 7;
const MI_DOUBLE = 9;
const MI_INT64 = 12;
const MI_UINT64 = 13;
const MI_MATRIX = 14;
const MI_COMPRESSED = 15;
const MI_UTF8 = 16;

// mxArray classes
const MX_NUMERIC_MIN = 6; // mxDOUBLE_CLASS
const MX_NUMERIC_MAX = 15; // mxUINT64_CLASS

export interface MatVariable {
  name: string;
  /** row/column extents as stored (column-major payload) */
  dims: number[];
  /** values widened to float64, in storage (column-major) order */
  data: Float64Array;
}

interface Element {
  type: number;
  payload: Buffer;
  /** next element position with 8-byte padding applied */
  next: number;
  /** next position without padding (compressed elements are never padded) */
  rawNext: number;
}

function readElement(buf: Buffer, pos: number): Element {
  if (pos + 8 > buf.length) {
    throw new SchemaError(`element tag truncated at byte ${pos}`);
  }
  const first = buf.readUInt32LE(pos);
  const small = first >>> 16;
  if (small !== 0) {
    // small data element: type and byte count packed into one word
    const type = first & 0xffff;
    const size = small;
    if (size > 4) {
      throw new SchemaError(`small element at byte ${pos} claims ${size} bytes`);
    }
    const payload = buf.subarray(pos + 4, pos + 4 + size);
    return { type, payload, next: pos + 8, rawNext: pos + 8 };
  }
  const type = first;
  const size = buf.readUInt32LE(pos + 4);
  if (pos + 8 + size > buf.length) {
    throw new SchemaError(
      `element of ${size} bytes at byte ${pos} overruns file of ${buf.length}`
    );
  }
  const payload = buf.subarray(pos + 8, pos + 8 + size);
  const padded = size % 8 === 0 ? size : size + (8 - (size % 8));
  return { type, payload, next: pos + 8 + padded, rawNext: pos + 8 + size };
}

function widenNumeric(type: number, payload: Buffer): Float64Array {
  const make = (
    ctor: new (b: ArrayBuffer, o: number, n: number) => ArrayLike<number>,
    width: number
  ) => {
    const count = Math.floor(payload.length / width);
    // copy so alignment never matters
    const aligned = Buffer.alloc(payload.length);
    payload.copy(aligned);
    const view = new ctor(
      aligned.buffer,
      aligned.byteOffset,
      count
    ) as unknown as ArrayLike<number>;
    const out = new Float64Array(count);
    for (let i = 0; i < count; i++) out[i] = Number(view[i]);
    return out;
  };
  switch (type) {
    case MI_INT8:
      return make(Int8Array, 1);
    case MI_UINT8:
      return make(Uint8Array, 1);
    case MI_INT16:
      return make(Int16Array, 2);
    case MI_UINT16:
      return make(Uint16Array, 2);
    case MI_INT32:
      return make(Int32Array, 4);
    case MI_UINT32:
      return make(Uint32Array, 4);
    case MI_SINGLE:
      return make(Float32Array, 4);
    case MI_DOUBLE:
      return make(Float64Array, 8);
    case MI_INT64:
      return make(BigInt64Array as never, 8);
    case MI_UINT64:
      return make(BigUint64Array as never, 8);
    default:
      throw new SchemaError(`unsupported numeric element type ${type}`);
  }
}

function parseMatrix(payload: Buffer): MatVariable {
  let pos = 0;
  const flagsEl = readElement(payload, pos);
  if (flagsEl.type !== MI_UINT32 || flagsEl.payload.length < 8) {
    throw new SchemaError("matrix is missing its array-flags element");
  }
  const flags = flagsEl.payload.readUInt32LE(0);
  const klass = flags & 0xff;
  const complex = (flags & 0x0800) !== 0;
  if (complex) {
    throw new SchemaError("complex matrices are not supported");
  }
  if (klass < MX_NUMERIC_MIN || klass > MX_NUMERIC_MAX) {
    throw new SchemaError(`unsupported matrix class ${klass} (numeric expected)`);
  }
  pos = flagsEl.next;

  const dimsEl = readElement(payload, pos);
  if (dimsEl.type !== MI_INT32) {
    throw new SchemaError("matrix is missing its dimensions element");
  }
  const dims: number[] = [];
  for (let i = 0; i + 4 <= dimsEl.payload.length; i += 4) {
    dims.push(dimsEl.payload.readInt32LE(i));
  }
  pos = dimsEl.next;

  const nameEl = readElement(payload, pos);
  if (nameEl.type !== MI_INT8 && nameEl.type !== MI_UTF8) {
    throw new SchemaError("matrix is missing its name element");
  }
  const name = nameEl.payload.toString("utf8");
  pos = nameEl.next;

  const dataEl = readElement(payload, pos);
  const data = widenNumeric(dataEl.type, dataEl.payload);
  const expected = dims.reduce((a, b) => a * b, 1);
  if (data.length !== expected) {
    throw new SchemaError(
      `matrix ${name}: ${data.length} values for dims [${dims.join("x")}]`
    );
  }
  return { name, dims, data };
}

/** Parse every top-level numeric variable of a little-endian MAT v5 file. */
export function parseMat(buf: Buffer): Map<string, MatVariable> {
  if (buf.length < 128) {
    throw new SchemaError("file shorter than the 128-byte MAT header");
  }
  const endian = buf.toString("latin1", 126, 128);
  if (endian !== "IM") {
    throw new SchemaError(
      endian === "MI"
        ? "big-endian MAT files are not supported"
        : "not a MAT v5 file (bad endian indicator)"
    );
  }
  const version = buf.readUInt16LE(124);
  if (version !== 0x0100) {
    throw new SchemaError(`unsupported MAT version 0x${version.toString(16)}`);
  }
  const variables = new Map<string, MatVariable>();
  let pos = 128;
  while (pos + 8 <= buf.length) {
    const el = readElement(buf, pos);
    if (el.type === MI_COMPRESSED) {
      let inflated: Buffer;
      try {
        inflated = zlib.inflateSync(el.payload);
      } catch (err) {
        throw new SchemaError(`corrupt compressed element at byte ${pos}: ${err}`);
      }
      const inner = readElement(inflated, 0);
      if (inner.type !== MI_MATRIX) {
        throw new SchemaError(`compressed element at byte ${pos} is not a matrix`);
      }
      const variable = parseMatrix(inner.payload);
      variables.set(variable.name, variable);
      // compressed elements are exempt from the 8-byte boundary rule
      pos = el.rawNext;
    } else if (el.type === MI_MATRIX) {
      const variable = parseMatrix(el.payload);
      variables.set(variable.name, variable);
      pos = el.next;
    } else {
      // other top-level element kinds (e.g. subsystem data) are skipped
      pos = el.next;
    }
  }
  return variables;
}
