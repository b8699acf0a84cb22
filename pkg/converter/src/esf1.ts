/**
 * Writer for the ESF1 session container consumed by the gesture toolkit.
 *
 * Layout (little-endian): magic "ESF1", version u8=1, channels u8,
 * subject u16, exercise u8, sampling_rate_hz f32, T u32, samples
 * f32 x (T*C) row-major with channel fastest, labels u16 x T,
 * repetitions u8 x T, CRC32 (of everything after the magic) u32.
 */

export const ESF1_MAGIC = "ESF1";
export const ESF1_VERSION = 1;
export const NUM_CLASSES = 53;
export const MAX_REPETITION = 10;

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

/** CRC-32 (IEEE, reflected), identical to zlib.crc32. */
export function crc32(buf: Uint8Array): number {
  let crc = 0xffffffff;
  for (let i = 0; i < buf.length; i++) {
    crc = CRC_TABLE[(crc ^ buf[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

export interface Esf1Session {
  subject: number;
  exercise: number;
  samplingRateHz: number;
  channels: number;
  /** T*C values, row-major with channel fastest */
  samples: Float32Array;
  labels: Uint16Array;
  repetitions: Uint8Array;
}

export function writeEsf1(session: Esf1Session): Buffer {
  const { channels, samples, labels, repetitions } = session;
  if (channels < 1 || channels > 255) {
    throw new RangeError(`channels must be 1..255, got ${channels}`);
  }
  if (samples.length % channels !== 0) {
    throw new RangeError("sample count is not a multiple of the channel count");
  }
  const t = samples.length / channels;
  if (labels.length !== t || repetitions.length !== t) {
    throw new RangeError("labels and repetitions must have one entry per sample");
  }
  for (const label of labels) {
    if (label >= NUM_CLASSES) {
      throw new RangeError(`label ${label} outside [0, ${NUM_CLASSES})`);
    }
  }
  for (const rep of repetitions) {
    if (rep > MAX_REPETITION) {
      throw new RangeError(`repetition ${rep} outside [0, ${MAX_REPETITION}]`);
    }
  }
  const body = Buffer.alloc(1 + 1 + 2 + 1 + 4 + 4 + 4 * t * channels + 2 * t + t);
  let pos = 0;
  pos = body.writeUInt8(ESF1_VERSION, pos);
  pos = body.writeUInt8(channels, pos);
  pos = body.writeUInt16LE(session.subject, pos);
  pos = body.writeUInt8(session.exercise, pos);
  pos = body.writeFloatLE(session.samplingRateHz, pos);
  pos = body.writeUInt32LE(t, pos);
  for (let i = 0; i < samples.length; i++) {
    pos = body.writeFloatLE(samples[i], pos);
  }
  for (let i = 0; i < t; i++) {
    pos = body.writeUInt16LE(labels[i], pos);
  }
  for (let i = 0; i < t; i++) {
    pos = body.writeUInt8(repetitions[i], pos);
  }
  const out = Buffer.alloc(4 + body.length + 4);
  out.write(ESF1_MAGIC, 0, "latin1");
  body.copy(out, 4);
  out.writeUInt32LE(crc32(body), 4 + body.length);
  return out;
}
