/**
 * Ninapro DB1 MAT recording -> ESF1 session.
 *
 * DB1 labels its movements per exercise file (1..N plus 0 for rest), while
 * the toolkit uses one global space of 53 classes (0 = rest). The offset
 * map carries, per exercise, the global offset and the movement count, plus
 * the dataset sampling rate; rest stays 0, movement L becomes offset + L.
 */

import { MatVariable, SchemaError, parseMat } from "./mat5";
import { Esf1Session, writeEsf1, NUM_CLASSES, MAX_REPETITION } from "./esf1";

export class MappingError extends Error {}

export type LabelSource = "restimulus" | "stimulus";

export interface ExerciseRange {
  offset: number;
  count: number;
}

export interface OffsetMap {
  samplingRateHz: number;
  exercises: Map<number, ExerciseRange>;
}

/** Parse the plain-text offset map (key=value lines, # comments). */
export function parseOffsets(text: string): OffsetMap {
  let samplingRateHz: number | undefined;
  const exercises = new Map<number, ExerciseRange>();
  text.split(/\r?\n/).forEach((line, index) => {
    const stripped = line.trim();
    if (!stripped || stripped.startsWith("#")) return;
    const eq = stripped.indexOf("=");
    if (eq < 0) {
      throw new MappingError(`offsets line ${index + 1}: expected key=value`);
    }
    const key = stripped.slice(0, eq).trim();
    const value = stripped.slice(eq + 1).trim();
    if (key === "sampling_rate_hz") {
      samplingRateHz = Number(value);
      if (!Number.isFinite(samplingRateHz) || samplingRateHz <= 0) {
        throw new MappingError(`offsets: bad sampling rate ${value}`);
      }
      return;
    }
    const m = key.match(/^exercise(\d+)$/);
    if (!m) {
      throw new MappingError(`offsets line ${index + 1}: unknown key ${key}`);
    }
    const parts = value.split(":");
    if (parts.length !== 2) {
      throw new MappingError(
        `offsets: exercise value must be offset:count, got ${value}`
      );
    }
    const offset = Number(parts[0]);
    const count = Number(parts[1]);
    if (!Number.isInteger(offset) || !Number.isInteger(count) || count < 1) {
      throw new MappingError(`offsets: bad range ${value}`);
    }
    exercises.set(Number(m[1]), { offset, count });
  });
  if (samplingRateHz === undefined) {
    throw new MappingError("offsets: sampling_rate_hz is missing");
  }
  if (exercises.size === 0) {
    throw new MappingError("offsets: no exerciseN entries");
  }
  for (const [exercise, range] of exercises) {
    if (range.offset + range.count >= NUM_CLASSES) {
      throw new MappingError(
        `offsets: exercise ${exercise} maps beyond class ${NUM_CLASSES - 1}`
      );
    }
  }
  return { samplingRateHz, exercises };
}

export const DEFAULT_OFFSETS_TEXT = [
  "# Ninapro DB1 exercise -> global label range (offset:count); rest stays 0.",
  "# Global space: 53 classes, 0 = rest, 1..12 exercise 1 (finger movements),",
  "# 13..29 exercise 2 (postures + wrist), 30..52 exercise 3 (grasps).",
  "sampling_rate_hz=100",
  "exercise1=0:12",
  "exercise2=12:17",
  "exercise3=29:23",
  "",
].join("\n");

export interface ConvertOptions {
  labelSource?: LabelSource;
  offsets?: OffsetMap;
}

function requireVariable(
  variables: Map<string, MatVariable>,
  name: string
): MatVariable {
  const v = variables.get(name);
  if (!v) {
    throw new SchemaError(`required field '${name}' is missing from the MAT file`);
  }
  return v;
}

function asScalar(v: MatVariable): number {
  if (v.data.length !== 1) {
    throw new SchemaError(`field '${v.name}' should be a scalar`);
  }
  return v.data[0];
}

function asStream(v: MatVariable, t: number): Float64Array {
  if (v.data.length !== t) {
    throw new SchemaError(
      `field '${v.name}' has ${v.data.length} entries, expected ${t}`
    );
  }
  return v.data;
}

/** Convert a parsed MAT buffer into ESF1 bytes. */
export function convert(matBuffer: Buffer, options: ConvertOptions = {}): Buffer {
  const labelSource: LabelSource = options.labelSource ?? "restimulus";
  const offsets = options.offsets ?? parseOffsets(DEFAULT_OFFSETS_TEXT);

  const variables = parseMat(matBuffer);
  const emg = requireVariable(variables, "emg");
  if (emg.dims.length !== 2) {
    throw new SchemaError(`field 'emg' should be 2-D, got [${emg.dims.join("x")}]`);
  }
  const [t, channels] = emg.dims;
  if (t < 1 || channels < 1) {
    throw new SchemaError(`field 'emg' has empty extent [${t}x${channels}]`);
  }

  const labelVar = requireVariable(variables, labelSource);
  const labels = asStream(labelVar, t);
  // the onset-corrected label stream pairs with the corrected repetitions
  const repName =
    labelSource === "restimulus" && variables.has("rerepetition")
      ? "rerepetition"
      : "repetition";
  const reps = asStream(requireVariable(variables, repName), t);
  const subject = asScalar(requireVariable(variables, "subject"));
  const exercise = asScalar(requireVariable(variables, "exercise"));

  const range = offsets.exercises.get(exercise);
  if (!range) {
    throw new MappingError(
      `exercise ${exercise} has no entry in the offset map ` +
        `(known: ${[...offsets.exercises.keys()].join(", ")})`
    );
  }

  const outLabels = new Uint16Array(t);
  const outReps = new Uint8Array(t);
  for (let i = 0; i < t; i++) {
    const local = labels[i];
    if (!Number.isInteger(local) || local < 0 || local > range.count) {
      throw new MappingError(
        `${labelSource}[${i}] = ${local} outside 0..${range.count} ` +
          `for exercise ${exercise}`
      );
    }
    outLabels[i] = local === 0 ? 0 : range.offset + local;
    const rep = reps[i];
    if (!Number.isInteger(rep) || rep < 0 || rep > MAX_REPETITION) {
      throw new MappingError(
        `${repName}[${i}] = ${rep} outside 0..${MAX_REPETITION}`
      );
    }
    outReps[i] = rep;
  }

  // column-major MAT payload -> row-major, channel fastest
  const samples = new Float32Array(t * channels);
  for (let c = 0; c < channels; c++) {
    const col = c * t;
    for (let i = 0; i < t; i++) {
      samples[i * channels + c] = Math.fround(emg.data[col + i]);
    }
  }

  const session: Esf1Session = {
    subject,
    exercise,
    samplingRateHz: offsets.samplingRateHz,
    channels,
    samples,
    labels: outLabels,
    repetitions: outReps,
  };
  return writeEsf1(session);
}
