#!/usr/bin/env node
/**
 * ninapro2esf INPUT.mat --out OUT.esf
 *             [--label-source restimulus|stimulus] [--offsets offsets.txt]
 *
 * Exit codes: 0 success, 1 usage error, 2 schema/mapping/data error.
 */

import * as fs from "fs";
import * as path from "path";

import { convert, parseOffsets, MappingError, DEFAULT_OFFSETS_TEXT } from "./convert";
import { SchemaError } from "./mat5";

const USAGE =
  "usage: ninapro2esf INPUT.mat --out OUT.esf " +
  "[--label-source restimulus|stimulus] [--offsets offsets.txt]";

function fail(code: number, message: string): never {
  process.stderr.write(message + "\n");
  process.exit(code);
}

export function main(argv: string[]): number {
  let input: string | undefined;
  let out: string | undefined;
  let labelSource: "restimulus" | "stimulus" = "restimulus";
  let offsetsPath: string | undefined;

  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--help" || arg === "-h") {
      process.stdout.write(USAGE + "\n");
      return 0;
    } else if (arg === "--out") {
      out = argv[++i];
    } else if (arg === "--label-source") {
      const value = argv[++i];
      if (value !== "restimulus" && value !== "stimulus") {
        fail(1, `--label-source must be restimulus or stimulus, got ${value}`);
      }
      labelSource = value;
    } else if (arg === "--offsets") {
      offsetsPath = argv[++i];
    } else if (arg.startsWith("-")) {
      fail(1, `unknown flag ${arg}\n${USAGE}`);
    } else if (input === undefined) {
      input = arg;
    } else {
      fail(1, `unexpected argument ${arg}\n${USAGE}`);
    }
  }
  if (!input || !out) {
    fail(1, USAGE);
  }

  let offsetsText = DEFAULT_OFFSETS_TEXT;
  if (offsetsPath) {
    try {
      offsetsText = fs.readFileSync(offsetsPath, "utf8");
    } catch (err) {
      fail(2, `cannot read offsets file ${offsetsPath}: ${err}`);
    }
  } else {
    // the editable copy shipped next to the tool wins over the built-in text
    const shipped = path.join(__dirname, "..", "data", "db1-offsets.txt");
    if (fs.existsSync(shipped)) {
      offsetsText = fs.readFileSync(shipped, "utf8");
    }
  }

  let matBuffer: Buffer;
  try {
    matBuffer = fs.readFileSync(input);
  } catch (err) {
    fail(2, `cannot read ${input}: ${err}`);
  }

  try {
    const esf = convert(matBuffer, {
      labelSource,
      offsets: parseOffsets(offsetsText),
    });
    fs.writeFileSync(out, esf);
    process.stdout.write(`wrote ${esf.length} bytes to ${out}\n`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof MappingError ||
        err instanceof RangeError) {
      fail(2, `${input}: ${err.message}`);
    }
    throw err;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
