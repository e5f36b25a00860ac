#!/usr/bin/env node
/**
 * plot --csv <path> --figure <fig2|fig3|fig4|table1> --out <path>
 *
 * Exit codes: 0 success, 1 runtime failure (bad csv, io), 2 usage.
 * The output file is only written after the artifact is fully built,
 * so a failing run never leaves a partial file behind.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";

import { parseResultsCsv } from "./schema.js";
import { buildFigure, renderSvg, type FigureId } from "./render.js";
import { renderTable } from "./table.js";
import { buildFooter } from "./provenance.js";

const USAGE =
  "usage: plot --csv <path> --figure <fig2|fig3|fig4|table1> --out <path>";

const FIGURES: FigureId[] = ["fig2", "fig3", "fig4", "table1"];

interface Args {
  csv: string;
  figure: FigureId;
  out: string;
}

class UsageError extends Error {}

export function parseArgs(argv: string[]): Args {
  const values: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    if (!flag.startsWith("--")) {
      throw new UsageError(`unexpected argument: ${flag}`);
    }
    const name = flag.slice(2);
    if (!["csv", "figure", "out"].includes(name)) {
      throw new UsageError(`unknown flag: ${flag}`);
    }
    const value = argv[i + 1];
    if (value === undefined) {
      throw new UsageError(`missing value for ${flag}`);
    }
    values[name] = value;
  }
  for (const required of ["csv", "figure", "out"]) {
    if (!(required in values)) {
      throw new UsageError(`missing --${required}`);
    }
  }
  if (!FIGURES.includes(values.figure as FigureId)) {
    throw new UsageError(`unknown figure: ${values.figure}`);
  }
  return { csv: values.csv, figure: values.figure as FigureId, out: values.out };
}

export function main(argv: string[]): number {
  let args: Args;
  try {
    args = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }
  try {
    const rows = parseResultsCsv(readFileSync(args.csv, "utf8"));
    const footer = buildFooter(args.figure, args.csv);
    const artifact =
      args.figure === "table1"
        ? renderTable(rows, footer)
        : renderSvg(buildFigure(args.figure, rows, footer));
    writeFileSync(args.out, artifact);
    process.stdout.write(`wrote ${args.out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

if (
  process.argv[1] !== undefined &&
  import.meta.url === pathToFileURL(process.argv[1]).href
) {
  process.exit(main(process.argv.slice(2)));
}
