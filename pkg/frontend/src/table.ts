/**
 * Text table for the accuracy-versus-SNR summary: one row per
 * (composition, method), one column per sweep value, cells are exact
 * trial means (shortest round-trip formatting, so the CSV means are
 * reproduced digit for digit).
 */

import type { ResultRow } from "./schema.js";
import { aggregate } from "./stats.js";
import { checkSweep } from "./render.js";

export function renderTable(rows: ResultRow[], footer: string): string {
  checkSweep("table1", rows);
  const series = aggregate(rows, "clustering_accuracy");
  const xs = [...new Set(rows.map((r) => r.sweepValue))].sort(
    (a, b) => a - b,
  );
  const header = ["composition", "method", ...xs.map((x) => String(x))];
  const lines: string[][] = [header];
  for (const s of series) {
    const byX = new Map(s.points.map((p) => [p.x, p.mean]));
    const cells = xs.map((x) => {
      const m = byX.get(x);
      return m === undefined ? "nan" : String(m);
    });
    lines.push([s.composition, s.method, ...cells]);
  }
  const widths = header.map((_, c) =>
    Math.max(...lines.map((l) => l[c].length)),
  );
  const rendered = lines
    .map((l) => l.map((cell, c) => cell.padEnd(widths[c])).join("  "))
    .map((l) => l.trimEnd());
  return [
    "clustering accuracy vs snr",
    ...rendered,
    footer,
    "",
  ].join("\n");
}
