import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import {
  CSV_COLUMNS,
  NoRowsError,
  parseResultsCsv,
  SchemaError,
  SUPPORTED_SCHEMA_VERSION,
} from "../src/schema.js";

const FIXTURES = join(__dirname, "fixtures");

function fixture(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf8");
}

describe("parseResultsCsv", () => {
  it("parses a sweep csv produced by the harness", () => {
    const rows = parseResultsCsv(fixture("fig2.csv"));
    expect(rows.length).toBe(12);
    const first = rows[0];
    expect(first.sweepParam).toBe("snr");
    expect(first.sweepValue).toBe(0);
    expect(first.composition).toBe("2+1");
    expect(first.method).toBe("cluster_sbl");
    expect(first.trial).toBe(0);
    expect(Number.isFinite(first.nmse_delay)).toBe(true);
    expect(first.failed).toBe(false);
  });

  it("maps nan cells to NaN", () => {
    const rows = parseResultsCsv(fixture("fig2.csv"));
    const individual = rows.filter((r) => r.method === "individual_sbl");
    expect(individual.length).toBeGreaterThan(0);
    for (const row of individual) {
      expect(Number.isNaN(row.clustering_accuracy)).toBe(true);
    }
  });

  it("rejects an unsupported schema version naming both versions", () => {
    expect(() => parseResultsCsv(fixture("badversion.csv"))).toThrow(
      SchemaError,
    );
    try {
      parseResultsCsv(fixture("badversion.csv"));
    } catch (err) {
      const msg = (err as Error).message;
      expect(msg).toContain("99");
      expect(msg).toContain(String(SUPPORTED_SCHEMA_VERSION));
    }
  });

  it("rejects a header-only csv with a no-rows error", () => {
    expect(() => parseResultsCsv(fixture("empty.csv"))).toThrow(NoRowsError);
    expect(() => parseResultsCsv(fixture("empty.csv"))).toThrow(/no rows/);
  });

  it("rejects a reordered or renamed header", () => {
    const good = fixture("fig2.csv");
    const mangled = good.replace("nmse_delay", "delay_nmse");
    expect(() => parseResultsCsv(mangled)).toThrow(SchemaError);
  });

  it("freezes the column list", () => {
    expect(CSV_COLUMNS.length).toBe(16);
    expect(CSV_COLUMNS[0]).toBe("schema_version");
    expect(CSV_COLUMNS[CSV_COLUMNS.length - 1]).toBe("failed");
  });
});
