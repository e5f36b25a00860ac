/**
 * Frozen result-CSV schema shared with the Python sweep harness.
 *
 * The header must match column for column and every row must carry the
 * supported schema version; anything else is rejected up front so a stale
 * tool never misreads a newer CSV.
 */

import Papa from "papaparse";

export const SUPPORTED_SCHEMA_VERSION = 1;

export const CSV_COLUMNS = [
  "schema_version",
  "sweep_param",
  "sweep_value",
  "composition",
  "method",
  "trial",
  "seed",
  "data_hash",
  "nmse_delay",
  "nmse_doppler",
  "rmse_aoa_deg",
  "clustering_accuracy",
  "miss_rate",
  "false_alarm_rate",
  "vi_iterations",
  "failed",
] as const;

export type MetricName =
  | "nmse_delay"
  | "nmse_doppler"
  | "rmse_aoa_deg"
  | "clustering_accuracy"
  | "miss_rate"
  | "false_alarm_rate";

export interface ResultRow {
  sweepParam: string;
  sweepValue: number;
  composition: string;
  method: string;
  trial: number;
  seed: number;
  dataHash: string;
  nmse_delay: number;
  nmse_doppler: number;
  rmse_aoa_deg: number;
  clustering_accuracy: number;
  miss_rate: number;
  false_alarm_rate: number;
  viIterations: number;
  failed: boolean;
}

export class SchemaError extends Error {}

export class NoRowsError extends Error {}

/** "nan" cells come from the harness for undefined metrics. */
function toNumber(cell: string): number {
  return cell === "nan" ? NaN : Number(cell);
}

export function parseResultsCsv(text: string): ResultRow[] {
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaError(`csv parse error: ${first.message}`);
  }
  const fields = parsed.meta.fields ?? [];
  if (
    fields.length !== CSV_COLUMNS.length ||
    fields.some((f, i) => f !== CSV_COLUMNS[i])
  ) {
    throw new SchemaError(
      `unexpected csv header: got [${fields.join(", ")}]`,
    );
  }
  if (parsed.data.length === 0) {
    throw new NoRowsError("no rows in csv");
  }
  return parsed.data.map((raw, i) => {
    const version = Number(raw.schema_version);
    if (version !== SUPPORTED_SCHEMA_VERSION) {
      throw new SchemaError(
        `schema version ${raw.schema_version} unsupported ` +
          `(tool supports ${SUPPORTED_SCHEMA_VERSION}), row ${i + 1}`,
      );
    }
    return {
      sweepParam: raw.sweep_param,
      sweepValue: Number(raw.sweep_value),
      composition: raw.composition,
      method: raw.method,
      trial: Number(raw.trial),
      seed: Number(raw.seed),
      dataHash: raw.data_hash,
      nmse_delay: toNumber(raw.nmse_delay),
      nmse_doppler: toNumber(raw.nmse_doppler),
      rmse_aoa_deg: toNumber(raw.rmse_aoa_deg),
      clustering_accuracy: toNumber(raw.clustering_accuracy),
      miss_rate: toNumber(raw.miss_rate),
      false_alarm_rate: toNumber(raw.false_alarm_rate),
      viIterations: Number(raw.vi_iterations),
      failed: raw.failed === "1",
    };
  });
}
