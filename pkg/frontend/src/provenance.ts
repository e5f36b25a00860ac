/**
 * Provenance footer: ties a rendered artifact back to the sweep spec
 * digest (from the harness manifest next to the CSV) and the current
 * commit, so a figure can always be traced to its inputs.
 */

import { execSync } from "node:child_process";
import { existsSync, readFileSync } from "node:fs";
import { dirname } from "node:path";

import { SUPPORTED_SCHEMA_VERSION } from "./schema.js";

export function specDigest(csvPath: string): string {
  const manifestPath = csvPath + ".manifest.json";
  if (!existsSync(manifestPath)) return "unknown";
  try {
    const manifest = JSON.parse(readFileSync(manifestPath, "utf8"));
    return typeof manifest.spec_hash === "string"
      ? manifest.spec_hash
      : "unknown";
  } catch {
    return "unknown";
  }
}

export function commitHash(nearPath: string): string {
  try {
    return execSync("git rev-parse --short HEAD", {
      cwd: dirname(nearPath),
      stdio: ["ignore", "pipe", "ignore"],
    })
      .toString()
      .trim();
  } catch {
    return "unknown";
  }
}

export function buildFooter(figure: string, csvPath: string): string {
  return (
    `figure ${figure} | schema v${SUPPORTED_SCHEMA_VERSION}` +
    ` | spec ${specDigest(csvPath)} | commit ${commitHash(csvPath)}`
  );
}
