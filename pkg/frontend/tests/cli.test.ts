import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/cli.js";

const FIXTURES = join(__dirname, "fixtures");

let outDir: string;
let stderrSpy: ReturnType<typeof vi.spyOn>;
let stdoutSpy: ReturnType<typeof vi.spyOn>;

beforeEach(() => {
  outDir = mkdtempSync(join(tmpdir(), "plot-"));
  stderrSpy = vi
    .spyOn(process.stderr, "write")
    .mockImplementation(() => true);
  stdoutSpy = vi
    .spyOn(process.stdout, "write")
    .mockImplementation(() => true);
});

afterEach(() => {
  stderrSpy.mockRestore();
  stdoutSpy.mockRestore();
});

function stderrText(): string {
  return stderrSpy.mock.calls.map((c) => String(c[0])).join("");
}

describe("plot cli", () => {
  it("renders fig2 svg to the output path", () => {
    const out = join(outDir, "fig2.svg");
    const rc = main([
      "--csv",
      join(FIXTURES, "fig2.csv"),
      "--figure",
      "fig2",
      "--out",
      out,
    ]);
    expect(rc).toBe(0);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("<svg");
    expect(svg).toContain("figure fig2 | schema v1");
  });

  it("renders table1 as text", () => {
    const out = join(outDir, "table1.txt");
    const rc = main([
      "--csv",
      join(FIXTURES, "table1.csv"),
      "--figure",
      "table1",
      "--out",
      out,
    ]);
    expect(rc).toBe(0);
    const text = readFileSync(out, "utf8");
    expect(text).toContain("clustering accuracy vs snr");
    expect(text).toContain("cluster_sbl");
  });

  it("reads the spec digest from the manifest next to the csv", () => {
    const out = join(outDir, "fig2.svg");
    main([
      "--csv",
      join(FIXTURES, "fig2.csv"),
      "--figure",
      "fig2",
      "--out",
      out,
    ]);
    const manifest = JSON.parse(
      readFileSync(join(FIXTURES, "fig2.csv.manifest.json"), "utf8"),
    );
    expect(readFileSync(out, "utf8")).toContain(
      `spec ${manifest.spec_hash}`,
    );
  });

  it("fails with usage on missing flags", () => {
    expect(main(["--csv", "x.csv"])).toBe(2);
    expect(stderrText()).toContain("usage:");
  });

  it("fails with usage on an unknown figure", () => {
    expect(
      main(["--csv", "x.csv", "--figure", "fig9", "--out", "y"]),
    ).toBe(2);
    expect(stderrText()).toContain("fig9");
  });

  it("reports a version error for a newer schema", () => {
    const out = join(outDir, "bad.svg");
    const rc = main([
      "--csv",
      join(FIXTURES, "badversion.csv"),
      "--figure",
      "fig2",
      "--out",
      out,
    ]);
    expect(rc).toBe(1);
    expect(stderrText()).toContain("99");
    expect(existsSync(out)).toBe(false);
  });

  it("reports no rows for an empty csv and writes nothing", () => {
    const out = join(outDir, "empty.svg");
    const rc = main([
      "--csv",
      join(FIXTURES, "empty.csv"),
      "--figure",
      "fig2",
      "--out",
      out,
    ]);
    expect(rc).toBe(1);
    expect(stderrText()).toContain("no rows");
    expect(existsSync(out)).toBe(false);
  });

  it("reports a missing csv file", () => {
    const rc = main([
      "--csv",
      join(outDir, "absent.csv"),
      "--figure",
      "fig2",
      "--out",
      join(outDir, "o.svg"),
    ]);
    expect(rc).toBe(1);
    expect(stderrText()).toContain("error:");
  });

  it("re-running produces an identical artifact", () => {
    const out1 = join(outDir, "a.svg");
    const out2 = join(outDir, "b.svg");
    const argv = (o: string) => [
      "--csv",
      join(FIXTURES, "fig4.csv"),
      "--figure",
      "fig4",
      "--out",
      o,
    ];
    expect(main(argv(out1))).toBe(0);
    expect(main(argv(out2))).toBe(0);
    expect(readFileSync(out1, "utf8")).toBe(readFileSync(out2, "utf8"));
  });
});
