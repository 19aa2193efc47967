import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { EXPECTED_COLUMNS, parseResults } from "../src/schema.js";

const HEADER = EXPECTED_COLUMNS.join(",");
const FIXTURE = new URL("./fixtures/rates.csv", import.meta.url);

function row(overrides: Partial<Record<string, string>> = {}): string {
  const base: Record<string, string> = {
    scenario: "B",
    D: "100",
    d1: "5",
    d2: "95",
    n1: "20",
    n2: "30",
    flavor: "Bstar",
    rule: "kf",
    rejection_rate: "0.0512",
    replications: "5000",
    binomial_ci_low: "0.0432",
    binomial_ci_high: "0.0592",
    seed: "1234",
    wall_time: "",
  };
  return EXPECTED_COLUMNS.map((c) => ({ ...base, ...overrides })[c]).join(",");
}

describe("parseResults", () => {
  it("reads the generated fixture end to end", () => {
    const rows = parseResults(readFileSync(FIXTURE, "utf8"));
    expect(rows.length).toBeGreaterThan(0);
    expect(rows.length % 3).toBe(0);
    const rules = new Set(rows.map((r) => r.rule));
    expect(rules).toEqual(new Set(["z", "chi1", "kf"]));
    for (const r of rows) {
      expect(r.rejection_rate).toBeGreaterThanOrEqual(r.binomial_ci_low);
      expect(r.rejection_rate).toBeLessThanOrEqual(r.binomial_ci_high);
      expect(r.D).toBe(r.d1 + r.d2);
    }
  });

  it("turns the blank wall_time field into null", () => {
    const rows = parseResults(`${HEADER}\n${row()}\n`);
    expect(rows[0]!.wall_time).toBeNull();
  });

  it("keeps a numeric wall_time when present", () => {
    const rows = parseResults(`${HEADER}\n${row({ wall_time: "1.25" })}\n`);
    expect(rows[0]!.wall_time).toBeCloseTo(1.25);
  });

  it("rejects a reordered header", () => {
    const shuffled = [...EXPECTED_COLUMNS].reverse().join(",");
    expect(() => parseResults(`${shuffled}\n`)).toThrow(/unexpected CSV header/);
  });

  it("rejects a rate outside the unit interval with its row number", () => {
    const text = `${HEADER}\n${row()}\n${row({ rejection_rate: "1.5" })}\n`;
    expect(() => parseResults(text)).toThrow(/row 3: rejection_rate/);
  });

  it("rejects an unknown decision rule", () => {
    expect(() => parseResults(`${HEADER}\n${row({ rule: "bonferroni" })}\n`)).toThrow(
      /row 2: rule/,
    );
  });

  it("rejects fractional dimensions", () => {
    expect(() => parseResults(`${HEADER}\n${row({ D: "10.5" })}\n`)).toThrow(/row 2: D/);
  });
});
