import { csvParse } from "d3-dsv";
import { z } from "zod";

/** Column order of a simulation results CSV; the header must match exactly. */
export const EXPECTED_COLUMNS = [
  "scenario",
  "D",
  "d1",
  "d2",
  "n1",
  "n2",
  "flavor",
  "rule",
  "rejection_rate",
  "replications",
  "binomial_ci_low",
  "binomial_ci_high",
  "seed",
  "wall_time",
] as const;

export const RULES = ["z", "chi1", "kf"] as const;
export type Rule = (typeof RULES)[number];

const integer = z
  .string()
  .regex(/^-?\d+$/, "expected an integer")
  .transform(Number);

const proportion = z
  .string()
  .regex(/^[^\s,]+$/, "expected a number")
  .transform(Number)
  .pipe(z.number().min(0).max(1));

const optionalSeconds = z
  .string()
  .transform((v) => (v === "" ? null : Number(v)))
  .pipe(z.union([z.null(), z.number().nonnegative()]));

export const resultRowSchema = z.object({
  scenario: z.string().min(1),
  D: integer.pipe(z.number().positive()),
  d1: integer.pipe(z.number().nonnegative()),
  d2: integer.pipe(z.number().nonnegative()),
  n1: integer.pipe(z.number().nonnegative()),
  n2: integer.pipe(z.number().nonnegative()),
  flavor: z.string().min(1),
  rule: z.enum(RULES),
  rejection_rate: proportion,
  replications: integer.pipe(z.number().positive()),
  binomial_ci_low: proportion,
  binomial_ci_high: proportion,
  seed: integer,
  wall_time: optionalSeconds,
});

export type ResultRow = z.infer<typeof resultRowSchema>;

/**
 * Parse a results CSV into typed rows.
 *
 * Rejects files whose header deviates from the documented column order,
 * so schema drift in a producer surfaces as a loud error rather than a
 * silently empty figure.
 */
export function parseResults(text: string): ResultRow[] {
  const table = csvParse(text);
  const expected = EXPECTED_COLUMNS.join(",");
  const got = table.columns.join(",");
  if (got !== expected) {
    throw new Error(`unexpected CSV header:\n  got      ${got}\n  expected ${expected}`);
  }
  return table.map((raw, index) => {
    const parsed = resultRowSchema.safeParse(raw);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      const where = issue ? `${issue.path.join(".")}: ${issue.message}` : "invalid row";
      throw new Error(`row ${index + 2}: ${where}`);
    }
    return parsed.data;
  });
}
