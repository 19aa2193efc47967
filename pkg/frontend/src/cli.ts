#!/usr/bin/env node
import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";
import { pathToFileURL } from "node:url";

import { renderFigure, selectSeries } from "./figure.js";
import { parseResults } from "./schema.js";

const USAGE = `usage: hdsplit-plots --input rates.csv --output figure.svg
               [--alpha 0.05] [--scenario B] [--flavor Bstar]
               [--sizes 20,30] [--title "..."]

Renders a simulation results CSV into an SVG figure with one rejection-
rate curve per decision rule, the nominal level, and its 99% binomial
band. Filters are only needed when the CSV mixes several scenarios,
flavors, or sample-size pairs.`;

export function run(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      options: {
        input: { type: "string", short: "i" },
        output: { type: "string", short: "o" },
        alpha: { type: "string", default: "0.05" },
        scenario: { type: "string" },
        flavor: { type: "string" },
        sizes: { type: "string" },
        title: { type: "string" },
        help: { type: "boolean", short: "h", default: false },
      },
    });
  } catch (error) {
    console.error((error as Error).message);
    console.error(USAGE);
    return 2;
  }
  const values = parsed.values;
  if (values.help) {
    console.log(USAGE);
    return 0;
  }
  if (!values.input || !values.output) {
    console.error("--input and --output are both required");
    console.error(USAGE);
    return 2;
  }
  const alpha = Number(values.alpha);
  if (!(alpha > 0 && alpha < 1)) {
    console.error(`alpha must lie strictly between 0 and 1, got ${values.alpha}`);
    return 2;
  }
  let sizes: [number, number] | undefined;
  if (values.sizes) {
    const parts = values.sizes.split(",").map((v) => Number(v.trim()));
    if (parts.length !== 2 || parts.some((v) => !Number.isInteger(v) || v < 0)) {
      console.error(`--sizes expects two integers like "20,30", got ${values.sizes}`);
      return 2;
    }
    sizes = [parts[0]!, parts[1]!];
  }

  try {
    const rows = parseResults(readFileSync(values.input, "utf8"));
    const series = selectSeries(
      rows,
      { scenario: values.scenario, flavor: values.flavor, sizes },
      alpha,
    );
    const svg = renderFigure(series, { alpha, title: values.title });
    writeFileSync(values.output, svg + "\n");
  } catch (error) {
    console.error((error as Error).message);
    return 1;
  }
  console.log(`wrote ${values.output}`);
  return 0;
}

const invokedPath = process.argv[1] ? pathToFileURL(process.argv[1]).href : "";
if (import.meta.url === invokedPath) {
  process.exit(run(process.argv.slice(2)));
}
