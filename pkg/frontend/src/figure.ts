import { RULES, type ResultRow, type Rule } from "./schema.js";

export interface FigureOptions {
  alpha?: number;
  width?: number;
  height?: number;
  title?: string;
}

export interface Series {
  scenario: string;
  flavor: string;
  sizes: [number, number];
  alpha: number;
  replications: number;
  /** rejection rate by rule, as [D, rate] pairs sorted by D */
  curves: Record<Rule, Array<[number, number]>>;
}

const RULE_COLORS: Record<Rule, string> = {
  z: "#d95f02",
  chi1: "#7570b3",
  kf: "#1b9e77",
};

const RULE_LABELS: Record<Rule, string> = {
  z: "normal rule",
  chi1: "chi-square(1) rule",
  kf: "estimated-df rule",
};

// two-sided 99% normal critical value, matching the producer's intervals
const CI_Z = 2.5758293035489004;

function distinct<T>(values: T[]): T[] {
  return [...new Set(values)];
}

/**
 * Collapse rows onto a single plottable series.
 *
 * A results file may mix scenarios, estimator flavors, and sample-size
 * pairs; a curve of rate against total dimension is only meaningful
 * within one combination, so any ambiguity left after filtering is an
 * error that lists the available choices.
 */
export function selectSeries(
  rows: ResultRow[],
  filter: { scenario?: string; flavor?: string; sizes?: [number, number] } = {},
  alpha = 0.05,
): Series {
  let pool = rows;
  if (filter.scenario) pool = pool.filter((r) => r.scenario === filter.scenario);
  if (filter.flavor) pool = pool.filter((r) => r.flavor === filter.flavor);
  if (filter.sizes) {
    const [n1, n2] = filter.sizes;
    pool = pool.filter((r) => r.n1 === n1 && r.n2 === n2);
  }
  if (pool.length === 0) {
    throw new Error("no rows left after filtering");
  }
  const scenarios = distinct(pool.map((r) => r.scenario));
  const flavors = distinct(pool.map((r) => r.flavor));
  const sizePairs = distinct(pool.map((r) => `${r.n1},${r.n2}`));
  if (scenarios.length > 1 || flavors.length > 1 || sizePairs.length > 1) {
    throw new Error(
      "rows are ambiguous; narrow the selection with " +
        `--scenario (${scenarios.join("|")}), --flavor (${flavors.join("|")}), ` +
        `--sizes (${sizePairs.join("|")})`,
    );
  }

  const curves = { z: [], chi1: [], kf: [] } as Series["curves"];
  for (const rule of RULES) {
    curves[rule] = pool
      .filter((r) => r.rule === rule)
      .sort((a, b) => a.D - b.D)
      .map((r) => [r.D, r.rejection_rate]);
  }
  const first = pool[0]!;
  return {
    scenario: first.scenario,
    flavor: first.flavor,
    sizes: [first.n1, first.n2],
    alpha,
    replications: Math.min(...pool.map((r) => r.replications)),
    curves,
  };
}

function ticks(lo: number, hi: number, count: number): number[] {
  const span = hi - lo;
  const raw = span / Math.max(1, count);
  const mag = 10 ** Math.floor(Math.log10(raw));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12; v += step) {
    out.push(Number(v.toFixed(12)));
  }
  return out;
}

function fmt(value: number): string {
  return Number(value.toFixed(4)).toString();
}

/** Assemble the SVG document for one series. */
export function renderFigure(series: Series, options: FigureOptions = {}): string {
  const width = options.width ?? 640;
  const height = options.height ?? 420;
  const alpha = options.alpha ?? series.alpha;
  const margin = { top: 44, right: 24, bottom: 48, left: 58 };
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;

  const allPoints = RULES.flatMap((rule) => series.curves[rule]);
  if (allPoints.length === 0) {
    throw new Error("series has no points to draw");
  }
  const xs = allPoints.map(([d]) => d);
  const ys = allPoints.map(([, rate]) => rate);
  const half = CI_Z * Math.sqrt((alpha * (1 - alpha)) / series.replications);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  const yHi = Math.max(...ys, alpha + half) * 1.15;
  const xSpan = xHi - xLo || 1;

  const px = (d: number) => margin.left + ((d - xLo) / xSpan) * innerW;
  const py = (rate: number) => margin.top + innerH - (rate / yHi) * innerH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  const title =
    options.title ??
    `scenario ${series.scenario}, flavor ${series.flavor}, ` +
      `n = (${series.sizes[0]}, ${series.sizes[1]})`;
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="14">${title}</text>`,
  );

  // 99% binomial band around the nominal level
  parts.push(
    `<rect class="ci-band" x="${margin.left}" y="${fmt(py(alpha + half))}" ` +
      `width="${innerW}" height="${fmt(py(alpha - half) - py(alpha + half))}" ` +
      `fill="#bbbbbb" fill-opacity="0.35"/>`,
  );
  parts.push(
    `<line class="alpha-line" x1="${margin.left}" x2="${margin.left + innerW}" ` +
      `y1="${fmt(py(alpha))}" y2="${fmt(py(alpha))}" ` +
      `stroke="#444444" stroke-dasharray="6 4"/>`,
  );

  // axes
  const axisY = margin.top + innerH;
  parts.push(
    `<line x1="${margin.left}" x2="${margin.left + innerW}" y1="${axisY}" y2="${axisY}" stroke="black"/>`,
    `<line x1="${margin.left}" x2="${margin.left}" y1="${margin.top}" y2="${axisY}" stroke="black"/>`,
  );
  for (const d of distinct(xs).sort((a, b) => a - b)) {
    parts.push(
      `<line x1="${fmt(px(d))}" x2="${fmt(px(d))}" y1="${axisY}" y2="${axisY + 5}" stroke="black"/>`,
      `<text x="${fmt(px(d))}" y="${axisY + 18}" text-anchor="middle">${d}</text>`,
    );
  }
  for (const tick of ticks(0, yHi, 6)) {
    parts.push(
      `<line x1="${margin.left - 5}" x2="${margin.left}" y1="${fmt(py(tick))}" y2="${fmt(py(tick))}" stroke="black"/>`,
      `<text x="${margin.left - 8}" y="${fmt(py(tick) + 4)}" text-anchor="end">${tick}</text>`,
    );
  }
  parts.push(
    `<text x="${margin.left + innerW / 2}" y="${height - 10}" text-anchor="middle">total dimension D</text>`,
    `<text x="16" y="${margin.top + innerH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${margin.top + innerH / 2})">rejection rate</text>`,
  );

  // one curve per decision rule, drawn in fixed order
  for (const rule of RULES) {
    const points = series.curves[rule];
    if (points.length === 0) continue;
    const path = points.map(([d, rate]) => `${fmt(px(d))},${fmt(py(rate))}`).join(" ");
    parts.push(
      `<polyline class="rule-${rule}" points="${path}" fill="none" ` +
        `stroke="${RULE_COLORS[rule]}" stroke-width="2"/>`,
    );
    for (const [d, rate] of points) {
      parts.push(
        `<circle cx="${fmt(px(d))}" cy="${fmt(py(rate))}" r="3" fill="${RULE_COLORS[rule]}"/>`,
      );
    }
  }

  // legend
  let ly = margin.top + 8;
  for (const rule of RULES) {
    if (series.curves[rule].length === 0) continue;
    const lx = margin.left + innerW - 150;
    parts.push(
      `<line x1="${lx}" x2="${lx + 20}" y1="${ly}" y2="${ly}" stroke="${RULE_COLORS[rule]}" stroke-width="2"/>`,
      `<text x="${lx + 26}" y="${ly + 4}">${RULE_LABELS[rule]}</text>`,
    );
    ly += 18;
  }

  parts.push("</svg>");
  return parts.join("\n");
}
