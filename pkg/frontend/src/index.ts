export { EXPECTED_COLUMNS, RULES, parseResults, resultRowSchema } from "./schema.js";
export type { ResultRow, Rule } from "./schema.js";
export { renderFigure, selectSeries } from "./figure.js";
export type { FigureOptions, Series } from "./figure.js";
