/** Parsing of metrics.jsonl rows and series extraction. */

export interface MetricsRow {
  phase: string;
  epoch: number;
  [key: string]: unknown;
}

export interface Series {
  key: string;
  values: number[];
}

export function parseMetricsJsonl(text: string): MetricsRow[] {
  const rows: MetricsRow[] = [];
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) continue;
    rows.push(JSON.parse(trimmed) as MetricsRow);
  }
  return rows;
}

/** Resolve a dotted path ("losses.total") inside one row. */
function lookup(row: MetricsRow, key: string): number | undefined {
  let cur: unknown = row;
  for (const part of key.split(".")) {
    if (typeof cur !== "object" || cur === null || !(part in cur)) return undefined;
    cur = (cur as Record<string, unknown>)[part];
  }
  return typeof cur === "number" ? cur : undefined;
}

export function extractSeries(rows: MetricsRow[], keys: string[]): Series[] {
  return keys.map((key) => {
    const values = rows.map((row) => {
      const v = lookup(row, key);
      if (v === undefined) {
        throw new Error(`metric key not found: ${key}`);
      }
      return v;
    });
    return { key, values };
  });
}

/** Row indices where the phase tag changes (chart boundary markers). */
export function phaseBoundaries(rows: MetricsRow[]): number[] {
  const marks: number[] = [];
  for (let i = 1; i < rows.length; i++) {
    if (rows[i].phase !== rows[i - 1].phase) marks.push(i);
  }
  return marks;
}

/**
 * Centered moving average with truncated edge windows. A window of w covers
 * indices [i - floor((w-1)/2), i + floor(w/2)] clipped to the series.
 */
export function movingAverage(values: number[], window: number): number[] {
  if (window < 1 || !Number.isInteger(window)) {
    throw new Error(`smoothing window must be an integer >= 1, got ${window}`);
  }
  const back = Math.floor((window - 1) / 2);
  const fwd = Math.floor(window / 2);
  return values.map((_, i) => {
    const lo = Math.max(0, i - back);
    const hi = Math.min(values.length - 1, i + fwd);
    let sum = 0;
    for (let j = lo; j <= hi; j++) sum += values[j];
    return sum / (hi - lo + 1);
  });
}
