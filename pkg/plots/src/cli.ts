#!/usr/bin/env node
/** cubic-plots curves|table --in <path> --out <path> [--keys a,b] [--smooth N] */

import { readFileSync, writeFileSync } from "node:fs";
import { extname } from "node:path";
import { pathToFileURL } from "node:url";
import { extractSeries, movingAverage, parseMetricsJsonl, phaseBoundaries } from "./metrics.js";
import { renderCurves } from "./svg.js";
import { tableRows, toCsv, toMarkdown } from "./table.js";

interface Args {
  command: string;
  opts: Map<string, string>;
}

function parseArgs(argv: string[]): Args {
  const [command, ...rest] = argv;
  const opts = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    if (!flag.startsWith("--") || i + 1 >= rest.length) {
      throw new Error(`malformed arguments near ${flag}`);
    }
    opts.set(flag.slice(2), rest[i + 1]);
  }
  return { command, opts };
}

function required(opts: Map<string, string>, name: string): string {
  const v = opts.get(name);
  if (v === undefined) throw new Error(`missing required --${name}`);
  return v;
}

export function runCurves(opts: Map<string, string>): void {
  const input = required(opts, "in");
  const output = required(opts, "out");
  const keys = (opts.get("keys") ?? "losses.total").split(",").map((k) => k.trim());
  const window = parseInt(opts.get("smooth") ?? "1", 10);
  const rows = parseMetricsJsonl(readFileSync(input, "utf8"));
  if (rows.length === 0) throw new Error(`no metrics rows in ${input}`);
  const series = extractSeries(rows, keys).map((s) => ({
    key: s.key,
    values: movingAverage(s.values, window),
  }));
  writeFileSync(output, renderCurves(series, phaseBoundaries(rows)));
}

function outputBase(path: string): string {
  const ext = extname(path);
  return ext === ".md" || ext === ".csv" ? path.slice(0, -ext.length) : path;
}

export function runTable(opts: Map<string, string>): void {
  const input = required(opts, "in");
  const base = outputBase(required(opts, "out"));
  const doc = JSON.parse(readFileSync(input, "utf8"));
  const rows = tableRows(doc);
  writeFileSync(`${base}.md`, toMarkdown(rows));
  writeFileSync(`${base}.csv`, toCsv(rows));
}

export function main(argv: string[]): number {
  try {
    const { command, opts } = parseArgs(argv);
    if (command === "curves") {
      runCurves(opts);
      return 0;
    }
    if (command === "table") {
      runTable(opts);
      return 0;
    }
    throw new Error(`unknown command ${command ?? "(none)"}; use curves or table`);
  } catch (err) {
    console.error(`cubic-plots: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
