/** Success-rate tables from eval.json or ablation.json, as markdown and CSV. */

export interface EvalReport {
  task: string;
  episodes: number;
  seeds: number[];
  per_seed: number[];
  mean: number;
  std: number;
}

export interface AblationTable {
  axis: string;
  rows: { variant: string; eval: EvalReport }[];
}

export interface TableRow {
  name: string;
  task: string;
  episodes: number;
  per_seed: number[];
  mean: number;
  std: number;
}

export function mean(xs: number[]): number {
  return xs.reduce((a, b) => a + b, 0) / xs.length;
}

/** Population standard deviation (divide by n). */
export function std(xs: number[]): number {
  const m = mean(xs);
  return Math.sqrt(xs.reduce((a, b) => a + (b - m) * (b - m), 0) / xs.length);
}

function rowFromReport(name: string, rep: EvalReport): TableRow {
  return {
    name,
    task: rep.task,
    episodes: rep.episodes,
    per_seed: rep.per_seed,
    mean: mean(rep.per_seed),
    std: std(rep.per_seed),
  };
}

export function tableRows(doc: unknown): TableRow[] {
  if (typeof doc !== "object" || doc === null) {
    throw new Error("input is not a JSON object");
  }
  if ("rows" in doc) {
    const table = doc as AblationTable;
    return table.rows.map((r) => rowFromReport(r.variant, r.eval));
  }
  if ("per_seed" in doc) {
    const rep = doc as EvalReport;
    return [rowFromReport(rep.task, rep)];
  }
  throw new Error("input is neither an eval report nor an ablation table");
}

const HEADERS = ["name", "task", "episodes", "mean", "std"];

export function toMarkdown(rows: TableRow[]): string {
  const seedCols = rows.length ? rows[0].per_seed.map((_, i) => `seed_${i}`) : [];
  const head = [...HEADERS, ...seedCols];
  const lines = [
    `| ${head.join(" | ")} |`,
    `| ${head.map(() => "---").join(" | ")} |`,
  ];
  for (const r of rows) {
    const cells = [r.name, r.task, String(r.episodes), String(r.mean), String(r.std),
                   ...r.per_seed.map(String)];
    lines.push(`| ${cells.join(" | ")} |`);
  }
  return lines.join("\n") + "\n";
}

export function toCsv(rows: TableRow[]): string {
  const seedCols = rows.length ? rows[0].per_seed.map((_, i) => `seed_${i}`) : [];
  const lines = [[...HEADERS, ...seedCols].join(",")];
  for (const r of rows) {
    lines.push([r.name, r.task, String(r.episodes), String(r.mean), String(r.std),
                ...r.per_seed.map(String)].join(","));
  }
  return lines.join("\n") + "\n";
}
