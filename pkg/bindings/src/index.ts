/**
 * Pass-through bindings for the vtsel selector.
 *
 * No math is re-implemented here: inputs are serialized to the binary tensor
 * format, the vtsel CLI runs the selection, and its result document is
 * parsed back. Outputs are therefore identical to any other consumer of the
 * CLI, byte for byte.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { Tensor, requireFloat32, writeTensor } from "./tensorfile.js";

export { MAGIC, MAX_ELEMENTS, Tensor, TensorFormatError, readTensor, requireFloat32, writeTensor } from "./tensorfile.js";

export interface Matrix {
  rows: number;
  cols: number;
  /** Row-major float32 payload of length rows * cols. */
  data: Float32Array;
}

export interface SelectOptions {
  keep: number;
  split?: number;
  eta?: number;
  tauAgg?: number;
  tauSharp?: number;
  gamma?: number;
  topP?: number;
  attenuation?: number;
  stepK?: number;
  mode?: "budget" | "threshold" | "geometric";
  tauThreshold?: number;
  alpha?: number;
  eps?: number;
  seed?: number;
  /** Override the engine command, e.g. ["python3", "-m", "vtsel.cli"]. */
  command?: string[];
}

export interface SelectionStats {
  nTokens: number;
  kept: number;
  simEvals: number;
  iterations: number;
  pruneRatio: number;
  noQuery: boolean;
}

export interface BoundSelection {
  keptIndices: number[];
  importantIndices: number[];
  diverseIndices: number[];
  fusedScores: number[];
  noQuery: boolean;
  stats: SelectionStats;
  /** Exact bytes of the engine's result document (canonical serialization). */
  rawDocument: string;
}

export class SelectionError extends Error {
  readonly exitCode: number;

  constructor(message: string, exitCode: number) {
    super(message);
    this.name = "SelectionError";
    this.exitCode = exitCode;
  }
}

function defaultCommand(): string[] {
  const env = process.env.VTSEL_CLI;
  if (env && env.trim().length > 0) return env.trim().split(/\s+/);
  return ["vtsel"];
}

function asTensor(m: Matrix, what: string): Tensor {
  const data = requireFloat32(m.data, what);
  if (!Number.isInteger(m.rows) || !Number.isInteger(m.cols) || m.rows < 0 || m.cols < 1) {
    throw new RangeError(`${what}: bad shape ${m.rows}x${m.cols}`);
  }
  if (data.length !== m.rows * m.cols) {
    throw new RangeError(
      `${what}: payload length ${data.length} != ${m.rows}x${m.cols}`
    );
  }
  return { dims: [m.rows, m.cols], data };
}

const FLAGS: [keyof SelectOptions, string][] = [
  ["split", "--split"],
  ["eta", "--eta"],
  ["tauAgg", "--tau-agg"],
  ["tauSharp", "--tau-sharp"],
  ["gamma", "--gamma"],
  ["topP", "--top-p"],
  ["attenuation", "--attenuation"],
  ["stepK", "--step-k"],
  ["mode", "--mode"],
  ["tauThreshold", "--tau-threshold"],
  ["alpha", "--alpha"],
  ["eps", "--eps"],
  ["seed", "--seed"],
];

/**
 * Run token selection on in-memory arrays.
 *
 * `text` may be null for the query-free path. All arrays must be
 * Float32Array; Float64Array input raises a TypeError rather than casting.
 */
export function boundSelect(
  visual: Matrix,
  attention: Float32Array,
  text: Matrix | null,
  projector: Matrix,
  options: SelectOptions
): BoundSelection {
  const visualT = asTensor(visual, "visual");
  const projT = asTensor(projector, "projector");
  const textT = text === null ? null : asTensor(text, "text");
  const attn = requireFloat32(attention, "attention");
  if (attn.length !== visual.rows) {
    throw new RangeError(
      `attention length ${attn.length} != visual rows ${visual.rows}`
    );
  }
  if (!Number.isInteger(options.keep) || options.keep < 0) {
    throw new RangeError(`keep must be a non-negative integer, got ${options.keep}`);
  }

  const workDir = mkdtempSync(join(tmpdir(), "vtsel-"));
  try {
    const paths = {
      visual: join(workDir, "visual.fvlm"),
      attention: join(workDir, "attention.fvlm"),
      text: join(workDir, "text.fvlm"),
      projector: join(workDir, "projector.fvlm"),
      out: join(workDir, "result.json"),
    };
    writeTensor(paths.visual, visualT);
    writeTensor(paths.attention, { dims: [attn.length], data: attn });
    writeTensor(paths.projector, projT);
    if (textT !== null) writeTensor(paths.text, textT);

    const command = options.command ?? defaultCommand();
    const args = [
      ...command.slice(1),
      "select",
      "--visual", paths.visual,
      "--attention", paths.attention,
      "--projector", paths.projector,
      "--keep", String(options.keep),
      "--out", paths.out,
    ];
    if (textT !== null) args.push("--text", paths.text);
    for (const [key, flag] of FLAGS) {
      const value = options[key];
      if (value !== undefined) args.push(flag, String(value));
    }

    const proc = spawnSync(command[0], args, { encoding: "utf8" });
    if (proc.error) {
      throw new SelectionError(`failed to launch ${command[0]}: ${proc.error.message}`, -1);
    }
    if (proc.status !== 0) {
      const detail = (proc.stderr || proc.stdout || "").trim();
      throw new SelectionError(
        `selection failed (exit ${proc.status}): ${detail}`,
        proc.status ?? -1
      );
    }

    const rawDocument = readFileSync(paths.out, "ascii");
    const doc = JSON.parse(rawDocument);
    return {
      keptIndices: doc.kept_indices,
      importantIndices: doc.important_indices,
      diverseIndices: doc.diverse_indices,
      fusedScores: doc.fused_scores,
      noQuery: doc.stats.no_query,
      stats: {
        nTokens: doc.stats.n_tokens,
        kept: doc.stats.kept,
        simEvals: doc.stats.sim_evals,
        iterations: doc.stats.iterations,
        pruneRatio: doc.stats.prune_ratio,
        noQuery: doc.stats.no_query,
      },
      rawDocument,
    };
  } finally {
    rmSync(workDir, { recursive: true, force: true });
  }
}
