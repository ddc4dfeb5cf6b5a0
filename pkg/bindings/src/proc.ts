import { spawnSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Raised when the CLI exits nonzero; carries the core's stderr verbatim. */
export class CliError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(exitCode: number, stderr: string) {
    super(stderr.trim() || `phonekit exited with code ${exitCode}`);
    this.name = "CliError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

/**
 * The command used to reach the core.  Defaults to the installed `phonekit`
 * console script; override with PHONEKIT_CLI (whitespace-split, e.g.
 * "python3 -m phonekit.cli").
 */
export function cliCommand(): string[] {
  const env = process.env.PHONEKIT_CLI;
  if (env && env.trim()) {
    return env.trim().split(/\s+/);
  }
  return ["phonekit"];
}

export function runCli(args: string[]): string {
  const [cmd, ...base] = cliCommand();
  const res = spawnSync(cmd, [...base, ...args], {
    encoding: "utf8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (res.error) {
    throw res.error;
  }
  if (res.status !== 0) {
    throw new CliError(res.status ?? -1, res.stderr ?? "");
  }
  return res.stdout;
}

/** Run `fn` with a scratch directory that is always cleaned up. */
export function withTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "phonekit-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}
