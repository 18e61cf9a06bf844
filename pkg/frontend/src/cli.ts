/**
 * Probe command line:
 *   probe check --fixtures DIR
 *   probe serve --frontend tcp://H:P --backend tcp://H:P [--uuid U] [--hello-interval MS]
 */
import { checkFixtures } from "./golden";
import { Probe } from "./probe";

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith("--") || value === undefined) {
      throw new Error(`malformed arguments near '${key}'`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function required(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (value === undefined) {
    throw new Error(`missing required flag --${name}`);
  }
  return value;
}

function runCheck(flags: Map<string, string>): number {
  const results = checkFixtures(required(flags, "fixtures"));
  let failures = 0;
  for (const result of results) {
    console.log(`${result.ok ? "PASS" : "FAIL"} ${result.name}: ${result.detail}`);
    if (!result.ok) {
      failures += 1;
    }
  }
  console.log(`${results.length - failures}/${results.length} fixtures passed`);
  return failures === 0 ? 0 : 1;
}

async function runServe(flags: Map<string, string>): Promise<number> {
  const probe = new Probe({
    frontend: required(flags, "frontend"),
    backend: required(flags, "backend"),
    uuid: flags.get("uuid"),
    helloIntervalMs: flags.has("hello-interval") ? parseInt(flags.get("hello-interval")!, 10) : undefined,
  });
  await probe.start();
  console.log(`probe ${probe.uuid} serving (device ${probe.deviceUuid})`);
  return new Promise((resolve) => {
    const shutdown = () => {
      probe.stop();
      resolve(0);
    };
    process.on("SIGINT", shutdown);
    process.on("SIGTERM", shutdown);
  });
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === "check") {
      return runCheck(parseFlags(rest));
    }
    if (command === "serve") {
      return await runServe(parseFlags(rest));
    }
    console.error("usage: probe check --fixtures DIR | probe serve --frontend URI --backend URI");
    return 2;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 2;
  }
}

main().then((code) => {
  process.exitCode = code;
});
