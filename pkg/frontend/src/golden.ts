/**
 * Golden fixture conformance: decode each pinned wire capture, check every
 * field against the manifest, re-encode, and require byte identity.
 */
import * as fs from "node:fs";
import * as path from "node:path";

import { Json, canonicalJsonBytes } from "./canon";
import { frameEnvelope, unframeEnvelope } from "./envelope";

export interface FixtureResult {
  name: string;
  ok: boolean;
  detail: string;
}

interface ManifestEntry {
  name: string;
  file: string;
  topic: string;
  header: Record<string, Json>;
  payload_json: Json;
  payload_utf8: string | null;
  size: number;
}

function firstDifference(a: Buffer, b: Buffer): number {
  const n = Math.min(a.length, b.length);
  for (let i = 0; i < n; i++) {
    if (a[i] !== b[i]) {
      return i;
    }
  }
  return a.length === b.length ? -1 : n;
}

export function checkFixture(dir: string, entry: ManifestEntry): FixtureResult {
  const blob = fs.readFileSync(path.join(dir, entry.file));
  let env;
  try {
    env = unframeEnvelope(blob);
  } catch (err) {
    return { name: entry.name, ok: false, detail: `undecodable: ${err}` };
  }
  if (env.topic !== entry.topic) {
    return { name: entry.name, ok: false, detail: `topic ${env.topic} != ${entry.topic}` };
  }
  for (const [field, expected] of Object.entries(entry.header)) {
    const actual = (env.header as unknown as Record<string, Json>)[field];
    if (actual !== expected) {
      return { name: entry.name, ok: false, detail: `header.${field} ${actual} != ${expected}` };
    }
  }
  if (entry.payload_json !== null) {
    const expected = canonicalJsonBytes(entry.payload_json);
    if (!env.payload.equals(expected)) {
      return { name: entry.name, ok: false, detail: "payload JSON differs" };
    }
  } else if (entry.payload_utf8 !== null) {
    if (env.payload.toString("utf-8") !== entry.payload_utf8) {
      return { name: entry.name, ok: false, detail: "payload text differs" };
    }
  }
  const reencoded = frameEnvelope(env);
  const offset = firstDifference(reencoded, blob);
  if (offset !== -1) {
    return { name: entry.name, ok: false, detail: `re-encode differs at byte offset ${offset}` };
  }
  if (blob.length !== entry.size) {
    return { name: entry.name, ok: false, detail: `size ${blob.length} != ${entry.size}` };
  }
  return { name: entry.name, ok: true, detail: `${blob.length} bytes byte-identical` };
}

export function checkFixtures(dir: string): FixtureResult[] {
  const manifest: ManifestEntry[] = JSON.parse(
    fs.readFileSync(path.join(dir, "manifest.json"), "utf-8")
  );
  return manifest.map((entry) => checkFixture(dir, entry));
}
