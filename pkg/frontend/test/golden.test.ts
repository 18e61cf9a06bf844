import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { describe, expect, test } from "vitest";

import { checkFixtures } from "../src/golden";

const FIXTURES = path.resolve(__dirname, "..", "..", "fixtures");

describe("golden fixtures", () => {
  test("all fixtures pass byte-identically", () => {
    const results = checkFixtures(FIXTURES);
    expect(results.length).toBeGreaterThan(0);
    for (const result of results) {
      expect(result.ok, `${result.name}: ${result.detail}`).toBe(true);
    }
  });

  test("a corrupted copy fails naming the offset", () => {
    const dir = fs.mkdtempSync(path.join(os.tmpdir(), "fixtures-"));
    try {
      for (const file of fs.readdirSync(FIXTURES)) {
        fs.copyFileSync(path.join(FIXTURES, file), path.join(dir, file));
      }
      const manifest = JSON.parse(fs.readFileSync(path.join(dir, "manifest.json"), "utf-8"));
      const victim = path.join(dir, manifest[0].file);
      const blob = fs.readFileSync(victim);
      blob[blob.length - 1] ^= 0xff; // flip a payload byte, framing stays valid
      fs.writeFileSync(victim, blob);
      const results = checkFixtures(dir);
      const failed = results.find((r) => !r.ok);
      expect(failed).toBeDefined();
      expect(failed!.detail).toMatch(/differs/);
    } finally {
      fs.rmSync(dir, { recursive: true, force: true });
    }
  });
});
