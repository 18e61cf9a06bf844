/**
 * Canonical JSON: sorted object keys, no whitespace, raw (unescaped)
 * non-ASCII text. Byte-for-byte compatible with the control plane's
 * canonical serialization, which is the contract the golden fixtures pin.
 *
 * Only JSON-safe values are accepted. Non-integer numbers are rejected:
 * float formatting differs across languages in edge cases, and nothing in
 * the probe's traffic needs them.
 */

export type Json = null | boolean | number | string | Json[] | { [key: string]: Json };

export function canonicalJson(value: Json): string {
  if (value === null) {
    return "null";
  }
  if (typeof value === "boolean") {
    return value ? "true" : "false";
  }
  if (typeof value === "number") {
    if (!Number.isInteger(value)) {
      throw new TypeError(`non-integer number ${value} has no canonical form here`);
    }
    return String(value);
  }
  if (typeof value === "string") {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalJson).join(",") + "]";
  }
  if (typeof value === "object") {
    const keys = Object.keys(value).sort();
    const parts = keys.map((k) => JSON.stringify(k) + ":" + canonicalJson(value[k]));
    return "{" + parts.join(",") + "}";
  }
  throw new TypeError(`value of type ${typeof value} is not JSON`);
}

export function canonicalJsonBytes(value: Json): Buffer {
  return Buffer.from(canonicalJson(value), "utf-8");
}
