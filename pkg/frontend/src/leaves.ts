// Canonical field-path enumeration for JSON documents.
//
// Mirrors the fuzzer's published path grammar so manifests can be
// validated without importing the fuzzer itself: object keys joined
// with ".", array indices bracketed, the characters \ . [ ] escaped
// with a backslash, and an empty key spelled "\0".  Leaves are scalars
// and empty containers; the root value is never a leaf.

export type Json =
  | null
  | boolean
  | number
  | string
  | Json[]
  | { [key: string]: Json };

const ESCAPED = /[\\.\[\]]/g;

export function escapeKey(key: string): string {
  if (key === "") {
    return "\\0";
  }
  return key.replace(ESCAPED, (ch) => `\\${ch}`);
}

function isLeaf(value: Json): boolean {
  if (Array.isArray(value)) {
    return value.length === 0;
  }
  if (value !== null && typeof value === "object") {
    return Object.keys(value).length === 0;
  }
  return true;
}

export function enumerateLeafPaths(root: Json): string[] {
  const found: string[] = [];

  function walk(value: Json, prefix: string): void {
    if (Array.isArray(value)) {
      value.forEach((child, index) => {
        const path = `${prefix}[${index}]`;
        if (isLeaf(child)) {
          found.push(path);
        } else {
          walk(child, path);
        }
      });
    } else if (value !== null && typeof value === "object") {
      for (const [key, child] of Object.entries(value)) {
        const path = prefix === "" ? escapeKey(key) : `${prefix}.${escapeKey(key)}`;
        if (isLeaf(child)) {
          found.push(path);
        } else {
          walk(child, path);
        }
      }
    }
  }

  walk(root, "");
  return found;
}
