// Differential test runner for `{{function}}` (SC).
//
// Usage: node run_tests.js CANDIDATE.js [TEST_CASES.json]
//
// The candidate module must export `{{function}}` (CommonJS). Arguments are
// passed positionally in declaration order. The last stdout line is a JSON
// summary; exit status is 0 iff every case passed.
"use strict";
const fs = require("fs");
const path = require("path");

const FUNCTION = "{{function}}";
const PARAMS = {{params_json}};
const TOLERANCE = {{tolerance}};
const DEFAULT_CASES = path.join(__dirname, "..", "..", "test_cases", "test_cases.json");

function deepCompare(a, b, tolerance) {
  if (typeof a === "number" && typeof b === "number") {
    return Math.abs(a - b) <= tolerance;
  }
  if (Array.isArray(a) || Array.isArray(b)) {
    if (!Array.isArray(a) || !Array.isArray(b) || a.length !== b.length) return false;
    return a.every((x, i) => deepCompare(x, b[i], tolerance));
  }
  if (a !== null && b !== null && typeof a === "object" && typeof b === "object") {
    const ka = Object.keys(a).sort();
    const kb = Object.keys(b).sort();
    if (ka.length !== kb.length || ka.some((k, i) => k !== kb[i])) return false;
    return ka.every((k) => deepCompare(a[k], b[k], tolerance));
  }
  return a === b;
}

function main(argv) {
  if (argv.length < 1) {
    process.stderr.write("usage: node run_tests.js CANDIDATE.js [TEST_CASES.json]\n");
    return 2;
  }
  const cases = JSON.parse(fs.readFileSync(argv[1] || DEFAULT_CASES, "utf8"));
  let fn;
  try {
    const mod = require(path.resolve(argv[0]));
    fn = typeof mod === "function" ? mod : mod[FUNCTION];
    if (typeof fn !== "function") throw new Error("missing export " + FUNCTION);
  } catch (e) {
    console.log(JSON.stringify({ total: cases.length, passed: 0, errors: cases.length, error: String(e) }));
    return 1;
  }
  let passed = 0;
  let errors = 0;
  let firstFailure = null;
  cases.forEach((tc, i) => {
    const args = PARAMS.map((p) => structuredClone(tc.Inputs[p]));
    let result;
    try {
      result = fn(...args);
    } catch (e) {
      errors += 1;
      console.log(`Test case ${i + 1} raised: ${e}`);
      if (firstFailure === null) firstFailure = { case: i, inputs: tc.Inputs, error: String(e) };
      return;
    }
    if (deepCompare(result, tc.Expected, TOLERANCE)) {
      passed += 1;
      console.log(`Test case ${i + 1} passed.`);
    } else {
      console.log(`Test case ${i + 1} failed: expected ${JSON.stringify(tc.Expected)}, got ${JSON.stringify(result)}`);
      if (firstFailure === null) firstFailure = { case: i, inputs: tc.Inputs, expected: tc.Expected, actual: result };
    }
  });
  console.log(JSON.stringify({ total: cases.length, passed, errors, first_failure: firstFailure, error: null }));
  return passed === cases.length ? 0 : 1;
}

process.exitCode = main(process.argv.slice(2));
