"""Differential test runner for `{{function}}` ({{classification}}).

Usage: python3 run_tests.py CANDIDATE.py [TEST_CASES.json]

The candidate file must define `{{function}}`. One line is printed per case;
the last stdout line is a JSON summary. Exit status is 0 iff every case passed.
"""
import copy
import importlib.util
import json
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, HERE)
from helper import deep_compare, to_plain  # noqa: E402

DEFAULT_CASES = os.path.join(HERE, "..", "..", "test_cases", "test_cases.json")
FUNCTION = "{{function}}"
TOLERANCE = {{tolerance}}
{{ground_truth_block}}

def load_candidate(path):
    spec = importlib.util.spec_from_file_location("tested", path)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return getattr(module, FUNCTION)


def summary(total, passed, errors, first_failure, error=None):
    print(json.dumps({
        "total": total,
        "passed": passed,
        "errors": errors,
        "first_failure": first_failure,
        "error": error,
    }, default=repr))


def main(argv):
    if len(argv) < 2:
        sys.stderr.write(__doc__)
        return 2
    cases_path = argv[2] if len(argv) > 2 else DEFAULT_CASES
    try:
        with open(cases_path, "r", encoding="utf-8") as f:
            cases = json.load(f)
        if not isinstance(cases, list) or not all(isinstance(c, dict) and isinstance(c.get("Inputs"), dict) for c in cases):
            raise ValueError("expected a list of objects with an Inputs map")
    except (OSError, ValueError) as e:
        summary(0, 0, 0, None, "cannot read test cases: %s" % e)
        return 1
    try:
        func = load_candidate(argv[1])
    except BaseException as e:  # noqa: B036 -- any load failure is reported
        summary(len(cases), 0, len(cases), None, "candidate failed to load: %s: %s" % (type(e).__name__, e))
        return 1

    passed = errors = 0
    first_failure = None
    for i, case in enumerate(cases):
        inputs = case["Inputs"]
        try:
            expected = {{expected_expr}}
        except Exception as e:
            summary(len(cases), passed, errors, first_failure, "case %d is invalid: %s" % (i + 1, e))
            return 1
        try:
            actual = to_plain(func(**copy.deepcopy(inputs)))
        except Exception as e:
            errors += 1
            print("Test case %d raised %s: %s" % (i + 1, type(e).__name__, e))
            if first_failure is None:
                first_failure = {"case": i, "inputs": inputs, "error": "%s: %s" % (type(e).__name__, e)}
            continue
        if deep_compare(actual, expected, TOLERANCE):
            passed += 1
            print("Test case %d passed." % (i + 1))
        else:
            print("Test case %d failed:" % (i + 1))
            print("  Inputs: %r" % (inputs,))
            print("  Expected: %r" % (expected,))
            print("  Actual: %r" % (actual,))
            if first_failure is None:
                first_failure = {"case": i, "inputs": inputs, "expected": expected, "actual": actual}
    summary(len(cases), passed, errors, first_failure)
    return 0 if passed == len(cases) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
