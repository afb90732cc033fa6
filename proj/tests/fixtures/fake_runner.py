#!/usr/bin/env python3
"""JSON-lines runner double. Mirrors the stub sandbox markers and adds
process-level misbehaviour:
  # runner: die        exit without answering
  # runner: hang       never answer
  # runner: wrong-id   answer with a different request id
"""
import json
import sys
import time


def test_names(src):
    out = []
    for line in src.splitlines():
        if line.startswith("def test_"):
            name = line[4:]
            for stop in "( :":
                name = name.split(stop)[0]
            out.append(name)
    return out


def executable(src):
    return sum(1 for l in src.splitlines() if l.strip() and not l.strip().startswith("#"))


def handle(req):
    sol = req["solution_source"]
    rep = {"request_id": req["request_id"], "status": "ok", "per_test": [],
           "executed_lines": 0, "executable_lines": executable(sol), "wall_ms": 1}
    if "# runner: die" in sol:
        sys.exit(1)
    if "# runner: hang" in sol:
        time.sleep(3600)
    if "# runner: wrong-id" in sol:
        rep["request_id"] = "other"
    if "# stub: compile-error" in sol:
        rep["status"] = "compile-error"
        rep["message"] = "SyntaxError: invalid syntax"
        return rep
    if "# stub: timeout" in sol:
        rep["status"] = "timeout"
        return rep
    passed = False
    for i, name in enumerate(test_names(req["tests_source"])):
        result, message = "pass", ""
        if i == 0 and "# stub: error" in sol:
            result, message = "error", "TypeError: unsupported operand type(s)"
        elif i == 0 and "# stub: fail" in sol:
            result, message = "fail", "AssertionError"
        passed = passed or result == "pass"
        rep["per_test"].append({"test_name": name, "result": result, "message": message})
    if passed and req.get("collect_coverage", True):
        rep["executed_lines"] = rep["executable_lines"]
    return rep


for line in sys.stdin:
    if not line.strip():
        continue
    try:
        req = json.loads(line)
        rep = handle(req)
    except (ValueError, KeyError) as exc:
        rep = {"request_id": "", "status": "crashed", "message": "malformed request: %s" % exc}
    sys.stdout.write(json.dumps(rep) + "\n")
    sys.stdout.flush()
