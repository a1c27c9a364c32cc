"""Trivial built-in evaluator worker.

Reads one evaluation request as a JSON line on stdin and answers with one
JSON line on stdout.  It never trains anything: the reported accuracy is a
deterministic hash of the patched source and the evaluation seed, mapped
uniformly into [0, 1].  That is enough to exercise the full pipeline
(admission gates see a realistic spread of scores) while spawning in
milliseconds.

Run as ``python -S echo_worker.py``; only stdlib modules are imported so
site initialization can be skipped.
"""

import hashlib
import json
import sys


def score(patched_source, eval_seed):
    key = ("%d\n" % eval_seed).encode("utf-8") + patched_source.encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "big") / float(1 << 64)


def main():
    line = sys.stdin.readline()
    try:
        request = json.loads(line)
        patched_source = request["patched_source"]
        eval_seed = int(request["eval_seed"])
    except (ValueError, KeyError, TypeError):
        result = {
            "status": "failed",
            "accuracy": None,
            "failure": "ResourceError",
            "wall_seconds": 0.0,
        }
        sys.stdout.write(json.dumps(result) + "\n")
        return 1
    try:
        compile(patched_source, "<candidate>", "exec")
    except SyntaxError:
        result = {
            "status": "failed",
            "accuracy": None,
            "failure": "SyntaxError",
            "wall_seconds": 0.0,
        }
        sys.stdout.write(json.dumps(result) + "\n")
        return 0
    result = {
        "status": "ok",
        "accuracy": score(patched_source, eval_seed),
        "failure": None,
        "wall_seconds": 0.0,
    }
    sys.stdout.write(json.dumps(result) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
