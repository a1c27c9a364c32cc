"""The worker process: one request in, one result out.

Protocol discipline: exactly one JSON line is written to stdout per
invocation, whatever happens; diagnostics go to stderr only. A request the
worker could parse yields exit status 0 even when the candidate fails;
malformed input or broken configuration yields a ResourceError line and a
nonzero exit.
"""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import sys
import time

from .config import CONFIG_ENV, REAL, SIMULATE, ConfigError, WorkerConfig, load_config
from .scan import find_undefined_self_attribute

FAILURE_CLASSES = frozenset(
    {
        "ApplyContextMismatch",
        "ApplyMalformedPatch",
        "ApplyHallucinatedRef",
        "SyntaxError",
        "ShapeRuntime",
        "UnusedHyperparameters",
        "Duplicate",
        "NameTypeError",
        "Timeout",
        "ResourceError",
        "BelowAccuracyThreshold",
        "BelowNoveltyThreshold",
    }
)


class RequestError(ValueError):
    """The input line is not a well-formed evaluation request."""


def _perturbation(source: str, seed: int) -> float:
    """Deterministic value in [-1, 1) derived from the source and seed."""
    key = ("%d\n" % seed).encode("utf-8") + source.encode("utf-8")
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return 2.0 * (int.from_bytes(digest, "big") / float(1 << 64)) - 1.0


def simulate_accuracy(
    source: str, dataset: str, eval_seed: int, config: WorkerConfig
) -> float:
    """Prior mean plus a spread-bounded perturbation, clamped to [0, 1]."""
    mean, spread = config.priors[dataset]
    value = mean + spread * _perturbation(source, eval_seed ^ config.seed)
    return min(1.0, max(0.0, value))


def _parse_request(line: str) -> dict:
    try:
        data = json.loads(line)
    except ValueError as exc:
        raise RequestError(f"not JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise RequestError("request must be a JSON object")
    for key, kind in (
        ("candidate_id", str),
        ("patched_source", str),
        ("dataset", str),
        ("eval_seed", int),
    ):
        if not isinstance(data.get(key), kind):
            raise RequestError(f"field {key!r} missing or wrong type")
    return data


def _emit(result: dict) -> None:
    sys.stdout.write(json.dumps(result) + "\n")
    sys.stdout.flush()


def _failed(failure: str, wall: float) -> dict:
    return {
        "status": "failed",
        "accuracy": None,
        "failure": failure,
        "wall_seconds": wall,
    }


def _delegate_real(config: WorkerConfig, request_line: str, started: float) -> int:
    """Hand the request to the configured training command.

    The trainer receives the request line on stdin and must answer with one
    EvalResult line, which is validated and re-emitted with this process's
    wall clock. This is where training-framework failure classes such as
    UnusedHyperparameters originate; the simulation path cannot observe
    them.
    """
    if not config.train_command:
        sys.stderr.write("archeval: real mode needs train_command in the config\n")
        _emit(_failed("ResourceError", time.monotonic() - started))
        return 0
    try:
        proc = subprocess.run(
            list(config.train_command),
            input=request_line,
            capture_output=True,
            text=True,
        )
    except OSError as exc:
        sys.stderr.write(f"archeval: cannot run trainer: {exc}\n")
        _emit(_failed("ResourceError", time.monotonic() - started))
        return 0
    if proc.stderr:
        sys.stderr.write(proc.stderr)
    line = next((l for l in (proc.stdout or "").splitlines() if l.strip()), None)
    wall = time.monotonic() - started
    if line is None:
        sys.stderr.write("archeval: trainer produced no output\n")
        _emit(_failed("ResourceError", wall))
        return 0
    try:
        result = json.loads(line)
        status = result.get("status")
        if status == "ok":
            accuracy = result.get("accuracy")
            if not isinstance(accuracy, (int, float)) or not 0 <= accuracy <= 1:
                raise ValueError(f"bad accuracy {accuracy!r}")
            _emit(
                {
                    "status": "ok",
                    "accuracy": float(accuracy),
                    "failure": None,
                    "wall_seconds": wall,
                }
            )
            return 0
        if status == "failed" and result.get("failure") in FAILURE_CLASSES:
            _emit(_failed(result["failure"], wall))
            return 0
        raise ValueError(f"bad trainer result: {line!r}")
    except (ValueError, AttributeError) as exc:
        sys.stderr.write(f"archeval: {exc}\n")
        _emit(_failed("ResourceError", wall))
        return 0


def main() -> int:
    started = time.monotonic()
    try:
        config = load_config(os.environ.get(CONFIG_ENV))
    except ConfigError as exc:
        sys.stderr.write(f"archeval: bad config: {exc}\n")
        _emit(_failed("ResourceError", 0.0))
        return 1

    line = sys.stdin.readline()
    try:
        request = _parse_request(line)
    except RequestError as exc:
        sys.stderr.write(f"archeval: bad request: {exc}\n")
        _emit(_failed("ResourceError", 0.0))
        return 1

    source = request["patched_source"]
    try:
        compile(source, "<candidate>", "exec")
    except SyntaxError as exc:
        sys.stderr.write(f"archeval: syntax error at line {exc.lineno}: {exc.msg}\n")
        _emit(_failed("SyntaxError", time.monotonic() - started))
        return 0

    undefined = find_undefined_self_attribute(source)
    if undefined is not None:
        sys.stderr.write(f"archeval: undefined attribute {undefined}\n")
        _emit(_failed("NameTypeError", time.monotonic() - started))
        return 0

    mode = request.get("mode") or config.mode
    if mode == REAL:
        return _delegate_real(config, line, started)
    if mode != SIMULATE:
        sys.stderr.write(f"archeval: unknown mode {mode!r}\n")
        _emit(_failed("ResourceError", time.monotonic() - started))
        return 0

    dataset = request["dataset"]
    if dataset not in config.priors:
        sys.stderr.write(f"archeval: no difficulty prior for dataset {dataset!r}\n")
        _emit(_failed("ResourceError", time.monotonic() - started))
        return 0

    accuracy = simulate_accuracy(source, dataset, request["eval_seed"], config)
    _emit(
        {
            "status": "ok",
            "accuracy": accuracy,
            "failure": None,
            "wall_seconds": time.monotonic() - started,
        }
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
