"""External-process contracts: generator clients and the evaluator runner.

Two generator clients exist: a replay client that serves pre-recorded
completions keyed by (cycle, index), and an HTTP client that POSTs a prompt
with sampling parameters to a completion endpoint.

Evaluation happens in one freshly spawned worker process per candidate.  A
poisoned worker (crash, hang, garbage on stdout) must never take the
gateway down: every such failure is converted into a failed EvalResult and
the remaining candidates still run.  Only a spawn-level failure, meaning
the environment itself is broken, aborts the run.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path

from .admission import FailureClass
from .errors import PatchLoopError
from .records import EvalRequest, EvalResult

DEFAULT_TEMPERATURE = 0.35
DEFAULT_TOP_K = 50
DEFAULT_TOP_P = 0.9
DEFAULT_MAX_NEW_TOKENS = 1024
DEFAULT_TIMEOUT_SECS = 600.0
DEFAULT_GRACE_SECS = 5.0

_VALID_FAILURES = {f.value for f in FailureClass}


class GatewayError(PatchLoopError):
    """Base class for gateway failures."""


class ReplayExhausted(GatewayError):
    """The replay file has no recorded output for the requested key."""


class EndpointError(GatewayError):
    """The HTTP generator endpoint failed or timed out."""


class SpawnFailure(GatewayError):
    """The evaluator command cannot be started at all."""


@dataclass(frozen=True, slots=True)
class SamplingParams:
    temperature: float = DEFAULT_TEMPERATURE
    top_k: int = DEFAULT_TOP_K
    top_p: float = DEFAULT_TOP_P
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS

    def __post_init__(self):
        if not 0 < self.temperature <= 2:
            raise ValueError("temperature must be in (0, 2]")
        if self.top_k <= 0 or self.max_new_tokens <= 0:
            raise ValueError("top_k and max_new_tokens must be positive")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


@dataclass(frozen=True, slots=True)
class GeneratorRequest:
    """One completion request: the baseline to improve plus position keys.

    ``cycle`` and ``index`` address the replay file; the HTTP client
    ignores them.
    """

    baseline_source: str
    dataset: str
    params: SamplingParams = field(default_factory=SamplingParams)
    cycle: int = 0
    index: int = 0


class ReplayClient:
    """Serves recorded completions from a JSONL file keyed by (cycle, index)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._outputs: dict[tuple[int, int], str] = {}
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                key = (int(record["cycle"]), int(record["index"]))
                self._outputs[key] = record["output_text"]

    def generate(self, request: GeneratorRequest) -> str:
        key = (request.cycle, request.index)
        if key not in self._outputs:
            raise ReplayExhausted(
                f"no recorded output for cycle {key[0]}, index {key[1]} "
                f"in {self.path}"
            )
        return self._outputs[key]


class HttpClient:
    """POSTs prompts to a completion endpoint and returns the text field."""

    def __init__(self, endpoint: str, timeout_secs: float = 120.0):
        self.endpoint = endpoint
        self.timeout_secs = timeout_secs

    def build_prompt(self, request: GeneratorRequest) -> str:
        return (
            f"Improve the following {request.dataset} model by emitting "
            "<hp>, <tr> and <delta> blocks, where <delta> is a unified "
            "diff of at most 30 changed lines against the source below.\n\n"
            + request.baseline_source
        )

    def generate(self, request: GeneratorRequest) -> str:
        body = json.dumps(
            {
                "prompt": self.build_prompt(request),
                "temperature": request.params.temperature,
                "top_k": request.params.top_k,
                "top_p": request.params.top_p,
                "max_new_tokens": request.params.max_new_tokens,
            }
        ).encode("utf-8")
        http_request = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(
                http_request, timeout=self.timeout_secs
            ) as response:
                if response.status != 200:
                    raise EndpointError(
                        f"endpoint returned status {response.status}"
                    )
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise EndpointError(f"endpoint {self.endpoint} failed: {exc}") from exc
        except ValueError as exc:
            raise EndpointError(f"endpoint returned non-JSON body: {exc}") from exc
        if "text" not in payload:
            raise EndpointError("endpoint response has no 'text' field")
        return str(payload["text"])


def generate(client, request: GeneratorRequest) -> str:
    """Fetch one raw completion from whichever client is configured."""
    return client.generate(request)


def echo_worker_command() -> list[str]:
    """Command line for the built-in trivial worker (hash-based scores).

    ``-S`` skips site initialization; the worker is a standalone script
    with stdlib-only imports, so this shaves most of the spawn latency.
    """
    script = Path(__file__).with_name("echo_worker.py")
    return [sys.executable, "-S", str(script)]


@dataclass(frozen=True, slots=True)
class EvaluatorRunner:
    """How to spawn evaluator workers: command plus timeout discipline."""

    command: tuple[str, ...]
    timeout_secs: float = DEFAULT_TIMEOUT_SECS
    grace_secs: float = DEFAULT_GRACE_SECS

    def __post_init__(self):
        if self.timeout_secs <= 0:
            raise ValueError("timeout_secs must be positive")


def _failed(
    failure: FailureClass, wall: float, stderr: str
) -> EvalResult:
    return EvalResult(
        status="failed",
        accuracy=None,
        failure=failure,
        wall_seconds=wall,
        stderr=stderr[-2000:],
    )


def evaluate(runner: EvaluatorRunner, request: EvalRequest) -> EvalResult:
    """Run one candidate through a fresh worker process.

    The request is written as one JSON line on the worker's stdin; the
    worker must answer with one JSON line on stdout.  Wall time beyond the
    timeout kills the process (grace period, then hard kill) and reports
    Timeout.  Crashes and malformed output become ShapeRuntime; operating
    system trouble while talking to the process becomes ResourceError.
    """
    start = time.monotonic()
    try:
        process = subprocess.Popen(
            list(runner.command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
    except OSError as exc:
        raise SpawnFailure(
            f"cannot start evaluator {runner.command!r}: {exc}"
        ) from exc

    payload = json.dumps(request.to_json_dict()) + "\n"
    try:
        stdout, stderr = process.communicate(payload, timeout=runner.timeout_secs)
    except subprocess.TimeoutExpired:
        process.terminate()
        try:
            process.wait(timeout=runner.grace_secs)
        except subprocess.TimeoutExpired:
            process.kill()
            process.wait()
        wall = time.monotonic() - start
        return _failed(FailureClass.TIMEOUT, wall, "")
    except OSError as exc:
        process.kill()
        process.wait()
        wall = time.monotonic() - start
        return _failed(FailureClass.RESOURCE_ERROR, wall, str(exc))
    wall = time.monotonic() - start

    line = _first_nonempty_line(stdout)
    if process.returncode != 0 and line is None:
        return _failed(
            FailureClass.SHAPE_RUNTIME,
            wall,
            stderr or f"worker exited {process.returncode} with no output",
        )
    if line is None:
        return _failed(FailureClass.SHAPE_RUNTIME, wall, stderr or "empty worker output")
    try:
        data = json.loads(line)
        if not isinstance(data, dict):
            raise ValueError("result is not an object")
        result = _result_from_wire(data, wall, stderr)
    except (ValueError, KeyError) as exc:
        return _failed(
            FailureClass.SHAPE_RUNTIME, wall, f"malformed worker output: {exc}"
        )
    return result


def _first_nonempty_line(stdout: str | None) -> str | None:
    if not stdout:
        return None
    for line in stdout.splitlines():
        if line.strip():
            return line
    return None


def _result_from_wire(data: dict, wall: float, stderr: str) -> EvalResult:
    status = data.get("status")
    if status == "ok":
        accuracy = data.get("accuracy")
        if not isinstance(accuracy, (int, float)) or not 0 <= accuracy <= 1:
            raise ValueError(f"bad accuracy {accuracy!r}")
        return EvalResult(
            status="ok",
            accuracy=float(accuracy),
            failure=None,
            wall_seconds=wall,
            stderr=stderr[-2000:],
        )
    if status == "failed":
        failure = data.get("failure")
        if failure not in _VALID_FAILURES:
            raise ValueError(f"unknown failure class {failure!r}")
        return EvalResult(
            status="failed",
            accuracy=None,
            failure=FailureClass(failure),
            wall_seconds=wall,
            stderr=stderr[-2000:],
        )
    raise ValueError(f"unknown status {status!r}")
