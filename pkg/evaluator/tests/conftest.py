import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

SRC_DIR = Path(__file__).resolve().parent.parent / "src"
sys.path.insert(0, str(SRC_DIR))


def worker_env(config_path=None):
    env = dict(os.environ)
    env["PYTHONPATH"] = str(SRC_DIR) + os.pathsep + env.get("PYTHONPATH", "")
    env.pop("ARCHEVAL_CONFIG", None)
    if config_path is not None:
        env["ARCHEVAL_CONFIG"] = str(config_path)
    return env


def run_worker(request=None, raw=None, config_path=None, timeout=30):
    """One worker invocation; pass a request dict or a raw stdin string."""
    payload = raw if raw is not None else json.dumps(request) + "\n"
    return subprocess.run(
        [sys.executable, "-m", "archeval"],
        input=payload,
        capture_output=True,
        text=True,
        env=worker_env(config_path),
        timeout=timeout,
    )


@pytest.fixture
def worker():
    return run_worker
