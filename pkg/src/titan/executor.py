"""Runs repaired scripts in an isolated guest-interpreter subprocess.

Isolation is process-level only: fresh temp working directory, minimal
environment, closed stdin, and a wall-clock timeout enforced by killing
the whole process group. It is not a security sandbox; do not feed it
scripts generated from untrusted prompts in privileged environments.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass
from typing import Optional

DEFAULT_TIMEOUT_S = 10.0
DEFAULT_OUTPUT_CAP = 64 * 1024
DEFAULT_INTERPRETER = "python3"

SCRIPT_NAME = "main.py"

# Environment variables passed through to the guest. PYTHONHASHSEED is
# pinned so set iteration inside guest scripts cannot break the
# byte-determinism of captured output across runs.
_ENV_ALLOWLIST = ("PATH", "LANG", "LC_ALL")
_ENV_EXTRA = {"PYTHONHASHSEED": "0"}

_slots = threading.BoundedSemaphore(os.cpu_count() or 2)


def set_process_slots(count: int) -> None:
    """Resize the global cap on simultaneous guest processes."""
    global _slots
    if count < 1:
        raise ValueError("process slot count must be >= 1")
    _slots = threading.BoundedSemaphore(count)


def interpreter_available(interpreter: str = DEFAULT_INTERPRETER) -> bool:
    return shutil.which(interpreter) is not None


@dataclass
class ExecutionOutcome:
    stdout: str
    stderr: str
    exit: str  # ok | nonzero | timeout | spawn_error
    exit_code: Optional[int]
    wall_ms: float
    truncated: bool
    workdir: Optional[str] = None  # set only when the caller kept the dir

    def to_json_dict(self) -> dict:
        return {
            "stdout": self.stdout,
            "stderr": self.stderr,
            "exit": self.exit,
            "exit_code": self.exit_code,
            "wall_ms": self.wall_ms,
            "truncated": self.truncated,
        }


def _guest_env() -> dict:
    env = {k: os.environ[k] for k in _ENV_ALLOWLIST if k in os.environ}
    env.update(_ENV_EXTRA)
    return env


def _cap(text: str, cap: int) -> "tuple[str, bool]":
    if len(text) <= cap:
        return text, False
    return text[:cap], True


def execute(
    script: str,
    timeout_s: float = DEFAULT_TIMEOUT_S,
    output_cap: int = DEFAULT_OUTPUT_CAP,
    interpreter: str = DEFAULT_INTERPRETER,
    workdir: Optional[str] = None,
    keep_dir: bool = False,
) -> ExecutionOutcome:
    """Run ``script`` as a child process and capture its outcome.

    The script lands in a fresh temporary directory (created under
    ``workdir`` when given) as main.py and runs with that directory as cwd.
    On timeout the whole process group receives SIGKILL. ``keep_dir``
    preserves the directory and reports its path on the outcome, for tests
    that inspect what the guest wrote.
    """
    run_dir = tempfile.mkdtemp(prefix="titan-exec-", dir=workdir)
    script_path = os.path.join(run_dir, SCRIPT_NAME)
    started = time.monotonic()
    try:
        with open(script_path, "w", encoding="utf-8") as fh:
            fh.write(script)

        with _slots:
            started = time.monotonic()
            try:
                proc = subprocess.Popen(
                    [interpreter, SCRIPT_NAME],
                    cwd=run_dir,
                    env=_guest_env(),
                    stdin=subprocess.DEVNULL,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.PIPE,
                    text=True,
                    errors="replace",
                    start_new_session=True,
                )
            except OSError as exc:
                wall_ms = (time.monotonic() - started) * 1000.0
                return ExecutionOutcome(
                    stdout="",
                    stderr=str(exc),
                    exit="spawn_error",
                    exit_code=None,
                    wall_ms=wall_ms,
                    truncated=False,
                    workdir=run_dir if keep_dir else None,
                )

            timed_out = False
            try:
                stdout, stderr = proc.communicate(timeout=timeout_s)
            except subprocess.TimeoutExpired:
                timed_out = True
                try:
                    os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
                except (ProcessLookupError, PermissionError):
                    proc.kill()
                stdout, stderr = proc.communicate()
            wall_ms = (time.monotonic() - started) * 1000.0

        stdout, out_truncated = _cap(stdout or "", output_cap)
        stderr, err_truncated = _cap(stderr or "", output_cap)

        if timed_out:
            exit_kind = "timeout"
            exit_code = None
            wall_ms = max(wall_ms, timeout_s * 1000.0)
        elif proc.returncode == 0:
            exit_kind = "ok"
            exit_code = 0
        else:
            exit_kind = "nonzero"
            exit_code = proc.returncode
        return ExecutionOutcome(
            stdout=stdout,
            stderr=stderr,
            exit=exit_kind,
            exit_code=exit_code,
            wall_ms=wall_ms,
            truncated=out_truncated or err_truncated,
            workdir=run_dir if keep_dir else None,
        )
    finally:
        if not keep_dir:
            shutil.rmtree(run_dir, ignore_errors=True)
