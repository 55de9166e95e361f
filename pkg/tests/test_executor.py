import os
import time

from titan import executor
from titan.executor import execute, interpreter_available, set_process_slots


def test_ok_run_captures_stdout_and_stderr():
    outcome = execute("import sys\nprint('hi')\nsys.stderr.write('warn')\n")
    assert outcome.exit == "ok"
    assert outcome.exit_code == 0
    assert outcome.stdout == "hi\n"
    assert outcome.stderr == "warn"
    assert not outcome.truncated
    assert outcome.wall_ms >= 0


def test_nonzero_exit_is_reported():
    outcome = execute("import sys\nsys.exit(3)\n")
    assert outcome.exit == "nonzero"
    assert outcome.exit_code == 3


def test_exception_is_nonzero_with_traceback():
    outcome = execute("raise ValueError('boom')\n")
    assert outcome.exit == "nonzero"
    assert "ValueError" in outcome.stderr


def test_timeout_kills_promptly_and_clamps_wall():
    start = time.monotonic()
    outcome = execute("import time\ntime.sleep(30)\n", timeout_s=1.0)
    elapsed = time.monotonic() - start
    assert outcome.exit == "timeout"
    assert elapsed < 1.5
    assert outcome.wall_ms >= 1000


def test_timeout_kills_spawned_children():
    script = (
        "import subprocess, time\n"
        "subprocess.Popen(['python3', '-c', 'import time; time.sleep(30)'])\n"
        "time.sleep(30)\n"
    )
    start = time.monotonic()
    outcome = execute(script, timeout_s=1.0)
    assert outcome.exit == "timeout"
    assert time.monotonic() - start < 2.5


def test_spawn_error_for_missing_interpreter():
    outcome = execute("print(1)\n", interpreter="definitely-not-a-real-binary")
    assert outcome.exit == "spawn_error"
    assert outcome.stderr != ""
    assert outcome.exit_code is None


def test_output_caps_set_truncated_flag():
    outcome = execute("print('x' * 100000)\n", output_cap=1000)
    assert outcome.truncated
    assert len(outcome.stdout) == 1000


def test_environment_is_allowlisted():
    outcome = execute("import os\nprint(','.join(sorted(os.environ)))\n")
    assert outcome.exit == "ok"
    seen = set(outcome.stdout.strip().split(","))
    assert seen <= {"PATH", "LANG", "LC_ALL", "PYTHONHASHSEED", "LC_CTYPE"}
    assert "PYTHONHASHSEED" in seen


def test_hash_seed_pins_set_iteration():
    script = "print(list(set('determinism matters')))\n"
    first = execute(script)
    second = execute(script)
    assert first.exit == second.exit == "ok"
    assert first.stdout == second.stdout


def test_stdin_is_closed():
    outcome = execute("input()\n", timeout_s=5.0)
    assert outcome.exit == "nonzero"
    assert "EOFError" in outcome.stderr


def test_runs_are_isolated_and_cleaned_up(tmp_path):
    home = str(tmp_path)
    first = execute(
        "open('artifact.txt', 'w').write('x')\nprint('made')\n", workdir=home
    )
    assert first.exit == "ok"
    second = execute(
        "import os\nprint(os.path.exists('artifact.txt'))\n", workdir=home
    )
    assert second.stdout == "False\n"
    assert os.listdir(home) == []  # both run dirs removed


def test_keep_dir_retains_script_and_artifacts(tmp_path):
    outcome = execute(
        "open('artifact.txt', 'w').write('x')\n",
        workdir=str(tmp_path),
        keep_dir=True,
    )
    assert outcome.workdir is not None
    names = sorted(os.listdir(outcome.workdir))
    assert names == ["artifact.txt", executor.SCRIPT_NAME]


def test_to_json_dict_omits_workdir(tmp_path):
    outcome = execute("print(1)\n", workdir=str(tmp_path), keep_dir=True)
    blob = outcome.to_json_dict()
    assert "workdir" not in blob
    assert blob["exit"] == "ok"


def test_interpreter_available():
    assert interpreter_available("python3")
    assert not interpreter_available("definitely-not-a-real-binary")


def test_process_slots_resize_round_trip():
    set_process_slots(1)
    outcome = execute("print('still works')\n")
    assert outcome.stdout == "still works\n"
    set_process_slots(os.cpu_count() or 2)
