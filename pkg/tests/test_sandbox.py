import os

import pytest

from chainfuzz.errors import OutputMissing, OutputTooLarge, ScriptCrash, ScriptTimeout
from chainfuzz.sandbox import SandboxConfig, can_drop_privileges, execute_seed_script

WRITER = """\
import sys
with open(sys.argv[1], "wb") as fh:
    fh.write(b"P6 payload bytes")
"""


def test_script_output_returned():
    assert execute_seed_script(WRITER) == b"P6 payload bytes"


def test_script_writing_nothing_is_output_missing():
    with pytest.raises(OutputMissing):
        execute_seed_script("import sys\n")


def test_script_empty_file_is_output_missing():
    body = 'import sys\nopen(sys.argv[1], "wb").close()\n'
    with pytest.raises(OutputMissing):
        execute_seed_script(body)


def test_script_crash_surfaces_exit_and_stderr():
    with pytest.raises(ScriptCrash) as err:
        execute_seed_script("raise RuntimeError('boom')\n")
    assert err.value.exit_code != 0
    assert "boom" in err.value.stderr


def test_infinite_loop_times_out():
    with pytest.raises(ScriptTimeout):
        execute_seed_script("while True:\n    pass\n", SandboxConfig(timeout_s=1.0, cpu_seconds=30))


def test_oversized_output_rejected():
    body = 'import sys\nopen(sys.argv[1], "wb").write(b"x" * 4096)\n'
    with pytest.raises(OutputTooLarge):
        execute_seed_script(body, SandboxConfig(output_cap=1024))


def test_environment_is_scrubbed():
    body = (
        "import os, sys\n"
        "leaked = [k for k in ('CHAINFUZZ_API_KEY', 'SSH_AUTH_SOCK') if k in os.environ]\n"
        "open(sys.argv[1], 'wb').write(repr(leaked).encode())\n"
    )
    os.environ["CHAINFUZZ_API_KEY"] = "secret"
    try:
        assert execute_seed_script(body) == b"[]"
    finally:
        del os.environ["CHAINFUZZ_API_KEY"]


@pytest.mark.skipif(not can_drop_privileges(), reason="containment enforcement needs root")
def test_canary_outside_sandbox_is_not_writable(tmp_path):
    canary = tmp_path / "canary.txt"
    canary.write_text("untouched")
    os.chmod(tmp_path, 0o755)
    os.chmod(canary, 0o644)
    body = f"""\
import sys
status = "denied"
try:
    open({str(canary)!r}, "w").write("escaped")
    status = "escaped"
except PermissionError:
    status = "denied"
try:
    open({str(canary.parent / 'new_file')!r}, "w").write("escaped")
    status = "escaped"
except PermissionError:
    pass
open(sys.argv[1], "wb").write(status.encode())
"""
    out = execute_seed_script(body)
    assert out == b"denied"
    assert canary.read_text() == "untouched"
    assert not (tmp_path / "new_file").exists()


@pytest.mark.skipif(not can_drop_privileges(), reason="privilege drop needs root")
def test_script_runs_as_nobody():
    body = "import os, sys\nopen(sys.argv[1], 'wb').write(str(os.getuid()).encode())\n"
    assert execute_seed_script(body) == b"65534"
