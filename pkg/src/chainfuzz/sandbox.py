"""Sandboxed execution of generated seed scripts.

The script runs as an isolated subprocess in a throwaway directory: fresh
session, scrubbed environment, rlimits on CPU/memory/file size, and — when
the caller runs as root — a privilege drop to nobody so writes outside the
sandbox directory are denied by ordinary file permissions.  On non-root
hosts the drop is skipped and containment is best-effort.
"""

from __future__ import annotations

import os
import resource
import shutil
import signal
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import OutputMissing, OutputTooLarge, ScriptCrash, ScriptTimeout

SANDBOX_UID = 65534  # nobody
SANDBOX_GID = 65534

DEFAULT_TIMEOUT_S = 30.0
DEFAULT_OUTPUT_CAP = 16 * 1024 * 1024


@dataclass
class SandboxConfig:
    timeout_s: float = DEFAULT_TIMEOUT_S
    output_cap: int = DEFAULT_OUTPUT_CAP
    cpu_seconds: int = 20
    memory_bytes: int = 512 * 1024 * 1024
    drop_privileges: bool = True


def can_drop_privileges() -> bool:
    return hasattr(os, "geteuid") and os.geteuid() == 0


def _make_preexec(config: SandboxConfig, drop: bool):
    def preexec():
        os.setsid()
        resource.setrlimit(resource.RLIMIT_CPU, (config.cpu_seconds, config.cpu_seconds))
        resource.setrlimit(resource.RLIMIT_AS, (config.memory_bytes, config.memory_bytes))
        # cap + 1 so an overflowing write is truncated one byte past the cap
        # and detected by the size check instead of silently fitting it
        resource.setrlimit(resource.RLIMIT_FSIZE, (config.output_cap + 1, config.output_cap + 1))
        resource.setrlimit(resource.RLIMIT_NOFILE, (64, 64))
        os.umask(0o077)
        if drop:
            os.setgroups([])
            os.setgid(SANDBOX_GID)
            os.setuid(SANDBOX_UID)

    return preexec


def execute_seed_script(script_body: str, config: SandboxConfig | None = None) -> bytes:
    """Run a generated script and return the input bytes it produced.

    The script gets the output path as sys.argv[1] and must write the input
    there; everything it does is confined to a temp directory that is
    removed afterwards.
    """
    config = config or SandboxConfig()
    drop = config.drop_privileges and can_drop_privileges()
    root = Path(tempfile.mkdtemp(prefix="chainfuzz-sandbox-"))
    try:
        work = root / "work"
        work.mkdir()
        script_path = root / "seed_script.py"
        script_path.write_text(script_body, encoding="utf-8")
        output_path = work / "seed.bin"
        if drop:
            os.chmod(root, 0o755)
            os.chmod(script_path, 0o644)
            os.chmod(work, 0o777)

        env = {
            "PATH": "/usr/bin:/bin",
            "HOME": str(work),
            "TMPDIR": str(work),
            "LC_ALL": "C",
            "PYTHONDONTWRITEBYTECODE": "1",
        }
        proc = subprocess.Popen(
            [sys.executable, "-I", str(script_path), str(output_path)],
            cwd=str(work),
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            env=env,
            preexec_fn=_make_preexec(config, drop),
        )
        try:
            _, stderr = proc.communicate(timeout=config.timeout_s)
        except subprocess.TimeoutExpired:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except OSError:
                proc.kill()
            proc.wait()
            raise ScriptTimeout(config.timeout_s) from None

        if proc.returncode == -signal.SIGXFSZ:
            raise OutputTooLarge(config.output_cap, config.output_cap)
        if proc.returncode != 0:
            raise ScriptCrash(proc.returncode, stderr.decode("utf-8", errors="replace")[-2000:])
        if not output_path.exists() or output_path.stat().st_size == 0:
            raise OutputMissing("seed script wrote no output file")
        size = output_path.stat().st_size
        if size > config.output_cap:
            raise OutputTooLarge(size, config.output_cap)
        return output_path.read_bytes()
    finally:
        shutil.rmtree(root, ignore_errors=True)
