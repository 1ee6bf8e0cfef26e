"""Function-level coverage tracing for instrumented binaries.

Instrumented builds link the bundled trace shim: each first function entry
appends a hex address to the file named by CHAINFUZZ_TRACE_FILE.  Binaries
are non-PIE, so addresses resolve through the symbol table (nm) once per
binary.  Traces survive crashes because the shim writes straight to the fd.
"""

from __future__ import annotations

import os
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ExecFailure

TRACE_ENV = "CHAINFUZZ_TRACE_FILE"
DEFAULT_RUN_TIMEOUT = 10.0


@dataclass(frozen=True)
class CoverageTrace:
    functions_hit: frozenset[str]
    lines_hit: frozenset[tuple[str, int]] | None = None

    def hits(self, function_name: str) -> bool:
        return function_name in self.functions_hit


EMPTY_TRACE = CoverageTrace(functions_hit=frozenset())


@dataclass
class RunResult:
    returncode: int
    trace: CoverageTrace
    stdout: bytes
    stderr: bytes
    duration: float
    timed_out: bool = False

    @property
    def crashed(self) -> bool:
        return self.returncode < 0  # terminated by a signal

    @property
    def signal(self) -> int | None:
        return -self.returncode if self.returncode < 0 else None


def read_symbol_map(binary) -> dict[int, str]:
    """Address -> function name from the binary's symbol table."""
    try:
        proc = subprocess.run(["nm", str(binary)], capture_output=True, text=True, check=True)
    except (OSError, subprocess.CalledProcessError) as exc:
        raise ExecFailure(f"cannot read symbols of {binary}: {exc}") from exc
    symbols: dict[int, str] = {}
    for line in proc.stdout.splitlines():
        parts = line.split()
        if len(parts) != 3:
            continue
        addr, kind, name = parts
        if kind in ("t", "T", "w", "W"):
            try:
                symbols[int(addr, 16)] = name
            except ValueError:
                continue
    return symbols


class Tracer:
    """Runs one instrumented binary and decodes its function traces."""

    def __init__(self, binary, timeout: float = DEFAULT_RUN_TIMEOUT):
        self.binary = Path(binary)
        self.timeout = timeout
        self._symbols: dict[int, str] | None = None

    def symbols(self) -> dict[int, str]:
        if self._symbols is None:
            self._symbols = read_symbol_map(self.binary)
        return self._symbols

    def decode_trace_file(self, path) -> CoverageTrace:
        path = Path(path)
        if not path.exists():
            return EMPTY_TRACE
        names = set()
        table = self.symbols()
        for token in path.read_text().split():
            try:
                addr = int(token, 16)
            except ValueError:
                continue
            name = table.get(addr)
            if name is not None:
                names.add(name)
        return CoverageTrace(functions_hit=frozenset(names))

    def run(self, args, timeout: float | None = None, env_extra: dict | None = None) -> RunResult:
        """Execute the binary with tracing enabled and decode the trace."""
        timeout = timeout if timeout is not None else self.timeout
        if not self.binary.exists():
            raise ExecFailure(f"binary {self.binary} does not exist")
        with tempfile.TemporaryDirectory(prefix="chainfuzz-trace-") as td:
            trace_path = Path(td) / "run.trace"
            env = dict(os.environ)
            env[TRACE_ENV] = str(trace_path)
            if env_extra:
                env.update(env_extra)
            start = time.perf_counter()
            try:
                proc = subprocess.run(
                    [str(self.binary), *map(str, args)],
                    capture_output=True,
                    timeout=timeout,
                    env=env,
                )
                returncode = proc.returncode
                stdout, stderr = proc.stdout, proc.stderr
                timed_out = False
            except subprocess.TimeoutExpired as exc:
                returncode = 0
                stdout = exc.stdout or b""
                stderr = exc.stderr or b""
                timed_out = True
            except OSError as exc:
                raise ExecFailure(f"cannot launch {self.binary}: {exc}") from exc
            duration = time.perf_counter() - start
            trace = self.decode_trace_file(trace_path)
        return RunResult(
            returncode=returncode,
            trace=trace,
            stdout=stdout,
            stderr=stderr,
            duration=duration,
            timed_out=timed_out,
        )

    def run_on_input(self, data: bytes, timeout: float | None = None) -> RunResult:
        """Write input bytes to a temp file and run the binary on it."""
        with tempfile.TemporaryDirectory(prefix="chainfuzz-in-") as td:
            input_path = Path(td) / "input.bin"
            input_path.write_bytes(data)
            return self.run([input_path], timeout=timeout)


@dataclass
class PhaseTimings:
    """Wall-clock phase records for the pipeline's timing metrics."""

    records: list[tuple[str, float]] = field(default_factory=list)

    def record(self, name: str, seconds: float) -> None:
        self.records.append((name, float(seconds)))

    def total(self, names) -> float:
        wanted = set(names)
        return sum(sec for name, sec in self.records if name in wanted)

    def to_json(self) -> list[dict]:
        return [{"phase": name, "seconds": sec} for name, sec in self.records]
