"""Compiler invocation for generated C code (harnesses, mutators) and
structured parsing of compiler output.

The build command is a user-supplied token template so no project's build is
hardcoded: tokens starting with ``$`` expand to configured values, list
tokens splice.  Defaults produce a plain gcc line.
"""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .errors import BuildTimeout, CompilerNotFound
from .runtime import runtime_path

DEFAULT_COMMAND = ("$cc", "$base_flags", "$mode_flags", "$include_flags", "$sources", "$libraries", "-o", "$output")

MODE_FLAGS = {
    "instrumented": ("-finstrument-functions", "-no-pie"),
    "fast": (),
    "shared": ("-shared", "-fPIC"),
}


@dataclass(frozen=True)
class Diagnostic:
    file: str
    line: int
    message: str


@dataclass
class BuildConfig:
    """Documented schema for the [build] config section."""

    cc: str = "gcc"
    base_flags: tuple[str, ...] = ("-O1", "-g")
    include_dirs: tuple[str, ...] = ()
    libraries: tuple[str, ...] = ()  # archives, objects or extra .c sources linked after the unit
    command: tuple[str, ...] = DEFAULT_COMMAND
    timeout_s: float = 120.0


@dataclass
class CompileOutcome:
    ok: bool
    output: Path | None
    log: str
    diagnostics: list[Diagnostic]


def expand_command(config: BuildConfig, sources, output, mode: str) -> list[str]:
    if mode not in MODE_FLAGS:
        raise ValueError(f"unknown build mode {mode!r}")
    sources = [str(s) for s in sources]
    if mode == "instrumented":
        sources = sources + [runtime_path("functrace.c")]
    values = {
        "$cc": [config.cc],
        "$base_flags": list(config.base_flags),
        "$mode_flags": list(MODE_FLAGS[mode]),
        "$include_flags": [f"-I{d}" for d in config.include_dirs],
        "$sources": sources,
        "$libraries": [str(p) for p in config.libraries],
        "$output": [str(output)],
    }
    argv: list[str] = []
    for token in config.command:
        if token.startswith("$"):
            if token not in values:
                raise ValueError(f"unknown build command placeholder {token!r}")
            argv.extend(values[token])
        else:
            argv.append(token)
    return argv


_GCC_DIAG = re.compile(r"^(?P<file>[^:\s][^:]*):(?P<line>\d+)(?::\d+)?:\s*(?:fatal\s+)?error:\s*(?P<msg>.+)$")
_LINKER_DIAG = re.compile(r"undefined reference to [`'](?P<sym>[^'`’]+)'?")


def parse_compiler_output(text: str) -> list[Diagnostic]:
    """(file, line, message) triples for every error in gcc/clang output."""
    diags: list[Diagnostic] = []
    seen = set()
    for raw in text.splitlines():
        line = raw.strip()
        m = _GCC_DIAG.match(line)
        if m:
            d = Diagnostic(file=m.group("file"), line=int(m.group("line")), message=m.group("msg").strip())
            if d not in seen:
                seen.add(d)
                diags.append(d)
            continue
        m = _LINKER_DIAG.search(line)
        if m:
            d = Diagnostic(file="<link>", line=0, message=f"undefined reference to `{m.group('sym')}'")
            if d not in seen:
                seen.add(d)
                diags.append(d)
    return diags


def compile_c(config: BuildConfig, sources, output, mode: str) -> CompileOutcome:
    """One compiler run; nonzero exit yields parsed diagnostics."""
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    argv = expand_command(config, sources, output, mode)
    try:
        proc = subprocess.run(
            argv,
            capture_output=True,
            text=True,
            timeout=config.timeout_s,
        )
    except FileNotFoundError as exc:
        raise CompilerNotFound(config.cc) from exc
    except subprocess.TimeoutExpired as exc:
        raise BuildTimeout(config.timeout_s) from exc
    log = f"$ {' '.join(argv)}\n{proc.stdout}{proc.stderr}"
    if proc.returncode != 0 or not output.exists():
        diags = parse_compiler_output(proc.stdout + "\n" + proc.stderr)
        if not diags:
            diags = [Diagnostic(file="<build>", line=0, message=f"compiler exited {proc.returncode} with no parseable error")]
        return CompileOutcome(ok=False, output=None, log=log, diagnostics=diags)
    return CompileOutcome(ok=True, output=output, log=log + "build: success\n", diagnostics=[])
