"""Target-specific custom mutator: three-step generation (root cause ->
strategy -> code), shared-object compilation with bounded repair, and a
supervised validation run."""

from __future__ import annotations

import json
import logging
import random
import re
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

from . import templates as T
from .build import BuildConfig, Diagnostic, compile_c
from .errors import EngineLoadFailure, MissingEntryPoint, MutatorRepairExhausted
from .gateway import BUILTIN_TEMPLATES, LlmGateway, render
from .mutbridge import REQUIRED_ENTRY_POINTS, exported_symbols
from .ragrepair import extract_code_block
from .runtime import runtime_path

log = logging.getLogger(__name__)

DEFAULT_REPAIR_ROUNDS = 3
DEFAULT_SAMPLE_DURATION = 1.0
BASELINE_WARN_RATIO = 0.25


@dataclass
class MutatorSpec:
    target_description: str
    target_source: str
    seed_script: str  # body of the script that produced the reachable seed
    api_docs: str
    examples: str

    def __post_init__(self):
        if not self.api_docs:
            raise ValueError("api_docs must be non-empty")


@dataclass
class ValidationReport:
    sample_duration: float
    executions: int
    execs_per_sec: float
    engine_stable: bool
    mutated_outputs_nonempty: bool
    baseline_execs_per_sec: float | None = None
    notes: str = ""

    def __post_init__(self):
        if self.sample_duration > 0:
            expected = self.executions / self.sample_duration
            if abs(expected - self.execs_per_sec) > max(1e-6, expected * 1e-6):
                raise ValueError("execs_per_sec must equal executions / sample_duration")


@dataclass
class MutatorArtifact:
    analysis: str
    strategy: str
    source: str
    binary: Path | None
    validation: ValidationReport | None

    def __post_init__(self):
        if self.binary is not None and self.validation is None:
            raise ValueError("a built mutator must carry its validation report")


def default_api_docs() -> str:
    return Path(runtime_path("mutator_api.md")).read_text(encoding="utf-8")


def _step_prompt(spec: MutatorSpec, step: str, instructions: str, prior_sections: str) -> str:
    return render(
        BUILTIN_TEMPLATES["mutator_generation"],
        {
            "step": step,
            "step_instructions": instructions,
            "target_description": spec.target_description,
            "target_source": spec.target_source,
            "seed_script": spec.seed_script,
            "api_docs": spec.api_docs,
            "examples": spec.examples,
            "prior_sections": prior_sections,
        },
    )


def missing_entry_points(source: str) -> list[str]:
    return [name for name in REQUIRED_ENTRY_POINTS if not re.search(rf"\b{name}\s*\(", source)]


def generate_mutator(spec: MutatorSpec, gateway: LlmGateway, max_reasks: int = 1) -> tuple[str, str, str]:
    """Three sequential exchanges: analysis, strategy, code; each later step
    sees the earlier outputs.  The code step must define every required
    entry point (one corrective re-ask, then MissingEntryPoint)."""
    analysis = gateway.complete(_step_prompt(spec, "analysis", T.MUTATOR_STEP_ANALYSIS, ""))
    strategy = gateway.complete(
        _step_prompt(spec, "strategy", T.MUTATOR_STEP_STRATEGY, f"Root-cause analysis:\n{analysis}\n")
    )
    prior = f"Root-cause analysis:\n{analysis}\n\nMutation strategy:\n{strategy}\n"
    code_prompt = _step_prompt(spec, "code", T.MUTATOR_STEP_CODE, prior)
    response = gateway.complete(code_prompt)
    source = extract_code_block(response, "c") or response
    missing = missing_entry_points(source)
    reasks = 0
    while missing and reasks < max_reasks:
        reasks += 1
        log.warning("mutator code lacks %s; corrective re-ask %d", missing, reasks)
        corrective = (
            code_prompt
            + f"\n\nCorrection {reasks}: the previous code did not define {', '.join(missing)}. "
            "Reply with complete code defining afl_custom_init, afl_custom_fuzz, and afl_custom_deinit."
        )
        response = gateway.complete(corrective)
        source = extract_code_block(response, "c") or response
        missing = missing_entry_points(source)
    if missing:
        raise MissingEntryPoint(missing[0])
    return analysis, strategy, source


def compile_mutator(source: str, build_config: BuildConfig, workdir) -> Path | list[Diagnostic]:
    """Build a loadable shared object; verify it exports the entry points."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    src_path = workdir / "mutator.c"
    src_path.write_text(source, encoding="utf-8")
    outcome = compile_c(build_config, [src_path], workdir / "mutator.so", mode="shared")
    (workdir / "mutator_build.log").write_text(outcome.log, encoding="utf-8")
    if not outcome.ok:
        return outcome.diagnostics
    exported = exported_symbols(outcome.output)
    missing = [s for s in REQUIRED_ENTRY_POINTS if s not in exported]
    if missing:
        return [Diagnostic(file=str(src_path.name), line=0, message=f"shared object does not export {missing[0]}")]
    return outcome.output


def build_mutator(
    spec: MutatorSpec,
    gateway: LlmGateway,
    build_config: BuildConfig,
    workdir,
    max_rounds: int = DEFAULT_REPAIR_ROUNDS,
) -> tuple[str, str, str, Path]:
    """generate -> compile, with bounded API-doc-grounded repair re-asks."""
    analysis, strategy, source = generate_mutator(spec, gateway)
    outcome = compile_mutator(source, build_config, workdir)
    history = []
    rounds = 0
    while not isinstance(outcome, Path):
        if rounds >= max_rounds:
            raise MutatorRepairExhausted(history)
        rounds += 1
        history.append({"round": rounds, "diagnostics": [(d.file, d.line, d.message) for d in outcome]})
        diag_text = "\n".join(f"{d.file}:{d.line}: {d.message}" for d in outcome)
        repair_instructions = (
            "The mutator below fails to build. Compiler diagnostics:\n"
            f"{diag_text}\n\n"
            "Previous code:\n```c\n"
            f"{source}\n"
            "```\n"
            "Consult the interface documentation above and reply with the "
            "complete fixed code in one fenced C block."
        )
        prior = f"Root-cause analysis:\n{analysis}\n\nMutation strategy:\n{strategy}\n"
        response = gateway.complete(_step_prompt(spec, f"code-repair-{rounds}", repair_instructions, prior))
        source = extract_code_block(response, "c") or response
        outcome = compile_mutator(source, build_config, workdir)
    return analysis, strategy, source, outcome


def _havoc_baseline_rate(seed: bytes, duration_s: float) -> float:
    """No-mutator reference: builtin havoc throughput over the same sample."""
    from .engine import havoc_mutate

    rng = random.Random(PROBE_BASELINE_SEED)
    count = 0
    start = time.perf_counter()
    while time.perf_counter() - start < duration_s:
        havoc_mutate(rng, seed, seed, 1 << 20)
        count += 1
    elapsed = time.perf_counter() - start
    return count / elapsed if elapsed > 0 else 0.0


PROBE_BASELINE_SEED = 0xBA5E


def validate_mutator(binary, harness, seed: bytes, sample_duration: float = DEFAULT_SAMPLE_DURATION) -> ValidationReport:
    """Short supervised sample run of the mutator in offline mode (mutations
    only, no target executions).  A probe crash means engine_stable=False."""
    if sample_duration <= 0:
        raise ValueError("sample_duration must be > 0")
    with tempfile.TemporaryDirectory(prefix="chainfuzz-validate-") as td:
        seed_file = Path(td) / "seed.bin"
        seed_file.write_bytes(seed)
        proc = subprocess.run(
            [sys.executable, "-m", "chainfuzz.mutator_probe", str(binary), str(seed_file), str(sample_duration)],
            capture_output=True,
            text=True,
            timeout=max(sample_duration * 20, 30),
        )
    if proc.returncode == 3:
        detail = ""
        try:
            detail = json.loads(proc.stdout.strip().splitlines()[-1]).get("load_error", "")
        except (ValueError, IndexError):
            pass
        raise EngineLoadFailure(detail or f"mutator {binary} failed to load")
    if proc.returncode != 0:
        # mutator killed the probe: unstable, nothing measured
        return ValidationReport(
            sample_duration=sample_duration,
            executions=0,
            execs_per_sec=0.0,
            engine_stable=False,
            mutated_outputs_nonempty=False,
            notes=f"probe terminated (exit {proc.returncode})",
        )
    row = json.loads(proc.stdout.strip().splitlines()[-1])
    elapsed = max(float(row["elapsed_s"]), 1e-9)
    execs = int(row["executions"])
    rate = execs / elapsed
    baseline = _havoc_baseline_rate(seed, sample_duration)
    notes = ""
    if baseline > 0 and rate < BASELINE_WARN_RATIO * baseline:
        notes = f"mutator rate {rate:.0f}/s is below {BASELINE_WARN_RATIO:.0%} of the havoc baseline {baseline:.0f}/s"
        log.warning("%s", notes)
    return ValidationReport(
        sample_duration=elapsed,
        executions=execs,
        execs_per_sec=rate,
        engine_stable=int(row["oversized"]) == 0,
        mutated_outputs_nonempty=bool(row["nonempty"]) and bool(row["differing"]),
        baseline_execs_per_sec=baseline,
        notes=notes,
    )


def persist_mutator(artifact: MutatorArtifact, mutator_dir) -> None:
    mutator_dir = Path(mutator_dir)
    mutator_dir.mkdir(parents=True, exist_ok=True)
    (mutator_dir / "analysis.md").write_text(artifact.analysis, encoding="utf-8")
    (mutator_dir / "strategy.md").write_text(artifact.strategy, encoding="utf-8")
    (mutator_dir / "mutator.c").write_text(artifact.source, encoding="utf-8")
    if artifact.validation is not None:
        (mutator_dir / "validation.json").write_text(
            json.dumps(
                {
                    "sample_duration": artifact.validation.sample_duration,
                    "executions": artifact.validation.executions,
                    "execs_per_sec": artifact.validation.execs_per_sec,
                    "engine_stable": artifact.validation.engine_stable,
                    "mutated_outputs_nonempty": artifact.validation.mutated_outputs_nonempty,
                    "baseline_execs_per_sec": artifact.validation.baseline_execs_per_sec,
                    "notes": artifact.validation.notes,
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
