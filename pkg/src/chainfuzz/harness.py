"""Target-harness generation, compilation with coverage instrumentation, and
the bounded generate/compile/repair loop."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path

from .build import BuildConfig, Diagnostic, compile_c
from .callgraph import CallChain, FunctionRef, resolve_entry
from .conditions import ConditionSet, render_conditions_text
from .errors import HarnessContractViolation, RepairExhausted
from .gateway import BUILTIN_TEMPLATES, LlmGateway, render
from .ragrepair import IndexBase, extract_code_block, repair_harness

log = logging.getLogger(__name__)

DEFAULT_MAX_ROUNDS = 5
_ARGV1 = re.compile(r"\bargv\s*\[\s*1\s*\]")


@dataclass
class HarnessSpec:
    target_description: str
    chain: CallChain
    conditions: ConditionSet
    entry: FunctionRef
    template_file: str
    template_source: str
    function_sources: dict[str, str]

    def __post_init__(self):
        expected_entry, _ = resolve_entry(self.chain)
        if self.entry.name != expected_entry.name:
            raise ValueError(
                f"entry {self.entry.name!r} does not match the chain's resolved entry {expected_entry.name!r}"
            )


@dataclass
class HarnessArtifact:
    source: str
    binary: Path  # coverage-instrumented executable
    fast_binary: Path | None
    instrumentation: bool
    build_log: str
    repair_rounds_used: int

    def __post_init__(self):
        # binary exists => the build log ends in a success record
        if self.binary is not None and not self.build_log.rstrip().endswith("build: success"):
            raise ValueError("artifact with a binary must carry a successful build log")


@dataclass
class RepairLimits:
    max_rounds: int = DEFAULT_MAX_ROUNDS
    similarity: float = 0.3
    top_k: int = 5


def _chain_text(chain: CallChain) -> str:
    return " -> ".join(chain.names)


def _sources_text(function_sources: dict[str, str], chain: CallChain) -> str:
    parts = []
    for name in chain.names:
        body = function_sources.get(name)
        if body:
            parts.append(f"// function {name}\n{body.rstrip()}\n")
    return "\n".join(parts) if parts else "(no sources available)"


def harness_prompt(spec: HarnessSpec) -> str:
    return render(
        BUILTIN_TEMPLATES["harness_generation"],
        {
            "target_description": spec.target_description,
            "call_chain": _chain_text(spec.chain),
            "entry_function": spec.entry.name,
            "execution_conditions": render_conditions_text(spec.conditions),
            "function_sources": _sources_text(spec.function_sources, spec.chain),
            "template_source": spec.template_source,
        },
    )


def generate_harness(spec: HarnessSpec, gateway: LlmGateway) -> str:
    """One generation round plus a single corrective re-ask if the harness
    does not consume argv[1] as its input file."""
    prompt = harness_prompt(spec)
    response = gateway.complete(prompt)
    source = extract_code_block(response, "c") or response
    if _ARGV1.search(source):
        return source
    log.warning("generated harness ignores argv[1]; issuing one corrective re-ask")
    corrective = (
        prompt
        + "\n\nCorrection: the previous harness did not read the input file passed as argv[1]. "
        "Reply again with a complete harness whose only input is the file named by argv[1]."
    )
    response = gateway.complete(corrective)
    source = extract_code_block(response, "c") or response
    if not _ARGV1.search(source):
        raise HarnessContractViolation("harness never references argv[1] after corrective re-ask")
    return source


def compile_harness(source: str, build_config: BuildConfig, workdir) -> HarnessArtifact | list[Diagnostic]:
    """Compile the harness with coverage instrumentation (plus the fast
    campaign binary); failures come back as structured diagnostics."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    source_path = workdir / "harness.c"
    source_path.write_text(source, encoding="utf-8")

    instrumented = compile_c(build_config, [source_path], workdir / "harness.inst", mode="instrumented")
    if not instrumented.ok:
        (workdir / "build.log").write_text(instrumented.log, encoding="utf-8")
        return instrumented.diagnostics
    fast = compile_c(build_config, [source_path], workdir / "harness.fast", mode="fast")
    build_log = instrumented.log + "\n" + fast.log
    (workdir / "build.log").write_text(build_log, encoding="utf-8")
    if not fast.ok:
        return fast.diagnostics
    return HarnessArtifact(
        source=source,
        binary=instrumented.output,
        fast_binary=fast.output,
        instrumentation=True,
        build_log=build_log,
        repair_rounds_used=0,
    )


def build_harness(
    spec: HarnessSpec,
    gateway: LlmGateway,
    index: IndexBase,
    build_config: BuildConfig,
    workdir,
    limits: RepairLimits | None = None,
) -> HarnessArtifact:
    """generate -> compile -> (repair -> recompile)* with a hard round cap."""
    limits = limits or RepairLimits()
    if limits.max_rounds < 1:
        raise ValueError("limits.max_rounds must be >= 1")
    source = generate_harness(spec, gateway)
    history: list[dict] = []
    outcome = compile_harness(source, build_config, workdir)
    rounds = 0
    while not isinstance(outcome, HarnessArtifact):
        if rounds >= limits.max_rounds:
            raise RepairExhausted(history)
        rounds += 1
        history.append(
            {
                "round": rounds,
                "diagnostics": [(d.file, d.line, d.message) for d in outcome],
                "source": source,
            }
        )
        source = repair_harness(
            outcome, source, index, gateway, s=limits.similarity, k=limits.top_k
        )
        outcome = compile_harness(source, build_config, workdir)
    outcome.repair_rounds_used = rounds
    return outcome
